//! Measured growth rates of small perturbations of the circle against the
//! eigenvalues of the linearized operator.

use alpha_csf::spectral;
use alpha_csf::{AngularGrid, SupportFunction};

fn main() -> alpha_csf::Result<()> {
    let grid = AngularGrid::new(64)?;
    let circle = SupportFunction::circle(&grid, 1.0);
    for (alpha, m) in [(0.125, 2usize), (0.5, 3), (0.2, 2)] {
        let dir: Vec<f64> = grid.nodes().iter().map(|t| (m as f64 * t).cos()).collect();
        let g = spectral::measure_growth_rate_along(&circle, alpha, &dir, 1e-6, (0.5, 2.0))?;
        let expected = -(alpha * ((m * m) as f64 - 1.0) - 1.0);
        println!("alpha {alpha:<6} cos {m}theta: rate {:+.8}  expected {expected:+.8}", g.rate);
    }
    Ok(())
}
