//! Spectrum of the linearized operator at the circle and at the 3-fold
//! shrinker.

use alpha_csf::shrinker::{self, ProfileKind};
use alpha_csf::spectral;
use alpha_csf::{AngularGrid, SupportFunction};

fn main() -> alpha_csf::Result<()> {
    let grid = AngularGrid::new(256)?;
    let circle = SupportFunction::circle(&grid, 1.0);
    for alpha in [0.5, 0.125] {
        let d = spectral::decompose(&circle, alpha, Some(8))?;
        let exact = spectral::circle_eigenvalues(alpha, 8);
        println!("circle alpha = {alpha}: morse {} kernel {}", d.morse_index, d.kernel_dim);
        for (m, e) in d.eigenvalues.iter().zip(&exact) {
            println!("  {m:+.12}  {e:+.12}");
        }
    }

    let alpha = 1.0 / 24.0;
    let p = shrinker::assemble_profile(alpha, ProfileKind::KFold(3), 768)?;
    let d = spectral::decompose(&p.h, alpha, Some(10))?;
    println!("k3 alpha = 1/24: morse {} kernel {}", d.morse_index, d.kernel_dim);
    for e in &d.eigenvalues {
        println!("  {e:+.10}");
    }

    // the kernel is spanned by the rotation h_theta
    let ip = d.inner_product();
    let ht = p.h.derivative();
    let scale = ip.norm(&ht)?;
    let phi = &d.eigenfunctions[d.kernel()[0]];
    let sign = ip.inner(phi, &ht)?.signum();
    let diff: Vec<f64> = phi.iter().zip(&ht).map(|(a, b)| a - sign * b / scale).collect();
    println!("kernel vs h_theta: {:.2e}", ip.norm(&diff)?);
    Ok(())
}
