//! Unnormalized flow of a perturbed circle until it nearly vanishes; fit
//! the area decay exponent and classify the singularity.

use alpha_csf::flow::{self, FlowConfig, FlowMode};
use alpha_csf::{AngularGrid, SupportFunction};

fn main() -> alpha_csf::Result<()> {
    let alpha = 0.5;
    let grid = AngularGrid::new(128)?;
    let u0 = SupportFunction::from_fn(&grid, |t| 1.0 + 0.2 * (2.0 * t).cos())?;
    let mut cfg = FlowConfig::new(alpha, FlowMode::Unnormalized, u0, 10.0);
    cfg.stop_min_radius = 1e-3;
    let trace = flow::run(&cfg)?;
    println!("terminal: {}  rows: {}", trace.terminal_reason, trace.rows.len());

    let fit = flow::area_law_fit(&trace)?;
    println!("exponent = {:.6}  expected = {:.6}", fit.exponent, 2.0 / (1.0 + alpha));
    println!("extinction time = {:.8}", fit.t_ext);
    println!("verdict = {:?}", flow::type_diagnostic(&trace).verdict);
    Ok(())
}
