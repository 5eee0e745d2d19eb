//! Third-order coefficient of the neutral mode at alpha = 1/(k^2 - 1):
//! exact value against a normalized flow started on the slow manifold.

use alpha_csf::flow::{self, FlowConfig};
use alpha_csf::modes;
use alpha_csf::{AngularGrid, SupportFunction};

fn main() -> alpha_csf::Result<()> {
    let k = 3;
    let alpha = modes::critical_alpha(k);
    let exact = modes::cstar(k)?;
    println!("C*({k}) = {exact}");

    let grid = AngularGrid::new(64)?;
    let circle = SupportFunction::circle(&grid, 1.0);
    for eps in [1e-3, 5e-4, 2.5e-4] {
        let v0 = modes::slow_manifold_perturbation(&grid, k, eps, 0.3, false)?;
        let mut cfg = FlowConfig::perturbation(alpha, circle.clone(), v0, 8.0);
        cfg.sample_interval = Some(0.01);
        cfg.snapshot_every = 1;
        let trace = flow::run(&cfg)?;
        let mt = modes::track_modes(&trace, k, 2 * k)?;
        let c = modes::measure_cstar(&mt, (5.0, 8.0))?;
        let qs = modes::quasi_steady(&mt, 5.0 / modes::circle_lambda(alpha, 2 * k))?;
        println!(
            "eps {eps:.1e}: C* = {:+.5}  rel err {:.2e}  A0 off {:.3}  Q off {:.3}",
            c.value,
            (c.value - exact).abs() / exact.abs(),
            qs.a0_relative,
            qs.q_relative
        );
    }
    Ok(())
}
