//! Build the 3-fold shrinker at alpha = 1/24 and print its shape data.

use alpha_csf::shrinker::{self, ProfileKind};

fn main() -> alpha_csf::Result<()> {
    let alpha = 1.0 / 24.0;
    let seg = shrinker::segment_for_k(alpha, 3)?;
    println!("r = {:.8}  u_max = {:.8}  u_min = {:.8}", seg.r, seg.u_max, seg.u_min);
    println!("half period = {:.12} (pi/3 = {:.12})", seg.theta_span, std::f64::consts::FRAC_PI_3);
    println!("first integral drift = {:.2e}", seg.first_integral_drift());

    let profile = shrinker::assemble_profile(alpha, ProfileKind::KFold(3), 768)?;
    println!("entropy = {:.8}", profile.entropy);
    println!("profile residual = {:.2e}", profile.residual);

    let eta = shrinker::variation_eta(&seg)?;
    println!("eta boundary residual = {:.2e}", shrinker::eta_boundary_residual(&seg, &eta));

    for (t, u, _) in seg.samples(7) {
        println!("{t:.4}  {u:.8}");
    }
    Ok(())
}
