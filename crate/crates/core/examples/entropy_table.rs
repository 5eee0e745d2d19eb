//! Entropy of the circle against every admissible k-fold shrinker.

use alpha_csf::shrinker;

fn main() -> alpha_csf::Result<()> {
    for alpha in [1.0 / 30.0, 1.0 / 50.0] {
        println!("alpha = {alpha:.6}  k0 = {:?}", shrinker::max_admissible_k(alpha));
        for (kind, e) in shrinker::entropy_ordering(alpha)? {
            println!("  {kind:>6}  {e:+.10}");
        }
    }
    Ok(())
}
