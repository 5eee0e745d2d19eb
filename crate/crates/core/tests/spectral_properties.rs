use alpha_csf::shrinker::{self, ProfileKind};
use alpha_csf::spectral;
use alpha_csf::{AngularGrid, SupportFunction};
use proptest::prelude::*;

fn smooth(grid: &AngularGrid, c: &[f64]) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|t| c.iter().enumerate().map(|(m, a)| a * ((m + 1) as f64 * t + a).cos()).sum())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn l_is_symmetric_in_weighted_product(
        c1 in prop::collection::vec(-1.0..1.0f64, 6),
        c2 in prop::collection::vec(-1.0..1.0f64, 6),
        alpha in 0.05..0.9f64,
    ) {
        let grid = AngularGrid::new(64).unwrap();
        let h = SupportFunction::from_fn(&grid, |t| 1.0 + 0.05 * (2.0 * t).cos()).unwrap();
        let (v, w) = (smooth(&grid, &c1), smooth(&grid, &c2));
        let ip = spectral::WeightedInnerProduct::new(&h, alpha).unwrap();
        let a = ip.inner(&spectral::apply_l(&h, alpha, &v).unwrap(), &w).unwrap();
        let b = ip.inner(&v, &spectral::apply_l(&h, alpha, &w).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn eigenfunctions_are_orthonormal_with_small_residual() {
    let alpha = 1.0 / 24.0;
    let p = shrinker::assemble_profile(alpha, ProfileKind::KFold(4), 512).unwrap();
    let d = spectral::decompose(&p.h, alpha, Some(12)).unwrap();
    let ip = d.inner_product();
    for (i, a) in d.eigenfunctions.iter().enumerate() {
        for (j, b) in d.eigenfunctions.iter().enumerate() {
            let g = ip.inner(a, b).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-10, "({i}, {j}) -> {g}");
        }
    }
    assert!(d.max_residual < 1e-8);
}

#[test]
fn circle_matches_closed_form() {
    let grid = AngularGrid::new(128).unwrap();
    let h = SupportFunction::circle(&grid, 1.0);
    for alpha in [0.05, 0.125, 0.3, 0.7] {
        let d = spectral::decompose(&h, alpha, Some(15)).unwrap();
        for (a, b) in d.eigenvalues.iter().zip(spectral::circle_eigenvalues(alpha, 15)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
