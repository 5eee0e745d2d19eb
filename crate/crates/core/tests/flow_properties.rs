mod common;

use std::f64::consts::PI;

use alpha_csf::flow::{self, FlowConfig, FlowMode, TerminalReason};
use alpha_csf::shrinker::{self, ProfileKind};
use alpha_csf::{AngularGrid, SupportFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn body(seed: u64) -> SupportFunction {
    let grid = AngularGrid::new(64).unwrap();
    common::random_body(&mut ChaCha8Rng::seed_from_u64(seed), &grid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn area_rate_matches_formula(seed in any::<u64>(), alpha in 0.05..1.0f64) {
        let u = body(seed);
        prop_assert!(flow::area_derivative_check(&u, alpha).unwrap() < 1e-6);
    }

    #[test]
    fn rhs_commutes_with_rotation(seed in any::<u64>(), shift in 0usize..64, alpha in 0.05..1.0f64) {
        let u = body(seed);
        // roundoff of spectral w, amplified by (n/2)^2 and by d(w^-alpha)/dw
        let u_max = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let w_min = u.radius_of_curvature().iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 16.0 * f64::EPSILON * 32.0f64.powi(2) * u_max * alpha * w_min.powf(-1.0 - alpha);
        for mode in [FlowMode::Unnormalized, FlowMode::NormalizedTau, FlowMode::NormalizedArea] {
            let a = flow::rhs(mode, &u.rotated_by_nodes(shift), alpha).unwrap();
            let b = SupportFunction::new(u.grid().clone(), flow::rhs(mode, &u, alpha).unwrap())
                .unwrap()
                .rotated_by_nodes(shift);
            for (x, y) in a.iter().zip(b.values()) {
                prop_assert!((x - y).abs() < tol.max(1e-14 * x.abs()));
            }
        }
    }

    #[test]
    fn unnormalized_flow_shrinks_area(seed in any::<u64>()) {
        let u = body(seed);
        let mut cfg = FlowConfig::new(0.5, FlowMode::Unnormalized, u, 0.05);
        cfg.sample_every = 10;
        let trace = flow::run(&cfg).unwrap();
        prop_assert!(trace.rows.windows(2).all(|w| w[1].area < w[0].area));
    }
}

#[test]
fn unit_circle_is_stationary_under_normalized_flows() {
    let grid = AngularGrid::new(64).unwrap();
    for mode in [FlowMode::NormalizedTau, FlowMode::NormalizedArea] {
        let mut cfg = FlowConfig::new(0.3, mode, SupportFunction::circle(&grid, 1.0), 2.0);
        cfg.snapshot_every = 1;
        let trace = flow::run(&cfg).unwrap();
        assert_eq!(trace.terminal_reason, TerminalReason::ReachedEnd);
        let last = trace.final_support().unwrap();
        for v in last.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn area_mode_keeps_area_at_pi() {
    let grid = AngularGrid::new(64).unwrap();
    let raw = SupportFunction::from_fn(&grid, |t| 1.0 + 0.1 * (2.0 * t).cos() + 0.05 * (3.0 * t).sin()).unwrap();
    let u0 = raw.scaled((PI / raw.area().unwrap()).sqrt());
    let mut cfg = FlowConfig::new(0.5, FlowMode::NormalizedArea, u0, 1.0);
    cfg.rtol = 1e-10;
    let trace = flow::run(&cfg).unwrap();
    for row in &trace.rows {
        assert!((row.area - PI).abs() < 1e-6, "area {} at {}", row.area, row.time);
    }
}

#[test]
fn time_renormalization_round_trip() {
    for alpha in [0.1, 0.5, 1.0] {
        for t in [-10.0, -1.0, -1e-3] {
            let tau = flow::renormalize_time(t, alpha).unwrap();
            assert!(common::rel(flow::unrenormalize_time(tau, alpha), t) < 1e-13);
        }
    }
    assert!(flow::renormalize_time(0.0, 0.5).is_err());
}

#[test]
fn shrinker_is_stationary_under_normalized_flow() {
    let alpha = 0.1;
    let p = shrinker::assemble_profile(alpha, ProfileKind::KFold(3), 192).unwrap();
    let mut cfg = FlowConfig::new(alpha, FlowMode::NormalizedTau, p.h.clone(), 5.0);
    cfg.rtol = 1e-11;
    cfg.sample_interval = Some(0.5);
    cfg.snapshot_every = 1;
    let trace = flow::run(&cfg).unwrap();
    assert_eq!(trace.terminal_reason, TerminalReason::ReachedEnd);
    for row in &trace.rows {
        let drift = row
            .snapshot
            .as_ref()
            .unwrap()
            .iter()
            .zip(p.h.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(drift < 1e-5, "drift {drift:.2e} at tau = {}", row.time);
    }
}
