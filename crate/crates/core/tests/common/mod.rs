#![allow(dead_code)]

use alpha_csf::{AngularGrid, SupportFunction};
use rand::Rng;

/// Random strictly convex body: a perturbed circle with modes 2..=8 (radius
/// of curvature kept above `0.1 c0`), a random shift and scale; every fourth
/// draw is a shifted ellipse of aspect up to 6 instead.
pub fn random_body<R: Rng>(rng: &mut R, grid: &AngularGrid) -> SupportFunction {
    let scale = rng.gen_range(0.5..3.0);
    let shift = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let body = if rng.gen_bool(0.25) {
        let a = rng.gen_range(1.0..6.0);
        let phase = rng.gen_range(0.0..std::f64::consts::PI);
        SupportFunction::from_fn(grid, |t| {
            let t = t - phase;
            (a * a * t.cos().powi(2) + t.sin().powi(2)).sqrt()
        })
        .unwrap()
    } else {
        let mut coeffs = Vec::new();
        let mut budget = rng.gen_range(0.0..0.9);
        for m in 2..=8usize {
            let k = (m * m - 1) as f64;
            let a = rng.gen_range(-1.0..1.0) * budget / k;
            let b = rng.gen_range(-1.0..1.0) * (budget - a.abs() * k) / k;
            budget -= (a.abs() + b.abs()) * k;
            coeffs.push((m as f64, a, b));
        }
        SupportFunction::from_fn(grid, |t| {
            1.0 + coeffs
                .iter()
                .map(|(m, a, b)| a * (m * t).cos() + b * (m * t).sin())
                .sum::<f64>()
        })
        .unwrap()
    };
    body.scaled(scale).translate(shift)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
