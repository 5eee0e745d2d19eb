//! Self-similar shrinkers: the profile ODE `U'' + U = U^{-1/alpha}`, its
//! period function, the k-fold symmetric profiles and their entropies.
//!
//! The ODE is integrated in the deviation `y = U - 1`, with the forcing
//! written as `expm1(-ln1p(y)/alpha) - y`, so that arcs arbitrarily close to
//! the circle (`U == 1`) keep full relative precision. One arc runs from a
//! maximum `U(0) = u_max` (where `U' = 0`) to the next minimum `U(Theta)`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AngularGrid, SupportFunction};
use crate::ode::{Dopri5, Trajectory};
use crate::roots::brent;

/// Relative tolerance of the shooting integrator.
pub const SHOOTING_RTOL: f64 = 1e-12;
/// Bound on the profile equation residual of an assembled profile.
pub const PROFILE_RESIDUAL_TOL: f64 = 1e-7;

const EVENT_LIMIT: f64 = 10.0 * PI;
const MAX_DEVIATION: f64 = 1e8;

/// Either the round circle or Andrews' k-fold symmetric curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileKind {
    Circle,
    KFold(usize),
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Circle => write!(f, "circle"),
            ProfileKind::KFold(k) => write!(f, "k{k}"),
        }
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "circle" {
            return Ok(ProfileKind::Circle);
        }
        let digits = s.strip_prefix('k').unwrap_or(s);
        digits
            .parse::<usize>()
            .map(ProfileKind::KFold)
            .map_err(|_| Error::Parse(format!("expected 'circle', 'k<int>' or an integer, got '{s}'")))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if (alpha - 1.0 / 3.0).abs() < 1e-12 {
        return Err(Error::OutOfRange(
            "alpha = 1/3 is excluded (the shrinkers form the ellipse family)".into(),
        ));
    }
    Ok(())
}

/// Whether `k < sqrt(1 + 1/alpha)`, with a small guard so that the boundary
/// case `alpha = 1/(k^2 - 1)` counts as excluded despite rounding.
pub fn k_admissible(alpha: f64, k: usize) -> bool {
    k >= 3 && ((k * k - 1) as f64) * alpha < 1.0 - 1e-12
}

/// Largest admissible `k`, i.e. `ceil(sqrt(1 + 1/alpha)) - 1`, or `None`
/// when no k-fold shrinker exists.
pub fn max_admissible_k(alpha: f64) -> Option<usize> {
    let mut k = 2;
    while k_admissible(alpha, k + 1) {
        k += 1;
    }
    (k >= 3).then_some(k)
}

/// Limit of the period function as `r -> 1+`: `pi sqrt(alpha / (1 + alpha))`.
pub fn period_limit(alpha: f64) -> f64 {
    PI * (alpha / (1.0 + alpha)).sqrt()
}

/// One monotone arc of the profile ODE from a maximum to the next minimum.
#[derive(Clone, Debug)]
pub struct ShrinkerSegment {
    pub alpha: f64,
    /// `u_max / u_min`.
    pub r: f64,
    pub theta_span: f64,
    pub u_max: f64,
    pub u_min: f64,
    /// `U_t^2 + U^2 + 2 alpha/(1 - alpha) U^{1 - 1/alpha}` at `theta = 0`.
    pub first_integral: f64,
    /// `(1/Theta) \int_0^Theta U^{1 - 1/alpha}`.
    pub mean_power: f64,
    trajectory: Trajectory<3>,
}

fn profile_rhs(alpha: f64) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    let inv = 1.0 / alpha;
    move |_t, s| {
        let y = s[0];
        let l = y.ln_1p();
        [s[1], (-l * inv).exp_m1() - y, ((1.0 - inv) * l).exp()]
    }
}

pub fn first_integral(alpha: f64, u: f64, ut: f64) -> f64 {
    ut * ut + u * u + 2.0 * alpha / (1.0 - alpha) * u.powf(1.0 - 1.0 / alpha)
}

impl ShrinkerSegment {
    /// `(U, U_theta)` at `theta` in `[0, Theta]`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let s = self.trajectory.eval(theta);
        (1.0 + s[0], s[1])
    }

    /// `U_tt = U^{-1/alpha} - U`.
    pub fn second_derivative(&self, theta: f64) -> f64 {
        let y = self.trajectory.eval(theta)[0];
        (-y.ln_1p() / self.alpha).exp_m1() - y
    }

    /// `U(theta) - 1`, exact to the integrator's relative accuracy even for
    /// near-circular arcs.
    pub fn deviation(&self, theta: f64) -> f64 {
        self.trajectory.eval(theta)[0]
    }

    /// Uniform dense samples `(theta, U, U_theta)`.
    pub fn samples(&self, count: usize) -> Vec<(f64, f64, f64)> {
        let count = count.max(2);
        (0..count)
            .map(|i| {
                let t = self.theta_span * i as f64 / (count - 1) as f64;
                let (u, ut) = self.eval(t);
                (t, u, ut)
            })
            .collect()
    }

    /// Largest relative deviation of the first integral over the integrator
    /// nodes and a fine uniform sampling of the dense output.
    pub fn first_integral_drift(&self) -> f64 {
        let c = self.first_integral;
        let mut worst: f64 = 0.0;
        let mut check = |s: [f64; 3]| {
            let ci = first_integral(self.alpha, 1.0 + s[0], s[1]);
            worst = worst.max(((ci - c) / c).abs());
        };
        for (_, s) in self.trajectory.nodes() {
            check(s);
        }
        for i in 0..=512 {
            check(self.trajectory.eval(self.theta_span * i as f64 / 512.0));
        }
        worst
    }

    /// Number of accepted integrator steps.
    pub fn step_count(&self) -> usize {
        self.trajectory.steps.len()
    }
}

/// Integrate the profile ODE from `(u_max, 0)` to the first minimum.
pub fn solve_segment(alpha: f64, u_max: f64) -> Result<ShrinkerSegment> {
    check_alpha(alpha)?;
    if !(u_max > 1.0) || !u_max.is_finite() {
        return Err(Error::OutOfRange(format!("u_max = {u_max} must exceed 1")));
    }
    solve_deviation(alpha, u_max - 1.0)
}

fn solve_deviation(alpha: f64, d: f64) -> Result<ShrinkerSegment> {
    if !(d > 0.0) {
        return Err(Error::OutOfRange(format!("deviation {d} must be positive")));
    }
    let solver = Dopri5 {
        rtol: SHOOTING_RTOL,
        atol: 1e-3 * SHOOTING_RTOL * d.min(1.0),
        h_init: 1e-3,
        h_max: 0.05,
        max_steps: 2_000_000,
    };
    let (trajectory, event) =
        solver.integrate_until(profile_rhs(alpha), 0.0, [d, 0.0, 0.0], EVENT_LIMIT, |_t, s| s[1])?;
    let event = event.ok_or(Error::EventNotFound { limit: EVENT_LIMIT })?;
    let y_min = event.y[0];
    let u_max = 1.0 + d;
    let u_min = 1.0 + y_min;
    Ok(ShrinkerSegment {
        alpha,
        r: (d.ln_1p() - y_min.ln_1p()).exp(),
        theta_span: event.t,
        u_max,
        u_min,
        first_integral: first_integral(alpha, u_max, 0.0),
        mean_power: event.y[2] / event.t,
        trajectory,
    })
}

fn ln_ratio(seg: &ShrinkerSegment) -> f64 {
    (seg.u_max - 1.0).ln_1p() - (seg.u_min - 1.0).ln_1p()
}

/// Solve for the arc with `U(0) / U(Theta) = r`.
pub fn segment_for_ratio(alpha: f64, r: f64) -> Result<ShrinkerSegment> {
    check_alpha(alpha)?;
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::OutOfRange(format!("ratio r = {r} must exceed 1")));
    }
    let target = (r - 1.0).ln_1p();
    // shoot in s = ln(u_max - 1); the ratio increases with u_max
    let eval = |s: f64| solve_deviation(alpha, s.exp()).map(|seg| ln_ratio(&seg));
    let guess = (0.5 * (r - 1.0)).min(1.0).ln();
    let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
    let mut f_lo = eval(lo)? - target;
    while f_lo > 0.0 {
        lo -= 2.0;
        f_lo = eval(lo)? - target;
    }
    let mut f_hi = eval(hi)? - target;
    while f_hi < 0.0 {
        if hi.exp() > MAX_DEVIATION {
            let attained = eval(hi)?.exp();
            return Err(Error::NoBracket {
                target: r,
                lo: 1.0,
                hi: attained,
            });
        }
        hi += 1.0;
        f_hi = eval(hi)? - target;
    }
    let mut failure = None;
    let s = brent(
        |s| match eval(s) {
            Ok(v) => v - target,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        lo,
        hi,
        1e-15,
        200,
    )
    .ok_or(Error::NoBracket {
        target: r,
        lo: (f_lo + target).exp(),
        hi: (f_hi + target).exp(),
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    solve_deviation(alpha, s.exp())
}

/// The period function `Theta(alpha, r)`, with the analytic limit at `r = 1`.
pub fn period(alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if r == 1.0 {
        return Ok(period_limit(alpha));
    }
    Ok(segment_for_ratio(alpha, r)?.theta_span)
}

/// Arc whose span is exactly `pi / k`.
pub fn segment_for_k(alpha: f64, k: usize) -> Result<ShrinkerSegment> {
    if !(alpha > 0.0 && alpha < 1.0 / 3.0) {
        return Err(Error::OutOfRange(format!(
            "k-fold shrinkers need alpha in (0, 1/3), got {alpha}"
        )));
    }
    if !k_admissible(alpha, k) {
        return Err(Error::OutOfRange(format!(
            "k = {k} violates 3 <= k < sqrt(1 + 1/alpha) = {:.6}",
            (1.0 + 1.0 / alpha).sqrt()
        )));
    }
    let target = PI / k as f64;
    let eval = |s: f64| solve_deviation(alpha, s.exp()).map(|seg| seg.theta_span);
    let mut lo = -20.0;
    while eval(lo)? >= target {
        lo -= 5.0;
        if lo < -60.0 {
            return Err(Error::OutOfRange(format!(
                "alpha = {alpha} is too close to 1/(k^2 - 1) for k = {k}"
            )));
        }
    }
    let mut hi = 0.0;
    while eval(hi)? <= target {
        hi += 1.0;
        if hi.exp() > MAX_DEVIATION {
            return Err(Error::NoBracket {
                target,
                lo: period_limit(alpha),
                hi: eval(hi)?,
            });
        }
    }
    let mut failure = None;
    let s = brent(
        |s| match eval(s) {
            Ok(v) => v - target,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        lo,
        hi,
        1e-15,
        300,
    )
    .ok_or_else(|| Error::OutOfRange("period does not bracket pi/k".into()))?;
    if let Some(e) = failure {
        return Err(e);
    }
    solve_deviation(alpha, s.exp())
}

/// The ratio `r_k` with `Theta(alpha, r_k) = pi / k`.
pub fn find_r_for_k(alpha: f64, k: usize) -> Result<f64> {
    Ok(segment_for_k(alpha, k)?.r)
}

/// A shrinker support function `h` solving `h'' + h = h^{-1/alpha}`.
#[derive(Clone, Debug)]
pub struct ShrinkerProfile {
    pub alpha: f64,
    pub kind: ProfileKind,
    pub r: f64,
    /// Span of one monotone arc (`pi/k`; the `r -> 1` limit for the circle).
    pub theta_span: f64,
    pub h: SupportFunction,
    pub entropy: f64,
    /// `max |h'' + h - h^{-1/alpha}| / max |h^{-1/alpha}|` on the grid.
    pub residual: f64,
}

/// Relative sup-norm residual of `h'' + h = h^{-1/alpha}`.
pub fn profile_residual(h: &SupportFunction, alpha: f64) -> f64 {
    let w = h.radius_of_curvature();
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (wi, hi) in w.iter().zip(h.values()) {
        let rhs = hi.powf(-1.0 / alpha);
        num = num.max((wi - rhs).abs());
        den = den.max(rhs.abs());
    }
    num / den
}

/// Sample the k-fold profile on a uniform grid by even reflection and
/// `2 pi / k`-periodic extension of one arc. Fails with `BadGrid` when the
/// sampled profile misses the residual bound.
pub fn assemble_profile(alpha: f64, kind: ProfileKind, grid_n: usize) -> Result<ShrinkerProfile> {
    let grid = AngularGrid::new(grid_n)?;
    match kind {
        ProfileKind::Circle => {
            check_alpha(alpha)?;
            Ok(ShrinkerProfile {
                alpha,
                kind,
                r: 1.0,
                theta_span: period_limit(alpha),
                h: SupportFunction::circle(&grid, 1.0),
                entropy: 0.0,
                residual: 0.0,
            })
        }
        ProfileKind::KFold(k) => {
            if grid_n % (2 * k) != 0 {
                return Err(Error::BadGrid(format!(
                    "grid size {grid_n} must be a multiple of 2k = {}",
                    2 * k
                )));
            }
            let seg = segment_for_k(alpha, k)?;
            profile_from_segment(&seg, k, &grid).verified()
        }
    }
}

fn profile_from_segment(seg: &ShrinkerSegment, k: usize, grid: &AngularGrid) -> ShrinkerProfile {
    let n = grid.len();
    let per = n / k;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let j = i % per;
            let j = j.min(per - j);
            if 2 * j == per {
                seg.u_min
            } else {
                let t = grid.theta(j);
                seg.eval(t).0
            }
        })
        .collect();
    let h = SupportFunction::new(grid.clone(), values).expect("finite profile samples");
    let residual = profile_residual(&h, seg.alpha);
    ShrinkerProfile {
        alpha: seg.alpha,
        kind: ProfileKind::KFold(k),
        r: seg.r,
        theta_span: seg.theta_span,
        entropy: entropy_from_mean_power(seg.alpha, seg.mean_power),
        h,
        residual,
    }
}

impl ShrinkerProfile {
    /// Fails when the sampled profile does not meet the residual bound.
    pub fn verified(self) -> Result<Self> {
        if self.residual >= PROFILE_RESIDUAL_TOL {
            return Err(Error::BadGrid(format!(
                "profile residual {:.3e} exceeds {PROFILE_RESIDUAL_TOL:e}; use a finer grid",
                self.residual
            )));
        }
        Ok(self)
    }
}

/// Variation `eta = dU/dr` along an arc.
#[derive(Clone, Debug)]
pub struct EtaArc {
    pub eta0: f64,
    pub theta_span: f64,
    /// `dTheta/dr` by the same central difference that produced `eta0`.
    pub dtheta_dr: f64,
    trajectory: Trajectory<4>,
}

impl EtaArc {
    /// `(eta, eta_theta)` at `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let s = self.trajectory.eval(theta);
        (s[2], s[3])
    }
}

/// Integrate `eta'' + eta + (1/alpha) U^{-1-1/alpha} eta = 0` along the arc
/// with `eta(0) = d u_max / dr` and `eta'(0) = 0`.
pub fn variation_eta(segment: &ShrinkerSegment) -> Result<EtaArc> {
    let alpha = segment.alpha;
    let r = segment.r;
    let delta = 1e-4 * (r - 1.0);
    let plus = segment_for_ratio(alpha, r + delta)?;
    let minus = segment_for_ratio(alpha, r - delta)?;
    let eta0 = (plus.u_max - minus.u_max) / (2.0 * delta);
    let dtheta_dr = (plus.theta_span - minus.theta_span) / (2.0 * delta);
    let inv = 1.0 / alpha;
    let rhs = move |_t: f64, s: &[f64; 4]| {
        let l = s[0].ln_1p();
        [
            s[1],
            (-l * inv).exp_m1() - s[0],
            s[3],
            -s[2] - inv * ((-1.0 - inv) * l).exp() * s[2],
        ]
    };
    let solver = Dopri5 {
        rtol: SHOOTING_RTOL,
        atol: 1e-3 * SHOOTING_RTOL * (segment.u_max - 1.0).min(1.0),
        h_init: 1e-3,
        h_max: 0.05,
        max_steps: 2_000_000,
    };
    let trajectory = solver.integrate(rhs, 0.0, [segment.u_max - 1.0, 0.0, eta0, 0.0], segment.theta_span)?;
    Ok(EtaArc {
        eta0,
        theta_span: segment.theta_span,
        dtheta_dr,
        trajectory,
    })
}

/// `eta_theta(Theta) + U_tt(Theta) dTheta/dr`, which vanishes identically.
pub fn eta_boundary_residual(segment: &ShrinkerSegment, eta: &EtaArc) -> f64 {
    let (_, eta_t) = eta.eval(segment.theta_span);
    eta_t + segment.second_derivative(segment.theta_span) * eta.dtheta_dr
}

/// `f(r) = (1/Theta) \int_0^Theta U^{1 - 1/alpha}`; `f(1) = 1`.
pub fn f_of_r(alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if r == 1.0 {
        return Ok(1.0);
    }
    Ok(segment_for_ratio(alpha, r)?.mean_power)
}

fn entropy_from_mean_power(alpha: f64, f: f64) -> f64 {
    (alpha + 1.0) / (2.0 * (alpha - 1.0)) * f.ln()
}

/// Entropy of a shrinker, `(alpha+1)/(2(alpha-1)) log f(r_k)`; zero for the circle.
pub fn shrinker_entropy(alpha: f64, kind: ProfileKind) -> Result<f64> {
    match kind {
        ProfileKind::Circle => {
            check_alpha(alpha)?;
            Ok(0.0)
        }
        ProfileKind::KFold(k) => {
            let seg = segment_for_k(alpha, k)?;
            Ok(entropy_from_mean_power(alpha, seg.mean_power))
        }
    }
}

/// Entropies of the circle and every admissible k-fold shrinker, circle
/// first and then `k = k0, k0 - 1, ..., 3`; checks the strict ordering
/// `0 = E(circle) > E(k0) > ... > E(3)`.
pub fn entropy_ordering(alpha: f64) -> Result<Vec<(ProfileKind, f64)>> {
    if !(alpha > 0.0 && alpha < 1.0 / 8.0) {
        return Err(Error::OutOfRange(format!(
            "the entropy ordering is stated for alpha in (0, 1/8), got {alpha}"
        )));
    }
    let k0 = max_admissible_k(alpha).ok_or_else(|| Error::OutOfRange(format!("no k-fold shrinker at alpha = {alpha}")))?;
    let ks: Vec<usize> = (3..=k0).rev().collect();
    let results: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ks
            .iter()
            .map(|&k| scope.spawn(move || shrinker_entropy(alpha, ProfileKind::KFold(k))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("entropy worker panicked"))
            .collect()
    });
    let mut table = vec![(ProfileKind::Circle, 0.0)];
    for (k, e) in ks.into_iter().zip(results) {
        table.push((ProfileKind::KFold(k), e?));
    }
    for pair in table.windows(2) {
        if pair[1].1 >= pair[0].1 {
            return Err(Error::OrderingViolated(format!(
                "E({}) = {} is not below E({}) = {}",
                pair[1].0, pair[1].1, pair[0].0, pair[0].1
            )));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(solve_segment(0.125, 1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(solve_segment(1.0 / 3.0, 1.5), Err(Error::OutOfRange(_))));
        assert!(matches!(find_r_for_k(1.0 / 24.0, 5), Err(Error::OutOfRange(_))));
        assert!(matches!(find_r_for_k(0.1, 4), Err(Error::OutOfRange(_))));
        assert!(matches!(entropy_ordering(0.2), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn admissible_k() {
        assert_eq!(max_admissible_k(1.0 / 24.0), Some(4));
        assert_eq!(max_admissible_k(1.0 / 30.0), Some(5));
        assert_eq!(max_admissible_k(0.1), Some(3));
        assert_eq!(max_admissible_k(0.125), None);
        assert!(!k_admissible(0.1, 5));
    }

    #[test]
    fn profile_kind_parsing() {
        assert_eq!("circle".parse::<ProfileKind>().unwrap(), ProfileKind::Circle);
        assert_eq!("k3".parse::<ProfileKind>().unwrap(), ProfileKind::KFold(3));
        assert_eq!("4".parse::<ProfileKind>().unwrap(), ProfileKind::KFold(4));
        assert!("square".parse::<ProfileKind>().is_err());
    }

    #[test]
    fn small_amplitude_segment_matches_linearization() {
        let alpha = 0.125;
        let seg = solve_segment(alpha, 1.0 + 1e-7).unwrap();
        assert!((seg.theta_span - PI / 3.0).abs() < 1e-6);
        assert!((seg.r - (1.0 + 1e-7) / (1.0 - 1e-7)).abs() < 1e-9);
    }

    #[test]
    fn segment_invariants() {
        let seg = solve_segment(1.0 / 24.0, 1.3).unwrap();
        assert!(seg.first_integral_drift() < 1e-9);
        let (_, ut0) = seg.eval(0.0);
        let (_, ut1) = seg.eval(seg.theta_span);
        assert_eq!(ut0, 0.0);
        assert!(ut1.abs() < 1e-10);
        for (_, _, ut) in seg.samples(200).into_iter().skip(1).take(198) {
            assert!(ut < 0.0);
        }
    }

    #[test]
    fn ratio_inversion() {
        let alpha = 1.0 / 24.0;
        let seg = segment_for_ratio(alpha, 1.7).unwrap();
        assert!((seg.r - 1.7).abs() < 1e-10 * 1.7);
        assert!((seg.u_max / seg.u_min - 1.7).abs() < 1e-10);
    }

    #[test]
    fn circle_profile_and_entropy() {
        let p = assemble_profile(0.2, ProfileKind::Circle, 64).unwrap();
        assert!(p.h.values().iter().all(|&v| v == 1.0));
        assert_eq!(shrinker_entropy(0.2, ProfileKind::Circle).unwrap(), 0.0);
        assert_eq!(f_of_r(0.2, 1.0).unwrap(), 1.0);
        assert_eq!(period(0.2, 1.0).unwrap(), period_limit(0.2));
    }

    #[test]
    fn grid_must_be_multiple_of_2k() {
        assert!(matches!(
            assemble_profile(1.0 / 24.0, ProfileKind::KFold(3), 256),
            Err(Error::BadGrid(_))
        ));
    }
}
