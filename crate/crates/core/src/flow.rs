//! Time integration of the flow in support-function form.
//!
//! Three flavours share one integrator:
//! - `Unnormalized`: `u_t = -w^{-alpha}`
//! - `NormalizedTau`: `u_tau = -w^{-alpha} + u`
//! - `NormalizedArea`: `u_tau = -w^{-alpha} / mean(w^{1-alpha}) + u`
//!
//! with `w = u_tt + u`. The stepper is classical RK4 with step doubling and
//! Richardson extrapolation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::entropy;
use crate::error::{Error, Result};
use crate::geometry::{AngularGrid, SupportFunction, CONVEXITY_TOLERANCE};

/// `dt <= CFL_GUARD * min(w)^{1+alpha}`.
pub const CFL_GUARD: f64 = 0.2;
/// Steps are also capped at this multiple of the inverse stiffest rate.
pub const STABILITY_CAP: f64 = 2.5;
/// Top-third spectral energy above which a run is flagged under-resolved.
pub const RESOLUTION_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Unnormalized,
    NormalizedTau,
    NormalizedArea,
}

impl fmt::Display for FlowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowMode::Unnormalized => "unnormalized",
            FlowMode::NormalizedTau => "normalized_tau",
            FlowMode::NormalizedArea => "normalized_area",
        })
    }
}

impl FromStr for FlowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unnormalized" => Ok(FlowMode::Unnormalized),
            "normalized_tau" | "normalized" => Ok(FlowMode::NormalizedTau),
            "normalized_area" => Ok(FlowMode::NormalizedArea),
            other => Err(Error::Parse(format!("unknown flow mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    ReachedEnd,
    MinRadius,
    NonConvex,
    StepUnderflow,
    MaxSteps,
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalReason::ReachedEnd => "reached_end",
            TerminalReason::MinRadius => "min_radius",
            TerminalReason::NonConvex => "non_convex",
            TerminalReason::StepUnderflow => "step_underflow",
            TerminalReason::MaxSteps => "max_steps",
        })
    }
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub alpha: f64,
    pub mode: FlowMode,
    /// Initial support function; the initial perturbation when `base` is set.
    pub initial: SupportFunction,
    /// Evolve `u = base + v` through the perturbation `v` (normalized-tau
    /// mode only). Keeps full relative precision for tiny `v`.
    pub base: Option<SupportFunction>,
    /// First trial step.
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Record a row every this many accepted steps.
    pub sample_every: usize,
    /// Record rows at exactly `t_start + j * interval` instead.
    pub sample_interval: Option<f64>,
    pub stop_min_radius: f64,
    pub max_steps: usize,
    /// Local error tolerance relative to the sup norm of the state.
    pub rtol: f64,
    pub log_entropy: bool,
    /// Keep a snapshot in every `snapshot_every`-th row (0 keeps none).
    pub snapshot_every: usize,
}

impl FlowConfig {
    pub fn new(alpha: f64, mode: FlowMode, initial: SupportFunction, t_end: f64) -> Self {
        Self {
            alpha,
            mode,
            initial,
            base: None,
            dt: 1e-4,
            t_start: 0.0,
            t_end,
            sample_every: 1,
            sample_interval: None,
            stop_min_radius: 1e-3,
            max_steps: 5_000_000,
            rtol: 1e-8,
            log_entropy: false,
            snapshot_every: 0,
        }
    }

    /// Normalized-tau evolution of `base + perturbation`.
    pub fn perturbation(alpha: f64, base: SupportFunction, perturbation: SupportFunction, t_end: f64) -> Self {
        let mut cfg = Self::new(alpha, FlowMode::NormalizedTau, perturbation, t_end);
        cfg.base = Some(base);
        cfg.rtol = 1e-12;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1]", self.alpha));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.t_end > self.t_start) {
            return bad(format!(
                "t_end = {} must exceed t_start = {}; backward integration is not supported",
                self.t_end, self.t_start
            ));
        }
        if let Some(dtau) = self.sample_interval {
            if !(dtau > 0.0) {
                return bad(format!("sample_interval = {dtau} must be positive"));
            }
        }
        if !(self.rtol > 0.0) || !(self.stop_min_radius >= 0.0) {
            return bad("rtol must be positive and stop_min_radius nonnegative".into());
        }
        if let Some(base) = &self.base {
            if self.mode != FlowMode::NormalizedTau {
                return bad("perturbation runs use the normalized_tau mode".into());
            }
            if base.len() != self.initial.len() {
                return bad(format!(
                    "base has {} nodes, perturbation {}",
                    base.len(),
                    self.initial.len()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub time: f64,
    pub area: f64,
    pub length: f64,
    pub iso_ratio: f64,
    pub min_curv: f64,
    pub max_curv: f64,
    pub entropy: Option<f64>,
    pub snapshot: Option<Vec<f64>>,
    pub perturbation: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrace {
    pub alpha: f64,
    pub mode: FlowMode,
    pub grid_n: usize,
    pub rows: Vec<FlowRow>,
    pub terminal_reason: TerminalReason,
    pub under_resolved: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl FlowTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    pub fn last(&self) -> &FlowRow {
        self.rows.last().expect("a trace always holds its initial row")
    }

    /// Final support function, if the last row kept a snapshot.
    pub fn final_support(&self) -> Option<SupportFunction> {
        let values = self.last().snapshot.clone()?;
        let grid = AngularGrid::new(self.grid_n).ok()?;
        SupportFunction::new(grid, values).ok()
    }
}

fn radius(u: &SupportFunction) -> Result<Vec<f64>> {
    let w = u.radius_of_curvature();
    let floor = CONVEXITY_TOLERANCE * u.mean().abs();
    match w.iter().copied().fold(f64::INFINITY, f64::min) {
        m if m > floor => Ok(w),
        m => Err(Error::NonConvex {
            min_radius: m,
            tolerance: floor,
        }),
    }
}

/// `-w^{-alpha}`.
pub fn rhs_unnormalized(u: &SupportFunction, alpha: f64) -> Result<Vec<f64>> {
    Ok(radius(u)?.into_iter().map(|w| -w.powf(-alpha)).collect())
}

/// `-w^{-alpha} + u`.
pub fn rhs_normalized_tau(u: &SupportFunction, alpha: f64) -> Result<Vec<f64>> {
    Ok(radius(u)?
        .into_iter()
        .zip(u.values())
        .map(|(w, u)| -w.powf(-alpha) + u)
        .collect())
}

/// `-w^{-alpha} / mean(w^{1-alpha}) + u`.
pub fn rhs_normalized_area(u: &SupportFunction, alpha: f64) -> Result<Vec<f64>> {
    let w = radius(u)?;
    let m = w.iter().map(|w| w.powf(1.0 - alpha)).sum::<f64>() / w.len() as f64;
    Ok(w.into_iter()
        .zip(u.values())
        .map(|(w, u)| -w.powf(-alpha) / m + u)
        .collect())
}

pub fn rhs(mode: FlowMode, u: &SupportFunction, alpha: f64) -> Result<Vec<f64>> {
    match mode {
        FlowMode::Unnormalized => rhs_unnormalized(u, alpha),
        FlowMode::NormalizedTau => rhs_normalized_tau(u, alpha),
        FlowMode::NormalizedArea => rhs_normalized_area(u, alpha),
    }
}

/// Normalized-tau right-hand side written for the perturbation `v` of `h`:
/// `-w_h^{-alpha} expm1(-alpha ln1p(x / w_h)) + v + b` with `x = v_tt + v`
/// and `b = h - w_h^{-alpha}` the residual of `h`.
struct PerturbationRhs {
    alpha: f64,
    w_h: Vec<f64>,
    w_h_pow: Vec<f64>,
    residual: Vec<f64>,
    grid: AngularGrid,
}

impl PerturbationRhs {
    fn new(h: &SupportFunction, alpha: f64) -> Result<Self> {
        let w_h = radius(h)?;
        let w_h_pow: Vec<f64> = w_h.iter().map(|w| w.powf(-alpha)).collect();
        let residual = h.values().iter().zip(&w_h_pow).map(|(h, p)| h - p).collect();
        Ok(Self {
            alpha,
            w_h,
            w_h_pow,
            residual,
            grid: h.grid().clone(),
        })
    }

    fn eval(&self, v: &[f64]) -> Result<Vec<f64>> {
        let x = self.grid.ops().radius_of_curvature(v);
        let mut out = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            let q = x[i] / self.w_h[i];
            if !(q > -1.0 + CONVEXITY_TOLERANCE) {
                return Err(Error::NonConvex {
                    min_radius: self.w_h[i] + x[i],
                    tolerance: CONVEXITY_TOLERANCE,
                });
            }
            out.push(-self.w_h_pow[i] * (-self.alpha * q.ln_1p()).exp_m1() + v[i] + self.residual[i]);
        }
        Ok(out)
    }
}

/// Normalized-tau velocity of the perturbation `v` of the profile `h`.
pub fn rhs_perturbation(h: &SupportFunction, alpha: f64, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != h.len() {
        return Err(Error::GridMismatch {
            left: h.len(),
            right: v.len(),
        });
    }
    PerturbationRhs::new(h, alpha)?.eval(v)
}

struct Stepper<'a> {
    cfg: &'a FlowConfig,
    grid: AngularGrid,
    perturbation: Option<PerturbationRhs>,
}

impl Stepper<'_> {
    fn full(&self, y: &[f64]) -> SupportFunction {
        let values = match &self.cfg.base {
            Some(h) => h.values().iter().zip(y).map(|(h, v)| h + v).collect(),
            None => y.to_vec(),
        };
        SupportFunction::new(self.grid.clone(), values).expect("finite state")
    }

    fn f(&self, y: &[f64]) -> Result<Vec<f64>> {
        let out = match &self.perturbation {
            Some(p) => p.eval(y)?,
            None => {
                let u = SupportFunction::new(self.grid.clone(), y.to_vec())?;
                rhs(self.cfg.mode, &u, self.cfg.alpha)?
            }
        };
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonConvex {
                min_radius: f64::NAN,
                tolerance: CONVEXITY_TOLERANCE,
            })
        }
    }

    fn rk4(&self, y: &[f64], dt: f64) -> Result<Vec<f64>> {
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
        let k1 = self.f(y)?;
        let k2 = self.f(&axpy(0.5 * dt, &k1))?;
        let k3 = self.f(&axpy(0.5 * dt, &k2))?;
        let k4 = self.f(&axpy(dt, &k3))?;
        Ok((0..y.len())
            .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }

    /// One step-doubled attempt: extrapolated state and normalized error.
    fn attempt(&self, y: &[f64], dt: f64) -> Result<(Vec<f64>, f64)> {
        let big = self.rk4(y, dt)?;
        let half = self.rk4(y, 0.5 * dt)?;
        let two = self.rk4(&half, 0.5 * dt)?;
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut err: f64 = 0.0;
        let next = two
            .iter()
            .zip(&big)
            .map(|(a, b)| {
                let d = (a - b) / 15.0;
                err = err.max(d.abs());
                a + d
            })
            .collect();
        Ok((next, err / (self.cfg.rtol * scale)))
    }

    /// Largest stable step given the current radius of curvature.
    fn step_limit(&self, w: &[f64]) -> f64 {
        let alpha = self.cfg.alpha;
        let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let half = (self.grid.len() / 2) as f64;
        let mut stiff = alpha * w_min.powf(-1.0 - alpha) * half * half;
        if self.cfg.mode == FlowMode::NormalizedArea {
            let m = w.iter().map(|w| w.powf(1.0 - alpha)).sum::<f64>() / w.len() as f64;
            stiff /= m;
        }
        if self.cfg.mode != FlowMode::Unnormalized {
            stiff += 1.0;
        }
        (CFL_GUARD * w_min.powf(1.0 + alpha)).min(STABILITY_CAP / stiff)
    }

    fn row(&self, t: f64, y: &[f64], keep_snapshot: bool) -> Result<(FlowRow, bool)> {
        let u = self.full(y);
        let w = u.checked_radius_of_curvature()?;
        let area = u.area()?;
        let length = self.grid.integrate(&w);
        let (w_min, w_max) = w
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let under = self.grid.ops().high_mode_fraction(u.values()) > RESOLUTION_FLOOR;
        let entropy = if self.cfg.log_entropy {
            entropy(&u, self.cfg.alpha).ok().map(|r| r.value)
        } else {
            None
        };
        Ok((
            FlowRow {
                time: t,
                area,
                length,
                iso_ratio: area / (length * length),
                min_curv: 1.0 / w_max,
                max_curv: 1.0 / w_min,
                entropy,
                snapshot: keep_snapshot.then(|| u.values().to_vec()),
                perturbation: (keep_snapshot && self.cfg.base.is_some()).then(|| y.to_vec()),
            },
            under,
        ))
    }
}

/// Integrate the flow; terminal conditions end the trace rather than
/// raising.
pub fn run(cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    let grid = cfg.initial.grid().clone();
    let perturbation = match &cfg.base {
        Some(h) => Some(PerturbationRhs::new(h, cfg.alpha).map_err(|e| Error::BadConfig(format!("base: {e}")))?),
        None => None,
    };
    let stepper = Stepper {
        cfg,
        grid,
        perturbation,
    };
    let mut y = cfg.initial.values().to_vec();
    let mut t = cfg.t_start;
    stepper
        .full(&y)
        .checked_radius_of_curvature()
        .map_err(|e| Error::BadConfig(format!("initial data: {e}")))?;

    let mut rows = Vec::new();
    let mut under_resolved = false;
    let keep = |count: usize| cfg.snapshot_every > 0 && count % cfg.snapshot_every == 0;
    let (first, flag) = stepper.row(t, &y, keep(0))?;
    rows.push(first);
    under_resolved |= flag;

    let mut dt = cfg.dt;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut since_sample = 0usize;
    let mut next_sample = cfg.sample_interval.map(|d| (1usize, d));
    let eps = 1e-12 * (t.abs() + cfg.t_end.abs()).max(1.0);

    let reason = loop {
        let u = stepper.full(&y);
        let w = u.radius_of_curvature();
        let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
        if w_min <= CONVEXITY_TOLERANCE * u.mean().abs() {
            break TerminalReason::NonConvex;
        }
        if w_min < cfg.stop_min_radius {
            break TerminalReason::MinRadius;
        }
        if t >= cfg.t_end - eps {
            break TerminalReason::ReachedEnd;
        }
        if accepted >= cfg.max_steps {
            break TerminalReason::MaxSteps;
        }
        let mut target = cfg.t_end;
        if let Some((j, d)) = next_sample {
            target = target.min(cfg.t_start + j as f64 * d);
        }
        let mut h = dt.min(stepper.step_limit(&w));
        let clipped = t + h >= target - eps;
        if clipped {
            h = target - t;
        }
        if h < 1e-15 * t.abs().max(1.0) {
            break TerminalReason::StepUnderflow;
        }
        let (next, err) = match stepper.attempt(&y, h) {
            Ok(r) => r,
            Err(_) => {
                rejected += 1;
                dt = 0.25 * h;
                continue;
            }
        };
        if !(err <= 1.0) {
            rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            dt = h * factor;
            continue;
        }
        y = next;
        t = if clipped { target } else { t + h };
        accepted += 1;
        since_sample += 1;
        let grow = if err > 0.0 { (0.9 * err.powf(-0.2)).min(4.0) } else { 4.0 };
        if !clipped || h >= dt {
            dt = h * grow.max(0.2);
        }

        let mut record = false;
        if let Some((j, d)) = next_sample.as_mut() {
            if clipped && (t - (cfg.t_start + *j as f64 * *d)).abs() <= eps {
                *j += 1;
                record = true;
            }
        } else if since_sample >= cfg.sample_every {
            record = true;
        }
        if record {
            since_sample = 0;
            match stepper.row(t, &y, keep(rows.len())) {
                Ok((row, flag)) => {
                    under_resolved |= flag;
                    rows.push(row);
                }
                Err(_) => break TerminalReason::NonConvex,
            }
        }
    };

    if rows.last().map(|r| r.time) != Some(t) {
        if let Ok((row, flag)) = stepper.row(t, &y, cfg.snapshot_every > 0) {
            under_resolved |= flag;
            rows.push(row);
        }
    } else if cfg.snapshot_every > 0 {
        let last = rows.last_mut().expect("nonempty");
        if last.snapshot.is_none() {
            let u = stepper.full(&y);
            last.snapshot = Some(u.values().to_vec());
            if cfg.base.is_some() {
                last.perturbation = Some(y.clone());
            }
        }
    }

    Ok(FlowTrace {
        alpha: cfg.alpha,
        mode: cfg.mode,
        grid_n: stepper.grid.len(),
        rows,
        terminal_reason: reason,
        under_resolved,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// `-\int w^{1-alpha}`, the area derivative under the unnormalized flow.
pub fn area_derivative(u: &SupportFunction, alpha: f64) -> Result<f64> {
    let w = u.checked_radius_of_curvature()?;
    let f: Vec<f64> = w.iter().map(|w| w.powf(1.0 - alpha)).collect();
    Ok(-u.grid().integrate(&f))
}

/// Relative mismatch between a one-sided difference of the area across two
/// short unnormalized steps and `-\int kappa^{alpha-1}`.
pub fn area_derivative_check(u: &SupportFunction, alpha: f64) -> Result<f64> {
    let exact = area_derivative(u, alpha)?;
    let w = u.checked_radius_of_curvature()?;
    let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let dt = 1e-4 * w_min.powf(1.0 + alpha);
    let mut cfg = FlowConfig::new(alpha, FlowMode::Unnormalized, u.clone(), 2.0 * dt);
    cfg.rtol = 1e-12;
    cfg.dt = dt;
    cfg.sample_interval = Some(dt);
    cfg.stop_min_radius = 0.0;
    let trace = run(&cfg)?;
    if trace.rows.len() < 3 {
        return Err(Error::InsufficientData("area derivative needs three rows".into()));
    }
    let a: Vec<f64> = trace.rows.iter().take(3).map(|r| r.area).collect();
    let fd = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * dt);
    Ok(((fd - exact) / exact).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaLawFit {
    pub exponent: f64,
    pub a_hat: f64,
    pub rms: f64,
    pub t_ext: f64,
    pub rows_used: usize,
}

/// Fit `A = c |t - T|^p` over the last decade of area (rows with
/// `A <= 10 A_min`), choosing `T` to minimize the residual.
pub fn area_law_fit(trace: &FlowTrace) -> Result<AreaLawFit> {
    let rows = last_decade(trace);
    if rows.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "{} rows in the last decade of area, need 20",
            rows.len()
        )));
    }
    let (t_last, a_last) = (rows[rows.len() - 1].time, rows[rows.len() - 1].area);
    let (t_prev, a_prev) = (rows[rows.len() - 2].time, rows[rows.len() - 2].area);
    let slope = (a_last - a_prev) / (t_last - t_prev);
    if !(slope < 0.0) {
        return Err(Error::InsufficientData("area is not decreasing at the end of the trace".into()));
    }
    let horizon = a_last / -slope;
    let data: Vec<(f64, f64)> = rows.iter().map(|r| (r.time, r.area.ln())).collect();
    let fit_at = |t_ext: f64| -> (f64, f64, f64) {
        let xs: Vec<f64> = data.iter().map(|(t, _)| (t_ext - t).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = data.iter().map(|(_, y)| y).sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&data).map(|(x, (_, y))| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let p = sxy / sxx;
        let c = my - p * mx;
        let rms = (xs
            .iter()
            .zip(&data)
            .map(|(x, (_, y))| (y - c - p * x).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        (p, c, rms)
    };
    // golden section on log(T - t_last)
    let (mut lo, mut hi) = ((1e-4 * horizon).ln(), (10.0 * horizon).ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let obj = |s: f64| fit_at(t_last + s.exp()).2;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = obj(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = obj(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let t_ext = t_last + (0.5 * (lo + hi)).exp();
    let (p, c, rms) = fit_at(t_ext);
    Ok(AreaLawFit {
        exponent: p,
        a_hat: (c / p).exp(),
        rms,
        t_ext,
        rows_used: rows.len(),
    })
}

fn last_decade(trace: &FlowTrace) -> Vec<&FlowRow> {
    let a_min = trace.rows.iter().map(|r| r.area).fold(f64::INFINITY, f64::min);
    let start = trace
        .rows
        .iter()
        .position(|r| r.area <= 10.0 * a_min)
        .unwrap_or(trace.rows.len());
    trace.rows[start..].iter().collect()
}

/// Largest increase of the logged entropy between consecutive rows
/// (`-inf` when fewer than two rows carry an entropy).
pub fn entropy_monotonicity_check(trace: &FlowTrace) -> f64 {
    let e: Vec<f64> = trace.rows.iter().filter_map(|r| r.entropy).collect();
    e.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeVerdict {
    TypeILike,
    TypeIILike,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeDiagnostic {
    /// `(time, A / L^2)` over the last decade of area.
    pub ratio_series: Vec<(f64, f64)>,
    pub verdict: TypeVerdict,
}

/// Ratio floor below which a stable `A / L^2` no longer counts as round-like.
pub const TYPE_I_FLOOR: f64 = 0.01;

/// Trend of `A / L^2` near extinction.
pub fn type_diagnostic(trace: &FlowTrace) -> TypeDiagnostic {
    let ratio_series: Vec<(f64, f64)> = last_decade(trace).iter().map(|r| (r.time, r.iso_ratio)).collect();
    let verdict = match (ratio_series.first(), ratio_series.last()) {
        (Some(&(_, first)), Some(&(_, last))) if ratio_series.len() >= 3 => {
            let k = ratio_series.len();
            let tail = &ratio_series[k - k.div_ceil(10).max(2)..];
            let still_falling = tail.windows(2).all(|p| p[1].1 < p[0].1);
            let spread = tail.iter().map(|p| p.1).fold(0.0f64, f64::max)
                - tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            if last < 0.5 * first && still_falling {
                TypeVerdict::TypeIILike
            } else if last > TYPE_I_FLOOR && spread < 0.05 * last {
                TypeVerdict::TypeILike
            } else {
                TypeVerdict::Inconclusive
            }
        }
        _ => TypeVerdict::Inconclusive,
    };
    TypeDiagnostic { ratio_series, verdict }
}

/// `tau = -log(-t) / (1 + alpha)` for `t < 0`.
pub fn renormalize_time(t: f64, alpha: f64) -> Result<f64> {
    if !(t < 0.0) {
        return Err(Error::BadDomain(format!("t = {t} must be negative")));
    }
    Ok(-(-t).ln() / (1.0 + alpha))
}

/// `t = -exp(-(1 + alpha) tau)`.
pub fn unrenormalize_time(tau: f64, alpha: f64) -> f64 {
    -(-(1.0 + alpha) * tau).exp()
}

/// `(1+alpha)^{-1/(1+alpha)} e^tau`, the factor taking an unnormalized
/// solution extinguishing at `t = 0` to the normalized one.
pub fn rescale_factor(tau: f64, alpha: f64) -> f64 {
    (1.0 + alpha).powf(-1.0 / (1.0 + alpha)) * tau.exp()
}

/// Extinction time of `u` under the unnormalized flow, extrapolated from
/// `A^{(1+alpha)/2}`, which is affine in `t` for circles.
pub fn extinction_time(u: &SupportFunction, alpha: f64) -> Result<f64> {
    let mut cfg = FlowConfig::new(alpha, FlowMode::Unnormalized, u.clone(), f64::MAX);
    cfg.rtol = 1e-10;
    cfg.stop_min_radius = 1e-4 * u.mean();
    let trace = run(&cfg)?;
    if trace.terminal_reason != TerminalReason::MinRadius {
        return Err(Error::InsufficientData(format!(
            "extinction run ended with {}",
            trace.terminal_reason
        )));
    }
    let q = 0.5 * (1.0 + alpha);
    let rows = &trace.rows[trace.rows.len().saturating_sub(2)..];
    if rows.len() < 2 {
        return Err(Error::InsufficientData("extinction run too short".into()));
    }
    let (t0, s0) = (rows[0].time, (rows[0].area / PI).powf(q));
    let (t1, s1) = (rows[1].time, (rows[1].area / PI).powf(q));
    let slope = (s1 - s0) / (t1 - t0);
    Ok(t1 - s1 / slope)
}

/// Rescale `u` so that the normalized-tau flow started from the result at
/// `tau = 0` corresponds to an unnormalized flow extinguishing at `t = 0`
/// from `t = -1`.
pub fn anchor_to_extinction(u: &SupportFunction, alpha: f64) -> Result<SupportFunction> {
    let t_ext = extinction_time(u, alpha)?;
    let s = t_ext.powf(-1.0 / (1.0 + alpha));
    Ok(u.scaled(s * rescale_factor(0.0, alpha)))
}
