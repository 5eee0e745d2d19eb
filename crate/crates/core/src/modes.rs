//! Mode dynamics of perturbations of the circle at `alpha = 1/(k^2 - 1)`,
//! where `cos k theta`, `sin k theta` span the kernel of the linearization.
//!
//! With `v = u - 1 = A_0 + sum A_m cos m theta + B_m sin m theta`,
//! `rho = A_k^2 + B_k^2` and
//! `Q = (A_k^2 - B_k^2) A_2k + 2 A_k B_k B_2k`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowTrace;
use crate::geometry::{AngularGrid, SupportFunction};
use crate::spectral::{project, SpectralDecomposition};

/// `1 / (k^2 - 1)`.
pub fn critical_alpha(k: usize) -> f64 {
    1.0 / ((k * k) as f64 - 1.0)
}

/// `lambda_l = alpha (l^2 - 1) - 1`.
pub fn circle_lambda(alpha: f64, l: usize) -> f64 {
    alpha * ((l * l) as f64 - 1.0) - 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub tau: f64,
    /// `A_0..=A_{m_max}`.
    pub a: Vec<f64>,
    /// `B_0..=B_{m_max}` (`B_0 = 0`).
    pub b: Vec<f64>,
    pub rho: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeTrace {
    pub k: usize,
    pub alpha: f64,
    pub m_max: usize,
    pub rows: Vec<ModeRow>,
}

fn rho_q(a: &[f64], b: &[f64], k: usize) -> (f64, f64) {
    let (ak, bk) = (a[k], b[k]);
    let (a2, b2) = (a[2 * k], b[2 * k]);
    let rho = ak * ak + bk * bk;
    (rho, (ak * ak - bk * bk) * a2 + 2.0 * ak * bk * b2)
}

/// Fourier modes of `v = u - 1` at every row carrying a snapshot.
pub fn track_modes(trace: &FlowTrace, k: usize, m_max: usize) -> Result<ModeTrace> {
    if k < 2 {
        return Err(Error::OutOfRange(format!("k = {k} must be at least 2")));
    }
    if (trace.alpha - critical_alpha(k)).abs() > 1e-14 {
        return Err(Error::AlphaMismatch { alpha: trace.alpha, k });
    }
    let m_max = m_max.max(2 * k);
    if m_max >= trace.grid_n / 2 {
        return Err(Error::BadGrid(format!(
            "m_max = {m_max} needs more than {} nodes",
            2 * m_max
        )));
    }
    let grid = AngularGrid::new(trace.grid_n)?;
    let mut rows = Vec::new();
    for row in &trace.rows {
        let v: Vec<f64> = match (&row.perturbation, &row.snapshot) {
            (Some(v), _) => v.clone(),
            (None, Some(u)) => u.iter().map(|u| u - 1.0).collect(),
            (None, None) => continue,
        };
        let (a, b) = grid.ops().real_modes(&v, m_max);
        let (rho, q) = rho_q(&a, &b, k);
        rows.push(ModeRow {
            tau: row.time,
            a,
            b,
            rho,
            q,
        });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("trace holds no snapshots".into()));
    }
    Ok(ModeTrace {
        k,
        alpha: trace.alpha,
        m_max,
        rows,
    })
}

/// `C* = (1/6) k^2 (4 - k^2)`, checked in exact arithmetic against
/// `(alpha+1)[alpha - 2 + (2 alpha^2 - alpha)(1 - 4k^2)] / (4 alpha^2 [1 + alpha(1 - 4k^2)])`
/// and against the quasi-steady substitution into the `rho` equation, all
/// at `alpha = 1/(k^2 - 1)`.
pub fn cstar(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::OutOfRange(format!("k = {k} must be at least 3")));
    }
    let k2 = Ratio::from_integer((k * k) as i128);
    let one = Ratio::from_integer(1i128);
    let two = Ratio::from_integer(2i128);
    let four = Ratio::from_integer(4i128);
    let alpha = one / (k2 - one);
    let m = one - four * k2;

    let closed = k2 * (four - k2) / Ratio::from_integer(6);
    let rational = (alpha + one) * (alpha - two + (two * alpha * alpha - alpha) * m)
        / (four * alpha * alpha * (one + alpha * m));
    let lambda_2k = alpha * (four * k2 - one) - one;
    let quasi = (alpha + one)
        * (two / (four * alpha) - m * (alpha + one) / (four * alpha * lambda_2k)
            - (alpha + two) / (four * alpha * alpha));
    if closed != rational || closed != quasi {
        return Err(Error::MismatchBug(format!(
            "k = {k}: {closed} vs {rational} vs {quasi}"
        )));
    }
    Ok(*closed.numer() as f64 / *closed.denom() as f64)
}

/// Perturbation `eps cos k(theta - phase) + eps^2 / (4 alpha)` of the circle,
/// which puts the unstable `A_0` on its quasi-steady value; with `with_2k`
/// also `(A_2k, B_2k)` on theirs.
pub fn slow_manifold_perturbation(
    grid: &AngularGrid,
    k: usize,
    eps: f64,
    phase: f64,
    with_2k: bool,
) -> Result<SupportFunction> {
    let alpha = critical_alpha(k);
    let rho = eps * eps;
    let a0 = rho / (4.0 * alpha);
    let a2k = if with_2k {
        -(alpha + 1.0) / (4.0 * alpha * circle_lambda(alpha, 2 * k)) * rho
    } else {
        0.0
    };
    let kf = k as f64;
    SupportFunction::from_fn(grid, |t| {
        let s = kf * (t - phase);
        a0 + eps * s.cos() + a2k * (2.0 * s).cos()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    /// Residuals are divided by `rho^scale_power`.
    pub scale_power: f64,
    pub tau: Vec<f64>,
    pub measured_lhs: Vec<f64>,
    pub model_rhs: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
    pub rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub k: usize,
    pub alpha: f64,
    pub window: (f64, f64),
    pub entries: Vec<ResidualEntry>,
}

impl ResidualReport {
    pub fn entry(&self, name: &str) -> Option<&ResidualEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Row indices usable for 4th-order centred differences, inside `window`
/// and with `rho` within a factor 2 of its initial value.
fn usable(trace: &ModeTrace, window: Option<(f64, f64)>) -> Result<(Vec<usize>, f64)> {
    let rows = &trace.rows;
    if rows.len() < 5 {
        return Err(Error::InsufficientData(format!("{} rows, need 5", rows.len())));
    }
    let dtau = rows[1].tau - rows[0].tau;
    if rows.windows(2).any(|p| ((p[1].tau - p[0].tau) - dtau).abs() > 1e-9 * dtau) {
        return Err(Error::InsufficientData("samples are not uniform in tau".into()));
    }
    let max_rho = rows.iter().map(|r| r.rho).fold(0.0, f64::max);
    if max_rho >= 1e-2 {
        return Err(Error::TooLarge(format!("max rho = {max_rho:.3e} exceeds 1e-2")));
    }
    let rho0 = rows[0].rho;
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let idx: Vec<usize> = (2..rows.len() - 2)
        .filter(|&i| {
            let r = &rows[i];
            r.tau >= lo - 1e-12 && r.tau <= hi + 1e-12 && r.rho >= 0.5 * rho0 && r.rho <= 2.0 * rho0
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::InsufficientData("no rows inside the window".into()));
    }
    Ok((idx, dtau))
}

fn derivative(f: impl Fn(&ModeRow) -> f64, rows: &[ModeRow], i: usize, dtau: f64) -> f64 {
    (f(&rows[i - 2]) - 8.0 * f(&rows[i - 1]) + 8.0 * f(&rows[i + 1]) - f(&rows[i + 2])) / (12.0 * dtau)
}

fn entry(
    name: &str,
    scale_power: f64,
    trace: &ModeTrace,
    idx: &[usize],
    dtau: f64,
    value: impl Fn(&ModeRow) -> f64,
    model: impl Fn(&ModeRow) -> f64,
) -> ResidualEntry {
    let rows = &trace.rows;
    let mut out = ResidualEntry {
        name: name.to_string(),
        scale_power,
        tau: Vec::with_capacity(idx.len()),
        measured_lhs: Vec::with_capacity(idx.len()),
        model_rhs: Vec::with_capacity(idx.len()),
        residual: Vec::with_capacity(idx.len()),
        max_abs: 0.0,
        rms: 0.0,
    };
    for &i in idx {
        let lhs = derivative(&value, rows, i, dtau);
        let rhs = model(&rows[i]);
        let r = (lhs - rhs) / rows[i].rho.powf(scale_power);
        out.tau.push(rows[i].tau);
        out.measured_lhs.push(lhs);
        out.model_rhs.push(rhs);
        out.residual.push(r);
        out.max_abs = out.max_abs.max(r.abs());
        out.rms += r * r;
    }
    out.rms = (out.rms / idx.len() as f64).sqrt();
    out
}

/// Residuals of the `A_0`, `A_2k`, `B_2k` equations, divided by `rho`.
pub fn residual_linear_modes(trace: &ModeTrace, window: Option<(f64, f64)>) -> Result<ResidualReport> {
    let (idx, dtau) = usable(trace, window)?;
    let (k, alpha) = (trace.k, trace.alpha);
    let l0 = -alpha - 1.0;
    let l2k = circle_lambda(alpha, 2 * k);
    let c = (alpha + 1.0) / (4.0 * alpha);
    let entries = vec![
        entry("A0", 1.0, trace, &idx, dtau, |r| r.a[0], |r| -l0 * r.a[0] - c * r.rho),
        entry(
            "A2k",
            1.0,
            trace,
            &idx,
            dtau,
            |r| r.a[2 * k],
            |r| -l2k * r.a[2 * k] - c * (r.a[k] * r.a[k] - r.b[k] * r.b[k]),
        ),
        entry(
            "B2k",
            1.0,
            trace,
            &idx,
            dtau,
            |r| r.b[2 * k],
            |r| -l2k * r.b[2 * k] - 2.0 * c * r.a[k] * r.b[k],
        ),
    ];
    Ok(ResidualReport {
        k,
        alpha,
        window: (trace.rows[idx[0]].tau, trace.rows[idx[idx.len() - 1]].tau),
        entries,
    })
}

/// Residuals of the `A_k`, `B_k` (divided by `rho^{3/2}`) and `rho`, `Q`
/// (divided by `rho^2`) equations.
pub fn residual_neutral_modes(trace: &ModeTrace, window: Option<(f64, f64)>) -> Result<ResidualReport> {
    let (idx, dtau) = usable(trace, window)?;
    let (k, alpha) = (trace.k, trace.alpha);
    let ap = 1.0 + alpha;
    let m = 1.0 - 4.0 * (k * k) as f64;
    let cubic = ap * (alpha + 2.0) / (8.0 * alpha * alpha);
    let l2k = circle_lambda(alpha, 2 * k);
    let entries = vec![
        entry(
            "Ak",
            1.5,
            trace,
            &idx,
            dtau,
            |r| r.a[k],
            |r| {
                ap * r.a[0] * r.a[k] + 0.5 * ap * m * (r.a[k] * r.a[2 * k] + r.b[k] * r.b[2 * k])
                    - cubic * r.a[k] * r.rho
            },
        ),
        entry(
            "Bk",
            1.5,
            trace,
            &idx,
            dtau,
            |r| r.b[k],
            |r| {
                ap * r.a[0] * r.b[k] + 0.5 * ap * m * (r.a[k] * r.b[2 * k] - r.b[k] * r.a[2 * k])
                    - cubic * r.b[k] * r.rho
            },
        ),
        entry(
            "rho",
            2.0,
            trace,
            &idx,
            dtau,
            |r| r.rho,
            |r| ap * (2.0 * r.a[0] * r.rho + m * r.q - (alpha + 2.0) / (4.0 * alpha * alpha) * r.rho * r.rho),
        ),
        entry(
            "Q",
            2.0,
            trace,
            &idx,
            dtau,
            |r| r.q,
            |r| {
                let e2k = r.a[2 * k] * r.a[2 * k] + r.b[2 * k] * r.b[2 * k];
                -l2k * r.q - (alpha + 1.0) / (4.0 * alpha) * r.rho * r.rho
                    + 2.0 * ap * r.a[0] * r.q
                    + ap * m * r.rho * e2k
                    - 2.0 * cubic * r.rho * r.q
            },
        ),
    ];
    Ok(ResidualReport {
        k,
        alpha,
        window: (trace.rows[idx[0]].tau, trace.rows[idx[idx.len() - 1]].tau),
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiSteady {
    /// Largest `|A_0 - rho/(4 alpha)| / (rho/(4 alpha))` after `tau_min`.
    pub a0_relative: f64,
    /// Largest `|Q - Q*| / |Q*|` with `Q* = -(alpha+1)/(4 alpha lambda_2k) rho^2`.
    pub q_relative: f64,
    pub rows_used: usize,
}

/// Distance of `A_0` and `Q` from their quasi-steady values.
pub fn quasi_steady(trace: &ModeTrace, tau_min: f64) -> Result<QuasiSteady> {
    let alpha = trace.alpha;
    let l2k = circle_lambda(alpha, 2 * trace.k);
    let mut out = QuasiSteady {
        a0_relative: 0.0,
        q_relative: 0.0,
        rows_used: 0,
    };
    for r in trace.rows.iter().filter(|r| r.tau >= tau_min) {
        let a0 = r.rho / (4.0 * alpha);
        let q = -(alpha + 1.0) / (4.0 * alpha * l2k) * r.rho * r.rho;
        out.a0_relative = out.a0_relative.max((r.a[0] - a0).abs() / a0);
        out.q_relative = out.q_relative.max((r.q - q).abs() / q.abs());
        out.rows_used += 1;
    }
    if out.rows_used == 0 {
        return Err(Error::InsufficientData(format!("no rows after tau = {tau_min}")));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CstarMeasurement {
    /// Mean of `d rho/d tau / rho^2` over the window.
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

/// `d rho / d tau / rho^2` from centred differences over `window`.
pub fn measure_cstar(trace: &ModeTrace, window: (f64, f64)) -> Result<CstarMeasurement> {
    let (idx, dtau) = usable(trace, Some(window))?;
    let vals: Vec<f64> = idx
        .iter()
        .map(|&i| derivative(|r| r.rho, &trace.rows, i, dtau) / trace.rows[i].rho.powi(2))
        .collect();
    Ok(CstarMeasurement {
        value: vals.iter().sum::<f64>() / vals.len() as f64,
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: vals.len(),
        window: (trace.rows[idx[0]].tau, trace.rows[idx[idx.len() - 1]].tau),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEnergies {
    pub tau: f64,
    pub u_minus: f64,
    pub u_zero: f64,
    pub u_plus: f64,
    pub remainder: f64,
}

/// `(||P_- v||_h^2, ||P_0 v||_h^2, ||P_+ v||_h^2)` along a trace.
pub fn projection_norm_series(trace: &FlowTrace, d: &SpectralDecomposition) -> Result<Vec<ProjectionEnergies>> {
    let mut out = Vec::new();
    for row in &trace.rows {
        let v: Vec<f64> = match (&row.perturbation, &row.snapshot) {
            (Some(v), _) => v.clone(),
            (None, Some(u)) => u.iter().map(|u| u - 1.0).collect(),
            (None, None) => continue,
        };
        let p = project(&v, d)?;
        out.push(ProjectionEnergies {
            tau: row.time,
            u_minus: p.norm_minus * p.norm_minus,
            u_zero: p.norm_zero * p.norm_zero,
            u_plus: p.norm_plus * p.norm_plus,
            remainder: p.remainder,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cstar_values() {
        assert_eq!(cstar(3).unwrap(), -7.5);
        assert_eq!(cstar(4).unwrap(), -32.0);
        assert_eq!(cstar(5).unwrap(), -87.5);
        for k in 3..=12 {
            let c = cstar(k).unwrap();
            let kf = (k * k) as f64;
            assert_eq!(c, kf * (4.0 - kf) / 6.0);
        }
        assert!(cstar(2).is_err());
    }

    #[test]
    fn rho_and_q_from_modes() {
        let mut a = vec![0.0; 7];
        let mut b = vec![0.0; 7];
        a[3] = 0.3;
        b[3] = 0.4;
        a[6] = 0.1;
        b[6] = -0.2;
        let (rho, q) = rho_q(&a, &b, 3);
        assert!((rho - 0.25).abs() < 1e-15);
        assert!((q - ((0.09 - 0.16) * 0.1 + 2.0 * 0.12 * -0.2)).abs() < 1e-15);
    }

    #[test]
    fn slow_manifold_data() {
        let g = AngularGrid::new(64).unwrap();
        let v = slow_manifold_perturbation(&g, 3, 1e-3, 0.0, true).unwrap();
        let (a, _) = g.ops().real_modes(v.values(), 6);
        assert!((a[0] - 1e-6 / (4.0 / 8.0)).abs() < 1e-18);
        assert!((a[3] - 1e-3).abs() < 1e-16);
        let l6 = 0.125 * 35.0 - 1.0;
        assert!((a[6] + 1.125 / (0.5 * l6) * 1e-6).abs() < 1e-18);
    }
}
