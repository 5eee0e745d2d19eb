//! The linearized operator `L v = alpha h^{1+1/alpha} (v_tt + v) + v` at a
//! shrinker profile `h`, self-adjoint in the weighted inner product
//! `(v, w)_h = \int v w h^{-1-1/alpha}`.
//!
//! Eigenvalues are reported for `-L`, sorted ascending: negative ones count
//! unstable directions of the normalized flow.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{rhs_perturbation, run, FlowConfig};
use crate::geometry::SupportFunction;

/// `|lambda| <= KERNEL_TOL` counts as kernel.
pub const KERNEL_TOL: f64 = 1e-6;

/// `(v, w)_h` with weights `h^{-1-1/alpha}` on the grid.
#[derive(Clone, Debug)]
pub struct WeightedInnerProduct {
    pub alpha: f64,
    pub weights: Vec<f64>,
    spacing: f64,
}

impl WeightedInnerProduct {
    pub fn new(h: &SupportFunction, alpha: f64) -> Result<Self> {
        let weights: Vec<f64> = h.values().iter().map(|h| h.powf(-1.0 - 1.0 / alpha)).collect();
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::BadDomain("weights must be positive and finite; h must be positive".into()));
        }
        Ok(Self {
            alpha,
            weights,
            spacing: h.grid().spacing(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::GridMismatch {
                left: self.len(),
                right: v.len(),
            });
        }
        Ok(())
    }

    pub fn inner(&self, v: &[f64], w: &[f64]) -> Result<f64> {
        self.check(v)?;
        self.check(w)?;
        Ok(self.spacing * v.iter().zip(w).zip(&self.weights).map(|((v, w), q)| v * w * q).sum::<f64>())
    }

    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        Ok(self.inner(v, v)?.sqrt())
    }
}

/// `alpha h^{1+1/alpha} (v_tt + v) + v`.
pub fn apply_l(h: &SupportFunction, alpha: f64, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != h.len() {
        return Err(Error::GridMismatch {
            left: h.len(),
            right: v.len(),
        });
    }
    let x = h.grid().ops().radius_of_curvature(v);
    Ok(h.values()
        .iter()
        .zip(&x)
        .zip(v)
        .map(|((h, x), v)| alpha * h.powf(1.0 + 1.0 / alpha) * x + v)
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub alpha: f64,
    /// Eigenvalues of `-L`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenfunctions, orthonormal in `(.,.)_h`.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub morse_index: usize,
    pub kernel_dim: usize,
    /// Largest `||L phi + lambda phi||_h / (1 + |lambda|)` over retained pairs.
    pub max_residual: f64,
    pub weights: Vec<f64>,
    pub spacing: f64,
}

impl SpectralDecomposition {
    pub fn inner_product(&self) -> WeightedInnerProduct {
        WeightedInnerProduct {
            alpha: self.alpha,
            weights: self.weights.clone(),
            spacing: self.spacing,
        }
    }

    /// Indices of the kernel eigenpairs.
    pub fn kernel(&self) -> Vec<usize> {
        (0..self.eigenvalues.len())
            .filter(|&j| self.eigenvalues[j].abs() <= KERNEL_TOL)
            .collect()
    }
}

/// Eigendecomposition of `-L` at `h`, keeping the lowest `j_max` pairs
/// (all of them when `None`).
pub fn decompose(h: &SupportFunction, alpha: f64, j_max: Option<usize>) -> Result<SpectralDecomposition> {
    let ip = WeightedInnerProduct::new(h, alpha)?;
    let n = h.len();
    let d2 = h.grid().ops().second_derivative_matrix();
    // S = -(alpha W^{-1/2} (D2 + I) W^{-1/2} + I), similar to -L
    let root: Vec<f64> = ip.weights.iter().map(|w| w.sqrt().recip()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        -(alpha * root[i] * (d2[i * n + j] + identity) * root[j] + identity)
    });
    let eig = SymmetricEigen::try_new(s, 1e-15, 100_000)
        .ok_or_else(|| Error::EigenFailed("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let keep = j_max.unwrap_or(n).min(n);
    let scale = ip.spacing.sqrt().recip();
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut eigenfunctions: Vec<Vec<f64>> = order
        .iter()
        .take(keep)
        .map(|&j| (0..n).map(|i| eig.eigenvectors[(i, j)] * root[i] * scale).collect())
        .collect();
    fix_phases(h, &eigenvalues[..keep], &mut eigenfunctions, &ip)?;

    let mut max_residual: f64 = 0.0;
    for (lambda, phi) in eigenvalues.iter().zip(&eigenfunctions) {
        let lphi = apply_l(h, alpha, phi)?;
        let r: Vec<f64> = lphi.iter().zip(phi).map(|(a, b)| a + lambda * b).collect();
        max_residual = max_residual.max(ip.norm(&r)? / (1.0 + lambda.abs()));
    }
    let morse_index = eigenvalues.iter().filter(|&&l| l < -KERNEL_TOL).count();
    let kernel_dim = eigenvalues.iter().filter(|&&l| l.abs() <= KERNEL_TOL).count();
    Ok(SpectralDecomposition {
        alpha,
        eigenvalues: eigenvalues.into_iter().take(keep).collect(),
        eigenfunctions,
        morse_index,
        kernel_dim,
        max_residual,
        spacing: ip.spacing,
        weights: ip.weights,
    })
}

fn odd_part(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| 0.5 * (v[i] - v[(n - i) % n])).collect()
}

/// Rotate degenerate pairs so the first member is even about `theta = 0`,
/// then make the first significant Fourier coefficient (cosine before sine,
/// lowest `m` first) positive.
fn fix_phases(
    h: &SupportFunction,
    eigenvalues: &[f64],
    phis: &mut [Vec<f64>],
    ip: &WeightedInnerProduct,
) -> Result<()> {
    let mut j = 0;
    while j + 1 < phis.len() {
        let (a, b) = (eigenvalues[j], eigenvalues[j + 1]);
        if (a - b).abs() > 1e-8 * (1.0 + a.abs()) {
            j += 1;
            continue;
        }
        let (oa, ob) = (odd_part(&phis[j]), odd_part(&phis[j + 1]));
        let gaa = ip.inner(&oa, &oa)?;
        let gab = ip.inner(&oa, &ob)?;
        let gbb = ip.inner(&ob, &ob)?;
        // direction (c, s) minimizing the odd energy of c phi_a + s phi_b
        let angle = 0.5 * (2.0 * gab).atan2(gaa - gbb) + 0.5 * std::f64::consts::PI;
        let (s, c) = angle.sin_cos();
        let even: Vec<f64> = phis[j].iter().zip(&phis[j + 1]).map(|(p, q)| c * p + s * q).collect();
        let odd: Vec<f64> = phis[j].iter().zip(&phis[j + 1]).map(|(p, q)| -s * p + c * q).collect();
        phis[j] = even;
        phis[j + 1] = odd;
        j += 2;
    }
    let ops = h.grid().ops();
    let m_max = h.len() / 2 - 1;
    for phi in phis.iter_mut() {
        let (a, b) = ops.real_modes(phi, m_max);
        let peak = a.iter().chain(&b).fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = (0..=m_max)
            .flat_map(|m| [a[m], b[m]])
            .find(|c| c.abs() > 1e-6 * peak)
            .unwrap_or(0.0);
        if lead < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(())
}

/// Closed-form spectrum of `-L` at the unit circle for `l = 0..=l_max`,
/// with multiplicity: `-alpha - 1` once, then `alpha (l^2 - 1) - 1` twice.
pub fn circle_eigenvalues(alpha: f64, l_max: usize) -> Vec<f64> {
    let mut out = vec![-alpha - 1.0];
    for l in 1..=l_max {
        let v = alpha * ((l * l) as f64 - 1.0) - 1.0;
        out.push(v);
        out.push(v);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    pub norm_minus: f64,
    pub norm_zero: f64,
    pub norm_plus: f64,
    /// `||v||_h^2` not captured by the retained basis.
    pub remainder: f64,
}

/// Coefficients `(v, phi_j)_h` and the norms of the unstable, neutral and
/// stable parts.
pub fn project(v: &[f64], d: &SpectralDecomposition) -> Result<Projection> {
    let ip = d.inner_product();
    let coefficients = d
        .eigenfunctions
        .iter()
        .map(|phi| ip.inner(v, phi))
        .collect::<Result<Vec<f64>>>()?;
    let (mut minus, mut zero, mut plus) = (0.0, 0.0, 0.0);
    for (c, l) in coefficients.iter().zip(&d.eigenvalues) {
        if *l < -KERNEL_TOL {
            minus += c * c;
        } else if *l <= KERNEL_TOL {
            zero += c * c;
        } else {
            plus += c * c;
        }
    }
    let total = ip.inner(v, v)?;
    Ok(Projection {
        coefficients,
        norm_minus: f64::sqrt(minus),
        norm_zero: f64::sqrt(zero),
        norm_plus: f64::sqrt(plus),
        remainder: total - minus - zero - plus,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub rate: f64,
    /// `(tau, (v, phi)_h)` over the fitted window.
    pub series: Vec<(f64, f64)>,
    /// `||E(v)||_h / max(||L v||_h, ||v||_h)` at mid-window.
    pub nonlinearity: f64,
}

/// Growth rate of the `j`-th eigendirection of `-L` at `h`.
pub fn measure_growth_rate(
    h: &SupportFunction,
    alpha: f64,
    j: usize,
    epsilon: f64,
    tau_window: (f64, f64),
) -> Result<GrowthRate> {
    let d = decompose(h, alpha, Some(j + 1))?;
    let phi = d.eigenfunctions.get(j).ok_or_else(|| Error::OutOfRange(format!("no eigenpair {j}")))?;
    measure_growth_rate_along(h, alpha, phi, epsilon, tau_window)
}

/// Growth rate of `(v, phi)_h` for the flow started from `h + epsilon phi`,
/// `phi` normalized in `(.,.)_h` first.
pub fn measure_growth_rate_along(
    h: &SupportFunction,
    alpha: f64,
    direction: &[f64],
    epsilon: f64,
    tau_window: (f64, f64),
) -> Result<GrowthRate> {
    let ip = WeightedInnerProduct::new(h, alpha)?;
    let norm = ip.norm(direction)?;
    let phi: Vec<f64> = direction.iter().map(|v| v / norm).collect();
    let (t0, t1) = tau_window;
    if !(t1 > t0 && t0 >= 0.0) {
        return Err(Error::BadConfig(format!("bad window [{t0}, {t1}]")));
    }
    let samples = 40usize;
    let dtau = (t1 - t0) / samples as f64;
    let v0 = SupportFunction::new(h.grid().clone(), phi.iter().map(|p| epsilon * p).collect())?;
    let mut cfg = FlowConfig::perturbation(alpha, h.clone(), v0, t1);
    cfg.dt = 1e-3;
    cfg.sample_interval = Some(dtau.min(t0.max(dtau)));
    cfg.snapshot_every = 1;
    cfg.stop_min_radius = 0.0;
    let trace = run(&cfg)?;
    let mut series = Vec::new();
    let mut mid: Option<(f64, Vec<f64>)> = None;
    let centre = 0.5 * (t0 + t1);
    for row in &trace.rows {
        if row.time < t0 - 1e-12 || row.time > t1 + 1e-12 {
            continue;
        }
        let v = row.perturbation.as_ref().expect("perturbation snapshots");
        series.push((row.time, ip.inner(v, &phi)?));
        if mid.as_ref().is_none_or(|(t, _)| (row.time - centre).abs() < (t - centre).abs()) {
            mid = Some((row.time, v.clone()));
        }
    }
    if series.len() < 3 || (series.last().expect("nonempty").0 - t1).abs() > 1e-9 {
        return Err(Error::InsufficientData(format!(
            "flow ended ({}) before the window closed",
            trace.terminal_reason
        )));
    }
    let (_, v_mid) = mid.expect("window holds samples");
    let lv = apply_l(h, alpha, &v_mid)?;
    let full = rhs_perturbation(h, alpha, &v_mid)?;
    let e: Vec<f64> = full.iter().zip(&lv).map(|(f, l)| f - l).collect();
    let nonlinearity = ip.norm(&e)? / ip.norm(&lv)?.max(ip.norm(&v_mid)?);
    if nonlinearity > 0.1 {
        return Err(Error::WindowEscaped(format!(
            "nonlinear part is {:.1}% of the linear part at tau = {centre}",
            100.0 * nonlinearity
        )));
    }
    if series.iter().any(|(_, c)| *c == 0.0 || c.signum() != series[0].1.signum()) {
        return Err(Error::WindowEscaped("projection changed sign inside the window".into()));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|(t, c)| (*t, c.abs().ln())).collect();
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sty: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let stt: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    Ok(GrowthRate {
        rate: sty / stt,
        series,
        nonlinearity,
    })
}
