//! FFT-backed differentiation and real Fourier coefficients on a uniform
//! periodic grid.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Relative magnitude below which Fourier coefficients are treated as
/// roundoff before differentiation.
pub const ROUNDOFF_FILTER: f64 = 1e-14;

/// Forward/inverse FFT plans for one grid size.
#[derive(Clone)]
pub struct FourierOps {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierOps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierOps").field("n", &self.n).finish()
    }
}

/// Signed wavenumber of FFT bin `j` for an even-length transform.
fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

impl FourierOps {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized DFT `c_m = sum_j u_j exp(-i m theta_j)`.
    pub fn spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Spectrum of zero-mean data with coefficients at the roundoff floor
    /// (relative to the largest one) set to zero, so that differentiation
    /// does not amplify them by `k^2`.
    fn filtered_spectrum(&self, centred: &[f64]) -> Vec<Complex64> {
        let mut c = self.spectrum(centred);
        c[0] = Complex64::new(0.0, 0.0);
        let peak = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = ROUNDOFF_FILTER * peak;
        for z in c.iter_mut() {
            if z.norm() <= floor {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        c
    }

    fn back_to_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Spectral derivative of order `order`. Odd orders drop the Nyquist
    /// mode; even orders keep it as the real `cos(n theta / 2)` mode.
    pub fn derivative(&self, values: &[f64], order: u32) -> Vec<f64> {
        let n = self.n;
        let mean = values.iter().sum::<f64>() / n as f64;
        let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
        if order == 0 {
            return values.to_vec();
        }
        let mut c = self.filtered_spectrum(&centred);
        for (j, cj) in c.iter_mut().enumerate() {
            let k = wavenumber(j, n);
            if order % 2 == 1 && j == n / 2 {
                *cj = Complex64::new(0.0, 0.0);
                continue;
            }
            let factor = Complex64::new(0.0, k).powu(order);
            *cj *= factor;
        }
        self.back_to_real(c)
    }

    /// `u_tt + u`, the radius of curvature when `u` is a support function.
    pub fn radius_of_curvature(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n;
        // the mean passes through unchanged; removing it first keeps its
        // roundoff out of the k^2-amplified high modes
        let mean = values.iter().sum::<f64>() / n as f64;
        let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let mut c = self.filtered_spectrum(&centred);
        for (j, cj) in c.iter_mut().enumerate() {
            let k = wavenumber(j, n);
            *cj *= 1.0 - k * k;
        }
        self.back_to_real(c).into_iter().map(|w| w + mean).collect()
    }

    /// Real Fourier coefficients `(a, b)` for `m = 0..=m_max` with
    /// `a[0]` the mean and `a[m] = (1/pi) \int u cos(m theta)` for `m >= 1`.
    pub fn real_modes(&self, values: &[f64], m_max: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let c = self.spectrum(values);
        let mut a = Vec::with_capacity(m_max + 1);
        let mut b = Vec::with_capacity(m_max + 1);
        a.push(c[0].re / n);
        b.push(0.0);
        for cm in c.iter().take(m_max + 1).skip(1) {
            a.push(2.0 * cm.re / n);
            b.push(-2.0 * cm.im / n);
        }
        (a, b)
    }

    /// Inverse of [`FourierOps::real_modes`] for coefficient vectors of any
    /// length below `n / 2`.
    pub fn synthesize(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let nf = n as f64;
        if let Some(&a0) = a.first() {
            c[0] = Complex64::new(a0 * nf, 0.0);
        }
        let m_max = a.len().max(b.len());
        for m in 1..m_max {
            assert!(m < n / 2, "mode {m} not representable on {n} nodes");
            let am = a.get(m).copied().unwrap_or(0.0);
            let bm = b.get(m).copied().unwrap_or(0.0);
            let half = Complex64::new(am, -bm) * (nf / 2.0);
            c[m] = half;
            c[n - m] = half.conj();
        }
        self.back_to_real(c)
    }

    /// Fraction of spectral energy carried by the top third of the
    /// resolved wavenumbers.
    pub fn high_mode_fraction(&self, values: &[f64]) -> f64 {
        let n = self.n;
        let c = self.spectrum(values);
        let cutoff = (n / 2) * 2 / 3;
        let mut total = 0.0;
        let mut high = 0.0;
        for (j, cj) in c.iter().enumerate() {
            let e = cj.norm_sqr();
            total += e;
            if wavenumber(j, n).abs() as usize > cutoff {
                high += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            high / total
        }
    }

    /// Dense matrix of the spectral second derivative (row-major `n * n`),
    /// from the closed form for even `n`; exactly symmetric.
    pub fn second_derivative_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let diag = -std::f64::consts::PI.powi(2) / (3.0 * h * h) - 1.0 / 6.0;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = if i == j {
                    diag
                } else {
                    let d = i.abs_diff(j);
                    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                    let s = (0.5 * h * d as f64).sin();
                    -sign / (2.0 * s * s)
                };
            }
        }
        m
    }
}
