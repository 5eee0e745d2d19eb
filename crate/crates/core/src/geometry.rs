//! Closed convex curves represented by their support function sampled on a
//! uniform grid of normal angles.
//!
//! The radius of curvature is `w = u_tt + u = 1/kappa`; everything else
//! (area, length, embedding) is derived from `u` and `w` with the periodic
//! trapezoid rule, which is spectrally accurate for smooth curves.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierOps;

/// Strict convexity threshold relative to the mean support value.
pub const CONVEXITY_TOLERANCE: f64 = 1e-8;

/// Default number of grid nodes.
pub const DEFAULT_N: usize = 256;

/// Uniform grid `theta_i = 2 pi i / n` on the circle of normal angles.
#[derive(Clone, Debug)]
pub struct AngularGrid {
    n: usize,
    ops: Arc<FourierOps>,
}

impl PartialEq for AngularGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl AngularGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::BadGrid(format!(
                "need an even number of nodes >= 16, got {n}"
            )));
        }
        Ok(Self {
            n,
            ops: Arc::new(FourierOps::new(n)),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.theta(i)).collect()
    }

    pub fn ops(&self) -> &FourierOps {
        &self.ops
    }

    /// Periodic trapezoid rule for `\int_0^{2 pi} f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.spacing()
    }

    /// Average `(1/2 pi) \int f`.
    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / self.n as f64
    }

    pub fn check_same(&self, other: &AngularGrid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub min_radius_of_curvature: f64,
    pub max_radius_of_curvature: f64,
    pub is_strictly_convex: bool,
}

/// Real Fourier coefficients `u = a0 + sum a_m cos(m t) + b_m sin(m t)`.
/// Index `m` addresses mode `m`; `a[0]` is the mean and `b[0]` is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierModes {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierModes {
    pub fn m_max(&self) -> usize {
        self.a.len() - 1
    }
}

/// Support function values `u(theta_i)` on an [`AngularGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SupportFunction {
    grid: AngularGrid,
    values: Vec<f64>,
}

impl SupportFunction {
    pub fn new(grid: AngularGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadGrid(format!("non-finite value at node {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &AngularGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::new(grid.clone(), values)
    }

    /// Circle of radius `r` centred at the origin.
    pub fn circle(grid: &AngularGrid, r: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![r; grid.len()],
        }
    }

    /// Centred ellipse with semi-axis `a` along x and `b` along y.
    pub fn ellipse(grid: &AngularGrid, a: f64, b: f64) -> Self {
        let values = grid
            .nodes()
            .into_iter()
            .map(|t| (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt())
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Build from real Fourier coefficients.
    pub fn synthesize(grid: &AngularGrid, modes: &FourierModes) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.ops().synthesize(&modes.a, &modes.b),
        }
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rotate the curve by `shift` grid steps: `u'(theta) = u(theta - shift * dtheta)`.
    pub fn rotated_by_nodes(&self, shift: usize) -> Self {
        let n = self.len();
        let values = (0..n).map(|i| self.values[(i + n - shift % n) % n]).collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `u_tt + u` by spectral differentiation.
    pub fn radius_of_curvature(&self) -> Vec<f64> {
        self.grid.ops().radius_of_curvature(&self.values)
    }

    pub fn derivative(&self) -> Vec<f64> {
        self.grid.ops().derivative(&self.values, 1)
    }

    pub fn convexity(&self) -> ConvexityReport {
        let w = self.radius_of_curvature();
        self.report_from(&w)
    }

    fn report_from(&self, w: &[f64]) -> ConvexityReport {
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ConvexityReport {
            min_radius_of_curvature: min,
            max_radius_of_curvature: max,
            is_strictly_convex: min > self.convexity_threshold(),
        }
    }

    fn convexity_threshold(&self) -> f64 {
        CONVEXITY_TOLERANCE * self.mean().abs()
    }

    /// Radius of curvature, or `NonConvex` when it is not safely positive.
    pub fn checked_radius_of_curvature(&self) -> Result<Vec<f64>> {
        let w = self.radius_of_curvature();
        let report = self.report_from(&w);
        if !report.is_strictly_convex {
            return Err(Error::NonConvex {
                min_radius: report.min_radius_of_curvature,
                tolerance: self.convexity_threshold(),
            });
        }
        Ok(w)
    }

    pub fn curvature(&self) -> Result<Vec<f64>> {
        Ok(self
            .checked_radius_of_curvature()?
            .into_iter()
            .map(|w| 1.0 / w)
            .collect())
    }

    /// Enclosed area `1/2 \int u (u_tt + u)`.
    pub fn area(&self) -> Result<f64> {
        let w = self.checked_radius_of_curvature()?;
        Ok(self.area_with(&w))
    }

    pub(crate) fn area_with(&self, w: &[f64]) -> f64 {
        let uw: Vec<f64> = self.values.iter().zip(w).map(|(u, w)| u * w).collect();
        0.5 * self.grid.integrate(&uw)
    }

    /// Perimeter `\int (u_tt + u) = \int u`.
    pub fn length(&self) -> Result<f64> {
        let w = self.checked_radius_of_curvature()?;
        Ok(self.grid.integrate(&w))
    }

    pub fn isoperimetric_ratio(&self) -> Result<f64> {
        let w = self.checked_radius_of_curvature()?;
        let l = self.grid.integrate(&w);
        Ok(self.area_with(&w) / (l * l))
    }

    /// Support function with respect to the base point `z`.
    pub fn translate(&self, z: [f64; 2]) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let t = self.grid.theta(i);
                u - (z[0] * t.cos() + z[1] * t.sin())
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Boundary points `X = u (cos, sin) + u_t (-sin, cos)`.
    pub fn embed(&self) -> Result<Vec<[f64; 2]>> {
        self.checked_radius_of_curvature()?;
        let du = self.derivative();
        Ok(self
            .values
            .iter()
            .zip(&du)
            .enumerate()
            .map(|(i, (u, ut))| {
                let (s, c) = self.grid.theta(i).sin_cos();
                [u * c - ut * s, u * s + ut * c]
            })
            .collect())
    }

    /// Steiner point `(1/pi) \int u (cos, sin)`, always interior for convex bodies.
    pub fn steiner_point(&self) -> [f64; 2] {
        let m = self.fourier_modes(1);
        [m.a[1], m.b[1]]
    }

    pub fn fourier_modes(&self, m_max: usize) -> FourierModes {
        assert!(
            m_max < self.len() / 2,
            "m_max {m_max} must be below n/2 = {}",
            self.len() / 2
        );
        let (a, b) = self.grid.ops().real_modes(&self.values, m_max);
        FourierModes { a, b }
    }
}
