//! The entropy functional of a convex body and its maximization over base
//! points.
//!
//! For `alpha != 1`
//! `E(z) = alpha/(alpha-1) log(mean u_z^{1-1/alpha}) - 1/2 log(A/pi)`,
//! and for `alpha == 1` the log-mean branch `mean log u_z - 1/2 log(A/pi)`,
//! where `u_z = u - z.e` is the support function seen from `z`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SupportFunction;

/// Probes whose translated support dips below this (relative to the mean
/// support) are rejected as outside.
pub const BOUNDARY_GUARD: f64 = 1e-10;
/// Gradient norm (scaled by the mean width) at which maximization stops.
pub const GRADIENT_TOL: f64 = 1e-9;
/// Evaluation budget of the maximizer.
pub const MAX_EVALUATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub value: f64,
    pub point: [f64; 2],
    pub evaluations: usize,
}

/// `E_alpha(u, z0)`.
pub fn entropy_at(u: &SupportFunction, z0: [f64; 2], alpha: f64) -> Result<f64> {
    let f = Functional::new(u, alpha)?;
    f.value(z0)
}

/// Maximize `E_alpha(u, .)` over interior base points.
pub fn entropy(u: &SupportFunction, alpha: f64) -> Result<EntropyResult> {
    Functional::new(u, alpha)?.maximize()
}

/// `E_alpha(u) <= log 2 (+1e-8)`.
pub fn check_subcritical_bound(u: &SupportFunction, alpha: f64) -> Result<bool> {
    if !(alpha > 0.0 && alpha <= 1.0 / 3.0 + 1e-15) {
        return Err(Error::OutOfRange(format!(
            "the log 2 bound is stated for alpha in (0, 1/3], got {alpha}"
        )));
    }
    Ok(entropy(u, alpha)?.value <= LN_2 + 1e-8)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    Ok(())
}

struct Functional<'a> {
    u: &'a [f64],
    cos: Vec<f64>,
    sin: Vec<f64>,
    alpha: f64,
    area_term: f64,
    scale: f64,
}

struct Local {
    value: f64,
    grad: [f64; 2],
    hess: [f64; 3],
}

impl<'a> Functional<'a> {
    fn new(u: &'a SupportFunction, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let area = u.area()?;
        let n = u.grid().len();
        let (sin, cos) = (0..n).map(|i| u.grid().theta(i).sin_cos()).unzip();
        Ok(Self {
            u: u.values(),
            cos,
            sin,
            alpha,
            area_term: 0.5 * (area / PI).ln(),
            scale: u.mean().abs(),
        })
    }

    fn translated(&self, z: [f64; 2]) -> Result<Vec<f64>> {
        let guard = BOUNDARY_GUARD * self.scale;
        let mut out = Vec::with_capacity(self.u.len());
        for i in 0..self.u.len() {
            let v = self.u[i] - z[0] * self.cos[i] - z[1] * self.sin[i];
            if !(v > guard) {
                return Err(Error::PointOutside { point: z });
            }
            out.push(v);
        }
        Ok(out)
    }

    fn value(&self, z: [f64; 2]) -> Result<f64> {
        Ok(self.local(z)?.value)
    }

    /// Value, gradient and Hessian (`[xx, xy, yy]`) at `z`.
    fn local(&self, z: [f64; 2]) -> Result<Local> {
        let uz = self.translated(z)?;
        let n = uz.len() as f64;
        let (mut m, mut gx, mut gy, mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        if (self.alpha - 1.0).abs() < 1e-15 {
            for (i, v) in uz.iter().enumerate() {
                let (c, s) = (self.cos[i], self.sin[i]);
                let inv = 1.0 / v;
                m += v.ln();
                gx -= c * inv;
                gy -= s * inv;
                let inv2 = inv * inv;
                hxx -= c * c * inv2;
                hxy -= c * s * inv2;
                hyy -= s * s * inv2;
            }
            return Ok(Local {
                value: m / n - self.area_term,
                grad: [gx / n, gy / n],
                hess: [hxx / n, hxy / n, hyy / n],
            });
        }
        let p = 1.0 - 1.0 / self.alpha;
        for (i, v) in uz.iter().enumerate() {
            let (c, s) = (self.cos[i], self.sin[i]);
            let vp = v.powf(p);
            let d1 = p * vp / v;
            let d2 = (p - 1.0) * d1 / v;
            m += vp;
            gx -= d1 * c;
            gy -= d1 * s;
            hxx += d2 * c * c;
            hxy += d2 * c * s;
            hyy += d2 * s * s;
        }
        let (m, gx, gy) = (m / n, gx / n, gy / n);
        let (hxx, hxy, hyy) = (hxx / n, hxy / n, hyy / n);
        let c = self.alpha / (self.alpha - 1.0);
        Ok(Local {
            value: c * m.ln() - self.area_term,
            grad: [c * gx / m, c * gy / m],
            hess: [
                c * (hxx / m - gx * gx / (m * m)),
                c * (hxy / m - gx * gy / (m * m)),
                c * (hyy / m - gy * gy / (m * m)),
            ],
        })
    }

    fn maximize(&self) -> Result<EntropyResult> {
        let mut evals = 0usize;
        let eval = |z: [f64; 2], evals: &mut usize| -> f64 {
            *evals += 1;
            self.value(z).unwrap_or(f64::NEG_INFINITY)
        };
        let start = steiner_point(self.u, &self.cos, &self.sin);
        let f0 = eval(start, &mut evals);
        if !f0.is_finite() {
            return Err(Error::OptimFailed("start point is not interior".into()));
        }
        let inradius = self.translated(start)?.into_iter().fold(f64::INFINITY, f64::min);

        // Nelder-Mead to land in the basin
        let step = 0.1 * inradius;
        let mut simplex = [
            (start, f0),
            ([start[0] + step, start[1]], 0.0),
            ([start[0], start[1] + step], 0.0),
        ];
        for v in simplex.iter_mut().skip(1) {
            v.1 = eval(v.0, &mut evals);
        }
        let coarse = 1e-4 * inradius;
        while evals < MAX_EVALUATIONS / 2 {
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            let diam = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| dist(simplex[i].0, simplex[j].0))
                .fold(0.0, f64::max);
            if diam < coarse {
                break;
            }
            let [best, mid, worst] = simplex;
            let centroid = lerp(best.0, mid.0, 0.5);
            let reflect = lerp(centroid, worst.0, -1.0);
            let fr = eval(reflect, &mut evals);
            if fr > best.1 {
                let expand = lerp(centroid, worst.0, -2.0);
                let fe = eval(expand, &mut evals);
                simplex[2] = if fe > fr { (expand, fe) } else { (reflect, fr) };
            } else if fr > mid.1 {
                simplex[2] = (reflect, fr);
            } else {
                let contract = if fr > worst.1 {
                    lerp(centroid, worst.0, -0.5)
                } else {
                    lerp(centroid, worst.0, 0.5)
                };
                let fc = eval(contract, &mut evals);
                if fc > worst.1.max(fr) {
                    simplex[2] = (contract, fc);
                } else {
                    for v in simplex.iter_mut().skip(1) {
                        v.0 = lerp(best.0, v.0, 0.5);
                        v.1 = eval(v.0, &mut evals);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (mut z, _) = simplex[0];

        // Newton polish with the analytic gradient and Hessian
        let mut here = self.local(z)?;
        evals += 1;
        let roundoff = |v: f64| 8.0 * f64::EPSILON * v.abs().max(1.0);
        while evals < MAX_EVALUATIONS {
            let gnorm = here.grad[0].hypot(here.grad[1]);
            if gnorm * self.scale < GRADIENT_TOL {
                return Ok(EntropyResult {
                    value: here.value,
                    point: z,
                    evaluations: evals,
                });
            }
            let [hxx, hxy, hyy] = here.hess;
            let det = hxx * hyy - hxy * hxy;
            let mut dir = if hxx < 0.0 && det > 0.0 {
                let d = [
                    -(hyy * here.grad[0] - hxy * here.grad[1]) / det,
                    -(-hxy * here.grad[0] + hxx * here.grad[1]) / det,
                ];
                // Newton step below the resolution of z: the gradient is at its roundoff floor
                if d[0].hypot(d[1]) <= 4.0 * f64::EPSILON * (z[0].hypot(z[1]) + self.scale) {
                    return Ok(EntropyResult {
                        value: here.value,
                        point: z,
                        evaluations: evals,
                    });
                }
                d
            } else {
                let s = 0.1 * inradius / gnorm;
                [s * here.grad[0], s * here.grad[1]]
            };
            let mut accepted = false;
            for _ in 0..60 {
                let trial = [z[0] + dir[0], z[1] + dir[1]];
                evals += 1;
                if let Ok(next) = self.local(trial) {
                    let shrinks = next.grad[0].hypot(next.grad[1]) < gnorm;
                    if next.value >= here.value - roundoff(here.value) || shrinks {
                        z = trial;
                        here = next;
                        accepted = true;
                        break;
                    }
                }
                dir = [0.5 * dir[0], 0.5 * dir[1]];
            }
            if !accepted {
                break;
            }
        }
        Err(Error::OptimFailed(format!(
            "gradient {:.3e} above tolerance after {evals} evaluations",
            here.grad[0].hypot(here.grad[1])
        )))
    }
}

fn steiner_point(u: &[f64], cos: &[f64], sin: &[f64]) -> [f64; 2] {
    let n = u.len() as f64;
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..u.len() {
        x += u[i] * cos[i];
        y += u[i] * sin[i];
    }
    [2.0 * x / n, 2.0 * y / n]
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AngularGrid;

    fn grid() -> AngularGrid {
        AngularGrid::new(256).unwrap()
    }

    #[test]
    fn unit_circle_is_zero() {
        let u = SupportFunction::circle(&grid(), 1.0);
        for alpha in [0.1, 0.5, 1.0] {
            assert!(entropy_at(&u, [0.0, 0.0], alpha).unwrap().abs() < 1e-14);
        }
        let r = entropy(&u, 0.25).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(r.point[0].abs() < 1e-9 && r.point[1].abs() < 1e-9);
    }

    #[test]
    fn scaled_circle_is_zero() {
        let u = SupportFunction::circle(&grid(), 2.0);
        assert!(entropy_at(&u, [0.0, 0.0], 0.3).unwrap().abs() < 1e-14);
    }

    #[test]
    fn shifted_circle() {
        let g = grid();
        let u = SupportFunction::from_fn(&g, |t| 1.0 + 0.3 * t.cos()).unwrap();
        let r = entropy(&u, 0.5).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!((r.point[0] - 0.3).abs() < 1e-9 && r.point[1].abs() < 1e-9);
    }

    #[test]
    fn near_boundary_blows_down() {
        let u = SupportFunction::circle(&grid(), 1.0);
        let a = entropy_at(&u, [0.9, 0.0], 0.5).unwrap();
        let b = entropy_at(&u, [0.99, 0.0], 0.5).unwrap();
        assert!(b < a && a < 0.0);
        assert!(matches!(
            entropy_at(&u, [1.0, 0.0], 0.5),
            Err(Error::PointOutside { .. })
        ));
    }

    #[test]
    fn ellipse_at_affine_critical_power() {
        let u = SupportFunction::ellipse(&grid(), 5.0, 1.0);
        let r = entropy(&u, 1.0 / 3.0).unwrap();
        assert!(r.value.abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let g = grid();
        let u = SupportFunction::from_fn(&g, |t| 1.0 + 0.1 * (2.0 * t).cos() + 0.05 * (3.0 * t).sin()).unwrap();
        for alpha in [0.2, 1.0] {
            let f = Functional::new(&u, alpha).unwrap();
            let z = [0.1, -0.05];
            let l = f.local(z).unwrap();
            let h = 1e-6;
            let dx = (f.value([z[0] + h, z[1]]).unwrap() - f.value([z[0] - h, z[1]]).unwrap()) / (2.0 * h);
            let dy = (f.value([z[0], z[1] + h]).unwrap() - f.value([z[0], z[1] - h]).unwrap()) / (2.0 * h);
            assert!((dx - l.grad[0]).abs() < 1e-8 && (dy - l.grad[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn bound_rejects_large_alpha() {
        let u = SupportFunction::circle(&grid(), 1.0);
        assert!(check_subcritical_bound(&u, 0.25).unwrap());
        assert!(check_subcritical_bound(&u, 0.5).is_err());
    }
}
