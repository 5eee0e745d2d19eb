//! Dormand–Prince 5(4) integrator with dense output and event location.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step together with its continuous extension.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rc: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            let r = &self.rc;
            *yi = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        y
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Dense solution over `[t_start, t_end]`.
#[derive(Clone, Debug)]
pub struct Trajectory<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub t_start: f64,
    pub t_end: f64,
    pub y_start: [f64; N],
    pub y_end: [f64; N],
}

impl<const N: usize> Trajectory<N> {
    /// Interpolated state; `t` is clamped to the covered interval.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if t <= self.t_start {
            return self.y_start;
        }
        if t >= self.t_end {
            return self.y_end;
        }
        let idx = self.steps.partition_point(|s| s.t1() < t);
        let idx = idx.min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }

    /// States at the step boundaries (including both ends).
    pub fn nodes(&self) -> Vec<(f64, [f64; N])> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push((self.t_start, self.y_start));
        for s in &self.steps[..self.steps.len().saturating_sub(1)] {
            out.push((s.t1(), s.eval(s.t1())));
        }
        out.push((self.t_end, self.y_end));
        out
    }
}

/// Location of a detected event.
#[derive(Clone, Copy, Debug)]
pub struct Event<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-14,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

struct Stepped<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: f64,
    dense: DenseStep<N>,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn step<F, const N: usize>(&self, f: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Stepped<N>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y1);

        let mut err = 0.0;
        let mut rc = [[0.0; N]; 5];
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
            let dy = y1[i] - y[i];
            rc[0][i] = y[i];
            rc[1][i] = dy;
            rc[2][i] = h * k1[i] - dy;
            rc[3][i] = dy - h * k7[i] - rc[2][i];
            rc[4][i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Stepped {
            y1,
            k7,
            err: (err / N as f64).sqrt(),
            dense: DenseStep { t0: t, h, rc },
        }
    }

    /// Integrate from `t0` to `t_end`.
    pub fn integrate<F, const N: usize>(&self, f: F, t0: f64, y0: [f64; N], t_end: f64) -> Result<Trajectory<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let (traj, _) = self.run(&f, t0, y0, t_end, None::<&fn(f64, &[f64; N]) -> f64>)?;
        Ok(traj)
    }

    /// Integrate until `event` crosses zero from below, or until `t_limit`.
    /// The crossing is polished by re-stepping from the start of the
    /// bracketing step, so the event time carries the integrator's accuracy.
    pub fn integrate_until<F, G, const N: usize>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t_limit: f64,
        event: G,
    ) -> Result<(Trajectory<N>, Option<Event<N>>)>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        G: Fn(f64, &[f64; N]) -> f64,
    {
        self.run(&f, t0, y0, t_limit, Some(&event))
    }

    fn run<F, G, const N: usize>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        event: Option<&G>,
    ) -> Result<(Trajectory<N>, Option<Event<N>>)>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        G: Fn(f64, &[f64; N]) -> f64,
    {
        let span = t_end - t0;
        let mut h = self.h_init.min(span).min(self.h_max);
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut g_prev = event.map(|g| g(t, &y));
        let mut steps: Vec<DenseStep<N>> = Vec::new();
        let mut n_steps = 0usize;
        let h_min = 1e-14 * span.abs().max(1.0);

        while t < t_end {
            if n_steps >= self.max_steps {
                return Err(Error::StepUnderflow { t });
            }
            n_steps += 1;
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }
            let st = self.step(f, t, &y, &k1, h);
            if !st.err.is_finite() || st.err > 1.0 {
                let fac = if st.err.is_finite() {
                    (0.9 * st.err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h *= fac;
                if h < h_min {
                    return Err(Error::StepUnderflow { t });
                }
                continue;
            }
            let t_new = if last { t_end } else { t + h };

            if let (Some(g), Some(gp)) = (event, g_prev) {
                let g_new = g(t_new, &st.y1);
                if gp < 0.0 && g_new >= 0.0 {
                    let (s, dense, y_ev) = self.polish(f, g, t, &y, &k1, h, &st.dense);
                    steps.push(dense);
                    let t_ev = t + s;
                    return Ok((
                        Trajectory {
                            steps,
                            t_start: t0,
                            t_end: t_ev,
                            y_start: y0,
                            y_end: y_ev,
                        },
                        Some(Event { t: t_ev, y: y_ev }),
                    ));
                }
                g_prev = Some(g_new);
            }

            steps.push(st.dense);
            t = t_new;
            y = st.y1;
            k1 = st.k7;
            let fac = (0.9 * st.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h = (h * fac).min(self.h_max);
        }
        Ok((
            Trajectory {
                steps,
                t_start: t0,
                t_end,
                y_start: y0,
                y_end: y,
            },
            None,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn polish<F, G, const N: usize>(
        &self,
        f: &F,
        g: &G,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
        dense: &DenseStep<N>,
    ) -> (f64, DenseStep<N>, [f64; N])
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        G: Fn(f64, &[f64; N]) -> f64,
    {
        // bracket on the continuous extension first
        let ge = |s: f64| g(t + s, &dense.eval(t + s));
        let (mut lo, mut hi) = (0.0, h);
        let (mut glo, mut ghi) = (ge(lo), ge(hi));
        for _ in 0..200 {
            let mid = if (ghi - glo).abs() > 0.0 {
                let sec = lo - glo * (hi - lo) / (ghi - glo);
                if sec > lo && sec < hi {
                    0.5 * (sec + 0.5 * (lo + hi))
                } else {
                    0.5 * (lo + hi)
                }
            } else {
                0.5 * (lo + hi)
            };
            let gm = ge(mid);
            if gm < 0.0 {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
                ghi = gm;
            }
            if hi - lo <= 1e-15 * (t.abs() + h) {
                break;
            }
        }
        // secant on exact single steps
        let gs = |s: f64| {
            let st = self.step(f, t, y, k1, s);
            (g(t + s, &st.y1), st)
        };
        let mut s0 = lo.max(0.5 * h * 1e-3);
        let mut s1 = hi;
        let (mut g0, _) = gs(s0);
        let (mut g1, mut st1) = gs(s1);
        for _ in 0..30 {
            if g1 == g0 {
                break;
            }
            let s2 = s1 - g1 * (s1 - s0) / (g1 - g0);
            if !s2.is_finite() || s2 <= 0.0 {
                break;
            }
            s0 = s1;
            g0 = g1;
            s1 = s2;
            let r = gs(s1);
            g1 = r.0;
            st1 = r.1;
            if (s1 - s0).abs() <= 1e-15 * (t.abs() + h) {
                break;
            }
        }
        (s1, st1.dense, st1.y1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_accuracy() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let traj = Dopri5::with_tolerances(1e-12, 1e-14)
            .integrate(f, 0.0, [1.0, 0.0], 10.0)
            .unwrap();
        assert!((traj.y_end[0] - 10f64.cos()).abs() < 1e-10);
        for i in 0..100 {
            let t = i as f64 * 0.1;
            let y = traj.eval(t);
            assert!((y[0] - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn event_locates_minimum_of_cosine() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (traj, ev) = Dopri5::with_tolerances(1e-12, 1e-14)
            .integrate_until(f, 0.0, [1.0, 0.0], 10.0, |_t, y| y[1])
            .unwrap();
        let ev = ev.unwrap();
        assert!((ev.t - std::f64::consts::PI).abs() < 1e-12);
        assert!((traj.t_end - ev.t).abs() == 0.0);
        assert!((ev.y[0] + 1.0).abs() < 1e-11);
    }

    #[test]
    fn no_event_reports_none() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let (_, ev) = Dopri5::default()
            .integrate_until(f, 0.0, [1.0], 1.0, |_t, y| y[0] - 2.0)
            .unwrap();
        assert!(ev.is_none());
    }
}
