//! Dormand–Prince 5(4) with step-size control and fourth-order dense output.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t:e} s")]
    StepUnderflow { t: f64 },
    #[error("state became non-finite at t = {t:e} s")]
    BlowUp { t: f64 },
    #[error("step budget exhausted at t = {t:e} s")]
    TooManySteps { t: f64 },
    #[error("invalid integration request: {0}")]
    InvalidInput(String),
}

/// A first-order system dy/dt = f(t, y).
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<F, const N: usize> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegratorStats {
    pub steps: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
    /// Largest accepted scaled error norm (1 means exactly at tolerance).
    pub max_error: f64,
    /// Sum over accepted steps of the max-norm of the local error estimate,
    /// a crude bound on the accumulated global error.
    pub error_estimate: f64,
}

impl IntegratorStats {
    pub fn merge(&mut self, other: &Self) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
        self.max_error = self.max_error.max(other.max_error);
        self.error_estimate += other.error_estimate;
    }
}

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

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let s: f64 = terms.iter().map(|(c, k)| c * k[i]).sum();
        *o += h * s;
    }
    out
}

/// Adaptive integrator. One instance can be reused for many calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub max_steps: u64,
    /// Initial step to try; chosen automatically when `None`.
    pub first_step: Option<f64>,
    /// Upper bound on the step size.
    pub max_step: f64,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            max_steps: 500_000_000,
            first_step: None,
            max_step: f64::INFINITY,
        }
    }

    fn err_norm<const N: usize>(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
        let sum: f64 = (0..N)
            .map(|i| {
                let sk = self.tol.atol + self.tol.rtol * y0[i].abs().max(y1[i].abs());
                (err[i] / sk).powi(2)
            })
            .sum();
        (sum / N as f64).sqrt()
    }

    fn initial_step<S: OdeSystem<N>, const N: usize>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64; N],
        f0: &[f64; N],
        span: f64,
    ) -> f64 {
        let norm = |v: &[f64; N]| {
            let s: f64 = (0..N)
                .map(|i| (v[i] / (self.tol.atol + self.tol.rtol * y[i].abs())).powi(2))
                .sum();
            (s / N as f64).sqrt()
        };
        let (d0, d1) = (norm(y), norm(f0));
        let h0 = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1 = combine(y, h0, &[(1.0, f0)]);
        let f1 = sys.rhs(t + h0, &y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = norm(&diff) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.max_step)
    }

    /// Integrate from `t0` to `t_end`, calling `on_sample(t, y)` at each time
    /// in `samples` (ascending, within `[t0, t_end]`). Returns the final state
    /// and the last accepted step size.
    pub fn integrate<S, F, const N: usize>(
        &self,
        sys: &S,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        samples: &[f64],
        mut on_sample: F,
        stats: &mut IntegratorStats,
    ) -> Result<([f64; N], f64), IntegrationError>
    where
        S: OdeSystem<N>,
        F: FnMut(f64, &[f64; N]),
    {
        if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(IntegrationError::InvalidInput(format!(
                "bad time span {t0}..{t_end}"
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationError::BlowUp { t: t0 });
        }
        let mut next_sample = 0;
        while next_sample < samples.len() && samples[next_sample] <= t0 {
            on_sample(samples[next_sample], &y0);
            next_sample += 1;
        }
        if t_end == t0 {
            return Ok((y0, self.first_step.unwrap_or(0.0)));
        }

        let span = t_end - t0;
        let (mut t, mut y) = (t0, y0);
        let mut k1 = sys.rhs(t, &y);
        stats.rhs_evals += 1;
        let mut h = match self.first_step {
            Some(h) if h > 0.0 => h.min(span).min(self.max_step),
            _ => {
                stats.rhs_evals += 1;
                self.initial_step(sys, t, &y, &k1, span)
            }
        };
        let mut last_h = h;
        let mut steps_here = 0u64;

        while t < t_end {
            if steps_here >= self.max_steps {
                return Err(IntegrationError::TooManySteps { t });
            }
            if h < 16.0 * f64::EPSILON * t.abs().max(span) {
                return Err(IntegrationError::StepUnderflow { t });
            }
            let final_step = t + h >= t_end;
            if final_step {
                h = t_end - t;
            }

            let k2 = sys.rhs(t + C2 * h, &combine(&y, h, &[(A21, &k1)]));
            let k3 = sys.rhs(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = sys.rhs(
                t + C4 * h,
                &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = sys.rhs(
                t + C5 * h,
                &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = sys.rhs(
                t + h,
                &combine(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = combine(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = sys.rhs(t + h, &y_new);
            stats.rhs_evals += 6;

            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let en = self.err_norm(&y, &y_new, &err);
            if !en.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                if h < 1e-6 * span {
                    return Err(IntegrationError::BlowUp { t });
                }
                stats.rejected += 1;
                h *= 0.1;
                continue;
            }

            if en <= 1.0 {
                let t_new = if final_step { t_end } else { t + h };
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let ts = samples[next_sample];
                    let theta = ((ts - t) / h).clamp(0.0, 1.0);
                    let theta1 = 1.0 - theta;
                    let mut ys = [0.0; N];
                    for i in 0..N {
                        let ydiff = y_new[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        let r4 = ydiff - h * k7[i] - bspl;
                        let r5 = h
                            * (D1 * k1[i]
                                + D3 * k3[i]
                                + D4 * k4[i]
                                + D5 * k5[i]
                                + D6 * k6[i]
                                + D7 * k7[i]);
                        ys[i] =
                            y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
                    }
                    on_sample(ts, &ys);
                    next_sample += 1;
                }
                stats.steps += 1;
                steps_here += 1;
                stats.max_error = stats.max_error.max(en);
                stats.error_estimate += err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
                t = t_new;
                y = y_new;
                k1 = k7;
                last_h = h;
                let fac = if en == 0.0 {
                    5.0
                } else {
                    (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h * fac).min(self.max_step);
            } else {
                stats.rejected += 1;
                h *= (0.9 * en.powf(-0.2)).max(0.2);
            }
        }
        Ok((y, last_h))
    }
}
