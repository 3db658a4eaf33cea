//! Largest Lyapunov exponent by tangent-space propagation with periodic
//! renormalization. The tangent vector evolves under the evolution matrix
//! evaluated along the flow.

use super::eom::{eom_rhs, StateVector};
use super::integrator::{Dopri5, IntegratorStats, Tolerances};
use super::DynamicsError;
use crate::model::{DeviceParams, Pump};
use crate::stability::evolution_matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSettings {
    /// Time spent aligning the tangent vector before accumulating.
    pub settle_s: f64,
    /// Time between renormalizations.
    pub renorm_interval_s: f64,
    /// Number of batches used for the standard error.
    pub batches: usize,
    pub tol: Tolerances,
}

impl LyapunovSettings {
    pub fn new(renorm_interval_s: f64) -> Self {
        Self {
            settle_s: 0.0,
            renorm_interval_s,
            batches: 20,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    /// Exponent in 1/s.
    pub exponent: f64,
    /// Standard error from batch means.
    pub std_error: f64,
    /// Running estimate after each renormalization: (elapsed s, exponent).
    pub history: Vec<(f64, f64)>,
    pub final_state: StateVector,
    pub stats: IntegratorStats,
}

impl LyapunovEstimate {
    /// Whether the exponent is positive by at least `sigmas` standard errors.
    pub fn positive_with(&self, sigmas: f64) -> bool {
        self.exponent > sigmas * self.std_error
    }

    /// Whether zero lies within `sigmas` standard errors.
    pub fn consistent_with_zero(&self, sigmas: f64) -> bool {
        self.exponent.abs() <= sigmas * self.std_error
    }
}

fn augmented<'a>(
    params: &'a DeviceParams,
    pump: &Pump,
) -> impl Fn(f64, &[f64; 8]) -> [f64; 8] + 'a {
    let pump = *pump;
    move |_t, y| {
        let s = StateVector::new(y[0], y[1], y[2], y[3]);
        let f = eom_rhs(&s, params, &pump).to_array();
        let m = evolution_matrix(&s, params, &pump);
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(&f);
        for i in 0..4 {
            out[4 + i] = (0..4).map(|j| m[(i, j)] * y[4 + j]).sum();
        }
        out
    }
}

/// Estimate the largest exponent starting from `state0`, integrating for
/// `settle_s + t_span` seconds.
pub fn lyapunov_max(
    params: &DeviceParams,
    pump: &Pump,
    state0: StateVector,
    t_span: f64,
    settings: &LyapunovSettings,
) -> Result<LyapunovEstimate, DynamicsError> {
    let tau = settings.renorm_interval_s;
    if !(tau > 0.0) || !(t_span > 0.0) || settings.batches < 2 {
        return Err(DynamicsError::InvalidInput(
            "need renorm interval > 0, t_span > 0, batches >= 2".into(),
        ));
    }
    let n_renorm = (t_span / tau).round() as usize;
    if n_renorm < 2 * settings.batches {
        return Err(DynamicsError::LyapunovNonConvergence(format!(
            "only {n_renorm} renormalizations for {} batches",
            settings.batches
        )));
    }
    let n_settle = (settings.settle_s / tau).ceil() as usize;
    let sys = augmented(params, pump);
    let mut solver = Dopri5::new(settings.tol);
    let mut stats = IntegratorStats::default();

    let mut y = [0.0; 8];
    y[..4].copy_from_slice(&state0.to_array());
    y[4..].copy_from_slice(&[0.5; 4]);
    let mut t = 0.0;
    let mut logs = Vec::with_capacity(n_renorm);
    let mut history = Vec::with_capacity(n_renorm);
    let mut sum = 0.0;
    for k in 0..n_settle + n_renorm {
        let (y1, h) = solver.integrate(&sys, t, y, t + tau, &[], |_, _| {}, &mut stats)?;
        solver.first_step = Some(h);
        t += tau;
        y = y1;
        let norm = y[4..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(DynamicsError::LyapunovNonConvergence(format!(
                "tangent norm {norm} at t = {t:e}"
            )));
        }
        for v in &mut y[4..] {
            *v /= norm;
        }
        if k >= n_settle {
            let l = norm.ln();
            logs.push(l);
            sum += l;
            history.push((logs.len() as f64 * tau, sum / (logs.len() as f64 * tau)));
        }
    }

    let exponent = sum / (n_renorm as f64 * tau);
    let per_batch = n_renorm / settings.batches;
    let means: Vec<f64> = logs
        .chunks_exact(per_batch)
        .take(settings.batches)
        .map(|c| c.iter().sum::<f64>() / (c.len() as f64 * tau))
        .collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0);
    Ok(LyapunovEstimate {
        exponent,
        std_error: (var / means.len() as f64).sqrt(),
        history,
        final_state: StateVector::new(y[0], y[1], y[2], y[3]),
        stats,
    })
}
