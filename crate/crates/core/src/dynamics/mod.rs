//! Nonlinear time evolution, spectral analysis of the output field,
//! response classification, Lyapunov exponents and the linearized
//! transient response to pulsed pumps.

pub mod attractor;
pub mod classify;
pub mod eom;
pub mod integrator;
pub mod lyapunov;
pub mod psd;
pub mod transient;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{DeviceParams, ModelError, Pump};
use crate::stability::StabilityError;
use eom::{eom_rhs, StateVector};
use integrator::{Dopri5, IntegrationError, IntegratorStats, Tolerances};

pub use attractor::{
    classify_attractor, classify_column, AttractorOutcome, AttractorSettings, ResponseCell,
};
pub use classify::{classify_response, ClassifierSettings, ResponseClass, ResponseLabel};
pub use lyapunov::{lyapunov_max, LyapunovEstimate, LyapunovSettings};
pub use psd::{output_psd, Psd, PsdSettings};
pub use transient::{transient_linear_response, LinearSegment, ProbeTone, TransientResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("series too short: {got} samples after trimming, need at least {need}")]
    SeriesTooShort { got: usize, need: usize },
    #[error(
        "ambiguous classification: {first:?} ({first_score:.3}) vs {second:?} ({second_score:.3})"
    )]
    Ambiguous {
        first: ResponseLabel,
        first_score: f64,
        second: ResponseLabel,
        second_score: f64,
    },
    #[error("Lyapunov estimate did not converge: {0}")]
    LyapunovNonConvergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cell at detuning {detuning_hz} Hz, power {power_dbm} dBm: {source}")]
    AtCell {
        detuning_hz: f64,
        power_dbm: f64,
        source: Box<DynamicsError>,
    },
}

/// One piece of a piecewise-constant pump schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSegment {
    pub duration_s: f64,
    pub pump: Pump,
}

/// Piecewise-constant pump starting at t = 0. The last segment extends
/// indefinitely.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSchedule {
    segments: Vec<PumpSegment>,
}

impl PumpSchedule {
    pub fn constant(pump: Pump) -> Self {
        Self {
            segments: vec![PumpSegment {
                duration_s: f64::INFINITY,
                pump,
            }],
        }
    }

    pub fn new(segments: Vec<PumpSegment>) -> Result<Self, DynamicsError> {
        if segments.is_empty() {
            return Err(DynamicsError::InvalidInput("empty pump schedule".into()));
        }
        if let Some(bad) = segments.iter().find(|s| !(s.duration_s > 0.0)) {
            return Err(DynamicsError::InvalidInput(format!(
                "segment duration {} must be > 0",
                bad.duration_s
            )));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[PumpSegment] {
        &self.segments
    }

    /// Segment boundaries `(start, end, pump)` clipped to `[t0, t1]`.
    fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64, Pump)> {
        let mut out = Vec::new();
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = if i + 1 == self.segments.len() {
                f64::INFINITY
            } else {
                start + seg.duration_s
            };
            let (a, b) = (start.max(t0), end.min(t1));
            if b > a || (a == b && out.is_empty() && i + 1 == self.segments.len()) {
                out.push((a, b, seg.pump));
            }
            start = end;
        }
        if out.is_empty() {
            out.push((t0, t1, self.segments[0].pump));
        }
        out
    }
}

/// Uniformly sampled solution of the equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn sample_dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
        }
    }

    pub fn last(&self) -> StateVector {
        *self
            .states
            .last()
            .expect("trajectory has at least one sample")
    }
}

/// Default sampling interval, fine enough for the fastest rate in the problem.
pub fn default_sample_dt(params: &DeviceParams, pump: &Pump, coupling: f64) -> f64 {
    let fastest = pump
        .detuning
        .abs()
        .max(params.omega_m())
        .max(2.0 * coupling);
    1.0 / (20.0 * fastest)
}

fn uniform_times(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| t0 + k as f64 * dt).collect()
}

/// Integrate the nonlinear equations of motion over `t_span`, restarting the
/// integrator at every pump switch, and sample on a uniform grid.
pub fn integrate(
    state0: StateVector,
    params: &DeviceParams,
    schedule: &PumpSchedule,
    t_span: (f64, f64),
    sample_dt: f64,
    tol: Tolerances,
) -> Result<Trajectory, DynamicsError> {
    let (t0, t1) = t_span;
    if !(sample_dt > 0.0) || !(t1 >= t0) {
        return Err(DynamicsError::InvalidInput(format!(
            "bad span {t0}..{t1} or sample_dt {sample_dt}"
        )));
    }
    let times = uniform_times(t0, t1, sample_dt);
    let mut states = Vec::with_capacity(times.len());
    let mut stats = IntegratorStats::default();
    let mut y = state0.to_array();
    let mut solver = Dopri5::new(tol);
    let mut cursor = 0;
    for (a, b, pump) in schedule.pieces(t0, t1) {
        let sys =
            |_t: f64, s: &[f64; 4]| eom_rhs(&StateVector::from_array(*s), params, &pump).to_array();
        // Samples on a boundary belong to the segment that ends there.
        let end = cursor + times[cursor..].iter().take_while(|&&t| t <= b).count();
        let (y_end, h) = solver.integrate(
            &sys,
            a,
            y,
            b,
            &times[cursor..end],
            |_, s| states.push(StateVector::from_array(*s)),
            &mut stats,
        )?;
        cursor = end;
        y = y_end;
        solver.first_step = Some(h);
    }
    Ok(Trajectory {
        times,
        states,
        stats,
    })
}

/// Deterministic kick of size `kick` (in √photon) on all four quadratures,
/// seeded by the run seed and a cell index.
pub fn kicked_start(fp: StateVector, kick: f64, seed: u64, cell: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    let mut d = [0.0; 4];
    for v in &mut d {
        *v = rng.gen_range(-1.0..1.0);
    }
    let norm = d
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let s = fp.to_array();
    StateVector::from_array(std::array::from_fn(|i| s[i] + kick * d[i] / norm))
}
