//! Attractor search over pump grids: start each cell at the occupied
//! fixed point of the stability continuation, kick it, integrate, and label
//! the output spectrum.

use serde::{Deserialize, Serialize};

use super::classify::{classify_response, ClassifierSettings, ResponseClass, ResponseLabel};
use super::integrator::Tolerances;
use super::psd::{output_psd, PsdSettings};
use super::{default_sample_dt, integrate, kicked_start, DynamicsError, PumpSchedule};
use crate::model::{DeviceParams, Pump, SweepDirection};
use crate::stability::{scan_column, GridSpec, PhaseCell};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttractorSettings {
    /// Length of each simulated record.
    pub duration_s: f64,
    /// Output sampling interval; the fastest-rate default when absent.
    pub sample_dt_s: Option<f64>,
    /// Initial displacement from the fixed point, in √photon.
    pub kick: f64,
    pub psd: PsdSettings,
    pub classifier: ClassifierSettings,
    pub tolerances: Tolerances,
}

impl Default for AttractorSettings {
    fn default() -> Self {
        Self {
            duration_s: 200e-6,
            sample_dt_s: None,
            kick: 1e-3,
            psd: PsdSettings::default(),
            classifier: ClassifierSettings::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl AttractorSettings {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |what: &str| Err(DynamicsError::InvalidInput(what.to_string()));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive and finite");
        }
        if let Some(dt) = self.sample_dt_s {
            if !(dt > 0.0 && dt < self.duration_s) {
                return bad("sample_dt_s must be positive and shorter than duration_s");
            }
        }
        if !(self.kick >= 0.0 && self.kick.is_finite()) {
            return bad("kick must be non-negative");
        }
        if !(self.tolerances.rtol > 0.0 && self.tolerances.atol > 0.0) {
            return bad("integrator tolerances must be positive");
        }
        self.psd.validate()
    }
}

/// Label of one simulated cell. Ambiguous spectra are kept as data rather
/// than aborting a whole map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttractorOutcome {
    Classified(ResponseClass),
    Ambiguous {
        first: ResponseLabel,
        second: ResponseLabel,
    },
}

impl AttractorOutcome {
    pub fn label(&self) -> Option<ResponseLabel> {
        match self {
            Self::Classified(c) => Some(c.label),
            Self::Ambiguous { .. } => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        self.label().map_or("ambiguous", |l| l.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseCell {
    pub detuning_hz: f64,
    pub power_dbm: f64,
    pub stability: PhaseCell,
    pub outcome: AttractorOutcome,
}

/// Simulate from a kicked fixed point and label the spectrum. `cell` picks
/// the random stream of the kick.
pub fn classify_attractor(
    params: &DeviceParams,
    pump: &Pump,
    fixed_point: super::StateVector,
    seed: u64,
    cell: u64,
    settings: &AttractorSettings,
) -> Result<AttractorOutcome, DynamicsError> {
    let start = kicked_start(fixed_point, settings.kick, seed, cell);
    let coupling = params.g0() * fixed_point.photons().sqrt();
    let dt = settings
        .sample_dt_s
        .unwrap_or_else(|| default_sample_dt(params, pump, coupling));
    let traj = integrate(
        start,
        params,
        &PumpSchedule::constant(*pump),
        (0.0, settings.duration_s),
        dt,
        settings.tolerances,
    )?;
    let psd = output_psd(&traj, params, &settings.psd)?;
    match classify_response(&psd, params.mech_freq_hz(), &settings.classifier) {
        Ok(c) => Ok(AttractorOutcome::Classified(c)),
        Err(DynamicsError::Ambiguous { first, second, .. }) => {
            Ok(AttractorOutcome::Ambiguous { first, second })
        }
        Err(e) => Err(e),
    }
}

/// Classify one detuning column. Cell `j` of column `column` uses kick
/// stream `column·len + j`, so the result does not depend on scheduling.
pub fn classify_column(
    params: &DeviceParams,
    grid: &GridSpec,
    column: usize,
    detuning_hz: f64,
    powers_dbm: &[f64],
    sweep: SweepDirection,
    seed: u64,
    settings: &AttractorSettings,
) -> Result<Vec<ResponseCell>, DynamicsError> {
    let phase = scan_column(params, grid, detuning_hz, powers_dbm, sweep)?;
    phase
        .into_iter()
        .zip(powers_dbm)
        .enumerate()
        .map(|(j, (stability, &power_dbm))| {
            let at_cell = |e: DynamicsError| DynamicsError::AtCell {
                detuning_hz,
                power_dbm,
                source: Box::new(e),
            };
            let pump = grid
                .pump(detuning_hz, power_dbm)
                .map_err(|e| at_cell(e.into()))?
                .resolve(params);
            let index = (column * powers_dbm.len() + j) as u64;
            let outcome = classify_attractor(
                params,
                &pump,
                stability.occupied.state(),
                seed,
                index,
                settings,
            )
            .map_err(at_cell)?;
            Ok(ResponseCell {
                detuning_hz,
                power_dbm,
                stability,
                outcome,
            })
        })
        .collect()
}
