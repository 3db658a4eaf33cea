//! Device parameters, unit conventions and derived scalar quantities.
//!
//! Every user-facing frequency or rate is an ordinary frequency in Hz.
//! Internally everything runs in angular units, so the accessors without a
//! `_hz` suffix return rad/s.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stability::{self, FixedPoint};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid value {value} for `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("fixed-point selection failed: {0}")]
    RootSelection(String),
}

fn require(
    field: &'static str,
    value: f64,
    ok: bool,
    reason: &'static str,
) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            value,
            reason,
        })
    }
}

/// Raw device description as written in a config file. Convert it into
/// [`DeviceParams`] to have it validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSpec {
    pub cavity_freq_hz: f64,
    pub mech_freq_hz: f64,
    pub input_rate_hz: f64,
    pub output_rate_hz: f64,
    pub internal_rate_hz: f64,
    pub mech_damping_hz: f64,
    pub g0_hz: f64,
    /// Kinetic-inductance Kerr coefficient per photon, stored as a
    /// nonnegative magnitude (the shift it produces is a red shift).
    pub kerr_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_point_m: Option<f64>,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self {
            cavity_freq_hz: 4.86e9,
            mech_freq_hz: 6.32e6,
            input_rate_hz: 90e3,
            output_rate_hz: 190e3,
            internal_rate_hz: 100e3,
            mech_damping_hz: 20.0,
            g0_hz: 165.0,
            kerr_hz: 0.0,
            zero_point_m: None,
        }
    }
}

/// Validated device parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(into = "DeviceSpec")]
pub struct DeviceParams {
    spec: DeviceSpec,
}

impl From<DeviceParams> for DeviceSpec {
    fn from(p: DeviceParams) -> Self {
        p.spec
    }
}

impl TryFrom<DeviceSpec> for DeviceParams {
    type Error = ModelError;

    fn try_from(spec: DeviceSpec) -> Result<Self, ModelError> {
        Self::new(spec)
    }
}

impl DeviceParams {
    pub fn new(spec: DeviceSpec) -> Result<Self, ModelError> {
        let positive = [
            ("cavity_freq_hz", spec.cavity_freq_hz),
            ("mech_freq_hz", spec.mech_freq_hz),
            ("input_rate_hz", spec.input_rate_hz),
            ("output_rate_hz", spec.output_rate_hz),
            ("internal_rate_hz", spec.internal_rate_hz),
            ("mech_damping_hz", spec.mech_damping_hz),
        ];
        for (field, value) in positive {
            require(field, value, value > 0.0, "must be > 0")?;
        }
        require("g0_hz", spec.g0_hz, spec.g0_hz >= 0.0, "must be >= 0")?;
        require("kerr_hz", spec.kerr_hz, spec.kerr_hz >= 0.0, "must be >= 0")?;
        if let Some(x) = spec.zero_point_m {
            require("zero_point_m", x, x > 0.0, "must be > 0")?;
        }
        Ok(Self { spec })
    }

    /// Parameters of the reference device.
    pub fn reference() -> Self {
        Self::default()
    }

    pub fn spec(&self) -> DeviceSpec {
        self.spec
    }

    pub fn with_g0_hz(self, g0_hz: f64) -> Result<Self, ModelError> {
        Self::new(DeviceSpec { g0_hz, ..self.spec })
    }

    pub fn with_kerr_hz(self, kerr_hz: f64) -> Result<Self, ModelError> {
        Self::new(DeviceSpec {
            kerr_hz,
            ..self.spec
        })
    }

    pub fn cavity_freq_hz(&self) -> f64 {
        self.spec.cavity_freq_hz
    }
    pub fn mech_freq_hz(&self) -> f64 {
        self.spec.mech_freq_hz
    }
    pub fn g0_hz(&self) -> f64 {
        self.spec.g0_hz
    }
    pub fn kerr_hz(&self) -> f64 {
        self.spec.kerr_hz
    }
    pub fn zero_point_m(&self) -> Option<f64> {
        self.spec.zero_point_m
    }
    pub fn kappa_hz(&self) -> f64 {
        total_linewidth(self)
    }

    pub fn omega_c(&self) -> f64 {
        TAU * self.spec.cavity_freq_hz
    }
    pub fn omega_m(&self) -> f64 {
        TAU * self.spec.mech_freq_hz
    }
    pub fn kappa_e1(&self) -> f64 {
        TAU * self.spec.input_rate_hz
    }
    pub fn kappa_e2(&self) -> f64 {
        TAU * self.spec.output_rate_hz
    }
    pub fn kappa(&self) -> f64 {
        TAU * self.kappa_hz()
    }
    pub fn gamma_m(&self) -> f64 {
        TAU * self.spec.mech_damping_hz
    }
    pub fn g0(&self) -> f64 {
        TAU * self.spec.g0_hz
    }
    pub fn alpha_c(&self) -> f64 {
        TAU * self.spec.kerr_hz
    }
}

/// Total cavity linewidth κ = κe1 + κe2 + κi in Hz.
pub fn total_linewidth(params: &DeviceParams) -> f64 {
    let s = &params.spec;
    s.input_rate_hz + s.output_rate_hz + s.internal_rate_hz
}

/// Optomechanical Kerr coefficient 2g0²/ωm in Hz per photon.
pub fn optomech_kerr_per_photon(g0_hz: f64, mech_freq_hz: f64) -> Result<f64, ModelError> {
    require(
        "mech_freq_hz",
        mech_freq_hz,
        mech_freq_hz > 0.0,
        "must be > 0",
    )?;
    Ok(2.0 * g0_hz * g0_hz / mech_freq_hz)
}

/// Parametric coupling g = g0·√n_d, in the unit of `g0`.
pub fn coupling_rate(g0: f64, n_d: f64) -> Result<f64, ModelError> {
    require("n_d", n_d, n_d >= 0.0, "photon number must be >= 0")?;
    Ok(g0 * n_d.sqrt())
}

/// Inverse of [`coupling_rate`]: the photon number giving coupling `g`.
pub fn photons_for_coupling(g0: f64, g: f64) -> Result<f64, ModelError> {
    require("g0", g0, g0 > 0.0, "must be > 0")?;
    require("g", g, g >= 0.0, "must be >= 0")?;
    Ok((g / g0).powi(2))
}

/// Static mechanical displacement 2g0·n_d/ωm in units of the zero-point motion.
pub fn static_displacement(n_d: f64, g0: f64, mech_freq: f64) -> f64 {
    2.0 * g0 * n_d / mech_freq
}

/// Total static red shift (2g0²/ωm + αc)·n_d of the cavity, in the unit of the inputs.
pub fn total_static_shift(n_d: f64, g0: f64, mech_freq: f64, kerr: f64) -> f64 {
    (2.0 * g0 * g0 / mech_freq + kerr) * n_d
}

/// The figure-axis power 8g0²n0/ωm⁴, evaluated with angular frequencies.
///
/// The expression is not dimensionless; the value is only meaningful as a
/// relabelled power axis. Inputs are in Hz.
pub fn dimensionless_power(g0_hz: f64, n0: f64, mech_freq_hz: f64) -> Result<f64, ModelError> {
    require(
        "mech_freq_hz",
        mech_freq_hz,
        mech_freq_hz != 0.0,
        "must be nonzero",
    )?;
    let g0 = TAU * g0_hz;
    let wm = TAU * mech_freq_hz;
    Ok(8.0 * g0 * g0 * n0 / wm.powi(4))
}

/// Photon number for a pump of `power_w` watts sitting on the cavity resonance.
pub fn resonant_photon_number(params: &DeviceParams, power_w: f64) -> f64 {
    let k = params.kappa();
    params.kappa_e1() * power_w / (HBAR * params.omega_c()) / (k * k / 4.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Direction of a power sweep, which picks the occupied branch in bistable regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    #[default]
    Up,
    Down,
}

impl std::str::FromStr for SweepDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "up" => Ok(Self::Up),
            "down" => Ok(Self::Down),
            other => Err(format!("expected `up` or `down`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Up => "up",
            Self::Down => "down",
        })
    }
}

/// How strongly the pump is driven. Exactly one of the two is authoritative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpStrength {
    /// Power at the cavity input in W.
    Power(f64),
    /// Drive amplitude E in rad/s·√photon.
    Amplitude(f64),
}

/// A pump tone as the user specifies it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpDrive {
    detuning_hz: f64,
    strength: PumpStrength,
    sweep: SweepDirection,
}

impl PumpDrive {
    pub fn from_power(detuning_hz: f64, power_w: f64) -> Result<Self, ModelError> {
        require("detuning_hz", detuning_hz, true, "must be finite")?;
        require("power_w", power_w, power_w >= 0.0, "must be >= 0")?;
        Ok(Self {
            detuning_hz,
            strength: PumpStrength::Power(power_w),
            sweep: SweepDirection::Up,
        })
    }

    /// Pump specified in dBm at the generator, reduced by `attenuation_db`
    /// before it reaches the cavity.
    pub fn from_dbm(detuning_hz: f64, dbm: f64, attenuation_db: f64) -> Result<Self, ModelError> {
        require("power_dbm", dbm, true, "must be finite")?;
        require("attenuation_db", attenuation_db, true, "must be finite")?;
        Self::from_power(detuning_hz, dbm_to_watts(dbm - attenuation_db))
    }

    pub fn from_amplitude(detuning_hz: f64, amplitude: f64) -> Result<Self, ModelError> {
        require("detuning_hz", detuning_hz, true, "must be finite")?;
        require("amplitude", amplitude, amplitude >= 0.0, "must be >= 0")?;
        Ok(Self {
            detuning_hz,
            strength: PumpStrength::Amplitude(amplitude),
            sweep: SweepDirection::Up,
        })
    }

    pub fn with_sweep(mut self, sweep: SweepDirection) -> Self {
        self.sweep = sweep;
        self
    }

    pub fn detuning_hz(&self) -> f64 {
        self.detuning_hz
    }
    pub fn strength(&self) -> PumpStrength {
        self.strength
    }
    pub fn sweep(&self) -> SweepDirection {
        self.sweep
    }

    /// Angular pump frequency ωd = ωc + Δ.
    pub fn omega_d(&self, params: &DeviceParams) -> f64 {
        params.omega_c() + TAU * self.detuning_hz
    }

    /// Drive amplitude E = √(κe1·P/ħωd).
    pub fn amplitude(&self, params: &DeviceParams) -> f64 {
        match self.strength {
            PumpStrength::Amplitude(e) => e,
            PumpStrength::Power(p) => {
                (params.kappa_e1() * p / (HBAR * self.omega_d(params))).sqrt()
            }
        }
    }

    pub fn power_w(&self, params: &DeviceParams) -> f64 {
        match self.strength {
            PumpStrength::Power(p) => p,
            PumpStrength::Amplitude(e) => e * e * HBAR * self.omega_d(params) / params.kappa_e1(),
        }
    }

    /// The pump in the angular units used by the equations of motion.
    pub fn resolve(&self, params: &DeviceParams) -> Pump {
        Pump {
            detuning: TAU * self.detuning_hz,
            amplitude: self.amplitude(params),
        }
    }
}

/// A pump in angular units: detuning Δ in rad/s and amplitude E in rad/s·√photon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pump {
    pub detuning: f64,
    pub amplitude: f64,
}

/// Self-consistent and linear photon-number estimates for a pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumber {
    pub self_consistent: f64,
    pub linear: f64,
}

/// Intracavity photon number for `pump`, choosing the lowest branch when
/// sweeping up and the highest when sweeping down.
pub fn pump_photon_number(
    params: &DeviceParams,
    pump: &PumpDrive,
) -> Result<PhotonNumber, ModelError> {
    let resolved = pump.resolve(params);
    let e2 = resolved.amplitude.powi(2);
    let k = params.kappa();
    let linear = e2 / (resolved.detuning.powi(2) + k * k / 4.0);
    let points = stability::fixed_points(params, &resolved);
    let chosen = select_branch(&points, pump.sweep())
        .ok_or_else(|| ModelError::RootSelection("no real fixed point".into()))?;
    Ok(PhotonNumber {
        self_consistent: chosen.photons(),
        linear,
    })
}

fn select_branch(points: &[FixedPoint], sweep: SweepDirection) -> Option<&FixedPoint> {
    let by_n = |a: &&FixedPoint, b: &&FixedPoint| a.photons().total_cmp(&b.photons());
    match sweep {
        SweepDirection::Up => points.iter().min_by(by_n),
        SweepDirection::Down => points.iter().max_by(by_n),
    }
}

/// Scalar quantities derived from the intracavity photon number. Rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub pump_photons: f64,
    pub coupling_hz: f64,
    pub optomech_kerr_per_photon_hz: f64,
    pub total_static_shift_hz: f64,
    /// In units of the zero-point motion.
    pub static_displacement: f64,
    pub dimensionless_power: f64,
}

impl DerivedQuantities {
    /// `n0` is the photon number the same pump power would give on resonance.
    pub fn from_photons(params: &DeviceParams, n_d: f64, n0: f64) -> Result<Self, ModelError> {
        let (g0, wm) = (params.g0_hz(), params.mech_freq_hz());
        Ok(Self {
            pump_photons: n_d,
            coupling_hz: coupling_rate(g0, n_d)?,
            optomech_kerr_per_photon_hz: optomech_kerr_per_photon(g0, wm)?,
            total_static_shift_hz: total_static_shift(n_d, g0, wm, params.kerr_hz()),
            static_displacement: static_displacement(n_d, g0, wm),
            dimensionless_power: dimensionless_power(g0, n0, wm)?,
        })
    }

    pub fn for_pump(params: &DeviceParams, pump: &PumpDrive) -> Result<Self, ModelError> {
        let n = pump_photon_number(params, pump)?;
        let n0 = resonant_photon_number(params, pump.power_w(params));
        Self::from_photons(params, n.self_consistent, n0)
    }
}
