use std::path::{Path, PathBuf};

use optomech_core::dynamics::integrator::Tolerances;
use optomech_core::dynamics::{AttractorSettings, ClassifierSettings, PsdSettings};
use optomech_core::stability::AxisSpec;
use optomech_core::{DeviceParams, DeviceSpec, SweepDirection};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Everything a run needs. Every key carries its unit in the name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: SweepDirection,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub device: DeviceSpec,
    #[serde(default)]
    pub drive: Option<DriveConfig>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
    #[serde(default)]
    pub timedomain: Option<TimeDomainConfig>,
    #[serde(default)]
    pub phasemap: Option<PhaseMapConfig>,
    #[serde(default)]
    pub integrator: Tolerances,
    #[serde(default)]
    pub psd: PsdSettings,
    #[serde(default)]
    pub classifier: ClassifierSettings,
}

/// The pump. Give either `power_dbm` (with `detuning_hz`) or `coupling_hz`
/// with `effective_detuning_hz`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub detuning_hz: Option<f64>,
    pub power_dbm: Option<f64>,
    pub coupling_hz: Option<f64>,
    pub effective_detuning_hz: Option<f64>,
    #[serde(default)]
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Probe frequency axis, Hz from the bare cavity.
    pub probe_hz: AxisSpec,
    /// Optional pump detuning axis; turns the trace into a map.
    pub pump_detuning_hz: Option<AxisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub detuning_hz: AxisSpec,
    pub power_dbm: AxisSpec,
    #[serde(default)]
    pub attenuation_db: f64,
    /// Run one map per cavity Kerr value instead of the device value.
    #[serde(default)]
    pub kerr_values_hz: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomainMode {
    /// Linearized probe response to a pump pulse schedule.
    #[default]
    Pulse,
    /// Full nonlinear integration with PSD and classification.
    Nonlinear,
    /// Linear and nonlinear probe response side by side.
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Steady,
    Rest,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub duration_s: f64,
    /// Pump power for the segment; the pump is off when neither this nor
    /// `coupling_hz` is given.
    pub pump_power_dbm: Option<f64>,
    pub coupling_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDomainConfig {
    #[serde(default)]
    pub mode: TimeDomainMode,
    /// Pump schedule. A constant pump from `[drive]` is used when empty.
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
    /// Record length for constant-pump runs.
    pub duration_s: Option<f64>,
    pub sample_dt_s: Option<f64>,
    /// Probe offset from the pump, Hz.
    pub probe_pump_offset_hz: Option<f64>,
    /// Probe amplitude in units of the probe scale (pulse mode).
    #[serde(default = "one")]
    pub probe_amplitude: f64,
    /// Probe amplitude as a fraction of the pump amplitude (compare mode).
    #[serde(default = "milli")]
    pub probe_ratio: f64,
    #[serde(default)]
    pub initial: InitialState,
    /// Kick away from the fixed point in nonlinear mode, √photon.
    #[serde(default = "milli")]
    pub kick: f64,
}

fn one() -> f64 {
    1.0
}

fn milli() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMapConfig {
    pub detuning_hz: AxisSpec,
    pub power_dbm: AxisSpec,
    #[serde(default)]
    pub attenuation_db: f64,
    #[serde(default = "default_record")]
    pub duration_s: f64,
    pub sample_dt_s: Option<f64>,
    #[serde(default = "milli")]
    pub kick: f64,
}

fn default_record() -> f64 {
    AttractorSettings::default().duration_s
}

/// Values supplied on the command line, which win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub sweep: Option<SweepDirection>,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(format!("{field}: {}", reason.into()))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn axis(field: &str, a: &AxisSpec) -> Result<(), CliError> {
    a.validate(field)
        .map_err(|e| CliError::Config(e.to_string()))
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(out) = &overrides.out {
            cfg.output_dir = Some(out.clone());
        }
        if overrides.workers.is_some() {
            cfg.workers = overrides.workers;
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(sweep) = overrides.sweep {
            cfg.sweep = sweep;
        }
        Ok(cfg)
    }

    pub fn device(&self) -> Result<DeviceParams, CliError> {
        DeviceParams::new(self.device).map_err(|e| CliError::Config(format!("device: {e}")))
    }

    /// Hash of the run-defining configuration. Worker count and output
    /// location are left out because they cannot change any result.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn workers(&self) -> Result<usize, CliError> {
        match self.workers {
            Some(0) => Err(invalid("workers", "must be at least 1")),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    fn check_tolerances(&self) -> Result<(), CliError> {
        positive("integrator.rtol", self.integrator.rtol)?;
        positive("integrator.atol", self.integrator.atol)
    }

    fn check_analysis(&self) -> Result<(), CliError> {
        self.psd
            .validate()
            .map_err(|e| invalid("psd", e.to_string()))?;
        let c = &self.classifier;
        positive("classifier.static_floor", c.static_floor)?;
        positive("classifier.comb_threshold", c.comb_threshold)?;
        positive("classifier.flatness_threshold", c.flatness_threshold)?;
        positive("classifier.new_line_threshold", c.new_line_threshold)?;
        if c.line_halfwidth_bins == 0 {
            return Err(invalid(
                "classifier.line_halfwidth_bins",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn drive(&self) -> Result<DriveConfig, CliError> {
        let d = self
            .drive
            .ok_or_else(|| invalid("drive", "section is required for this command"))?;
        d.validate()?;
        Ok(d)
    }

    /// Check every field the given command will read.
    pub fn validate_for(&self, command: Command) -> Result<(), CliError> {
        self.device()?;
        self.workers()?;
        if let Some(d) = &self.drive {
            d.validate()?;
        }
        match command {
            Command::Spectrum => {
                let s = self
                    .spectrum
                    .as_ref()
                    .ok_or_else(|| invalid("spectrum", "section is required"))?;
                axis("spectrum.probe_hz", &s.probe_hz)?;
                if let Some(a) = &s.pump_detuning_hz {
                    axis("spectrum.pump_detuning_hz", a)?;
                    if self.drive.is_none() {
                        return Err(invalid(
                            "drive",
                            "a pump detuning sweep needs a drive section",
                        ));
                    }
                }
            }
            Command::Stability => {
                let s = self
                    .stability
                    .as_ref()
                    .ok_or_else(|| invalid("stability", "section is required"))?;
                axis("stability.detuning_hz", &s.detuning_hz)?;
                axis("stability.power_dbm", &s.power_dbm)?;
                finite("stability.attenuation_db", s.attenuation_db)?;
                for (i, &k) in s.kerr_values_hz.iter().enumerate() {
                    if !(k >= 0.0 && k.is_finite()) {
                        return Err(invalid(
                            &format!("stability.kerr_values_hz[{i}]"),
                            format!("must be >= 0, got {k}"),
                        ));
                    }
                }
            }
            Command::TimeDomain => {
                let t = self
                    .timedomain
                    .as_ref()
                    .ok_or_else(|| invalid("timedomain", "section is required"))?;
                self.check_tolerances()?;
                t.validate(self)?;
                if t.mode == TimeDomainMode::Nonlinear {
                    self.check_analysis()?;
                }
            }
            Command::PhaseMap => {
                let p = self
                    .phasemap
                    .as_ref()
                    .ok_or_else(|| invalid("phasemap", "section is required"))?;
                axis("phasemap.detuning_hz", &p.detuning_hz)?;
                axis("phasemap.power_dbm", &p.power_dbm)?;
                finite("phasemap.attenuation_db", p.attenuation_db)?;
                self.check_tolerances()?;
                self.check_analysis()?;
                self.attractor_settings()?
                    .validate()
                    .map_err(|e| invalid("phasemap", e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn attractor_settings(&self) -> Result<AttractorSettings, CliError> {
        let p = self
            .phasemap
            .as_ref()
            .ok_or_else(|| invalid("phasemap", "section is required"))?;
        Ok(AttractorSettings {
            duration_s: p.duration_s,
            sample_dt_s: p.sample_dt_s,
            kick: p.kick,
            psd: self.psd,
            classifier: self.classifier,
            tolerances: self.integrator,
        })
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        finite("drive.attenuation_db", self.attenuation_db)?;
        match (self.power_dbm, self.coupling_hz) {
            (Some(p), None) => {
                finite("drive.power_dbm", p)?;
                let d = self
                    .detuning_hz
                    .ok_or_else(|| invalid("drive.detuning_hz", "required with power_dbm"))?;
                finite("drive.detuning_hz", d)?;
                if self.effective_detuning_hz.is_some() {
                    return Err(invalid(
                        "drive.effective_detuning_hz",
                        "only valid together with coupling_hz",
                    ));
                }
            }
            (None, Some(g)) => {
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(invalid(
                        "drive.coupling_hz",
                        format!("must be >= 0, got {g}"),
                    ));
                }
                let d = self.effective_detuning_hz.ok_or_else(|| {
                    invalid("drive.effective_detuning_hz", "required with coupling_hz")
                })?;
                finite("drive.effective_detuning_hz", d)?;
                if self.detuning_hz.is_some() {
                    return Err(invalid(
                        "drive.detuning_hz",
                        "give effective_detuning_hz instead when using coupling_hz",
                    ));
                }
            }
            (Some(_), Some(_)) => {
                return Err(invalid("drive", "give power_dbm or coupling_hz, not both"))
            }
            (None, None) => {
                return Err(invalid(
                    "drive",
                    "one of power_dbm or coupling_hz is required",
                ))
            }
        }
        Ok(())
    }
}

impl TimeDomainConfig {
    fn validate(&self, cfg: &RunConfig) -> Result<(), CliError> {
        for (i, s) in self.segments.iter().enumerate() {
            let f = |k: &str| format!("timedomain.segments[{i}].{k}");
            positive(&f("duration_s"), s.duration_s)?;
            if s.pump_power_dbm.is_some() && s.coupling_hz.is_some() {
                return Err(invalid(
                    &f("pump_power_dbm"),
                    "give pump_power_dbm or coupling_hz, not both",
                ));
            }
            if let Some(p) = s.pump_power_dbm {
                finite(&f("pump_power_dbm"), p)?;
            }
            if let Some(g) = s.coupling_hz {
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(invalid(&f("coupling_hz"), format!("must be >= 0, got {g}")));
                }
            }
        }
        if let Some(dt) = self.sample_dt_s {
            positive("timedomain.sample_dt_s", dt)?;
        }
        if let Some(t) = self.duration_s {
            positive("timedomain.duration_s", t)?;
        }
        positive("timedomain.probe_amplitude", self.probe_amplitude)?;
        positive("timedomain.probe_ratio", self.probe_ratio)?;
        if !(self.kick >= 0.0 && self.kick.is_finite()) {
            return Err(invalid("timedomain.kick", "must be >= 0"));
        }
        let need_probe = matches!(self.mode, TimeDomainMode::Pulse | TimeDomainMode::Compare);
        match self.probe_pump_offset_hz {
            Some(o) if o != 0.0 && o.is_finite() => {}
            Some(o) => {
                return Err(invalid(
                    "timedomain.probe_pump_offset_hz",
                    format!("must be nonzero and finite, got {o}"),
                ))
            }
            None if need_probe => {
                return Err(invalid(
                    "timedomain.probe_pump_offset_hz",
                    "required in this mode",
                ))
            }
            None => {}
        }
        let drive = cfg.drive()?;
        match self.mode {
            TimeDomainMode::Pulse => {}
            TimeDomainMode::Nonlinear => {
                if self.segments.iter().any(|s| s.coupling_hz.is_some())
                    || drive.coupling_hz.is_some()
                {
                    return Err(invalid(
                        "timedomain",
                        "nonlinear mode needs pump powers, not couplings",
                    ));
                }
            }
            TimeDomainMode::Compare => {
                if !self.segments.is_empty() {
                    return Err(invalid(
                        "timedomain.segments",
                        "compare mode uses a constant pump",
                    ));
                }
                if drive.power_dbm.is_none() {
                    return Err(invalid(
                        "drive.power_dbm",
                        "compare mode needs a pump power",
                    ));
                }
            }
        }
        if self.segments.is_empty()
            && self.mode != TimeDomainMode::Pulse
            && self.duration_s.is_none()
        {
            return Err(invalid(
                "timedomain.duration_s",
                "required without a segment list",
            ));
        }
        if self.segments.is_empty() && self.mode == TimeDomainMode::Pulse {
            return Err(invalid(
                "timedomain.segments",
                "pulse mode needs at least one segment",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Stability,
    TimeDomain,
    PhaseMap,
}
