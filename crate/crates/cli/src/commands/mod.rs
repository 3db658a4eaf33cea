pub mod phasemap;
pub mod spectrum;
pub mod stability;
pub mod timedomain;

use std::path::PathBuf;

use optomech_core::linresp::PumpDressing;
use optomech_core::{DeviceParams, PumpDrive};
use rayon::ThreadPool;

use crate::config::{DriveConfig, RunConfig};
use crate::error::CliError;

/// Validated configuration plus the resources a command runs with.
pub struct Run {
    pub cfg: RunConfig,
    pub params: DeviceParams,
    pub hash: String,
    pub out: PathBuf,
    pub pool: ThreadPool,
    pub resume: bool,
}

impl Run {
    pub fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn checkpoint_dir(&self, tag: &str) -> PathBuf {
        self.out.join("checkpoints").join(tag)
    }
}

/// The pump drive for a power-specified drive section at detuning `detuning_hz`.
pub fn power_drive(
    run: &Run,
    drive: &DriveConfig,
    detuning_hz: f64,
    power_dbm: f64,
) -> Result<PumpDrive, CliError> {
    PumpDrive::from_dbm(detuning_hz, power_dbm, drive.attenuation_db)
        .map(|d| d.with_sweep(run.cfg.sweep))
        .map_err(|e| CliError::Config(format!("drive: {e}")))
}

/// Dressing produced by the drive section, optionally at another pump detuning.
pub fn drive_dressing(
    run: &Run,
    drive: &DriveConfig,
    detuning_hz: Option<f64>,
) -> Result<PumpDressing, CliError> {
    let p = &run.params;
    match (drive.power_dbm, drive.coupling_hz) {
        (Some(dbm), _) => {
            let det = detuning_hz.or(drive.detuning_hz).expect("validated");
            PumpDressing::from_drive(p, &power_drive(run, drive, det, dbm)?)
                .map_err(CliError::numerical)
        }
        (None, Some(g)) => {
            let fixed =
                PumpDressing::from_coupling(p, g, drive.effective_detuning_hz.expect("validated"))
                    .map_err(|e| CliError::Config(format!("drive.coupling_hz: {e}")))?;
            Ok(match detuning_hz {
                Some(d) => PumpDressing::from_photons(p, fixed.pump_photons, d),
                None => fixed,
            })
        }
        (None, None) => unreachable!("drive validated"),
    }
}
