use optomech_core::stability::{scan_column, BoundaryPoint, GridSpec};
use optomech_core::DeviceParams;

use super::Run;
use crate::checkpoint::Checkpoints;
use crate::error::CliError;
use crate::output::{num, opt, Csv};

const BOUNDARY_MARK: &str = "# boundary\n";

pub fn run(run: &Run) -> Result<(), CliError> {
    let s = run.cfg.stability.clone().expect("validated");
    let grid = GridSpec {
        detuning_hz: s.detuning_hz,
        power_dbm: s.power_dbm,
        attenuation_db: s.attenuation_db,
    };
    if s.kerr_values_hz.is_empty() {
        return one_map(run, &grid, &run.params, "");
    }
    for &k in &s.kerr_values_hz {
        let params = run
            .params
            .with_kerr_hz(k)
            .map_err(|e| CliError::Config(format!("stability.kerr_values_hz: {e}")))?;
        one_map(run, &grid, &params, &format!("_kerr_{k}hz"))?;
    }
    Ok(())
}

/// Scan one map and write `phase_map{suffix}.csv` and `boundary{suffix}.csv`.
fn one_map(
    run: &Run,
    grid: &GridSpec,
    params: &DeviceParams,
    suffix: &str,
) -> Result<(), CliError> {
    let detunings = grid.detuning_hz.values();
    let powers = grid.power_dbm.values();
    let checkpoints = Checkpoints::open(
        &run.checkpoint_dir(&format!("stability{suffix}")),
        &run.hash,
        run.resume,
    )?;
    let blocks = checkpoints.run(detunings.len(), &run.pool, |i| {
        let d = detunings[i];
        let cells =
            scan_column(params, grid, d, &powers, run.cfg.sweep).map_err(CliError::numerical)?;
        let mut text = String::new();
        for (c, p) in cells.iter().zip(&powers) {
            let fields = [
                num(d),
                num(*p),
                c.class.as_str().to_string(),
                num(c.max_re_lambda),
                c.n_branches.to_string(),
            ];
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        let b = BoundaryPoint::from_column(params, d, &powers, &cells, grid.attenuation_db);
        text.push_str(BOUNDARY_MARK);
        text.push_str(&[num(b.detuning_hz), opt(b.threshold_dbm), opt(b.threshold_p)].join(","));
        text.push('\n');
        Ok(text)
    })?;

    let mut map = Csv::new(
        "phase_map",
        &run.hash,
        &[
            "detuning_hz",
            "power_dbm",
            "class",
            "max_re_lambda",
            "n_branches",
        ],
    );
    let mut boundary = Csv::new(
        "boundary",
        &run.hash,
        &["detuning_hz", "threshold_dbm", "threshold_P"],
    );
    for block in &blocks {
        let (rows, b) = block.split_once(BOUNDARY_MARK).ok_or_else(|| {
            CliError::Config("malformed stability checkpoint; rerun without --resume".into())
        })?;
        map.push_raw(rows);
        boundary.push_raw(b);
    }
    map.write(&run.file(&format!("phase_map{suffix}.csv")))?;
    boundary.write(&run.file(&format!("boundary{suffix}.csv")))?;
    checkpoints.finish()
}
