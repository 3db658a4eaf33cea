use optomech_core::dynamics::{classify_column, AttractorOutcome};
use optomech_core::stability::GridSpec;

use super::Run;
use crate::checkpoint::Checkpoints;
use crate::error::CliError;
use crate::output::{num, opt, Csv};

pub fn run(run: &Run) -> Result<(), CliError> {
    let pm = run.cfg.phasemap.expect("validated");
    let grid = GridSpec {
        detuning_hz: pm.detuning_hz,
        power_dbm: pm.power_dbm,
        attenuation_db: pm.attenuation_db,
    };
    let settings = run.cfg.attractor_settings()?;
    let detunings = grid.detuning_hz.values();
    let powers = grid.power_dbm.values();
    let checkpoints = Checkpoints::open(&run.checkpoint_dir("phasemap"), &run.hash, run.resume)?;
    let blocks = checkpoints.run(detunings.len(), &run.pool, |i| {
        let cells = classify_column(
            &run.params,
            &grid,
            i,
            detunings[i],
            &powers,
            run.cfg.sweep,
            run.cfg.seed,
            &settings,
        )
        .map_err(CliError::numerical)?;
        let mut text = String::new();
        for c in &cells {
            let (spacing, flatness) = match c.outcome {
                AttractorOutcome::Classified(r) => (r.comb_spacing_hz, Some(r.flatness)),
                AttractorOutcome::Ambiguous { .. } => (None, None),
            };
            let fields = [
                num(c.detuning_hz),
                num(c.power_dbm),
                c.outcome.as_str().to_string(),
                num(c.stability.max_re_lambda),
                c.stability.n_branches.to_string(),
                c.stability.class.as_str().to_string(),
                opt(spacing),
                opt(flatness),
            ];
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        Ok(text)
    })?;
    let mut csv = Csv::new(
        "response_map",
        &run.hash,
        &[
            "detuning_hz",
            "power_dbm",
            "class",
            "max_re_lambda",
            "n_branches",
            "stability_class",
            "comb_spacing_hz",
            "flatness",
        ],
    );
    for b in &blocks {
        csv.push_raw(b);
    }
    csv.write(&run.file("response_map.csv"))?;
    checkpoints.finish()
}
