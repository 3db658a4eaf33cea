use optomech_core::linresp::{find_peaks, spectrum, PumpDressing, PEAK_PROMINENCE};
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::TAU;

use super::{drive_dressing, Run};
use crate::error::CliError;
use crate::output::{num, write_json, Csv};

pub fn run(run: &Run) -> Result<(), CliError> {
    let s = run.cfg.spectrum.expect("validated");
    let probes = s.probe_hz.values();
    match s.pump_detuning_hz {
        None => trace(run, &probes),
        Some(axis) => map(run, &probes, &axis.values()),
    }
}

fn trace(run: &Run, probes: &[f64]) -> Result<(), CliError> {
    let dressing = match &run.cfg.drive {
        Some(d) => drive_dressing(run, d, None)?,
        None => PumpDressing::unpumped(0.0),
    };
    let trace = run
        .pool
        .install(|| spectrum(probes, &run.params, &dressing))
        .map_err(CliError::numerical)?;
    let mut csv = Csv::new(
        "transmission_trace",
        &run.hash,
        &["freq_hz", "re_T", "im_T", "abs_T"],
    );
    for (f, t) in trace.freqs_hz.iter().zip(&trace.values) {
        csv.row(&[num(*f), num(t.re), num(t.im), num(t.norm())]);
    }
    csv.write(&run.file("spectrum.csv"))?;

    let mags = trace.magnitudes();
    let peaks = find_peaks(&trace.freqs_hz, &mags, PEAK_PROMINENCE);
    let mut by_freq = peaks.clone();
    by_freq.truncate(2);
    by_freq.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    let splitting = (by_freq.len() == 2).then(|| by_freq[1].freq_hz - by_freq[0].freq_hz);
    let body = json!({
        "coupling_hz": dressing.coupling / TAU,
        "effective_detuning_hz": dressing.effective_detuning() / TAU,
        "pump_detuning_hz": dressing.pump_detuning / TAU,
        "pump_photons": dressing.pump_photons,
        "peaks": peaks.iter().map(|p| json!({"freq_hz": p.freq_hz, "abs_T": p.height, "prominence": p.prominence})).collect::<Vec<_>>(),
        "splitting_hz": splitting,
    });
    write_json(
        &run.file("spectrum_summary.json"),
        "spectrum_summary",
        &run.hash,
        body,
    )
}

fn map(run: &Run, probes: &[f64], pumps: &[f64]) -> Result<(), CliError> {
    let drive = run.cfg.drive.expect("validated");
    let columns: Vec<Vec<f64>> = run.pool.install(|| {
        pumps
            .par_iter()
            .map(|&d| {
                let dressing = drive_dressing(run, &drive, Some(d))?;
                let trace = spectrum(probes, &run.params, &dressing)
                    .map_err(|e| CliError::Numerical(format!("pump detuning {d} Hz: {e}")))?;
                Ok(trace.magnitudes())
            })
            .collect::<Vec<Result<_, CliError>>>()
            .into_iter()
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut csv = Csv::new(
        "transmission_map",
        &run.hash,
        &["pump_freq_hz", "probe_freq_hz", "abs_T"],
    );
    for (d, col) in pumps.iter().zip(&columns) {
        for (f, t) in probes.iter().zip(col) {
            csv.row(&[num(*d), num(*f), num(*t)]);
        }
    }
    csv.write(&run.file("spectrum_map.csv"))
}
