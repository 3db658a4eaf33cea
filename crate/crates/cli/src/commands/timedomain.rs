use std::f64::consts::TAU;

use optomech_core::dynamics::transient::{
    compare_with_nonlinear, transient_linear_response, InitialCondition, LinearSegment, ProbeTone,
    TransientOptions,
};
use optomech_core::dynamics::{
    classify_response, default_sample_dt, integrate, kicked_start, output_psd, DynamicsError,
    PumpSchedule, PumpSegment,
};
use optomech_core::linresp::PumpDressing;
use optomech_core::stability::PointAnalysis;
use optomech_core::{Complex64, Pump, StateVector};
use serde_json::json;

use super::{drive_dressing, power_drive, Run};
use crate::config::{InitialState, TimeDomainConfig, TimeDomainMode};
use crate::error::CliError;
use crate::output::{num, write_json, Csv};

fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::InvalidInput(m) => CliError::Config(format!("timedomain: {m}")),
        DynamicsError::SeriesTooShort { .. } => CliError::Config(format!("timedomain: {e}")),
        other => CliError::numerical(other),
    }
}

pub fn run(run: &Run) -> Result<(), CliError> {
    let td = run.cfg.timedomain.clone().expect("validated");
    match td.mode {
        TimeDomainMode::Pulse => pulse(run, &td),
        TimeDomainMode::Nonlinear => nonlinear(run, &td),
        TimeDomainMode::Compare => compare(run, &td),
    }
}

/// Bare pump detuning, Hz, implied by the drive section.
fn pump_detuning_hz(run: &Run) -> Result<f64, CliError> {
    let drive = run.cfg.drive()?;
    Ok(match drive.detuning_hz {
        Some(d) => d,
        None => drive_dressing(run, &drive, None)?.pump_detuning / TAU,
    })
}

fn pulse(run: &Run, td: &TimeDomainConfig) -> Result<(), CliError> {
    let p = &run.params;
    let drive = run.cfg.drive()?;
    let det = pump_detuning_hz(run)?;
    let segments = td
        .segments
        .iter()
        .map(|s| {
            let dressing = match (s.pump_power_dbm, s.coupling_hz) {
                (Some(dbm), _) => PumpDressing::from_drive(p, &power_drive(run, &drive, det, dbm)?)
                    .map_err(CliError::numerical)?,
                (None, Some(g)) => {
                    let n = optomech_core::model::photons_for_coupling(p.g0_hz(), g)
                        .map_err(|e| CliError::Config(format!("timedomain.segments: {e}")))?;
                    PumpDressing::from_photons(p, n, det)
                }
                (None, None) => PumpDressing::from_photons(p, 0.0, det),
            };
            Ok(LinearSegment::dressed(s.duration_s, &dressing))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let offset = TAU * td.probe_pump_offset_hz.expect("validated");
    let fastest = segments
        .iter()
        .map(|s| s.detuning.abs().max(2.0 * s.coupling))
        .fold(p.omega_m().max(offset.abs()), f64::max);
    let dt = td.sample_dt_s.unwrap_or(1.0 / (20.0 * fastest));
    let probe = ProbeTone {
        offset,
        amplitude: Complex64::new(td.probe_amplitude, 0.0),
    };
    let options = TransientOptions {
        initial: match td.initial {
            InitialState::Steady => InitialCondition::SteadyState,
            InitialState::Rest => InitialCondition::Rest,
        },
        tol: run.cfg.integrator,
        ..Default::default()
    };
    let r =
        transient_linear_response(p, &segments, &probe, dt, &options).map_err(dynamics_error)?;
    let mut csv = Csv::new("quadratures", &run.hash, &["t_s", "in_phase", "quadrature"]);
    for (t, z) in r.times.iter().zip(&r.demodulated) {
        csv.row(&[num(*t), num(z.re), num(z.im)]);
    }
    csv.write(&run.file("quadratures.csv"))?;
    let body = json!({
        "sample_dt_s": dt,
        "segments": segments.iter().map(|s| json!({
            "duration_s": s.duration_s,
            "coupling_hz": s.coupling / TAU,
            "effective_detuning_hz": s.detuning / TAU,
        })).collect::<Vec<_>>(),
        "fallback_segments": r.fallback_segments,
    });
    write_json(
        &run.file("timedomain_summary.json"),
        "pulse_summary",
        &run.hash,
        body,
    )
}

fn nonlinear(run: &Run, td: &TimeDomainConfig) -> Result<(), CliError> {
    let p = &run.params;
    let drive = run.cfg.drive()?;
    let det = drive.detuning_hz.expect("validated");
    let resolve = |dbm: Option<f64>| -> Result<Pump, CliError> {
        Ok(match dbm {
            Some(dbm) => power_drive(run, &drive, det, dbm)?.resolve(p),
            None => Pump {
                detuning: TAU * det,
                amplitude: 0.0,
            },
        })
    };
    let (schedule, length) = if td.segments.is_empty() {
        (
            PumpSchedule::constant(resolve(drive.power_dbm)?),
            td.duration_s.expect("validated"),
        )
    } else {
        let segs = td
            .segments
            .iter()
            .map(|s| {
                Ok(PumpSegment {
                    duration_s: s.duration_s,
                    pump: resolve(s.pump_power_dbm)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let total = segs.iter().map(|s| s.duration_s).sum();
        (
            PumpSchedule::new(segs).map_err(dynamics_error)?,
            td.duration_s.unwrap_or(total),
        )
    };
    let first = schedule.segments()[0].pump;
    let start = match td.initial {
        InitialState::Steady => {
            let a = PointAnalysis::new(p, &first).map_err(CliError::numerical)?;
            a.points[a.initial_branch(run.cfg.sweep)].state()
        }
        InitialState::Rest => StateVector::ZERO,
    };
    let strongest = schedule
        .segments()
        .iter()
        .map(|s| s.pump)
        .fold(first, |a, b| if b.amplitude > a.amplitude { b } else { a });
    let coupling = PointAnalysis::new(p, &strongest)
        .map(|a| {
            a.points
                .iter()
                .map(|f| p.g0() * f.photons().sqrt())
                .fold(0.0, f64::max)
        })
        .map_err(CliError::numerical)?;
    let dt = td
        .sample_dt_s
        .unwrap_or_else(|| default_sample_dt(p, &strongest, coupling));
    let state0 = kicked_start(start, td.kick, run.cfg.seed, 0);
    let traj = integrate(state0, p, &schedule, (0.0, length), dt, run.cfg.integrator)
        .map_err(dynamics_error)?;

    let mut csv = Csv::new("trajectory", &run.hash, &["t_s", "x", "y", "p", "q"]);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        csv.row(&[num(*t), num(s.x), num(s.y), num(s.p), num(s.q)]);
    }
    csv.write(&run.file("trajectory.csv"))?;

    let psd = output_psd(&traj, p, &run.cfg.psd).map_err(dynamics_error)?;
    let mut csv = Csv::new("psd", &run.hash, &["freq_hz", "psd_db"]);
    for (f, db) in psd.freqs_hz.iter().zip(psd.to_db()) {
        csv.row(&[num(*f), num(db)]);
    }
    csv.write(&run.file("psd.csv"))?;

    let class = match classify_response(&psd, p.mech_freq_hz(), &run.cfg.classifier) {
        Ok(c) => {
            json!({"label": c.label.as_str(), "comb_spacing_hz": c.comb_spacing_hz, "flatness": c.flatness})
        }
        Err(DynamicsError::Ambiguous {
            first,
            first_score,
            second,
            second_score,
        }) => json!({
            "label": "ambiguous",
            "candidates": [[first.as_str(), first_score], [second.as_str(), second_score]],
        }),
        Err(e) => return Err(dynamics_error(e)),
    };
    let body = json!({
        "sample_dt_s": dt,
        "classification": class,
        "integrator": {
            "steps": traj.stats.steps,
            "rejected": traj.stats.rejected,
            "rhs_evals": traj.stats.rhs_evals,
            "max_error": traj.stats.max_error,
        },
    });
    write_json(
        &run.file("timedomain_summary.json"),
        "nonlinear_summary",
        &run.hash,
        body,
    )
}

fn compare(run: &Run, td: &TimeDomainConfig) -> Result<(), CliError> {
    let p = &run.params;
    let drive = run.cfg.drive()?;
    let pump = power_drive(
        run,
        &drive,
        drive.detuning_hz.expect("validated"),
        drive.power_dbm.expect("validated"),
    )?
    .resolve(p);
    let offset = TAU * td.probe_pump_offset_hz.expect("validated");
    let dt = td
        .sample_dt_s
        .unwrap_or(1.0 / (20.0 * pump.detuning.abs().max(p.omega_m()).max(offset.abs())));
    let c = compare_with_nonlinear(
        p,
        &pump,
        offset,
        td.probe_ratio,
        td.duration_s.expect("validated"),
        dt,
        run.cfg.integrator,
    )
    .map_err(dynamics_error)?;
    let mut csv = Csv::new(
        "linear_comparison",
        &run.hash,
        &[
            "t_s",
            "linear_re",
            "linear_im",
            "nonlinear_re",
            "nonlinear_im",
        ],
    );
    for ((t, l), n) in c.times.iter().zip(&c.linear).zip(&c.nonlinear) {
        csv.row(&[num(*t), num(l.re), num(l.im), num(n.re), num(n.im)]);
    }
    csv.write(&run.file("comparison.csv"))?;
    write_json(
        &run.file("timedomain_summary.json"),
        "comparison_summary",
        &run.hash,
        json!({"max_deviation": c.max_deviation, "probe_ratio": td.probe_ratio, "sample_dt_s": dt}),
    )
}
