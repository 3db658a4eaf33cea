use approx::assert_relative_eq;
use optomech_core::dynamics::transient::{evolution_matrix_m, polariton_gap};
use optomech_core::linresp::{
    bare_peak, coupling_matrix, find_peaks, peak_splitting, spectrum, transmission, LinrespError,
    PumpDressing, PEAK_PROMINENCE,
};
use optomech_core::{DeviceParams, PumpDrive};
use std::f64::consts::TAU;

fn params() -> DeviceParams {
    DeviceParams::reference()
}

/// Probe grid of ±`half` Hz around `centre` Hz in `step` Hz increments.
fn window(centre: f64, half: f64, step: f64) -> Vec<f64> {
    let n = (2.0 * half / step).round() as usize;
    (0..=n).map(|i| centre - half + i as f64 * step).collect()
}

#[test]
fn unpumped_cavity_is_lorentzian() {
    let p = params();
    let d = PumpDressing::unpumped(-6.32e6);
    let k = p.kappa();
    for f in [-2e6, -3e5, 0.0, 1e5, 7e5] {
        let t = transmission(f, &p, &d).unwrap();
        let w = TAU * f;
        let oracle = p.kappa_e1() * p.kappa_e2() / (w * w + k * k / 4.0);
        assert_relative_eq!(t.norm_sqr(), oracle, max_relative = 1e-12);
    }
    assert_relative_eq!(
        transmission(0.0, &p, &d).unwrap().norm(),
        bare_peak(&p),
        max_relative = 1e-12
    );
}

#[test]
fn uncoupled_response_ignores_pump_frequency() {
    let p = params();
    for f in [-1e6, 0.0, 2e5] {
        let a = transmission(f, &p, &PumpDressing::unpumped(-6.32e6)).unwrap();
        let b = transmission(f, &p, &PumpDressing::unpumped(2.0e6)).unwrap();
        assert_relative_eq!(a.re, b.re, max_relative = 1e-10, epsilon = 1e-15);
        assert_relative_eq!(a.im, b.im, max_relative = 1e-10, epsilon = 1e-15);
    }
}

#[test]
fn weak_coupling_approaches_bare_cavity() {
    let p = params();
    let grid = window(0.0, 2e6, 5e3);
    let bare = spectrum(&grid, &p, &PumpDressing::unpumped(-6.32e6))
        .unwrap()
        .magnitudes();
    let weak = spectrum(&grid, &p, &PumpDressing::from_photons(&p, 1e-6, -6.32e6))
        .unwrap()
        .magnitudes();
    let worst = bare
        .iter()
        .zip(&weak)
        .map(|(a, b)| (a - b).abs() / a)
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn transparency_depth_follows_cooperativity() {
    let p = params();
    let fm = p.mech_freq_hz();
    for coop in [0.5, 1.0, 4.0] {
        // Cooperativity 4g²/(κγm).
        let g = (coop * p.kappa() * p.gamma_m()).sqrt() / 2.0;
        let d = PumpDressing::from_coupling(&p, g / TAU, -fm).unwrap();
        let centre = -d.cavity_shift / TAU;
        let t = transmission(centre, &p, &d).unwrap().norm() / bare_peak(&p);
        assert_relative_eq!(t, 1.0 / (1.0 + coop), max_relative = 0.01);
    }
}

#[test]
fn transparency_window_width_is_broadened_mechanical_linewidth() {
    let p = params();
    let fm = p.mech_freq_hz();
    let coop = 9.0;
    let g = (coop * p.kappa() * p.gamma_m()).sqrt() / 2.0;
    let d = PumpDressing::from_coupling(&p, g / TAU, -fm).unwrap();
    let centre = -d.cavity_shift / TAU;
    // The dip in |T|² has full width γm(1 + C) at half its depth.
    let width = p.gamma_m() * (1.0 + coop) / TAU;
    let grid = window(centre, 3.0 * width, width / 400.0);
    let trace = spectrum(&grid, &p, &d).unwrap();
    let power: Vec<f64> = trace.magnitudes().iter().map(|m| m * m).collect();
    let top = power[0].max(power[power.len() - 1]);
    let bottom = power.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = 0.5 * (top + bottom);
    let inside: Vec<f64> = grid
        .iter()
        .zip(&power)
        .filter(|(_, &v)| v < half)
        .map(|(f, _)| *f)
        .collect();
    let measured = inside[inside.len() - 1] - inside[0];
    assert_relative_eq!(measured, width, max_relative = 0.03);
}

#[test]
fn moderate_coupling_splits_by_twice_g() {
    let p = params();
    let fm = p.mech_freq_hz();
    let g_hz = 0.5e6;
    let d = PumpDressing::from_coupling(&p, g_hz, -fm).unwrap();
    let grid = window(-d.cavity_shift / TAU, 3e6, 1e3);
    let split = peak_splitting(&spectrum(&grid, &p, &d).unwrap()).unwrap();
    assert_relative_eq!(split, 2.0 * g_hz, max_relative = 0.02);
}

#[test]
fn strong_coupling_splitting_matches_polariton_gap() {
    let p = params();
    let fm = p.mech_freq_hz();
    for ratio in [0.3, 0.5, 0.81] {
        let g_hz = 0.5 * ratio * fm;
        let d = PumpDressing::from_coupling(&p, g_hz, -fm).unwrap();
        let grid = window(-d.cavity_shift / TAU, fm, 1e3);
        let trace = spectrum(&grid, &p, &d).unwrap();
        let peaks = find_peaks(&trace.freqs_hz, &trace.magnitudes(), PEAK_PROMINENCE);
        assert_eq!(peaks.len(), 2, "2g = {ratio}·ωm");
        let sep = (peaks[0].freq_hz - peaks[1].freq_hz).abs();
        let gap = polariton_gap(&evolution_matrix_m(&p, TAU * g_hz, -TAU * fm)).unwrap() / TAU;
        assert_relative_eq!(sep, gap, max_relative = 0.01);
    }
}

#[test]
fn splitting_needs_two_peaks() {
    let p = params();
    let grid = window(0.0, 1e6, 1e3);
    let trace = spectrum(&grid, &p, &PumpDressing::unpumped(-6.32e6)).unwrap();
    assert!(matches!(
        peak_splitting(&trace),
        Err(LinrespError::FewerThanTwoPeaks { found: 1 })
    ));
}

#[test]
fn spectrum_rejects_bad_grids() {
    let p = params();
    let d = PumpDressing::unpumped(0.0);
    assert!(matches!(
        spectrum(&[], &p, &d),
        Err(LinrespError::EmptyGrid)
    ));
    assert!(matches!(
        spectrum(&[1.0, 0.0], &p, &d),
        Err(LinrespError::UnsortedGrid)
    ));
}

#[test]
fn coupling_matrix_rejects_nonfinite_input() {
    let p = params();
    let d = PumpDressing::unpumped(0.0);
    assert!(coupling_matrix(f64::NAN, &p, &d).is_err());
}

#[test]
fn drive_dressing_uses_self_consistent_photons() {
    let p = params();
    let drive = PumpDrive::from_dbm(-6.32e6, -35.0, 0.0).unwrap();
    let d = PumpDressing::from_drive(&p, &drive).unwrap();
    let n = optomech_core::model::pump_photon_number(&p, &drive)
        .unwrap()
        .self_consistent;
    assert_relative_eq!(d.pump_photons, n);
    assert_relative_eq!(d.coupling, p.g0() * n.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(d.pump_detuning, TAU * -6.32e6);
}
