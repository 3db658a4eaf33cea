use optomech_core::dynamics::eom::relative_residual;
use optomech_core::dynamics::kicked_start;
use optomech_core::dynamics::psd::welch;
use optomech_core::linresp::{bare_peak, transmission, PumpDressing};
use optomech_core::model::{dbm_to_watts, watts_to_dbm};
use optomech_core::stability::{evolution_matrix, fixed_points, AxisSpec};
use optomech_core::{Complex64, DeviceParams, DeviceSpec, PumpDrive, StateVector};
use proptest::prelude::*;

fn device() -> impl Strategy<Value = DeviceParams> {
    (
        1e6..2e7f64,
        1e4..1e6f64,
        1e4..1e6f64,
        1e4..1e6f64,
        1.0..1e3f64,
        0.0..1e3f64,
        0.0..0.05f64,
    )
        .prop_map(|(wm, k1, k2, ki, gm, g0, kerr)| {
            DeviceParams::new(DeviceSpec {
                mech_freq_hz: wm,
                input_rate_hz: k1,
                output_rate_hz: k2,
                internal_rate_hz: ki,
                mech_damping_hz: gm,
                g0_hz: g0,
                kerr_hz: kerr,
                ..Default::default()
            })
            .unwrap()
        })
}

fn state() -> impl Strategy<Value = StateVector> {
    prop::array::uniform4(-1e4..1e4f64).prop_map(StateVector::from_array)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fixed_points_solve_the_equations(p in device(), det in -3.0..1.0f64, dbm in -70.0..-10.0f64) {
        let pump = PumpDrive::from_dbm(det * p.mech_freq_hz(), dbm, 0.0).unwrap().resolve(&p);
        let fps = fixed_points(&p, &pump);
        prop_assert!(!fps.is_empty() && fps.len() <= 3 && fps.len() != 2);
        for fp in fps {
            prop_assert!(relative_residual(&fp.state(), &p, &pump) < 1e-9);
            prop_assert_eq!(fp.q, p.gamma_m() / (2.0 * p.omega_m()) * fp.p);
        }
    }

    #[test]
    fn fixed_points_are_sorted_and_distinct(p in device(), det in -3.0..0.0f64, dbm in -60.0..0.0f64) {
        let pump = PumpDrive::from_dbm(det * p.mech_freq_hz(), dbm, 0.0).unwrap().resolve(&p);
        let fps = fixed_points(&p, &pump);
        prop_assert!(fps.windows(2).all(|w| w[0].p < w[1].p));
    }

    #[test]
    fn jacobian_trace_is_total_loss(p in device(), s in state(), det in -1e8..1e8f64, e in 0.0..1e10f64) {
        let pump = optomech_core::Pump { detuning: det, amplitude: e };
        let m = evolution_matrix(&s, &p, &pump);
        let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]];
        let bound = 8.0 * f64::EPSILON * diag.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!((m.trace() + p.kappa() + p.gamma_m()).abs() <= bound);
    }

    #[test]
    fn unpumped_transmission_never_exceeds_resonance(p in device(), f in -5e6..5e6f64, det in -2e7..2e7f64) {
        let t = transmission(f, &p, &PumpDressing::unpumped(det)).unwrap();
        prop_assert!(t.norm() <= bare_peak(&p) * (1.0 + 1e-12));
    }

    #[test]
    fn power_units_round_trip(dbm in -150.0..30.0f64) {
        prop_assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-10);
    }

    #[test]
    fn kick_has_requested_size(s in state(), kick in 1e-6..1.0f64, seed in any::<u64>(), cell in any::<u64>()) {
        let k = kicked_start(s, kick, seed, cell);
        prop_assert!((k.distance(&s) - kick).abs() <= 1e-9 * kick + 1e-12 * s.norm());
    }

    #[test]
    fn axis_values_stay_in_range(start in -1e3..1e3f64, len in 0.0..1e3f64, step in 0.1..50.0f64) {
        let axis = AxisSpec::new(start, start + len, step);
        let v = axis.values();
        prop_assert_eq!(v.len(), axis.len());
        prop_assert_eq!(v[0], start);
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(*v.last().unwrap() <= start + len + 1e-9 * (1.0 + len));
    }

    #[test]
    fn psd_scales_with_signal_power(
        phases in prop::collection::vec(0.0..std::f64::consts::TAU, 256),
        gain in 0.1..10.0f64,
    ) {
        let signal: Vec<Complex64> = phases.iter().map(|&ph| Complex64::from_polar(1.0, ph)).collect();
        let scaled: Vec<Complex64> = signal.iter().map(|z| z * gain).collect();
        let a = welch(&signal, 1e-8, 2, 0.5).unwrap();
        let b = welch(&scaled, 1e-8, 2, 0.5).unwrap();
        prop_assert!(a.density.iter().all(|d| *d >= 0.0));
        for (x, y) in a.density.iter().zip(&b.density) {
            prop_assert!((x * gain * gain - y).abs() <= 1e-9 * y.abs().max(1e-300));
        }
    }
}
