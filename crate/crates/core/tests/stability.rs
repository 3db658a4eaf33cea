use approx::assert_relative_eq;
use optomech_core::stability::{
    eigenvalues, evolution_matrix, fixed_points, scan_column, scan_phase_map, threshold_dbm,
    AxisSpec, GridSpec, PointAnalysis, StabilityLabel,
};
use optomech_core::{
    Complex64, DeviceParams, DeviceSpec, PointClass, Pump, PumpDrive, StateVector, SweepDirection,
};
use std::f64::consts::TAU;

fn params() -> DeviceParams {
    DeviceParams::reference()
}

/// Pump amplitude that puts about `n` photons in the cavity at detuning `det` (rad/s).
fn amplitude_for(p: &DeviceParams, n: f64, det: f64) -> f64 {
    (n * (det * det + p.kappa().powi(2) / 4.0)).sqrt()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn undriven_spectrum_is_the_bare_modes() {
    let p = params();
    let pump = Pump {
        detuning: TAU * -3e6,
        amplitude: 0.0,
    };
    let fps = fixed_points(&p, &pump);
    assert_eq!(fps.len(), 1);
    assert_eq!(fps[0].state(), StateVector::ZERO);
    let ev = eigenvalues(&evolution_matrix(&StateVector::ZERO, &p, &pump)).unwrap();
    let im = sorted(ev.iter().map(|z| z.im).collect());
    let expected = sorted(vec![
        pump.detuning,
        -pump.detuning,
        p.omega_m(),
        -p.omega_m(),
    ]);
    for (a, b) in im.iter().zip(&expected) {
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }
    let re = sorted(ev.iter().map(|z| z.re).collect());
    assert_relative_eq!(re[0], -p.kappa() / 2.0, max_relative = 1e-9);
    assert_relative_eq!(re[3], -p.gamma_m() / 2.0, max_relative = 1e-6);
}

#[test]
fn blue_sideband_instability_sets_in_at_unit_cooperativity() {
    // Wider mechanical linewidth so that max Re λ at C = 0.8 clears the
    // marginal band.
    let p = DeviceParams::new(DeviceSpec {
        mech_damping_hz: 2e3,
        ..Default::default()
    })
    .unwrap();
    let det = p.omega_m();
    // C = 4g²/(κγm) with g = g0√n.
    let n_threshold = p.kappa() * p.gamma_m() / (4.0 * p.g0().powi(2));
    for (coop, expected) in [
        (0.8, StabilityLabel::Stable),
        (1.25, StabilityLabel::Unstable),
    ] {
        let pump = Pump {
            detuning: det,
            amplitude: amplitude_for(&p, coop * n_threshold, det),
        };
        let a = PointAnalysis::new(&p, &pump).unwrap();
        assert_eq!(a.points.len(), 1);
        assert_eq!(a.verdicts[0].label, expected, "C = {coop}");
    }
}

#[test]
fn red_sideband_damping_matches_cooperativity() {
    let p = params();
    let det = -p.omega_m();
    let n = 1e4;
    let pump = Pump {
        detuning: det,
        amplitude: amplitude_for(&p, n, det),
    };
    let a = PointAnalysis::new(&p, &pump).unwrap();
    assert_eq!(a.class, PointClass::Stable);
    // The mechanical mode is damped at γm + 4g²/κ, so its eigenvalue has
    // real part −(γm + 4g²/κ)/2.
    let g2 = p.g0().powi(2) * a.points[0].photons();
    let expected = -(p.gamma_m() + 4.0 * g2 / p.kappa()) / 2.0;
    assert_relative_eq!(a.verdicts[0].max_re, expected, max_relative = 0.02);
}

#[test]
fn eigenvalues_of_known_matrix() {
    let m = nalgebra::Matrix4::new(
        -1.0, 2.0, 0.0, 0.0, //
        -2.0, -1.0, 0.0, 0.0, //
        0.0, 0.0, -3.0, 0.0, //
        0.0, 0.0, 0.0, 0.5,
    );
    let mut ev = eigenvalues(&m).unwrap().to_vec();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let expected = [
        Complex64::new(-3.0, 0.0),
        Complex64::new(-1.0, -2.0),
        Complex64::new(-1.0, 2.0),
        Complex64::new(0.5, 0.0),
    ];
    for (a, b) in ev.iter().zip(&expected) {
        assert!((a - b).norm() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn threshold_rises_below_the_red_sideband() {
    let p = params();
    let fm = p.mech_freq_hz();
    let at = |d: f64| {
        threshold_dbm(&p, d, -60.0, 0.0, 0.01)
            .unwrap()
            .expect("finite threshold")
    };
    let near = at(-fm);
    let far = at(-fm - 2e6);
    assert!(far > near + 1.0, "{near} {far}");
}

#[test]
fn threshold_absent_when_range_stays_stable() {
    let p = params();
    assert_eq!(
        threshold_dbm(&p, -6.32e6, -80.0, -60.0, 0.01).unwrap(),
        None
    );
}

#[test]
fn bisection_brackets_the_grid_boundary() {
    let p = params();
    let det = -7e6;
    let t = threshold_dbm(&p, det, -60.0, 0.0, 1e-3).unwrap().unwrap();
    let class = |dbm: f64| {
        optomech_core::stability::classify_point(&p, &PumpDrive::from_dbm(det, dbm, 0.0).unwrap())
            .unwrap()
    };
    assert_ne!(class(t - 0.01), PointClass::Unstable);
    assert_eq!(class(t + 0.01), PointClass::Unstable);
}

#[test]
fn parallel_map_equals_serial_columns() {
    let p = params();
    let grid = GridSpec {
        detuning_hz: AxisSpec::new(-9e6, -4e6, 1e6),
        power_dbm: AxisSpec::new(-40.0, -20.0, 2.0),
        attenuation_db: 0.0,
    };
    let map = scan_phase_map(&p, &grid, SweepDirection::Up).unwrap();
    for (d, col) in map.detunings_hz.iter().zip(&map.cells) {
        let serial = scan_column(&p, &grid, *d, &map.powers_dbm, SweepDirection::Up).unwrap();
        assert_eq!(&serial, col);
    }
}

#[test]
fn sweep_direction_changes_occupied_branch_in_hysteresis() {
    // A heavily damped resonator, where both branches can be stable.
    let p = DeviceParams::new(DeviceSpec {
        mech_damping_hz: 1e4,
        ..Default::default()
    })
    .unwrap();
    let grid = GridSpec {
        detuning_hz: AxisSpec::single(-2e6),
        power_dbm: AxisSpec::new(-90.0, -30.0, 0.5),
        attenuation_db: 0.0,
    };
    let powers = grid.power_dbm.values();
    let up = scan_column(&p, &grid, -2e6, &powers, SweepDirection::Up).unwrap();
    let bistable: Vec<f64> = (0..powers.len())
        .filter(|&j| up[j].class == PointClass::Bistable)
        .map(|j| powers[j])
        .collect();
    assert!(bistable.len() > 1, "no bistable window in the column");
    // Sweeping inside the window, each direction keeps the branch it started on.
    let up = scan_column(&p, &grid, -2e6, &bistable, SweepDirection::Up).unwrap();
    let down = scan_column(&p, &grid, -2e6, &bistable, SweepDirection::Down).unwrap();
    for (j, dbm) in bistable.iter().enumerate() {
        assert!(
            up[j].occupied.photons() < down[j].occupied.photons(),
            "power {dbm}"
        );
        assert!(up[j].max_re_lambda < 0.0 && down[j].max_re_lambda < 0.0);
    }
}

#[test]
fn boundary_is_lowest_unstable_grid_power() {
    let p = params();
    let grid = GridSpec {
        detuning_hz: AxisSpec::new(-8e6, -6e6, 1e6),
        power_dbm: AxisSpec::new(-40.0, -10.0, 1.0),
        attenuation_db: 0.0,
    };
    let map = scan_phase_map(&p, &grid, SweepDirection::Up).unwrap();
    for (b, col) in map.boundary(&p, 0.0).iter().zip(&map.cells) {
        let t = b.threshold_dbm.expect("instability inside the grid");
        for (dbm, cell) in map.powers_dbm.iter().zip(col) {
            if *dbm < t {
                assert_ne!(cell.class, PointClass::Unstable);
            }
        }
        assert!(b.threshold_p.unwrap() > 0.0);
    }
}

#[test]
fn axis_includes_stop_on_grid() {
    assert_eq!(
        AxisSpec::new(0.0, 1.0, 0.25).values(),
        vec![0.0, 0.25, 0.5, 0.75, 1.0]
    );
    assert_eq!(AxisSpec::single(3.0).values(), vec![3.0]);
    assert!(AxisSpec::new(1.0, 0.0, 0.1).validate("x").is_err());
}
