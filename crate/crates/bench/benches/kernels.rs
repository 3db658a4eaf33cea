use std::f64::consts::TAU;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use optomech_core::dynamics::integrator::Tolerances;
use optomech_core::dynamics::psd::welch;
use optomech_core::dynamics::{integrate, kicked_start, PumpSchedule};
use optomech_core::linresp::{spectrum, PumpDressing};
use optomech_core::stability::{fixed_points, PointAnalysis};
use optomech_core::{Complex64, DeviceParams, PumpDrive, SweepDirection};

fn fixed_point_solve(c: &mut Criterion) {
    let p = DeviceParams::reference().with_kerr_hz(5e-3).unwrap();
    let pump = PumpDrive::from_dbm(-6.32e6, -28.0, 0.0)
        .unwrap()
        .resolve(&p);
    c.bench_function("fixed_points", |b| {
        b.iter(|| fixed_points(black_box(&p), black_box(&pump)))
    });
    c.bench_function("point_analysis", |b| {
        b.iter(|| PointAnalysis::new(black_box(&p), black_box(&pump)).unwrap())
    });
}

fn transmission_trace(c: &mut Criterion) {
    let p = DeviceParams::reference();
    let d = PumpDressing::from_coupling(&p, 2.56e6, -6.32e6).unwrap();
    let grid: Vec<f64> = (0..2001).map(|i| -9e6 + i as f64 * 6e3).collect();
    c.bench_function("spectrum_2001", |b| {
        b.iter(|| spectrum(black_box(&grid), &p, &d).unwrap())
    });
}

fn limit_cycle_run(c: &mut Criterion) {
    let p = DeviceParams::reference();
    let pump = PumpDrive::from_dbm(-6.32e6, -26.0, 0.0)
        .unwrap()
        .resolve(&p);
    let a = PointAnalysis::new(&p, &pump).unwrap();
    let start = kicked_start(
        a.points[a.initial_branch(SweepDirection::Up)].state(),
        1e-3,
        1,
        0,
    );
    let schedule = PumpSchedule::constant(pump);
    let mut group = c.benchmark_group("dopri5");
    group.sample_size(10);
    group.bench_function("limit_cycle_10us", |b| {
        b.iter(|| {
            integrate(
                black_box(start),
                &p,
                &schedule,
                (0.0, 10e-6),
                5e-9,
                Tolerances::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}

fn welch_psd(c: &mut Criterion) {
    let n = 1 << 16;
    let signal: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, TAU * 0.037 * i as f64))
        .collect();
    c.bench_function("welch_65536", |b| {
        b.iter(|| welch(black_box(&signal), 1e-9, 4, 0.5).unwrap())
    });
}

criterion_group!(
    benches,
    fixed_point_solve,
    transmission_trace,
    limit_cycle_run,
    welch_psd
);
criterion_main!(benches);
