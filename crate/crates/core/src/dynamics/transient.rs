//! Linearized response of the pump-dressed system to a weak probe tone while
//! the pump is switched between segments.
//!
//! Within each segment the fluctuation vector X = (a, a†, b, b†) obeys
//! dX/dt = M·X + F(t), with the probe entering as
//! F = (−i·Sp·e^{−iΩt}, i·Sp*·e^{iΩt}, 0, 0). The solution is a particular
//! part built from B(ω) = (−iω − M)⁻¹ plus a sum of eigenmodes of M whose
//! weights are fixed by continuity at the segment boundaries. When the
//! eigenvector matrix is too ill-conditioned the segment is integrated
//! numerically instead.
//!
//! The demodulated output is a(t)·e^{iΩt} keeping only the eigenmodes that
//! rotate on the probe side of the pump (Im λ·Ω < 0) and only the B₁₁ part
//! of the particular solution; the dropped terms rotate near 2Ω.

use nalgebra::{Matrix4, Schur, Vector4};
use num_complex::Complex64;

use super::eom::{eom_rhs, StateVector};
use super::integrator::{Dopri5, IntegratorStats, Tolerances};
use super::DynamicsError;
use crate::linresp::PumpDressing;
use crate::model::{DeviceParams, Pump};
use crate::stability::{PointAnalysis, StabilityLabel};

type CMat = Matrix4<Complex64>;
type CVec = Vector4<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Pump-dressed parameters for one piece of the schedule (angular units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSegment {
    pub duration_s: f64,
    /// Parametric coupling g.
    pub coupling: f64,
    /// Effective (Kerr-shifted) detuning Δ̃.
    pub detuning: f64,
}

impl LinearSegment {
    /// Segment with the coupling and effective detuning of a pump dressing.
    pub fn dressed(duration_s: f64, dressing: &PumpDressing) -> Self {
        Self {
            duration_s,
            coupling: dressing.coupling,
            detuning: dressing.effective_detuning(),
        }
    }
}

/// Weak probe at ωd + `offset` with complex amplitude `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeTone {
    pub offset: f64,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialCondition {
    /// Steady state of the first segment with the probe already on.
    #[default]
    SteadyState,
    /// All fluctuations zero at t = 0; the probe switches on then.
    Rest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientOptions {
    pub initial: InitialCondition,
    /// Eigenvector-matrix condition number above which a segment falls back
    /// to numerical integration.
    pub condition_limit: f64,
    pub tol: Tolerances,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            initial: InitialCondition::SteadyState,
            condition_limit: 1e10,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientResponse {
    pub times: Vec<f64>,
    /// Demodulated cavity response I + iQ.
    pub demodulated: Vec<Complex64>,
    /// The steady-state (particular) part of `demodulated`.
    pub steady: Vec<Complex64>,
    /// Full pump-frame fluctuation vector (a, a†, b, b†) without any terms dropped.
    pub full: Vec<[Complex64; 4]>,
    /// Indices of segments that were integrated numerically.
    pub fallback_segments: Vec<usize>,
}

impl TransientResponse {
    pub fn in_phase(&self) -> Vec<f64> {
        self.demodulated.iter().map(|z| z.re).collect()
    }

    pub fn quadrature(&self) -> Vec<f64> {
        self.demodulated.iter().map(|z| z.im).collect()
    }

    /// Demodulated signal minus its steady-state part.
    pub fn transient_part(&self) -> Vec<Complex64> {
        self.demodulated
            .iter()
            .zip(&self.steady)
            .map(|(d, s)| d - s)
            .collect()
    }
}

/// The linearized evolution matrix M for coupling g and effective detuning Δ̃.
pub fn evolution_matrix_m(params: &DeviceParams, coupling: f64, detuning: f64) -> CMat {
    let (k2, gm2, wm) = (
        params.kappa() / 2.0,
        params.gamma_m() / 2.0,
        params.omega_m(),
    );
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    let ig = c(0.0, coupling);
    #[rustfmt::skip]
    let m = CMat::new(
        c(-k2, detuning), z, -ig, -ig,
        z, c(-k2, -detuning), ig, ig,
        -ig, -ig, c(-gm2, -wm), z,
        ig, ig, z, c(-gm2, wm),
    );
    m
}

/// Eigenvalues of M, via a complex Schur decomposition.
pub fn m_eigenvalues(m: &CMat) -> Result<[Complex64; 4], DynamicsError> {
    let scale = m
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()))
        .max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(*m, f64::EPSILON * scale, 10_000)
        .ok_or_else(|| DynamicsError::InvalidInput("Schur iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| DynamicsError::InvalidInput("Schur form is not triangular".into()))?;
    Ok([ev[0], ev[1], ev[2], ev[3]])
}

/// Gap between the imaginary parts of the two eigenvalues of M lying on the
/// negative-frequency side (the normal modes of the dressed cavity and
/// mechanics), in rad/s.
pub fn polariton_gap(m: &CMat) -> Result<f64, DynamicsError> {
    let mut neg: Vec<f64> = m_eigenvalues(m)?
        .iter()
        .map(|z| z.im)
        .filter(|im| *im < 0.0)
        .collect();
    if neg.len() != 2 {
        return Err(DynamicsError::InvalidInput(format!(
            "expected two negative-frequency modes, found {}",
            neg.len()
        )));
    }
    neg.sort_by(f64::total_cmp);
    Ok(neg[1] - neg[0])
}

struct Modal {
    values: [Complex64; 4],
    vectors: CMat,
    inverse: CMat,
}

fn modal(m: &CMat, condition_limit: f64) -> Result<Option<Modal>, DynamicsError> {
    let values = m_eigenvalues(m)?;
    let mut vectors = CMat::zeros();
    for (j, lambda) in values.iter().enumerate() {
        let shifted = m - CMat::identity() * *lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^H");
        let k = svd.singular_values.imin();
        let v: CVec = v_t.row(k).adjoint();
        vectors.set_column(j, &(v / Complex64::from(v.norm())));
    }
    let sv = vectors.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= condition_limit) {
        return Ok(None);
    }
    let inverse = vectors
        .try_inverse()
        .ok_or_else(|| DynamicsError::InvalidInput("singular eigenvector matrix".into()))?;
    Ok(Some(Modal {
        values,
        vectors,
        inverse,
    }))
}

/// Particular solution X_p(t) = u·e^{−iΩt} + w·e^{iΩt}.
struct Particular {
    u: CVec,
    w: CVec,
    omega: f64,
}

impl Particular {
    fn new(m: &CMat, probe: &ProbeTone) -> Result<Self, DynamicsError> {
        let om = probe.offset;
        let solve = |shift: Complex64, rhs: CVec| {
            (CMat::identity() * shift - m)
                .lu()
                .solve(&rhs)
                .ok_or_else(|| {
                    DynamicsError::InvalidInput("probe frequency hits an eigenvalue of M".into())
                })
        };
        let z = Complex64::new(0.0, 0.0);
        let u = solve(-I * om, CVec::new(-I * probe.amplitude, z, z, z))?;
        let w = solve(I * om, CVec::new(z, I * probe.amplitude.conj(), z, z))?;
        Ok(Self { u, w, omega: om })
    }

    fn at(&self, t: f64) -> CVec {
        let e = Complex64::from_polar(1.0, -self.omega * t);
        self.u * e + self.w * e.conj()
    }
}

/// Projector onto eigenmodes with Im λ·s < 0 via the matrix sign function.
fn probe_side_projector(m: &CMat, s: f64) -> Result<CMat, DynamicsError> {
    let mut z = m * Complex64::new(0.0, -s);
    for _ in 0..100 {
        let inv = z.try_inverse().ok_or_else(|| {
            DynamicsError::InvalidInput("sign iteration hit a singular matrix".into())
        })?;
        let det = z.determinant().norm();
        let mu = if det > 0.0 { det.powf(-0.25) } else { 1.0 };
        let next =
            (z * Complex64::from(mu) + inv * Complex64::from(1.0 / mu)) * Complex64::from(0.5);
        let change = (next - z).norm() / next.norm();
        z = next;
        if change < 1e-14 {
            break;
        }
    }
    Ok((CMat::identity() - z) * Complex64::from(0.5))
}

fn keep(lambda: Complex64, omega: f64) -> bool {
    lambda.im * omega < 0.0
}

/// Demodulated response to `probe` under a pump schedule given as linear segments.
pub fn transient_linear_response(
    params: &DeviceParams,
    segments: &[LinearSegment],
    probe: &ProbeTone,
    sample_dt: f64,
    options: &TransientOptions,
) -> Result<TransientResponse, DynamicsError> {
    if segments.is_empty() {
        return Err(DynamicsError::InvalidInput("no segments".into()));
    }
    if let Some(bad) = segments
        .iter()
        .find(|s| !(s.duration_s > 0.0) || !(s.coupling >= 0.0) || !s.detuning.is_finite())
    {
        return Err(DynamicsError::InvalidInput(format!(
            "malformed segment {bad:?}"
        )));
    }
    if !(sample_dt > 0.0) || !probe.offset.is_finite() || probe.offset == 0.0 {
        return Err(DynamicsError::InvalidInput(
            "need sample_dt > 0 and a nonzero finite probe offset".into(),
        ));
    }
    let total: f64 = segments.iter().map(|s| s.duration_s).sum();
    let n = (total / sample_dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * sample_dt).collect();
    let om = probe.offset;

    let mut demodulated = Vec::with_capacity(times.len());
    let mut steady = Vec::with_capacity(times.len());
    let mut full = Vec::with_capacity(times.len());
    let mut fallback_segments = Vec::new();

    let first_m = evolution_matrix_m(params, segments[0].coupling, segments[0].detuning);
    let mut x = match options.initial {
        InitialCondition::SteadyState => Particular::new(&first_m, probe)?.at(0.0),
        InitialCondition::Rest => CVec::zeros(),
    };
    let mut t_start = 0.0;
    let mut cursor = 0;
    for (idx, seg) in segments.iter().enumerate() {
        let t_end = if idx + 1 == segments.len() {
            times[n].max(t_start)
        } else {
            t_start + seg.duration_s
        };
        let stop = cursor
            + times[cursor..]
                .iter()
                .take_while(|&&t| t <= t_end + 1e-12 * total)
                .count();
        let m = evolution_matrix_m(params, seg.coupling, seg.detuning);
        let part = Particular::new(&m, probe)?;
        let steady_a = part.u[0];
        let demod = |t: f64| Complex64::from_polar(1.0, om * t);

        let x_end = match modal(&m, options.condition_limit)? {
            Some(md) => {
                let c = md.inverse * (x - part.at(t_start));
                let evolve = |t: f64| -> (CVec, Complex64) {
                    let mut h = CVec::zeros();
                    let mut kept = Complex64::new(0.0, 0.0);
                    for j in 0..4 {
                        let amp = c[j] * (md.values[j] * (t - t_start)).exp();
                        let col = md.vectors.column(j) * amp;
                        h += col;
                        if keep(md.values[j], om) {
                            kept += col[0];
                        }
                    }
                    (h + part.at(t), kept)
                };
                for &t in &times[cursor..stop] {
                    let (xt, kept) = evolve(t);
                    full.push([xt[0], xt[1], xt[2], xt[3]]);
                    demodulated.push(kept * demod(t) + steady_a);
                    steady.push(steady_a);
                }
                evolve(t_end).0
            }
            None => {
                fallback_segments.push(idx);
                let proj = probe_side_projector(&m, om.signum())?;
                let record = |t: f64,
                              xt: &CVec,
                              full: &mut Vec<[Complex64; 4]>,
                              demodulated: &mut Vec<Complex64>| {
                    let kept = (proj * (xt - part.at(t)))[0];
                    full.push([xt[0], xt[1], xt[2], xt[3]]);
                    demodulated.push(kept * demod(t) + steady_a);
                };
                // Samples a rounding error past t_end belong here but are never
                // reached by the integrator; they take the end state.
                let inside = cursor
                    + times[cursor..stop]
                        .iter()
                        .take_while(|&&t| t <= t_end)
                        .count();
                let xe = integrate_linear(
                    &m,
                    probe,
                    x,
                    t_start,
                    t_end,
                    &times[cursor..inside],
                    options.tol,
                    |t, xt| record(t, xt, &mut full, &mut demodulated),
                )?;
                for &t in &times[inside..stop] {
                    record(t, &xe, &mut full, &mut demodulated);
                }
                steady.extend(std::iter::repeat(steady_a).take(stop - cursor));
                xe
            }
        };
        x = x_end;
        cursor = stop;
        t_start = t_end;
    }
    Ok(TransientResponse {
        times,
        demodulated,
        steady,
        full,
        fallback_segments,
    })
}

fn integrate_linear(
    m: &CMat,
    probe: &ProbeTone,
    x0: CVec,
    t0: f64,
    t1: f64,
    samples: &[f64],
    tol: Tolerances,
    mut on_sample: impl FnMut(f64, &CVec),
) -> Result<CVec, DynamicsError> {
    let unpack = |y: &[f64; 8]| CVec::from_fn(|i, _| Complex64::new(y[2 * i], y[2 * i + 1]));
    let pack = |v: &CVec| -> [f64; 8] {
        std::array::from_fn(|k| if k % 2 == 0 { v[k / 2].re } else { v[k / 2].im })
    };
    let sys = |t: f64, y: &[f64; 8]| {
        let e = Complex64::from_polar(1.0, -probe.offset * t);
        let mut d = m * unpack(y);
        d[0] += -I * probe.amplitude * e;
        d[1] += I * probe.amplitude.conj() * e.conj();
        pack(&d)
    };
    // Absolute tolerance relative to the probe-driven scale.
    let scale = x0
        .norm()
        .max(probe.amplitude.norm() / m.iter().fold(0.0f64, |a, z| a.max(z.norm())));
    let solver = Dopri5::new(Tolerances {
        rtol: tol.rtol,
        atol: tol.atol.max(1e-3 * tol.rtol * scale),
    });
    let mut stats = IntegratorStats::default();
    let (y, _) = solver.integrate(
        &sys,
        t0,
        pack(&x0),
        t1,
        samples,
        |t, y| on_sample(t, &unpack(y)),
        &mut stats,
    )?;
    Ok(unpack(&y))
}

/// Linear and nonlinear fluctuations of the intracavity field for a weak
/// probe switched on at t = 0 on top of a steady pump.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearComparison {
    pub times: Vec<f64>,
    /// Predicted δα(t) in the nonlinear model's frame.
    pub linear: Vec<Complex64>,
    /// δα(t) = α(t) − ᾱ from the nonlinear integrator.
    pub nonlinear: Vec<Complex64>,
    /// max |nonlinear − linear| / max |linear|.
    pub max_deviation: f64,
}

/// Compare the linearized solution with the full nonlinear equations for a
/// probe of amplitude `probe_ratio·E` at offset `probe_offset` (rad/s) from
/// the pump. Requires a stable fixed point and αc = 0.
pub fn compare_with_nonlinear(
    params: &DeviceParams,
    pump: &Pump,
    probe_offset: f64,
    probe_ratio: f64,
    duration_s: f64,
    sample_dt: f64,
    tol: Tolerances,
) -> Result<LinearComparison, DynamicsError> {
    if params.alpha_c() != 0.0 {
        return Err(DynamicsError::InvalidInput(
            "linear comparison needs a vanishing cavity Kerr term".into(),
        ));
    }
    let analysis = PointAnalysis::new(params, pump)?;
    let fp = analysis
        .points
        .iter()
        .zip(&analysis.verdicts)
        .filter(|(_, v)| v.label == StabilityLabel::Stable)
        .map(|(fp, _)| *fp)
        .next()
        .ok_or_else(|| {
            DynamicsError::InvalidInput("no stable fixed point to linearize around".into())
        })?;
    let alpha = Complex64::new(fp.x, fp.y);
    let phase = Complex64::from_polar(1.0, alpha.arg());
    let e_p = probe_ratio * pump.amplitude;
    let seg = LinearSegment {
        duration_s,
        coupling: params.g0() * alpha.norm(),
        detuning: pump.detuning + 2.0 * params.g0() * fp.p,
    };
    let probe = ProbeTone {
        offset: probe_offset,
        amplitude: I * phase.conj() * e_p,
    };
    let options = TransientOptions {
        initial: InitialCondition::Rest,
        ..Default::default()
    };
    let lin = transient_linear_response(params, &[seg], &probe, sample_dt, &options)?;
    let linear: Vec<Complex64> = lin.full.iter().map(|x| phase * x[0]).collect();

    let sys = |t: f64, s: &[f64; 4]| {
        let mut d = eom_rhs(&StateVector::from_array(*s), params, pump).to_array();
        d[0] += e_p * (probe_offset * t).cos();
        d[1] -= e_p * (probe_offset * t).sin();
        d
    };
    let mut nonlinear = Vec::with_capacity(lin.times.len());
    let mut stats = IntegratorStats::default();
    Dopri5::new(tol).integrate(
        &sys,
        0.0,
        fp.state().to_array(),
        *lin.times.last().expect("nonempty"),
        &lin.times,
        |_, s| nonlinear.push(Complex64::new(s[0], s[1]) - alpha),
        &mut stats,
    )?;

    let peak = linear.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let dev = linear
        .iter()
        .zip(&nonlinear)
        .fold(0.0f64, |a, (l, n)| a.max((l - n).norm()));
    Ok(LinearComparison {
        times: lin.times,
        linear,
        nonlinear,
        max_deviation: dev / peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_cavity_rings_down_at_half_kappa() {
        let p = DeviceParams::reference();
        let wm = p.omega_m();
        let segs = [
            LinearSegment {
                duration_s: 2e-6,
                coupling: 0.0,
                detuning: -wm,
            },
            LinearSegment {
                duration_s: 4e-6,
                coupling: 0.0,
                detuning: -wm + 3.0 * p.kappa(),
            },
        ];
        let probe = ProbeTone {
            offset: wm,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let r = transient_linear_response(&p, &segs, &probe, 1e-9, &TransientOptions::default())
            .unwrap();
        let tr = r.transient_part();
        let (i1, i2) = (3000, 5000);
        let rate = (tr[i1].norm() / tr[i2].norm()).ln() / (r.times[i2] - r.times[i1]);
        assert!((rate / (p.kappa() / 2.0) - 1.0).abs() < 1e-6, "{rate}");
    }

    #[test]
    fn matrix_sign_projector_matches_modes() {
        let p = DeviceParams::reference();
        let m = evolution_matrix_m(&p, 1e7, -p.omega_m());
        let md = modal(&m, 1e10).unwrap().unwrap();
        let proj = probe_side_projector(&m, 1.0).unwrap();
        let mut want = CMat::zeros();
        for j in 0..4 {
            if keep(md.values[j], 1.0) {
                want += md.vectors.column(j) * md.inverse.row(j);
            }
        }
        assert!((proj - want).norm() < 1e-9 * want.norm());
    }
}
