//! Fixed points, their linear stability and phase maps over detuning and power.

use nalgebra::{Matrix4, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubic;
use crate::dynamics::eom::{relative_residual, StateVector};
use crate::model::{self, DeviceParams, ModelError, Pump, PumpDrive, SweepDirection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("single-photon coupling is zero; the p-cubic is undefined (use the Kerr-only branch)")]
    DegenerateCoupling,
    #[error("eigenvalue solver did not converge")]
    EigenNonConvergence,
    #[error("indeterminate cell at detuning {detuning_hz} Hz, power {power_dbm} dBm")]
    IndeterminateCell { detuning_hz: f64, power_dbm: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A steady state of the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub q: f64,
    /// Largest per-equation residual relative to the size of the cancelling terms.
    pub residual: f64,
}

impl FixedPoint {
    pub fn state(&self) -> StateVector {
        StateVector::new(self.x, self.y, self.p, self.q)
    }

    pub fn photons(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

/// Slope B of the effective detuning A = Δ + B·p and the p-cubic coefficients,
/// highest power first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub slope: f64,
    pub coeffs: [f64; 4],
}

/// ωm + γm²/(4ωm), the factor relating p to |α|² at a fixed point.
fn mech_factor(params: &DeviceParams) -> f64 {
    let (wm, gm) = (params.omega_m(), params.gamma_m());
    wm + gm * gm / (4.0 * wm)
}

pub fn eom_coefficients(
    params: &DeviceParams,
    pump: &Pump,
) -> Result<CubicCoefficients, StabilityError> {
    let g0 = params.g0();
    if g0 == 0.0 {
        return Err(StabilityError::DegenerateCoupling);
    }
    let w = mech_factor(params);
    let b = 2.0 * g0 + params.alpha_c() / g0 * w;
    let (d, k) = (pump.detuning, params.kappa());
    Ok(CubicCoefficients {
        slope: b,
        coeffs: [
            b * b * w,
            2.0 * b * d * w,
            (d * d + k * k / 4.0) * w,
            -g0 * pump.amplitude * pump.amplitude,
        ],
    })
}

/// All fixed points, sorted by p ascending (by photon number when g0 = 0).
pub fn fixed_points(params: &DeviceParams, pump: &Pump) -> Vec<FixedPoint> {
    let (d, k2, e) = (pump.detuning, params.kappa() / 2.0, pump.amplitude);
    let cavity = |a: f64| {
        let den = a * a + k2 * k2;
        (k2 * e / den, a * e / den)
    };
    let finish = |x: f64, y: f64, p: f64, q: f64| {
        let state = StateVector::new(x, y, p, q);
        FixedPoint {
            x,
            y,
            p,
            q,
            residual: relative_residual(&state, params, pump),
        }
    };

    match eom_coefficients(params, pump) {
        Ok(cc) => {
            let ratio = params.gamma_m() / (2.0 * params.omega_m());
            cubic::real_roots(cc.coeffs)
                .into_iter()
                .map(|p| {
                    let (x, y) = cavity(d + cc.slope * p);
                    finish(x, y, p, ratio * p)
                })
                .collect()
        }
        Err(_) => {
            // Kerr-only branch: n·((Δ + αc·n)² + κ²/4) = E².
            let ac = params.alpha_c();
            let coeffs = [ac * ac, 2.0 * d * ac, d * d + k2 * k2, -e * e];
            let mut roots = cubic::real_roots(coeffs);
            if roots.is_empty() {
                roots.push(0.0);
            }
            roots
                .into_iter()
                .map(|n| {
                    let (x, y) = cavity(d + ac * n.max(0.0));
                    finish(x, y, 0.0, 0.0)
                })
                .collect()
        }
    }
}

/// The evolution matrix S of the linearized equations at an arbitrary state.
pub fn evolution_matrix(s: &StateVector, params: &DeviceParams, pump: &Pump) -> Matrix4<f64> {
    let (k2, d, g0, ac) = (
        params.kappa() / 2.0,
        pump.detuning,
        params.g0(),
        params.alpha_c(),
    );
    let (wm, gm2) = (params.omega_m(), params.gamma_m() / 2.0);
    let (x, y, p) = (s.x, s.y, s.p);
    #[rustfmt::skip]
    let m = Matrix4::new(
        -k2 - 2.0 * ac * x * y, -d - 2.0 * g0 * p - ac * x * x - 3.0 * ac * y * y, -2.0 * g0 * y, 0.0,
        d + 2.0 * g0 * p + 3.0 * ac * x * x + ac * y * y, -k2 + 2.0 * ac * x * y, 2.0 * g0 * x, 0.0,
        0.0, 0.0, -gm2, wm,
        2.0 * g0 * x, 2.0 * g0 * y, -wm, -gm2,
    );
    m
}

pub fn jacobian(fp: &FixedPoint, params: &DeviceParams, pump: &Pump) -> Matrix4<f64> {
    evolution_matrix(&fp.state(), params, pump)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityLabel {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub eigenvalues: [Complex64; 4],
    pub max_re: f64,
    pub label: StabilityLabel,
}

/// Tolerance on max Re λ below which a point counts as marginal.
pub fn marginal_tolerance(params: &DeviceParams) -> f64 {
    1e-6 * params.omega_m()
}

pub fn eigenvalues(m: &Matrix4<f64>) -> Result<[Complex64; 4], StabilityError> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(*m, f64::EPSILON * scale, 10_000)
        .ok_or(StabilityError::EigenNonConvergence)?;
    let ev = schur.complex_eigenvalues();
    Ok([ev[0], ev[1], ev[2], ev[3]])
}

pub fn verdict(
    fp: &FixedPoint,
    params: &DeviceParams,
    pump: &Pump,
) -> Result<StabilityVerdict, StabilityError> {
    let eigenvalues = eigenvalues(&jacobian(fp, params, pump))?;
    let max_re = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = marginal_tolerance(params);
    let label = if max_re.abs() <= tol {
        StabilityLabel::Marginal
    } else if max_re < 0.0 {
        StabilityLabel::Stable
    } else {
        StabilityLabel::Unstable
    };
    Ok(StabilityVerdict {
        eigenvalues,
        max_re,
        label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Stable,
    Unstable,
    Bistable,
}

impl PointClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Bistable => "bistable",
        }
    }
}

impl std::fmt::Display for PointClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything known about one (Δ, P) point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointAnalysis {
    pub points: Vec<FixedPoint>,
    pub verdicts: Vec<StabilityVerdict>,
    pub class: PointClass,
}

impl PointAnalysis {
    pub fn new(params: &DeviceParams, pump: &Pump) -> Result<Self, StabilityError> {
        let points = fixed_points(params, pump);
        let verdicts = points
            .iter()
            .map(|fp| verdict(fp, params, pump))
            .collect::<Result<Vec<_>, _>>()?;
        let n_stable = verdicts
            .iter()
            .filter(|v| v.label == StabilityLabel::Stable)
            .count();
        let class = match n_stable {
            0 => PointClass::Unstable,
            1 => PointClass::Stable,
            _ => PointClass::Bistable,
        };
        Ok(Self {
            points,
            verdicts,
            class,
        })
    }

    fn is_stable(&self, i: usize) -> bool {
        self.verdicts[i].label == StabilityLabel::Stable
    }

    /// Branch occupied when nothing is known about the history.
    pub fn initial_branch(&self, sweep: SweepDirection) -> usize {
        let candidates = self.preferred_candidates();
        let by_n = |a: &usize, b: &usize| {
            self.points[*a]
                .photons()
                .total_cmp(&self.points[*b].photons())
        };
        match sweep {
            SweepDirection::Up => candidates.into_iter().min_by(by_n),
            SweepDirection::Down => candidates.into_iter().max_by(by_n),
        }
        .unwrap_or(0)
    }

    /// Branch nearest to a previously occupied state, preferring stable branches.
    pub fn continue_from(&self, previous: &FixedPoint) -> usize {
        let key = |fp: &FixedPoint| {
            if fp.p != 0.0 || previous.p != 0.0 {
                fp.p
            } else {
                fp.photons()
            }
        };
        let target = key(previous);
        self.preferred_candidates()
            .into_iter()
            .min_by(|a, b| {
                let da = (key(&self.points[*a]) - target).abs();
                let db = (key(&self.points[*b]) - target).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    fn preferred_candidates(&self) -> Vec<usize> {
        let stable: Vec<usize> = (0..self.points.len())
            .filter(|&i| self.is_stable(i))
            .collect();
        if stable.is_empty() {
            (0..self.points.len()).collect()
        } else {
            stable
        }
    }
}

/// Classify a single point, independent of any sweep history.
pub fn classify_point(
    params: &DeviceParams,
    pump: &PumpDrive,
) -> Result<PointClass, StabilityError> {
    Ok(PointAnalysis::new(params, &pump.resolve(params))?.class)
}

/// One evenly spaced axis `start + i·step`, inclusive of `stop` when it lands on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), StabilityError> {
        let ok = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !ok || self.step <= 0.0 || self.stop < self.start {
            return Err(StabilityError::InvalidGrid(format!(
                "{name}: need finite start <= stop and step > 0 (got {}..{} step {})",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

/// Grid over pump detuning (Hz) and pump power at the generator (dBm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub detuning_hz: AxisSpec,
    pub power_dbm: AxisSpec,
    /// Attenuation between generator and cavity input.
    #[serde(default)]
    pub attenuation_db: f64,
}

impl GridSpec {
    pub const DEFAULT_DETUNING_STEP_HZ: f64 = 300e3;
    pub const DEFAULT_POWER_STEP_DB: f64 = 0.1;

    pub fn validate(&self) -> Result<(), StabilityError> {
        self.detuning_hz.validate("detuning_hz")?;
        self.power_dbm.validate("power_dbm")?;
        if !self.attenuation_db.is_finite() {
            return Err(StabilityError::InvalidGrid(
                "attenuation_db must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn pump(&self, detuning_hz: f64, power_dbm: f64) -> Result<PumpDrive, ModelError> {
        PumpDrive::from_dbm(detuning_hz, power_dbm, self.attenuation_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub class: PointClass,
    /// max Re λ of the occupied branch, rad/s.
    pub max_re_lambda: f64,
    pub n_branches: usize,
    /// Index of the occupied branch in the p-sorted fixed-point list.
    pub branch: usize,
    pub occupied: FixedPoint,
}

/// A fully classified grid. `cells[i][j]` is detuning `i`, power `j`
/// (powers in ascending order regardless of the sweep direction).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub detunings_hz: Vec<f64>,
    pub powers_dbm: Vec<f64>,
    pub sweep: SweepDirection,
    pub cells: Vec<Vec<PhaseCell>>,
}

/// Sweep one detuning column in the given direction, threading the occupied branch.
pub fn scan_column(
    params: &DeviceParams,
    grid: &GridSpec,
    detuning_hz: f64,
    powers_dbm: &[f64],
    sweep: SweepDirection,
) -> Result<Vec<PhaseCell>, StabilityError> {
    let order: Vec<usize> = match sweep {
        SweepDirection::Up => (0..powers_dbm.len()).collect(),
        SweepDirection::Down => (0..powers_dbm.len()).rev().collect(),
    };
    let mut out: Vec<Option<PhaseCell>> = vec![None; powers_dbm.len()];
    let mut previous: Option<FixedPoint> = None;
    for j in order {
        let power_dbm = powers_dbm[j];
        let pump = grid.pump(detuning_hz, power_dbm)?.resolve(params);
        let analysis =
            PointAnalysis::new(params, &pump).map_err(|_| StabilityError::IndeterminateCell {
                detuning_hz,
                power_dbm,
            })?;
        let branch = match &previous {
            Some(prev) => analysis.continue_from(prev),
            None => analysis.initial_branch(sweep),
        };
        let occupied = analysis.points[branch];
        previous = Some(occupied);
        out[j] = Some(PhaseCell {
            class: analysis.class,
            max_re_lambda: analysis.verdicts[branch].max_re,
            n_branches: analysis.points.len(),
            branch,
            occupied,
        });
    }
    Ok(out
        .into_iter()
        .map(|c| c.expect("every power visited"))
        .collect())
}

/// Classify every cell; columns run in parallel on the current rayon pool.
pub fn scan_phase_map(
    params: &DeviceParams,
    grid: &GridSpec,
    sweep: SweepDirection,
) -> Result<PhaseMap, StabilityError> {
    grid.validate()?;
    let detunings_hz = grid.detuning_hz.values();
    let powers_dbm = grid.power_dbm.values();
    let cells = detunings_hz
        .par_iter()
        .map(|&d| scan_column(params, grid, d, &powers_dbm, sweep))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhaseMap {
        detunings_hz,
        powers_dbm,
        sweep,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub detuning_hz: f64,
    /// Lowest unstable grid power, `None` if the whole column is stable.
    pub threshold_dbm: Option<f64>,
    /// The same threshold on the figure-axis power scale.
    pub threshold_p: Option<f64>,
}

impl BoundaryPoint {
    /// Lowest unstable power of one scanned column.
    pub fn from_column(
        params: &DeviceParams,
        detuning_hz: f64,
        powers_dbm: &[f64],
        column: &[PhaseCell],
        attenuation_db: f64,
    ) -> Self {
        let threshold_dbm = column
            .iter()
            .position(|c| c.class == PointClass::Unstable)
            .map(|j| powers_dbm[j]);
        Self {
            detuning_hz,
            threshold_dbm,
            threshold_p: threshold_dbm.map(|dbm| figure_power(params, dbm - attenuation_db)),
        }
    }
}

impl PhaseMap {
    pub fn boundary(&self, params: &DeviceParams, attenuation_db: f64) -> Vec<BoundaryPoint> {
        self.detunings_hz
            .iter()
            .zip(&self.cells)
            .map(|(&d, column)| {
                BoundaryPoint::from_column(params, d, &self.powers_dbm, column, attenuation_db)
            })
            .collect()
    }
}

/// Figure-axis power for a pump of `dbm_at_cavity`.
pub fn figure_power(params: &DeviceParams, dbm_at_cavity: f64) -> f64 {
    let n0 = model::resonant_photon_number(params, model::dbm_to_watts(dbm_at_cavity));
    model::dimensionless_power(params.g0_hz(), n0, params.mech_freq_hz()).unwrap_or(f64::NAN)
}

/// Lowest power (dBm at the cavity) with no stable fixed point, refined by
/// bisection inside `[lo_dbm, hi_dbm]`. `None` if `hi_dbm` is still stable
/// or `lo_dbm` is already unstable.
pub fn threshold_dbm(
    params: &DeviceParams,
    detuning_hz: f64,
    lo_dbm: f64,
    hi_dbm: f64,
    tol_db: f64,
) -> Result<Option<f64>, StabilityError> {
    let unstable = |dbm: f64| -> Result<bool, StabilityError> {
        let pump = PumpDrive::from_dbm(detuning_hz, dbm, 0.0)?;
        Ok(classify_point(params, &pump)? == PointClass::Unstable)
    };
    if unstable(lo_dbm)? || !unstable(hi_dbm)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo_dbm, hi_dbm);
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::eom::eom_rhs;
    use crate::model::DeviceSpec;
    use approx::assert_relative_eq;

    fn paper() -> DeviceParams {
        DeviceParams::reference()
    }

    #[test]
    fn zero_drive_has_single_trivial_point() {
        let p = paper();
        let pump = Pump {
            detuning: -p.omega_m(),
            amplitude: 0.0,
        };
        let fps = fixed_points(&p, &pump);
        assert_eq!(fps.len(), 1);
        assert_eq!(fps[0].state(), StateVector::ZERO);
        let v = verdict(&fps[0], &p, &pump).unwrap();
        assert_eq!(v.label, StabilityLabel::Stable);
        let mut re: Vec<f64> = v.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], -p.kappa() / 2.0, max_relative = 1e-9);
        assert_relative_eq!(re[3], -p.gamma_m() / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn kerr_free_slope_is_twice_g0() {
        let p = paper();
        let cc = eom_coefficients(
            &p,
            &Pump {
                detuning: -1e6,
                amplitude: 1e9,
            },
        )
        .unwrap();
        assert_eq!(cc.slope, 2.0 * p.g0());
        let cc0 = eom_coefficients(
            &p,
            &Pump {
                detuning: -1e6,
                amplitude: 0.0,
            },
        )
        .unwrap();
        assert_eq!(cc0.coeffs[3], 0.0);
    }

    #[test]
    fn zero_g0_is_degenerate_for_the_cubic() {
        let p = paper().with_g0_hz(0.0).unwrap();
        assert_eq!(
            eom_coefficients(&p, &Pump::default()),
            Err(StabilityError::DegenerateCoupling)
        );
    }

    #[test]
    fn weak_drive_matches_perturbative_p() {
        let p = paper();
        let pump = Pump {
            detuning: -p.omega_m(),
            amplitude: 1e8,
        };
        let fps = fixed_points(&p, &pump);
        assert_eq!(fps.len(), 1);
        let k = p.kappa();
        let expected = p.g0() * 1e16 / ((pump.detuning.powi(2) + k * k / 4.0) * mech_factor(&p));
        assert_relative_eq!(fps[0].p, expected, max_relative = 1e-6);
    }

    #[test]
    fn bare_eigenvalues_for_decoupled_modes() {
        let p = DeviceParams::new(DeviceSpec {
            g0_hz: 0.0,
            ..Default::default()
        })
        .unwrap();
        let pump = Pump {
            detuning: -3e7,
            amplitude: 0.0,
        };
        let fp = fixed_points(&p, &pump)[0];
        let v = verdict(&fp, &p, &pump).unwrap();
        let mut ims: Vec<f64> = v.eigenvalues.iter().map(|z| z.im.abs()).collect();
        ims.sort_by(f64::total_cmp);
        assert_relative_eq!(ims[0], 3e7, max_relative = 1e-9);
        assert_relative_eq!(ims[3], p.omega_m(), max_relative = 1e-9);
    }

    #[test]
    fn kerr_only_branch_is_self_consistent() {
        let p = DeviceParams::new(DeviceSpec {
            g0_hz: 0.0,
            kerr_hz: 0.05,
            ..Default::default()
        })
        .unwrap();
        let pump = PumpDrive::from_dbm(-5e5, -20.0, 0.0).unwrap().resolve(&p);
        for fp in fixed_points(&p, &pump) {
            assert!(fp.residual < 1e-9, "{}", fp.residual);
            let d = eom_rhs(&fp.state(), &p, &pump);
            assert_eq!((d.p, d.q), (0.0, 0.0));
        }
    }

    #[test]
    fn trace_rule_on_fixed_points() {
        let p = paper().with_kerr_hz(12.5e-3).unwrap();
        let pump = PumpDrive::from_dbm(-7e6, -28.0, 0.0).unwrap().resolve(&p);
        for fp in fixed_points(&p, &pump) {
            let s = jacobian(&fp, &p, &pump);
            assert_relative_eq!(s.trace(), -(p.kappa() + p.gamma_m()), max_relative = 1e-12);
        }
    }

    #[test]
    fn above_threshold_flip() {
        let p = paper();
        let t = threshold_dbm(&p, -6.32e6, -40.0, -20.0, 1e-3)
            .unwrap()
            .unwrap();
        assert!((-31.0..-29.0).contains(&t), "{t}");
        let below = PumpDrive::from_dbm(-6.32e6, t - 0.1, 0.0).unwrap();
        let above = PumpDrive::from_dbm(-6.32e6, t + 0.1, 0.0).unwrap();
        assert_ne!(classify_point(&p, &below).unwrap(), PointClass::Unstable);
        assert_eq!(classify_point(&p, &above).unwrap(), PointClass::Unstable);
    }

    #[test]
    fn axis_lengths() {
        assert_eq!(AxisSpec::new(-1.0, 1.0, 0.1).len(), 21);
        assert_eq!(AxisSpec::single(3.0).values(), vec![3.0]);
        assert!(AxisSpec::new(1.0, 0.0, 0.1).validate("a").is_err());
        assert!(AxisSpec::new(0.0, 1.0, 0.0).validate("a").is_err());
    }

    #[test]
    fn one_by_one_map_matches_classify_point() {
        let p = paper();
        let grid = GridSpec {
            detuning_hz: AxisSpec::single(-6.32e6),
            power_dbm: AxisSpec::single(-29.0),
            attenuation_db: 0.0,
        };
        let map = scan_phase_map(&p, &grid, SweepDirection::Up).unwrap();
        let direct = classify_point(&p, &grid.pump(-6.32e6, -29.0).unwrap()).unwrap();
        assert_eq!(map.cells[0][0].class, direct);
    }
}
