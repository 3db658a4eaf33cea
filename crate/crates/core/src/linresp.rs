//! Probe transmission through the pump-dressed cavity, without a
//! rotating-wave approximation.
//!
//! The pump enters only through the parametric coupling g and the static
//! red shift of the cavity. Probe frequencies are given in Hz relative to
//! the bare cavity resonance.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::model::{self, DeviceParams, ModelError, PumpDrive};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinrespError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("coupling matrix is singular at probe offset {probe_hz} Hz")]
    Singular { probe_hz: f64 },
    #[error("empty frequency grid")]
    EmptyGrid,
    #[error("frequency grid must be strictly increasing")]
    UnsortedGrid,
    #[error("fewer than two peaks above the prominence threshold (found {found})")]
    FewerThanTwoPeaks { found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The pump as seen by the linear response: coupling, cavity shift and
/// pump detuning, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpDressing {
    pub coupling: f64,
    /// Static red shift of the cavity, ωc − ω̃c.
    pub cavity_shift: f64,
    /// Bare detuning Δ = ωd − ωc.
    pub pump_detuning: f64,
    pub pump_photons: f64,
}

impl PumpDressing {
    /// No pump: zero coupling and no shift. The pump detuning still sets
    /// the frame used for the probe offset.
    pub fn unpumped(pump_detuning_hz: f64) -> Self {
        Self {
            coupling: 0.0,
            cavity_shift: 0.0,
            pump_detuning: TAU * pump_detuning_hz,
            pump_photons: 0.0,
        }
    }

    /// Dressing produced by a pump, using the self-consistent photon number.
    pub fn from_drive(params: &DeviceParams, pump: &PumpDrive) -> Result<Self, LinrespError> {
        let n = model::pump_photon_number(params, pump)?.self_consistent;
        Ok(Self::from_photons(params, n, pump.detuning_hz()))
    }

    pub fn from_photons(params: &DeviceParams, n_d: f64, pump_detuning_hz: f64) -> Self {
        Self {
            coupling: params.g0() * n_d.sqrt(),
            cavity_shift: model::total_static_shift(
                n_d,
                params.g0(),
                params.omega_m(),
                params.alpha_c(),
            ),
            pump_detuning: TAU * pump_detuning_hz,
            pump_photons: n_d,
        }
    }

    /// Dressing with a prescribed coupling and effective detuning
    /// Δ̃ = Δ + shift. The pump detuning is chosen to give that Δ̃.
    pub fn from_coupling(
        params: &DeviceParams,
        coupling_hz: f64,
        effective_detuning_hz: f64,
    ) -> Result<Self, LinrespError> {
        let n = model::photons_for_coupling(params.g0_hz(), coupling_hz)?;
        let shift_hz =
            model::total_static_shift(n, params.g0_hz(), params.mech_freq_hz(), params.kerr_hz());
        Ok(Self::from_photons(
            params,
            n,
            effective_detuning_hz - shift_hz,
        ))
    }

    /// Effective detuning Δ̃ = ωd − ω̃c.
    pub fn effective_detuning(&self) -> f64 {
        self.pump_detuning + self.cavity_shift
    }
}

/// Cavity and mechanical susceptibilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    /// Shifted cavity frequency ω̃c measured from the bare cavity, rad/s.
    pub cavity_offset: f64,
    pub kappa: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
}

impl Susceptibilities {
    pub fn new(params: &DeviceParams, dressing: &PumpDressing) -> Self {
        Self {
            cavity_offset: -dressing.cavity_shift,
            kappa: params.kappa(),
            omega_m: params.omega_m(),
            gamma_m: params.gamma_m(),
        }
    }

    /// χa⁻¹ at a frequency measured from the bare cavity.
    pub fn cavity_inv(&self, w: f64) -> Complex64 {
        Complex64::new(w - self.cavity_offset, self.kappa / 2.0)
    }

    pub fn mech_inv(&self, w: f64) -> Complex64 {
        Complex64::new(w - self.omega_m, self.gamma_m / 2.0)
    }
}

/// The 4×4 mode-coupling matrix at probe offset ω from the pump (rad/s).
pub fn coupling_matrix(
    omega: f64,
    params: &DeviceParams,
    dressing: &PumpDressing,
) -> Result<Matrix4<Complex64>, LinrespError> {
    if !omega.is_finite() {
        return Err(LinrespError::NonFinite("omega"));
    }
    if !dressing.coupling.is_finite()
        || !dressing.cavity_shift.is_finite()
        || !dressing.pump_detuning.is_finite()
    {
        return Err(LinrespError::NonFinite("dressing"));
    }
    let chi = Susceptibilities::new(params, dressing);
    let g = Complex64::new(dressing.coupling, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let d = dressing.pump_detuning;
    // Frequencies ω + ωd and ωd − ω, both measured from the bare cavity.
    let upper = chi.cavity_inv(omega + d);
    let lower = chi.cavity_inv(d - omega).conj();
    #[rustfmt::skip]
    let m = Matrix4::new(
        upper, g, z, g,
        g, chi.mech_inv(omega), g, z,
        z, -g, -lower, -g,
        -g, z, -g, -chi.mech_inv(-omega).conj(),
    );
    Ok(m)
}

/// Complex transmission T = i√(κe1κe2)·(C⁻¹)₁₁ at `probe_hz` from the bare cavity.
pub fn transmission(
    probe_hz: f64,
    params: &DeviceParams,
    dressing: &PumpDressing,
) -> Result<Complex64, LinrespError> {
    let omega = TAU * probe_hz - dressing.pump_detuning;
    let c = coupling_matrix(omega, params, dressing)?;
    let mut e1 = nalgebra::Vector4::zeros();
    e1[0] = Complex64::new(1.0, 0.0);
    let col = c
        .lu()
        .solve(&e1)
        .ok_or(LinrespError::Singular { probe_hz })?;
    if !col[0].is_finite() {
        return Err(LinrespError::Singular { probe_hz });
    }
    Ok(Complex64::new(0.0, (params.kappa_e1() * params.kappa_e2()).sqrt()) * col[0])
}

/// Transmission on resonance without a pump, 2√(κe1κe2)/κ.
pub fn bare_peak(params: &DeviceParams) -> f64 {
    2.0 * (params.kappa_e1() * params.kappa_e2()).sqrt() / params.kappa()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    /// Probe frequency from the bare cavity, Hz, strictly increasing.
    pub freqs_hz: Vec<f64>,
    pub values: Vec<Complex64>,
    pub dressing: PumpDressing,
}

impl TransmissionTrace {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|t| t.norm()).collect()
    }

    /// |T| divided by the unpumped resonant peak.
    pub fn normalized_magnitudes(&self, params: &DeviceParams) -> Vec<f64> {
        let peak = bare_peak(params);
        self.values.iter().map(|t| t.norm() / peak).collect()
    }
}

pub fn spectrum(
    grid_hz: &[f64],
    params: &DeviceParams,
    dressing: &PumpDressing,
) -> Result<TransmissionTrace, LinrespError> {
    if grid_hz.is_empty() {
        return Err(LinrespError::EmptyGrid);
    }
    if grid_hz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LinrespError::UnsortedGrid);
    }
    let values = grid_hz
        .par_iter()
        .map(|&f| transmission(f, params, dressing))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TransmissionTrace {
        freqs_hz: grid_hz.to_vec(),
        values,
        dressing: *dressing,
    })
}

/// A local maximum refined by quadratic interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq_hz: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima of `y` whose prominence is at least `rel_prominence` of the
/// global maximum, sorted by prominence descending.
pub fn find_peaks(x: &[f64], y: &[f64], rel_prominence: f64) -> Vec<Peak> {
    let n = y.len();
    let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        let mut left_min = y[i];
        let mut j = i;
        while j > 0 && y[j - 1] <= y[i] {
            j -= 1;
            left_min = left_min.min(y[j]);
        }
        let mut right_min = y[i];
        let mut j = i;
        while j + 1 < n && y[j + 1] <= y[i] {
            j += 1;
            right_min = right_min.min(y[j]);
        }
        let prominence = y[i] - left_min.max(right_min);
        if prominence < rel_prominence * top {
            continue;
        }
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom < 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let step = if shift >= 0.0 {
            x[i + 1] - x[i]
        } else {
            x[i] - x[i - 1]
        };
        peaks.push(Peak {
            freq_hz: x[i] + shift * step,
            height: b - 0.25 * (a - c) * shift,
            prominence,
        });
    }
    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    peaks
}

/// Relative prominence a maximum of |T| needs to count as a peak.
pub const PEAK_PROMINENCE: f64 = 0.05;

/// Separation in Hz of the two most prominent maxima of |T|.
pub fn peak_splitting(trace: &TransmissionTrace) -> Result<f64, LinrespError> {
    let peaks = find_peaks(&trace.freqs_hz, &trace.magnitudes(), PEAK_PROMINENCE);
    if peaks.len() < 2 {
        return Err(LinrespError::FewerThanTwoPeaks { found: peaks.len() });
    }
    Ok((peaks[0].freq_hz - peaks[1].freq_hz).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bare_resonance_value() {
        let p = DeviceParams::reference();
        let d = PumpDressing::unpumped(-6.32e6);
        let t = transmission(0.0, &p, &d).unwrap();
        assert_relative_eq!(
            t.re,
            2.0 * (90.0f64 * 190.0).sqrt() / 380.0,
            max_relative = 1e-12
        );
        assert!(t.im.abs() < 1e-12);
        assert_relative_eq!(t.norm(), 0.688, epsilon = 5e-4);
    }

    #[test]
    fn far_off_resonance_vanishes() {
        let p = DeviceParams::reference();
        let d = PumpDressing::from_coupling(&p, 1e6, -6.32e6).unwrap();
        assert!(transmission(5e9, &p, &d).unwrap().norm() < 1e-4);
    }

    #[test]
    fn pairing_structure() {
        let p = DeviceParams::reference();
        let d = PumpDressing::from_coupling(&p, 2e6, -6.32e6).unwrap();
        let c = coupling_matrix(1.3e7, &p, &d).unwrap();
        let g = Complex64::new(d.coupling, 0.0);
        for (i, j) in [(0, 1), (0, 3), (1, 0), (1, 2)] {
            assert_eq!(c[(i, j)], g);
        }
        for (i, j) in [(2, 1), (2, 3), (3, 0), (3, 2)] {
            assert_eq!(c[(i, j)], -g);
        }
    }

    #[test]
    fn single_peak_is_rejected() {
        let x: Vec<f64> = (0..401).map(|i| i as f64 * 0.05 - 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 / (1.0 + v * v)).collect();
        assert_eq!(find_peaks(&x, &y, 0.05).len(), 1);
        let trace = TransmissionTrace {
            freqs_hz: x,
            values: y.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
            dressing: PumpDressing::unpumped(0.0),
        };
        assert_eq!(
            peak_splitting(&trace),
            Err(LinrespError::FewerThanTwoPeaks { found: 1 })
        );
    }

    #[test]
    fn grid_errors() {
        let p = DeviceParams::reference();
        let d = PumpDressing::unpumped(0.0);
        assert_eq!(spectrum(&[], &p, &d), Err(LinrespError::EmptyGrid));
        assert_eq!(
            spectrum(&[1.0, 1.0], &p, &d),
            Err(LinrespError::UnsortedGrid)
        );
    }
}
