//! Welch power spectral density of the complex output field.
//!
//! The field √κe2·(x + iy) lives in the pump frame, so its spectrum is two
//! sided: bin frequencies are offsets from the pump, negative below it.
//! The density is normalized so that summing `density·bin_width` over all
//! bins recovers the mean of |field|² over the analysed record.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{DynamicsError, Trajectory};
use crate::model::DeviceParams;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdSettings {
    /// Leading fraction of the record discarded as transient.
    pub transient_fraction: f64,
    pub segments: usize,
    pub overlap: f64,
}

impl Default for PsdSettings {
    fn default() -> Self {
        Self {
            transient_fraction: 0.5,
            segments: 4,
            overlap: 0.5,
        }
    }
}

impl PsdSettings {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(DynamicsError::InvalidInput(
                "transient_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.segments == 0 {
            return Err(DynamicsError::InvalidInput(
                "segments must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(DynamicsError::InvalidInput(
                "overlap must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Bin centres in Hz relative to the pump, ascending.
    pub freqs_hz: Vec<f64>,
    /// Power per Hz.
    pub density: Vec<f64>,
    pub bin_width_hz: f64,
    pub segment_len: usize,
    pub segments: usize,
}

impl Psd {
    /// Index of the zero-frequency bin.
    pub fn dc_index(&self) -> usize {
        self.freqs_hz.len() / 2
    }

    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width_hz
    }

    pub fn to_db(&self) -> Vec<f64> {
        self.density
            .iter()
            .map(|p| 10.0 * p.max(1e-300).log10())
            .collect()
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate for a uniformly sampled complex signal.
pub fn welch(
    signal: &[Complex64],
    dt: f64,
    segments: usize,
    overlap: f64,
) -> Result<Psd, DynamicsError> {
    if segments == 0 || !(0.0..1.0).contains(&overlap) || !(dt > 0.0) {
        return Err(DynamicsError::InvalidInput(format!(
            "welch needs segments >= 1, overlap in [0, 1) and dt > 0 (got {segments}, {overlap}, {dt})"
        )));
    }
    // Length L such that `segments` windows with the given overlap tile the record.
    let n = signal.len();
    let len = (n as f64 / (1.0 + (segments as f64 - 1.0) * (1.0 - overlap))).floor() as usize;
    if len < 16 {
        return Err(DynamicsError::SeriesTooShort {
            got: n,
            need: 16 * segments,
        });
    }
    let hop = if segments > 1 {
        (n - len) / (segments - 1)
    } else {
        0
    };
    let window = hann(len);
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let fs = 1.0 / dt;

    let mut acc = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..segments {
        let chunk = &signal[s * hop..s * hop + len];
        for ((b, z), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = z * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = 1.0 / (segments as f64 * fs * w2);
    // Reorder so frequencies ascend from -fs/2.
    let half = len / 2;
    let order = (half + len % 2..len).chain(0..half + len % 2);
    let mut freqs_hz = Vec::with_capacity(len);
    let mut density = Vec::with_capacity(len);
    for k in order {
        let kk = if k >= half + len % 2 {
            k as f64 - len as f64
        } else {
            k as f64
        };
        freqs_hz.push(kk * fs / len as f64);
        density.push(acc[k] * norm);
    }
    Ok(Psd {
        freqs_hz,
        density,
        bin_width_hz: fs / len as f64,
        segment_len: len,
        segments,
    })
}

/// Output-field PSD of a trajectory after discarding the transient.
pub fn output_psd(
    traj: &Trajectory,
    params: &DeviceParams,
    settings: &PsdSettings,
) -> Result<Psd, DynamicsError> {
    settings.validate()?;
    let dt = traj.sample_dt();
    let skip = (traj.states.len() as f64 * settings.transient_fraction).floor() as usize;
    let kept = traj.states.len().saturating_sub(skip);
    // Eight mechanical periods must remain after trimming.
    let need = (8.0 / (params.mech_freq_hz() * dt.max(f64::MIN_POSITIVE))).ceil() as usize;
    if kept < need.max(16 * settings.segments) {
        return Err(DynamicsError::SeriesTooShort {
            got: kept,
            need: need.max(16 * settings.segments),
        });
    }
    let amp = params.kappa_e2().sqrt();
    let field: Vec<Complex64> = traj.states[skip..]
        .iter()
        .map(|s| Complex64::new(s.x, s.y) * amp)
        .collect();
    welch(&field, dt, settings.segments, settings.overlap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, dt: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * f * i as f64 * dt))
            .collect()
    }

    #[test]
    fn pure_tone_lands_in_one_bin() {
        let dt = 1e-3;
        let n = 5 * 1024 / 2; // four 50%-overlap segments of 1024
        let psd = welch(&tone(0.0, dt, n), dt, 4, 0.5).unwrap();
        assert_eq!(psd.segment_len, 1024);
        // Tone exactly on a bin: choose a bin-centred frequency.
        let f0 = 100.0 * psd.bin_width_hz;
        let psd = welch(&tone(f0, dt, n), dt, 4, 0.5).unwrap();
        let peak = psd
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((psd.freqs_hz[peak] - f0).abs() < 1e-9);
        let total = psd.total_power();
        let near: f64 = psd.density[peak - 1..=peak + 1].iter().sum::<f64>() * psd.bin_width_hz;
        assert!(near / total > 0.999, "{}", near / total);
        // Beyond the main lobe Hann leakage is tiny.
        let far: f64 = psd.density[peak + 10..].iter().sum::<f64>() * psd.bin_width_hz;
        assert!(far / total < 1e-5);
    }

    #[test]
    fn negative_frequencies_are_resolved() {
        let dt = 1e-3;
        let psd = welch(&tone(-50.0 * 0.9765625, dt, 2560), dt, 4, 0.5).unwrap();
        let peak = psd
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(psd.freqs_hz[peak] < 0.0);
        assert_eq!(psd.freqs_hz[psd.dc_index()], 0.0);
    }

    #[test]
    fn parseval_for_a_tone() {
        let dt = 1e-3;
        let sig = tone(123.4, dt, 4000);
        let psd = welch(&sig, dt, 4, 0.5).unwrap();
        assert!((psd.total_power() - 1.0).abs() < 0.01);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(
            welch(&tone(1.0, 1.0, 20), 1.0, 4, 0.5),
            Err(DynamicsError::SeriesTooShort { .. })
        ));
    }
}
