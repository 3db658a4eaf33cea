//! Response taxonomy from the output-field spectrum.
//!
//! The fundamental f0 is the strongest line within ±25% of the mechanical
//! frequency. A candidate spacing s gets a comb score: the fraction of the
//! non-carrier power lying within a few bins of nonzero multiples of s.
//! Period doubling and tripling are recognised by power at the new lines
//! (odd multiples of f0/2, or multiples of f0/3 that are not multiples of f0).

use serde::{Deserialize, Serialize};

use super::psd::Psd;
use super::DynamicsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseLabel {
    Static,
    SelfOscillation,
    Period2,
    Period3,
    Chaos,
}

impl ResponseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::SelfOscillation => "self_oscillation",
            Self::Period2 => "period_2",
            Self::Period3 => "period_3",
            Self::Chaos => "chaos",
        }
    }
}

impl std::fmt::Display for ResponseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseClass {
    pub label: ResponseLabel,
    /// Comb spacing in Hz; present unless the label is static or chaos.
    pub comb_spacing_hz: Option<f64>,
    pub flatness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSettings {
    /// Non-carrier to carrier power ratio below which the response is static.
    pub static_floor: f64,
    pub comb_threshold: f64,
    pub flatness_threshold: f64,
    /// Fraction of non-carrier power at new lines that signals a subharmonic.
    pub new_line_threshold: f64,
    /// Half width, in bins, of the window around each comb line.
    pub line_halfwidth_bins: usize,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            static_floor: 1e-6,
            comb_threshold: 0.5,
            flatness_threshold: 0.25,
            new_line_threshold: 1e-3,
            line_halfwidth_bins: 3,
        }
    }
}

/// Intermediate quantities, exposed for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralScores {
    pub carrier: f64,
    pub ac: f64,
    pub fundamental_hz: f64,
    pub score_1: f64,
    pub score_2: f64,
    pub score_3: f64,
    pub new_lines_2: f64,
    pub new_lines_3: f64,
    pub flatness: f64,
}

struct Spectrum<'a> {
    psd: &'a Psd,
    dc: usize,
    carrier_half: usize,
}

impl Spectrum<'_> {
    fn is_carrier(&self, i: usize) -> bool {
        i.abs_diff(self.dc) <= self.carrier_half
    }

    /// Non-carrier power within `hw` bins of `f_hz·m` for the multipliers `m`
    /// accepted by `keep`.
    fn line_power(&self, spacing_hz: f64, hw: usize, keep: impl Fn(i64) -> bool) -> f64 {
        let df = self.psd.bin_width_hz;
        let spacing_bins = spacing_hz / df;
        let n = self.psd.density.len();
        let mut marked = vec![false; n];
        let m_max = (self.dc as f64 / spacing_bins).ceil() as i64 + 1;
        for m in -m_max..=m_max {
            if m == 0 || !keep(m) {
                continue;
            }
            let centre = self.dc as f64 + m as f64 * spacing_bins;
            let c = centre.round() as i64;
            for i in c - hw as i64..=c + hw as i64 {
                if i >= 0 && (i as usize) < n && !self.is_carrier(i as usize) {
                    marked[i as usize] = true;
                }
            }
        }
        marked
            .iter()
            .zip(&self.psd.density)
            .filter(|(m, _)| **m)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Compute the spectral scores used by [`classify_response`].
pub fn spectral_scores(
    psd: &Psd,
    mech_freq_hz: f64,
    settings: &ClassifierSettings,
) -> SpectralScores {
    let sp = Spectrum {
        psd,
        dc: psd.dc_index(),
        carrier_half: 2,
    };
    let df = psd.bin_width_hz;
    let total: f64 = psd.density.iter().sum();
    let carrier: f64 = (0..psd.density.len())
        .filter(|&i| sp.is_carrier(i))
        .map(|i| psd.density[i])
        .sum();
    let ac = (total - carrier).max(0.0);

    // Strongest line near the mechanical frequency, on either side of the pump.
    let (lo, hi) = (0.75 * mech_freq_hz, 1.25 * mech_freq_hz);
    let peak = (0..psd.density.len())
        .filter(|&i| (lo..=hi).contains(&psd.freqs_hz[i].abs()))
        .max_by(|&a, &b| psd.density[a].total_cmp(&psd.density[b]));
    let fundamental_hz = match peak {
        Some(i) if i > 0 && i + 1 < psd.density.len() => {
            let (a, b, c) = (
                psd.density[i - 1].max(1e-300).ln(),
                psd.density[i].max(1e-300).ln(),
                psd.density[i + 1].max(1e-300).ln(),
            );
            let denom = a - 2.0 * b + c;
            let shift = if denom < 0.0 {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            (psd.freqs_hz[i] + shift * df).abs()
        }
        Some(i) => psd.freqs_hz[i].abs(),
        None => mech_freq_hz,
    };

    let halfwidth = |spacing: f64| {
        ((spacing / df / 4.0).floor() as usize).clamp(1, settings.line_halfwidth_bins)
    };
    let frac = |p: f64| if ac > 0.0 { p / ac } else { 0.0 };
    let score = |s: f64| frac(sp.line_power(s, halfwidth(s), |_| true));
    let (f2, f3) = (fundamental_hz / 2.0, fundamental_hz / 3.0);

    // Flatness over |f| ≤ 2·fm without the carrier.
    let band: Vec<f64> = (0..psd.density.len())
        .filter(|&i| psd.freqs_hz[i].abs() <= 2.0 * mech_freq_hz && !sp.is_carrier(i))
        .map(|i| psd.density[i].max(1e-300))
        .collect();
    let flatness = if band.is_empty() {
        0.0
    } else {
        let geo = (band.iter().map(|p| p.ln()).sum::<f64>() / band.len() as f64).exp();
        let arith = band.iter().sum::<f64>() / band.len() as f64;
        if arith > 0.0 {
            geo / arith
        } else {
            0.0
        }
    };

    SpectralScores {
        carrier,
        ac,
        fundamental_hz,
        score_1: score(fundamental_hz),
        score_2: score(f2),
        score_3: score(f3),
        new_lines_2: frac(sp.line_power(f2, halfwidth(f2), |m| m % 2 != 0)),
        new_lines_3: frac(sp.line_power(f3, halfwidth(f3), |m| m % 3 != 0)),
        flatness,
    }
}

/// Label the response whose output spectrum is `psd`.
pub fn classify_response(
    psd: &Psd,
    mech_freq_hz: f64,
    settings: &ClassifierSettings,
) -> Result<ResponseClass, DynamicsError> {
    if psd.bin_width_hz > mech_freq_hz / 12.0 {
        return Err(DynamicsError::InvalidInput(format!(
            "spectral resolution {} Hz is coarser than fm/12",
            psd.bin_width_hz
        )));
    }
    let s = spectral_scores(psd, mech_freq_hz, settings);
    let flatness = s.flatness;
    let quiet = if s.carrier > 0.0 {
        s.ac / s.carrier < settings.static_floor
    } else {
        s.ac == 0.0
    };
    if quiet {
        return Ok(ResponseClass {
            label: ResponseLabel::Static,
            comb_spacing_hz: None,
            flatness,
        });
    }
    let eps = settings.new_line_threshold;
    let thr = settings.comb_threshold;
    let comb = |label, spacing| {
        Ok(ResponseClass {
            label,
            comb_spacing_hz: Some(spacing),
            flatness,
        })
    };
    let (sub2, sub3) = (s.new_lines_2 >= eps, s.new_lines_3 >= eps);
    match (sub2, sub3) {
        (false, false) if s.score_1 > thr => {
            return comb(ResponseLabel::SelfOscillation, s.fundamental_hz)
        }
        (true, false) if s.score_2 > thr => {
            return comb(ResponseLabel::Period2, s.fundamental_hz / 2.0)
        }
        (false, true) if s.score_3 > thr => {
            return comb(ResponseLabel::Period3, s.fundamental_hz / 3.0)
        }
        _ => {}
    }
    let best_comb = s.score_1.max(s.score_2).max(s.score_3);
    if best_comb <= thr && flatness > settings.flatness_threshold {
        return Ok(ResponseClass {
            label: ResponseLabel::Chaos,
            comb_spacing_hz: None,
            flatness,
        });
    }
    let mut candidates = [
        (
            ResponseLabel::SelfOscillation,
            if sub2 || sub3 { 0.0 } else { s.score_1 },
        ),
        (ResponseLabel::Period2, if sub2 { s.score_2 } else { 0.0 }),
        (ResponseLabel::Period3, if sub3 { s.score_3 } else { 0.0 }),
        (ResponseLabel::Chaos, flatness),
    ];
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    Err(DynamicsError::Ambiguous {
        first: candidates[0].0,
        first_score: candidates[0].1,
        second: candidates[1].0,
        second_score: candidates[1].1,
    })
}
