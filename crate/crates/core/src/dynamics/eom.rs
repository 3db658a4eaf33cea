//! Semiclassical equations of motion in the pump frame.

use crate::model::{DeviceParams, Pump};

/// Cavity amplitude α = x + iy and mechanical amplitude β = p + iq.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub q: f64,
}

impl StateVector {
    pub const ZERO: Self = Self {
        x: 0.0,
        y: 0.0,
        p: 0.0,
        q: 0.0,
    };

    pub fn new(x: f64, y: f64, p: f64, q: f64) -> Self {
        Self { x, y, p, q }
    }

    pub fn from_array([x, y, p, q]: [f64; 4]) -> Self {
        Self { x, y, p, q }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.p, self.q]
    }

    /// |α|², the intracavity photon number.
    pub fn photons(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// |β|², the phonon number.
    pub fn phonons(&self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    pub fn norm(&self) -> f64 {
        (self.photons() + self.phonons()).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let d = [
            self.x - other.x,
            self.y - other.y,
            self.p - other.p,
            self.q - other.q,
        ];
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// The individual terms of each equation, so callers can judge residuals
/// against the magnitude of what cancelled.
fn terms(s: &StateVector, params: &DeviceParams, pump: &Pump) -> [[f64; 5]; 4] {
    let (k2, d, g0, ac) = (
        params.kappa() / 2.0,
        pump.detuning,
        params.g0(),
        params.alpha_c(),
    );
    let (wm, gm2) = (params.omega_m(), params.gamma_m() / 2.0);
    let n = s.photons();
    [
        [
            -k2 * s.x,
            -d * s.y,
            -2.0 * g0 * s.p * s.y,
            -ac * s.y * n,
            pump.amplitude,
        ],
        [d * s.x, -k2 * s.y, 2.0 * g0 * s.p * s.x, ac * s.x * n, 0.0],
        [-gm2 * s.p, wm * s.q, 0.0, 0.0, 0.0],
        [g0 * n, -wm * s.p, -gm2 * s.q, 0.0, 0.0],
    ]
}

/// Time derivative of the state.
pub fn eom_rhs(s: &StateVector, params: &DeviceParams, pump: &Pump) -> StateVector {
    let t = terms(s, params, pump);
    let sum = |row: &[f64; 5]| row.iter().sum::<f64>();
    StateVector::new(sum(&t[0]), sum(&t[1]), sum(&t[2]), sum(&t[3]))
}

/// Largest per-equation residual, each normalized by the sum of the absolute
/// values of that equation's terms. Zero when every term vanishes.
pub fn relative_residual(s: &StateVector, params: &DeviceParams, pump: &Pump) -> f64 {
    terms(s, params, pump)
        .iter()
        .map(|row| {
            let scale: f64 = row.iter().map(|v| v.abs()).sum();
            if scale == 0.0 {
                0.0
            } else {
                row.iter().sum::<f64>().abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
