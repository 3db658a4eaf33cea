//! Semiclassical simulator for a pumped microwave optomechanical cavity.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments)]

pub mod cubic;
pub mod dynamics;
pub mod linresp;
pub mod model;
pub mod stability;

pub use dynamics::eom::{eom_rhs, StateVector};
pub use model::{DeviceParams, DeviceSpec, Pump, PumpDrive, SweepDirection};
pub use num_complex::Complex64;
pub use stability::{FixedPoint, PhaseMap, PointClass, StabilityVerdict};
