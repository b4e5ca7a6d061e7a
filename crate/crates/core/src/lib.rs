//! Real-time active/reactive set-point computation for a grid-tied battery
//! providing primary frequency control and local voltage support at the
//! same time.
//!
//! Every control period the droop targets are projected onto the converter
//! capability region that applies at the predicted DC-bus and AC voltages.
//! The DC-bus voltage comes from a three-time-constant battery model, the AC
//! voltage from a transformer-reactance Thévenin estimate.
//!
//! - [`capability`]: curve library, curve selection, feasible regions.
//! - [`battery`]: equivalent circuit, bus voltage, SOC and power limits.
//! - [`grid`]: droop laws and gain sizing, AC voltage prediction.
//! - [`optimizer`]: projection and the per-step curve-assumption loop.
//! - [`simctl`]: scenario runs, traces and regulating-energy metrics.

pub mod battery;
pub mod capability;
pub mod grid;
pub mod optimizer;
pub mod simctl;
mod text;

pub use text::{parse_number, NumberError};
