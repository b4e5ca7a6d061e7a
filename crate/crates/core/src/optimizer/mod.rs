//! Optimal set-point computation.

mod projection;
mod step;

pub use projection::{project, Projection, ProjectionProblem};
pub use step::{
    solve_step, verify_consistency, ControlRecord, Controller, ControllerConfig, StepError, StepStatus,
    MAX_ASSUMPTIONS,
};
