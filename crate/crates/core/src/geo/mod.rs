//! Lie brackets, limit-direction spaces, the distribution flag and the
//! linearizability verdict.

mod classify;
mod field;
mod flag;
mod limit;
pub mod sample;

pub use classify::{classify_point, PointClass, PointTag, MAX_CLASSIFY_SAMPLES};
pub use field::{lie_bracket, FieldFn, VectorField, FD_STEP};
pub use flag::{
    build_flag, decide, linearizability_verdict, state_grid, Condition, Delta0Source, FlagParams, FlagReport,
    LevelReport, VerdictTag, ROBUST_MARGIN,
};
pub use limit::{estimate_d, sample_directions, LimitDirections, LimitParams};
