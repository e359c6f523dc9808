//! Trajectories, difference fields, chattering, orbit coordinates and
//! conjugacy checks.

mod chatter;
mod conj;
mod feedback;
mod fields;
mod integrate;
mod mollify;
mod orbit;

pub use chatter::{chattering, ChatterResult};
pub use conj::{
    conjugacy_residual, transport_feedback, triangularity_defect, verify_conjugacy_dynamic, Conjugation, DynamicReport,
};
pub use feedback::{bump, Feedback, GridData, Mollified};
pub use fields::{closed_loop, difference_field, feedback_from_exprs};
pub use integrate::{
    flow, flow_with_tangent, grid_steps, integrate, integrate_partial, integrate_rhs, rk4_step, ControlInput, TimeFn,
    Trajectory, DEFAULT_DT,
};
pub use mollify::{smooth_feedback, SmoothingReport, CHECK_DENSITY};
pub use orbit::{flow_coords, flow_coords_inverse, orbit_dimension, FlowComposition, OrbitParams, OrbitReport};
