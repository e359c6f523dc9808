//! Decide, classify and numerically verify smooth and quasi-smooth feedback
//! linearizability of control systems `ẋ = f(x, u)`.
//!
//! - [`expr`]: expression trees, parser, printer and nested dual numbers.
//! - [`numlin`]: rank, spans and principal angles with explicit tolerances.
//! - [`linsys`]: Kronecker indices, Brunovsky form, linear conjugacy.
//! - [`geo`]: Lie brackets, limit-direction spaces, the distribution flag and
//!   the linearizability verdict.
//! - [`dynamics`]: RK4 trajectories, difference fields, chattering, orbit
//!   coordinates and conjugacy checks.

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geo;
pub mod linsys;
pub mod numlin;
pub mod system;

pub use error::{Error, Result};
pub use expr::{parse_expr, EvalPoint, Expr, ExprVec, Jet, Symbols};
pub use linsys::{BrunovskyResult, KroneckerData, LinearPair};
pub use numlin::{Subspace, DEFAULT_REL_TOL};
pub use system::{ControlSystem, DomainBox};
