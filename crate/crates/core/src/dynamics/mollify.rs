//! Smooth approximation of continuous feedbacks.

use std::sync::Arc;

use serde::Serialize;

use super::feedback::{Feedback, GridData, Mollified};
use crate::error::{Error, Result};
use crate::geo::sample::box_samples;

/// Check points per node spacing along each axis.
pub const CHECK_DENSITY: usize = 10;

/// Upper bound on check points; larger dense grids are sampled randomly.
const MAX_CHECK_POINTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub width: f64,
    /// Sup of `‖α − β‖` over the check grid.
    pub sup_error: f64,
    pub check_points: usize,
    pub halvings: usize,
}

/// Sup of `‖a − b‖` over `CHECK_DENSITY`-times refined nodes of `grid`.
fn sup_error(grid: &GridData, beta: &Mollified) -> Result<(f64, usize)> {
    let per_axis = grid.axes().iter().map(|a| (a.len() - 1) * CHECK_DENSITY + 1).max().unwrap_or(2);
    let pts = box_samples(&grid.bounds(), per_axis, MAX_CHECK_POINTS, 42).points;
    let mut worst: f64 = 0.0;
    for p in &pts {
        let e = (grid.interpolate(p)? - beta.eval(p)?).amax();
        if !e.is_finite() {
            return Err(Error::Numerical(format!("non-finite smoothing error at {p:?}")));
        }
        worst = worst.max(e);
    }
    Ok((worst, pts.len()))
}

/// A `C^∞` feedback within `eps` of `alpha` on its grid.
///
/// The kernel starts at `kernel_width` (a quarter of the widest axis when
/// `None`) and is halved until the check-grid error drops below `eps`.
/// Expression feedbacks are already smooth and come back unchanged.
pub fn smooth_feedback(alpha: &Feedback, eps: f64, kernel_width: Option<f64>) -> Result<(Feedback, SmoothingReport)> {
    if !(eps > 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {eps}")));
    }
    let grid = match alpha {
        Feedback::Expr(_) | Feedback::Mollified(_) => {
            return Ok((alpha.clone(), SmoothingReport { width: 0.0, sup_error: 0.0, check_points: 0, halvings: 0 }))
        }
        Feedback::Grid(g) => g.clone(),
        Feedback::Numeric { .. } => {
            return Err(Error::Input("sample the feedback on a grid before smoothing it".into()));
        }
    };
    let extent = grid.bounds().iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let mut width = kernel_width.unwrap_or(0.25 * extent);
    let spacing = grid.max_spacing();
    let mut halvings = 0;
    loop {
        if width <= spacing {
            return Err(Error::CannotAchieve(format!(
                "kernel width {width:.3e} reached the grid spacing {spacing:.3e} before the error fell below {eps}"
            )));
        }
        let beta = Mollified::new((*grid).clone(), width)?;
        let (err, count) = sup_error(&grid, &beta)?;
        if err < eps {
            let report = SmoothingReport { width, sup_error: err, check_points: count, halvings };
            return Ok((Feedback::Mollified(Arc::new(beta)), report));
        }
        width *= 0.5;
        halvings += 1;
    }
}
