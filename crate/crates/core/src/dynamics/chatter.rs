//! Fast switching between two fields and its averaged limit.

use nalgebra::DVector;
use serde::Serialize;

use super::integrate::{rk4_step, Trajectory};
use crate::error::{Error, Result};
use crate::geo::VectorField;
use crate::system::DomainBox;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChatterResult {
    pub l: usize,
    pub dt: f64,
    pub steps_per_half: usize,
    pub switched: Trajectory,
    pub averaged: Trajectory,
    /// `max_t ‖γ_ℓ(t) − γ_∞(t)‖` over the common grid.
    pub sup_error: f64,
}

/// Integrates `G_ℓ` (each of `ℓ` subintervals runs `X1` on its first half and
/// `X2` on its second) and `½(X1 + X2)` from `x̄`.
///
/// The step is the largest `L / (2ℓk)` not above `dt_max`, so every
/// switching time is a grid point.
pub fn chattering(
    x1: &VectorField,
    x2: &VectorField,
    xbar: &[f64],
    l: usize,
    t_span: (f64, f64),
    dt_max: f64,
    domain: Option<&DomainBox>,
) -> Result<ChatterResult> {
    if l == 0 {
        return Err(Error::Input("ℓ must be at least 1".into()));
    }
    if x1.dim() != xbar.len() || x2.dim() != xbar.len() {
        return Err(Error::DimensionMismatch { expected: xbar.len(), found: x1.dim().min(x2.dim()) });
    }
    let len = t_span.1 - t_span.0;
    if !(len > 0.0) || !(dt_max > 0.0) {
        return Err(Error::Input(format!("bad time span {t_span:?} or step {dt_max}")));
    }
    let half = len / (2 * l) as f64;
    let k = (half / dt_max - 1e-9).ceil().max(1.0) as usize;
    let h = half / k as f64;
    let steps = 2 * l * k;
    let avg = VectorField::Combination(vec![(0.5, x1.clone()), (0.5, x2.clone())]);
    let names: Vec<String> = (1..=xbar.len()).map(|i| format!("x{i}")).collect();
    let empty = |names: Vec<String>| Trajectory {
        state_names: names,
        control_names: vec![],
        dt: h,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        u: vec![],
        exited_at: None,
    };
    let (mut sw, mut av) = (empty(names.clone()), empty(names));
    let mut ys = DVector::from_column_slice(xbar);
    let mut ya = ys.clone();
    for i in 0..=steps {
        let t = t_span.0 + i as f64 * h;
        if let Some(b) = domain {
            if !b.contains(ys.as_slice()) || !b.contains(ya.as_slice()) {
                return Err(Error::BoxExit { t });
            }
        }
        sw.t.push(t);
        sw.x.push(ys.clone());
        av.t.push(t);
        av.x.push(ya.clone());
        if i == steps {
            break;
        }
        let active = if (i / k) % 2 == 0 { x1 } else { x2 };
        ys = rk4_step(&ys, t, h, &mut |_, y| active.eval(y.as_slice()))?;
        ya = rk4_step(&ya, t, h, &mut |_, y| avg.eval(y.as_slice()))?;
    }
    let sup_error = sw.sup_distance(&av);
    Ok(ChatterResult { l, dt: h, steps_per_half: k, switched: sw, averaged: av, sup_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_amplitude() {
        let p = VectorField::constant(&[1.0]);
        let m = VectorField::constant(&[-1.0]);
        for l in [5, 10, 20] {
            let r = chattering(&p, &m, &[0.0], l, (0.0, 1.0), 1e-3, None).unwrap();
            assert!((r.sup_error - 1.0 / (2.0 * l as f64)).abs() < 1e-6, "{l}: {}", r.sup_error);
        }
    }

    #[test]
    fn equal_fields_do_not_chatter() {
        let f = VectorField::constant(&[0.3, -0.2]);
        let r = chattering(&f, &f, &[0.0, 0.0], 7, (0.0, 1.0), 1e-3, None).unwrap();
        assert!(r.sup_error < 1e-12);
    }

    #[test]
    fn switch_times_are_grid_points() {
        let p = VectorField::constant(&[1.0]);
        let r = chattering(&p, &p, &[0.0], 3, (0.0, 1.0), 1e-3, None).unwrap();
        assert_eq!(r.switched.len(), 6 * r.steps_per_half + 1);
        assert!(r.dt <= 1e-3);
    }
}
