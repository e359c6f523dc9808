//! Triangular conjugations `(x, u) ↦ (χ_I(x), χ_II(x, u))` onto linear pairs.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::feedback::Feedback;
use super::integrate::{grid_steps, rk4_step, ControlInput};
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprVec};
use crate::geo::sample::box_samples;
use crate::linsys::LinearPair;
use crate::system::ControlSystem;

/// `χ_I` and `χ_II` over the system's full symbol table (states, then
/// controls), with an optional inverse `(χ_I⁻¹(z), χ_II⁻¹(z, v))` over the
/// target's symbols.
#[derive(Clone, Debug)]
pub struct Conjugation {
    chi_i: ExprVec,
    chi_ii: ExprVec,
    inverse: Option<(ExprVec, ExprVec)>,
}

impl Conjugation {
    /// Rejects a `χ_I` that reads any control symbol.
    pub fn new(sys: &ControlSystem, chi_i: ExprVec, chi_ii: ExprVec) -> Result<Self> {
        let c = Self::new_unchecked(sys, chi_i, chi_ii)?;
        let n = sys.n();
        if let Some(i) = c.chi_i.comps().iter().flat_map(|e| e.vars()).find(|&i| i >= n) {
            return Err(Error::Input(format!(
                "χ_I must depend on the state only but reads `{}`",
                sys.symbols().name(i)
            )));
        }
        Ok(c)
    }

    /// Accepts any `χ_I`, for probing non-triangular candidates.
    pub fn new_unchecked(sys: &ControlSystem, chi_i: ExprVec, chi_ii: ExprVec) -> Result<Self> {
        for e in [&chi_i, &chi_ii] {
            if e.symbols().as_ref() != sys.symbols().as_ref() {
                return Err(Error::Input("conjugation must use the system's symbols".into()));
            }
        }
        if chi_i.dim() != sys.n() {
            return Err(Error::DimensionMismatch { expected: sys.n(), found: chi_i.dim() });
        }
        if chi_ii.dim() != sys.m() {
            return Err(Error::DimensionMismatch { expected: sys.m(), found: chi_ii.dim() });
        }
        Ok(Conjugation { chi_i, chi_ii, inverse: None })
    }

    pub fn parse<S: AsRef<str>>(sys: &ControlSystem, chi_i: &[S], chi_ii: &[S]) -> Result<Self> {
        let s = sys.symbols().clone();
        Self::new(sys, ExprVec::parse(s.clone(), chi_i)?, ExprVec::parse(s, chi_ii)?)
    }

    pub fn with_inverse(mut self, chi_i_inv: ExprVec, chi_ii_inv: ExprVec) -> Result<Self> {
        let n = self.chi_i.dim();
        let m = self.chi_ii.dim();
        if chi_i_inv.dim() != n || chi_i_inv.symbols().len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: chi_i_inv.dim() });
        }
        if chi_ii_inv.dim() != m || chi_ii_inv.symbols().len() != n + m {
            return Err(Error::DimensionMismatch { expected: m, found: chi_ii_inv.dim() });
        }
        self.inverse = Some((chi_i_inv, chi_ii_inv));
        Ok(self)
    }

    pub fn chi_i(&self) -> &ExprVec {
        &self.chi_i
    }

    pub fn chi_ii(&self) -> &ExprVec {
        &self.chi_ii
    }

    pub fn inverse(&self) -> Option<&(ExprVec, ExprVec)> {
        self.inverse.as_ref()
    }

    /// The same conjugation with `c` added to every `χ_II` component.
    pub fn shift_chi_ii(&self, c: f64) -> Self {
        let comps = self.chi_ii.comps().iter().map(|e| Expr::add(e.clone(), Expr::Const(c))).collect();
        let chi_ii = ExprVec::new(self.chi_ii.symbols().clone(), comps).expect("same shape");
        Conjugation { chi_ii, inverse: None, ..self.clone() }
    }
}

fn check_target(sys: &ControlSystem, target: &LinearPair) -> Result<()> {
    if target.n() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: target.n() });
    }
    if target.m() != sys.m() {
        return Err(Error::DimensionMismatch { expected: sys.m(), found: target.m() });
    }
    Ok(())
}

/// `‖∂χ_I/∂x · f − A χ_I − B χ_II‖` at one `(x, u)`.
fn residual_at(sys: &ControlSystem, chi: &Conjugation, target: &LinearPair, p: &[f64]) -> Result<f64> {
    let (n, m) = (sys.n(), sys.m());
    let f = sys.eval(&p[..n], &p[n..])?;
    let mut dir = f.as_slice().to_vec();
    dir.resize(n + m, 0.0);
    let lhs = chi.chi_i.jvp(p, &dir)?;
    let z = chi.chi_i.eval(p)?;
    let v = chi.chi_ii.eval(p)?;
    Ok((lhs - target.a() * z - target.b() * v).norm())
}

/// Largest residual of the infinitesimal conjugacy identity over samples of
/// `(x, u)`.
pub fn conjugacy_residual(
    sys: &ControlSystem,
    chi: &Conjugation,
    target: &LinearPair,
    samples: &[Vec<f64>],
) -> Result<f64> {
    check_target(sys, target)?;
    let worst = samples
        .par_iter()
        .map(|p| {
            if p.len() != sys.n() + sys.m() {
                return Err(Error::DimensionMismatch { expected: sys.n() + sys.m(), found: p.len() });
            }
            residual_at(sys, chi, target, p)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicReport {
    /// `max_t ‖χ_I(x(t)) − z(t)‖` over all test controls.
    pub max_deviation: f64,
    pub per_control: Vec<f64>,
    /// Largest change of `χ_I` when only the control varies.
    pub triangularity_defect: f64,
    pub dt: f64,
}

/// Integrates the system and the target driven by `v = χ_II(x, u)` side by
/// side, starting from `z(0) = χ_I(x(0))`, for each control.
pub fn verify_conjugacy_dynamic(
    sys: &ControlSystem,
    chi: &Conjugation,
    target: &LinearPair,
    x0: &[f64],
    controls: &[ControlInput],
    t_span: (f64, f64),
    dt: f64,
) -> Result<DynamicReport> {
    check_target(sys, target)?;
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: x0.len() });
    }
    let n = sys.n();
    let (steps, h) = grid_steps(t_span.0, t_span.1, dt)?;
    let domain = sys.domain();
    let per_control = controls
        .par_iter()
        .map(|control| -> Result<f64> {
            let mut y = DVector::zeros(2 * n);
            y.rows_mut(0, n).copy_from_slice(x0);
            y.rows_mut(n, n).copy_from(&chi.chi_i.eval(&sys.join(x0, &vec![0.0; sys.m()]))?);
            let mut worst: f64 = 0.0;
            let mut rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
                let x = &y.as_slice()[..n];
                let z = y.rows(n, n);
                let u = control.eval(t, x)?;
                let p = sys.join(x, u.as_slice());
                let v = chi.chi_ii.eval(&p)?;
                let mut out = DVector::zeros(2 * n);
                out.rows_mut(0, n).copy_from(&sys.eval(x, u.as_slice())?);
                out.rows_mut(n, n).copy_from(&(target.a() * z + target.b() * v));
                Ok(out)
            };
            for i in 0..=steps {
                let t = t_span.0 + i as f64 * h;
                let x = &y.as_slice()[..n];
                let u = control.eval(t, x)?;
                let p = sys.join(x, u.as_slice());
                if !domain.contains(&p) {
                    return Err(Error::BoxExit { t });
                }
                let zx = chi.chi_i.eval(&p)?;
                worst = worst.max((zx - y.rows(n, n)).norm());
                if i < steps {
                    y = rk4_step(&y, t, h, &mut rhs)?;
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let triangularity_defect = triangularity_defect(sys, chi, x0)?;
    Ok(DynamicReport {
        max_deviation: per_control.iter().copied().fold(0.0, f64::max),
        per_control,
        triangularity_defect,
        dt: h,
    })
}

/// `max ‖χ_I(x, u) − χ_I(x, u′)‖` over a grid of controls at states around
/// `x0` and across the state box.
pub fn triangularity_defect(sys: &ControlSystem, chi: &Conjugation, x0: &[f64]) -> Result<f64> {
    let states = box_samples(sys.state_box().bounds(), 3, 243, 42).points;
    let controls = box_samples(sys.control_box().bounds(), 3, 243, 42).points;
    let mut worst: f64 = 0.0;
    for x in std::iter::once(x0.to_vec()).chain(states) {
        let base = chi.chi_i.eval(&sys.join(&x, &controls[0]))?;
        for u in &controls[1..] {
            worst = worst.max((chi.chi_i.eval(&sys.join(&x, u))? - &base).norm());
        }
    }
    Ok(worst)
}

/// `(χ□α)(z) = χ_II(χ_I⁻¹(z), α(χ_I⁻¹(z)))`, a feedback of the target.
pub fn transport_feedback(sys: &ControlSystem, chi: &Conjugation, alpha: &Feedback) -> Result<Feedback> {
    let Some((inv_i, _)) = chi.inverse.as_ref() else {
        return Err(Error::Input("transporting a feedback needs χ_I⁻¹".into()));
    };
    let n = sys.n();
    if let Some(a) = alpha.as_expr() {
        // x := χ_I⁻¹(z), u := α(x)
        let x_of_z: Vec<Expr> = inv_i.comps().to_vec();
        let u_of_z: Vec<Expr> = a.comps().iter().map(|e| e.substitute(&|i| x_of_z[i].clone())).collect();
        let comps = chi
            .chi_ii
            .comps()
            .iter()
            .map(|e| {
                e.substitute(&|i| {
                    if i < n {
                        x_of_z[i].clone()
                    } else {
                        u_of_z[i - n].clone()
                    }
                })
            })
            .collect();
        return Ok(Feedback::Expr(ExprVec::new(inv_i.symbols().clone(), comps)?));
    }
    let (inv_i, chi_ii, alpha) = (inv_i.clone(), chi.chi_ii.clone(), alpha.clone());
    Ok(Feedback::Numeric {
        n,
        m: sys.m(),
        label: format!("χ□{alpha:?}"),
        eval: std::sync::Arc::new(move |z: &[f64]| {
            let x = inv_i.eval(z)?;
            let u = alpha.eval(x.as_slice())?;
            let mut p = x.as_slice().to_vec();
            p.extend_from_slice(u.as_slice());
            chi_ii.eval(&p)
        }),
    })
}
