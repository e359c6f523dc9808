use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expr::{ExprVec, Jet, Scalar};
use crate::system::ControlSystem;

/// Central finite-difference step used wherever AD cannot see through a field.
pub const FD_STEP: f64 = 1e-5;

pub type FieldFn = dyn Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync;

/// A vector field on ℝᵈ.
///
/// Expression-backed variants are differentiable by forward-mode AD to any
/// order; `Numeric` fields (flow compositions, interpolated feedbacks) are
/// differentiated by central differences with step [`FD_STEP`].
#[derive(Clone)]
pub enum VectorField {
    /// Components of `f` with the trailing symbols pinned to `params`:
    /// `x ↦ f(x, params)`.
    Expr {
        f: ExprVec,
        params: Vec<f64>,
    },
    Constant(DVector<f64>),
    /// `x ↦ ∂f/∂u_j (x, u)` for a system with `n` states.
    ControlColumn {
        f: ExprVec,
        n: usize,
        u: Vec<f64>,
        column: usize,
    },
    /// `[X, Y] = DY·X − DX·Y`.
    Bracket(Arc<VectorField>, Arc<VectorField>),
    /// `Σ c_i X_i`.
    Combination(Vec<(f64, VectorField)>),
    Numeric {
        dim: usize,
        label: String,
        eval: Arc<FieldFn>,
    },
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Expr { f: e, params } => {
                let names: Vec<String> = e.comps().iter().map(|c| c.display(e.symbols()).to_string()).collect();
                write!(f, "Expr({names:?}; params {params:?})")
            }
            VectorField::Constant(v) => write!(f, "Constant({:?})", v.as_slice()),
            VectorField::ControlColumn { column, u, .. } => {
                write!(f, "∂f/∂u{}(·, {u:?})", column + 1)
            }
            VectorField::Bracket(a, b) => write!(f, "[{a:?}, {b:?}]"),
            VectorField::Combination(t) => write!(f, "Σ{t:?}"),
            VectorField::Numeric { label, .. } => write!(f, "Numeric({label})"),
        }
    }
}

fn lift_all(vals: &[f64], depth: u32) -> Vec<Jet> {
    vals.iter().map(|&v| Jet::constant(v, depth)).collect()
}

impl VectorField {
    /// `x ↦ f(x, u)` for a fixed control.
    pub fn frozen(sys: &ControlSystem, u: &[f64]) -> Result<Self> {
        if u.len() != sys.m() {
            return Err(Error::DimensionMismatch { expected: sys.m(), found: u.len() });
        }
        Ok(VectorField::Expr { f: sys.f().clone(), params: u.to_vec() })
    }

    /// Expression field over exactly `dim` state symbols.
    pub fn from_exprs(f: ExprVec) -> Self {
        VectorField::Expr { f, params: Vec::new() }
    }

    pub fn constant(v: &[f64]) -> Self {
        VectorField::Constant(DVector::from_column_slice(v))
    }

    pub fn numeric(dim: usize, label: impl Into<String>, eval: Arc<FieldFn>) -> Self {
        VectorField::Numeric { dim, label: label.into(), eval }
    }

    pub fn bracket(x: &VectorField, y: &VectorField) -> Self {
        VectorField::Bracket(Arc::new(x.clone()), Arc::new(y.clone()))
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Expr { f, .. } | VectorField::ControlColumn { f, .. } => f.dim(),
            VectorField::Constant(v) => v.len(),
            VectorField::Bracket(a, _) => a.dim(),
            VectorField::Combination(t) => t.first().map_or(0, |(_, x)| x.dim()),
            VectorField::Numeric { dim, .. } => *dim,
        }
    }

    /// Whether the AD path applies all the way down.
    pub fn is_differentiable(&self) -> bool {
        match self {
            VectorField::Expr { .. } | VectorField::Constant(_) | VectorField::ControlColumn { .. } => true,
            VectorField::Bracket(a, b) => a.is_differentiable() && b.is_differentiable(),
            VectorField::Combination(t) => t.iter().all(|(_, x)| x.is_differentiable()),
            VectorField::Numeric { .. } => false,
        }
    }

    /// Bracket nesting depth, used to pick the cheaper evaluation order.
    fn nesting(&self) -> usize {
        match self {
            VectorField::Bracket(a, b) => 1 + a.nesting().max(b.nesting()),
            VectorField::Combination(t) => t.iter().map(|(_, x)| x.nesting()).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        match self {
            VectorField::Expr { f, params } => {
                let mut v = x.to_vec();
                v.extend_from_slice(params);
                f.eval(&v)
            }
            VectorField::Constant(c) => Ok(c.clone()),
            VectorField::Numeric { eval, .. } => eval(x),
            VectorField::Combination(t) => {
                let mut acc = DVector::zeros(self.dim());
                for (c, f) in t {
                    acc += f.eval(x)? * *c;
                }
                Ok(acc)
            }
            _ if self.is_differentiable() => {
                let out = self.eval_jet(&lift_all(x, 0))?;
                Ok(DVector::from_iterator(out.len(), out.iter().map(|j| j.value())))
            }
            VectorField::Bracket(a, b) => {
                let xa = a.eval(x)?;
                let xb = b.eval(x)?;
                Ok(fd_jvp(b, x, xa.as_slice())? - fd_jvp(a, x, xb.as_slice())?)
            }
            VectorField::ControlColumn { .. } => unreachable!("control columns are differentiable"),
        }
    }

    /// AD evaluation on jets of any common depth.
    pub fn eval_jet(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let depth = x.first().map_or(0, |j| j.depth());
        let zero = Jet::constant(0.0, depth);
        match self {
            VectorField::Expr { f, params } => {
                let mut v = x.to_vec();
                v.extend(params.iter().map(|&p| Jet::constant(p, depth)));
                f.eval_scalar(&v, &zero)
            }
            VectorField::Constant(c) => Ok(lift_all(c.as_slice(), depth)),
            VectorField::ControlColumn { f, n, u, column } => {
                let mut v: Vec<Jet> = x.iter().map(Jet::deepen).collect();
                for (k, &uk) in u.iter().enumerate() {
                    let seed = if k == *column { 1.0 } else { 0.0 };
                    v.push(Jet::extend(&Jet::constant(uk, depth), &Jet::constant(seed, depth)));
                }
                debug_assert_eq!(v.len(), n + u.len());
                let out = f.eval_scalar(&v, &Jet::constant(0.0, depth + 1))?;
                Ok(out.iter().map(Jet::eps).collect())
            }
            VectorField::Bracket(a, b) => {
                // evaluate the deeper child once at the extended point and
                // read its value off the real part
                let (first, second, sign) = if a.nesting() <= b.nesting() { (a, b, 1.0) } else { (b, a, -1.0) };
                let fa = first.eval_jet(x)?;
                let ext: Vec<Jet> = x.iter().zip(&fa).map(|(p, v)| Jet::extend(p, v)).collect();
                let sb = second.eval_jet(&ext)?;
                let fb: Vec<Jet> = sb.iter().map(Jet::re).collect();
                let d_second = sb.iter().map(Jet::eps);
                let ext: Vec<Jet> = x.iter().zip(&fb).map(|(p, v)| Jet::extend(p, v)).collect();
                let d_first: Vec<Jet> = first.eval_jet(&ext)?.iter().map(Jet::eps).collect();
                // [first, second] = D(second)·first − D(first)·second
                Ok(d_second
                    .zip(d_first)
                    .map(|(p, q)| {
                        let v = p.sub(&q);
                        if sign < 0.0 {
                            v.neg()
                        } else {
                            v
                        }
                    })
                    .collect())
            }
            VectorField::Combination(t) => {
                let mut acc = lift_all(&vec![0.0; self.dim()], depth);
                for (c, f) in t {
                    let v = f.eval_jet(x)?;
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a = a.add(&b.mul(&Jet::constant(*c, depth)));
                    }
                }
                Ok(acc)
            }
            VectorField::Numeric { label, .. } => {
                Err(Error::Numerical(format!("field `{label}` has no AD representation")))
            }
        }
    }

    /// `DX(x)·v`: AD when available, central differences otherwise.
    pub fn jvp(&self, x: &[f64], v: &[f64]) -> Result<DVector<f64>> {
        if self.is_differentiable() {
            let seeded: Vec<Jet> = x.iter().zip(v).map(|(&a, &b)| Jet::dual(a, b)).collect();
            let out = self.eval_jet(&seeded)?;
            Ok(DVector::from_iterator(out.len(), out.iter().map(|j| j.coeffs()[1])))
        } else {
            fd_jvp(self, x, v)
        }
    }
}

fn fd_jvp(field: &VectorField, x: &[f64], v: &[f64]) -> Result<DVector<f64>> {
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + FD_STEP * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - FD_STEP * b).collect();
    Ok((field.eval(&plus)? - field.eval(&minus)?) / (2.0 * FD_STEP))
}

/// `[X, Y](p) = DY(p)·X(p) − DX(p)·Y(p)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField, p: &[f64]) -> Result<DVector<f64>> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    VectorField::bracket(x, y).eval(p)
}
