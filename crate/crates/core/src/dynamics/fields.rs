//! Closed-loop and difference vector fields.

use std::sync::Arc;

use nalgebra::DVector;

use super::feedback::Feedback;
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprVec, Symbols};
use crate::geo::VectorField;
use crate::system::ControlSystem;

fn check(sys: &ControlSystem, a: &Feedback) -> Result<()> {
    if a.n() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: a.n() });
    }
    if a.m() != sys.m() {
        return Err(Error::DimensionMismatch { expected: sys.m(), found: a.m() });
    }
    Ok(())
}

/// `f` with every control symbol replaced by the feedback's expression,
/// over a symbol table of the states alone.
fn substituted(sys: &ControlSystem, alpha: &ExprVec) -> Vec<Expr> {
    let n = sys.n();
    sys.f()
        .comps()
        .iter()
        .map(|c| {
            c.substitute(&|i| {
                if i < n {
                    Expr::Var(i)
                } else {
                    alpha.comps()[i - n].clone()
                }
            })
        })
        .collect()
}

fn state_symbols(sys: &ControlSystem) -> Result<Arc<Symbols>> {
    Ok(Arc::new(Symbols::new(&sys.symbols().names()[..sys.n()])?))
}

/// `f_α(x) = f(x, α(x))`.
pub fn closed_loop(sys: &ControlSystem, alpha: &Feedback) -> Result<VectorField> {
    check(sys, alpha)?;
    if let Some(a) = alpha.as_expr() {
        return Ok(VectorField::from_exprs(ExprVec::new(state_symbols(sys)?, substituted(sys, a))?));
    }
    let (sys, alpha) = (sys.clone(), alpha.clone());
    Ok(VectorField::numeric(
        sys.n(),
        format!("f(x, {alpha:?})"),
        Arc::new(move |x: &[f64]| {
            let u = alpha.eval(x)?;
            sys.eval(x, u.as_slice())
        }),
    ))
}

/// `δf_{α1,α2}(x) = f(x, α1(x)) − f(x, α2(x))`, expression-backed when both
/// feedbacks are.
pub fn difference_field(sys: &ControlSystem, alpha1: &Feedback, alpha2: &Feedback) -> Result<VectorField> {
    check(sys, alpha1)?;
    check(sys, alpha2)?;
    if let (Some(a), Some(b)) = (alpha1.as_expr(), alpha2.as_expr()) {
        let comps = substituted(sys, a).into_iter().zip(substituted(sys, b)).map(|(p, q)| Expr::sub(p, q)).collect();
        return Ok(VectorField::from_exprs(ExprVec::new(state_symbols(sys)?, comps)?));
    }
    let f1 = closed_loop(sys, alpha1)?;
    let f2 = closed_loop(sys, alpha2)?;
    Ok(VectorField::numeric(
        sys.n(),
        format!("δf({alpha1:?}, {alpha2:?})"),
        Arc::new(move |x: &[f64]| -> Result<DVector<f64>> { Ok(f1.eval(x)? - f2.eval(x)?) }),
    ))
}

/// Parses a feedback written over the system's state symbols.
pub fn feedback_from_exprs<S: AsRef<str>>(sys: &ControlSystem, texts: &[S]) -> Result<Feedback> {
    let e = ExprVec::parse(state_symbols(sys)?, texts)?;
    if e.dim() != sys.m() {
        return Err(Error::DimensionMismatch { expected: sys.m(), found: e.dim() });
    }
    Ok(Feedback::Expr(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::DomainBox;

    #[test]
    fn examples() {
        let s = ControlSystem::parse("int", &["x"], &["u"], &["u"], DomainBox::cube(2, 2.0)).unwrap();
        let one = feedback_from_exprs(&s, &["1"]).unwrap();
        let zero = feedback_from_exprs(&s, &["0"]).unwrap();
        let d = difference_field(&s, &one, &zero).unwrap();
        assert!(d.is_differentiable());
        assert_eq!(d.eval(&[0.3]).unwrap()[0], 1.0);
        assert_eq!(difference_field(&s, &one, &one).unwrap().eval(&[0.7]).unwrap()[0], 0.0);
    }

    #[test]
    fn brunovsky_difference_has_zero_head() {
        let s = ControlSystem::parse("bru", &["z1", "z2"], &["v"], &["z2", "v"], DomainBox::cube(3, 2.0)).unwrap();
        let a = feedback_from_exprs(&s, &["sin(z1) + z2^2"]).unwrap();
        let b = Feedback::constant(2, &[0.25]);
        let d = difference_field(&s, &a, &b).unwrap();
        assert!(!d.is_differentiable());
        for p in [[0.1, 0.2], [-0.5, 0.9]] {
            let v = d.eval(&p).unwrap();
            assert_eq!(v[0], 0.0);
            assert!((v[1] - (p[0].sin() + p[1] * p[1] - 0.25)).abs() < 1e-15);
        }
    }
}
