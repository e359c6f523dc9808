//! Control systems `ẋ = f(x, u)` on a domain box.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprVec, Symbols};
use crate::linsys::LinearPair;

/// Axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainBox {
    bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &bounds {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Input(format!("bad interval [{lo}, {hi}]")));
            }
        }
        Ok(DomainBox { bounds })
    }

    /// The cube `[-r, r]^d`.
    pub fn cube(d: usize, r: f64) -> Self {
        DomainBox { bounds: vec![(-r, r); d] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.bounds.len() && p.iter().zip(&self.bounds).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn half_width(&self, i: usize) -> f64 {
        0.5 * (self.bounds[i].1 - self.bounds[i].0)
    }

    /// Sub-box of the first `k` axes starting at `offset`.
    pub fn slice(&self, offset: usize, k: usize) -> DomainBox {
        DomainBox { bounds: self.bounds[offset..offset + k].to_vec() }
    }

    /// `[c_i − r·hw_i, c_i + r·hw_i]` intersected with the box, `hw` the half widths.
    pub fn neighborhood(&self, center: &[f64], radius: f64) -> Vec<(f64, f64)> {
        center
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let r = radius * self.half_width(i);
                ((c - r).max(self.bounds[i].0), (c + r).min(self.bounds[i].1))
            })
            .collect()
    }
}

/// `ẋ = f(x, u)` with `n` states and `m` controls. The symbol table lists
/// states first, then controls.
#[derive(Clone, Debug)]
pub struct ControlSystem {
    name: String,
    n: usize,
    m: usize,
    f: ExprVec,
    domain: DomainBox,
}

impl ControlSystem {
    pub fn new(name: impl Into<String>, n: usize, m: usize, f: ExprVec, domain: DomainBox) -> Result<Self> {
        if f.symbols().len() != n + m {
            return Err(Error::DimensionMismatch { expected: n + m, found: f.symbols().len() });
        }
        if f.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f.dim() });
        }
        if domain.dim() != n + m {
            return Err(Error::DimensionMismatch { expected: n + m, found: domain.dim() });
        }
        Ok(ControlSystem { name: name.into(), n, m, f, domain })
    }

    /// Builds a system from textual components.
    pub fn parse<S: AsRef<str>>(name: &str, states: &[S], controls: &[S], f: &[S], domain: DomainBox) -> Result<Self> {
        let names: Vec<&str> = states.iter().chain(controls).map(|s| s.as_ref()).collect();
        let symbols = Arc::new(Symbols::new(&names)?);
        let f = ExprVec::parse(symbols, f)?;
        Self::new(name, states.len(), controls.len(), f, domain)
    }

    /// `ẋ = Ax + Bu` with default symbols `x1..xn`, `u1..um`.
    pub fn linear(pair: &LinearPair, domain: DomainBox) -> Result<Self> {
        let (n, m) = (pair.n(), pair.m());
        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.extend((1..=m).map(|i| format!("u{i}")));
        let symbols = Arc::new(Symbols::new(&names)?);
        let comps = (0..n)
            .map(|i| {
                let mut terms: Vec<(f64, usize)> = (0..n).map(|j| (pair.a()[(i, j)], j)).collect();
                terms.extend((0..m).map(|k| (pair.b()[(i, k)], n + k)));
                Expr::linear_combination(&terms)
            })
            .collect();
        Self::new("linear", n, m, ExprVec::new(symbols, comps)?, domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn f(&self) -> &ExprVec {
        &self.f
    }

    pub fn symbols(&self) -> &Arc<Symbols> {
        self.f.symbols()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn state_box(&self) -> DomainBox {
        self.domain.slice(0, self.n)
    }

    pub fn control_box(&self) -> DomainBox {
        self.domain.slice(self.n, self.m)
    }

    pub fn state_indices(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn control_indices(&self) -> Vec<usize> {
        (self.n..self.n + self.m).collect()
    }

    pub fn join(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n + self.m);
        v.extend_from_slice(x);
        v.extend_from_slice(u);
        v
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        self.check(x, u)?;
        self.f.eval(&self.join(x, u))
    }

    /// `∂f/∂u (x, u)`, `n × m`.
    pub fn jac_u(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, u)?;
        self.f.jacobian_idx(&self.control_indices(), &self.join(x, u))
    }

    /// `∂f/∂x (x, u)`, `n × n`.
    pub fn jac_x(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, u)?;
        self.f.jacobian_idx(&self.state_indices(), &self.join(x, u))
    }

    /// Linear approximation `(∂f/∂x, ∂f/∂u)` at a point.
    pub fn linearize(&self, x: &[f64], u: &[f64]) -> Result<LinearPair> {
        LinearPair::new(self.jac_x(x, u)?, self.jac_u(x, u)?)
    }

    fn check(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        if u.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: u.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_builder_matches_matrices() {
        let pair = LinearPair::new(
            DMatrix::from_row_slice(2, 2, &[0.0, -1.5, 2.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let sys = ControlSystem::linear(&pair, DomainBox::cube(3, 1.0)).unwrap();
        let v = sys.eval(&[0.2, -0.4], &[0.7]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 1.1).abs() < 1e-15);
        let lin = sys.linearize(&[0.1, 0.1], &[0.0]).unwrap();
        assert_eq!(lin.a(), pair.a());
        assert_eq!(lin.b(), pair.b());
    }

    #[test]
    fn dimension_checks() {
        let b = DomainBox::cube(2, 1.0);
        assert!(ControlSystem::parse("bad", &["x"], &["u"], &["u", "x"], b.clone()).is_err());
        let sys = ControlSystem::parse("cubic", &["x"], &["u"], &["u^3"], b).unwrap();
        assert!(sys.eval(&[0.0, 1.0], &[0.0]).is_err());
        assert!(DomainBox::new(vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn neighborhood_clips_to_box() {
        let b = DomainBox::new(vec![(-1.0, 1.0), (0.0, 4.0)]).unwrap();
        let nb = b.neighborhood(&[0.95, 2.0], 0.1);
        assert_eq!(nb[0], (0.85, 1.0));
        assert_eq!(nb[1], (1.8, 2.2));
    }
}
