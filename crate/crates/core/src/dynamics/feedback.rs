//! Feedbacks `u = α(x)`: expressions, interpolated grids and their smoothings.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expr::ExprVec;
use crate::geo::FieldFn;

/// Values on a tensor grid with multilinear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct GridData {
    axes: Vec<Vec<f64>>,
    /// Row-major over the axes: the last axis varies fastest.
    values: Vec<DVector<f64>>,
    m: usize,
}

impl GridData {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<DVector<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Input("grid needs at least one axis".into()));
        }
        for a in &axes {
            if a.len() < 2 || a.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Input("grid axes need two or more strictly increasing nodes".into()));
            }
        }
        let count: usize = axes.iter().map(Vec::len).product();
        if values.len() != count {
            return Err(Error::DimensionMismatch { expected: count, found: values.len() });
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::Input("grid values differ in length".into()));
        }
        Ok(GridData { axes, values, m })
    }

    /// Samples `f` on a uniform grid with `per_axis` nodes over `bounds`.
    pub fn sample(bounds: &[(f64, f64)], per_axis: usize, f: impl Fn(&[f64]) -> DVector<f64>) -> Result<Self> {
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| (0..per_axis).map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1).max(1) as f64).collect())
            .collect();
        let mut values = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        let count: usize = axes.iter().map(Vec::len).product();
        for _ in 0..count {
            let p: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            values.push(f(&p));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        GridData::new(axes, values)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest node spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().flat_map(|a| a.windows(2).map(|w| w[1] - w[0])).fold(0.0, f64::max)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        for (v, a) in x.iter().zip(&self.axes) {
            let slack = 1e-12 * (a[a.len() - 1] - a[0]);
            if *v < a[0] - slack || *v > a[a.len() - 1] + slack {
                return Err(Error::Numerical(format!("feedback grid does not cover {x:?}")));
            }
        }
        Ok(())
    }

    pub fn interpolate(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check(x)?;
        let d = self.dim();
        let mut cell = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for (v, a) in x.iter().zip(&self.axes) {
            let i = a.partition_point(|c| c <= v).clamp(1, a.len() - 1) - 1;
            cell.push(i);
            frac.push(((v - a[i]) / (a[i + 1] - a[i])).clamp(0.0, 1.0));
        }
        let mut out = DVector::zeros(self.m);
        let mut corner = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let hi = mask >> k & 1 == 1;
                corner[k] = cell[k] + hi as usize;
                w *= if hi { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                out += &self.values[self.flat(&corner)] * w;
            }
        }
        Ok(out)
    }
}

/// `exp(−1/(1−t²))` on `(−1, 1)`, zero outside.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Partition-of-unity smoothing of grid values:
/// `β(x) = Σ_j h_j(x) α(x_j)` with `h_j ∝ Π_k bump((x_k − x_{j,k}) / w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollified {
    grid: GridData,
    width: f64,
}

impl Mollified {
    pub fn new(grid: GridData, width: f64) -> Result<Self> {
        if !(width > grid.max_spacing()) {
            return Err(Error::CannotAchieve(format!(
                "kernel width {width} does not cover grid spacing {}",
                grid.max_spacing()
            )));
        }
        Ok(Mollified { grid, width })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn grid(&self) -> &GridData {
        &self.grid
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.grid.check(x)?;
        let w = self.width;
        let ranges: Vec<(usize, usize)> = x
            .iter()
            .zip(&self.grid.axes)
            .map(|(v, a)| (a.partition_point(|c| *c <= v - w), a.partition_point(|c| *c < v + w)))
            .collect();
        let mut num = DVector::zeros(self.grid.m);
        let mut den = 0.0;
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 >= r.1) {
            return Err(Error::Numerical("no kernel support at evaluation point".into()));
        }
        loop {
            let mut h = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                h *= bump((x[k] - self.grid.axes[k][i]) / w);
            }
            if h > 0.0 {
                num += &self.grid.values[self.grid.flat(&idx)] * h;
                den += h;
            }
            let mut k = idx.len();
            loop {
                if k == 0 {
                    if den == 0.0 {
                        return Err(Error::Numerical("no kernel support at evaluation point".into()));
                    }
                    return Ok(num / den);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < ranges[k].1 {
                    break;
                }
                idx[k] = ranges[k].0;
            }
        }
    }
}

/// A continuous map `α` from states to controls.
#[derive(Clone)]
pub enum Feedback {
    /// Components over the state symbols.
    Expr(ExprVec),
    Grid(Arc<GridData>),
    Mollified(Arc<Mollified>),
    Numeric {
        n: usize,
        m: usize,
        label: String,
        eval: Arc<FieldFn>,
    },
}

impl fmt::Debug for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feedback::Expr(e) => {
                let c: Vec<String> = e.comps().iter().map(|c| c.display(e.symbols()).to_string()).collect();
                write!(f, "Feedback::Expr({c:?})")
            }
            Feedback::Grid(g) => write!(f, "Feedback::Grid({} axes)", g.dim()),
            Feedback::Mollified(g) => write!(f, "Feedback::Mollified(width {})", g.width),
            Feedback::Numeric { label, .. } => write!(f, "Feedback::Numeric({label})"),
        }
    }
}

impl Feedback {
    /// A constant feedback over `n` states.
    pub fn constant(n: usize, value: &[f64]) -> Self {
        let v = DVector::from_column_slice(value);
        let m = v.len();
        Feedback::Numeric { n, m, label: format!("constant {value:?}"), eval: Arc::new(move |_| Ok(v.clone())) }
    }

    pub fn n(&self) -> usize {
        match self {
            Feedback::Expr(e) => e.symbols().len(),
            Feedback::Grid(g) => g.dim(),
            Feedback::Mollified(g) => g.grid.dim(),
            Feedback::Numeric { n, .. } => *n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Feedback::Expr(e) => e.dim(),
            Feedback::Grid(g) => g.m(),
            Feedback::Mollified(g) => g.grid.m(),
            Feedback::Numeric { m, .. } => *m,
        }
    }

    pub fn as_expr(&self) -> Option<&ExprVec> {
        match self {
            Feedback::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        match self {
            Feedback::Expr(e) => e.eval(x),
            Feedback::Grid(g) => g.interpolate(x),
            Feedback::Mollified(g) => g.eval(x),
            Feedback::Numeric { eval, .. } => eval(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multilinear_reproduces_bilinear_functions() {
        let g = GridData::sample(&[(-1.0, 1.0), (0.0, 2.0)], 4, |p| {
            DVector::from_vec(vec![1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1]])
        })
        .unwrap();
        for p in [[0.13, 1.7], [-1.0, 0.0], [1.0, 2.0], [0.4, 0.4]] {
            let v = g.interpolate(&p).unwrap()[0];
            assert!((v - (1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1])).abs() < 1e-12);
        }
        assert!(g.interpolate(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn mollified_constants_are_exact() {
        let g = GridData::sample(&[(-1.0, 1.0)], 11, |_| DVector::from_vec(vec![3.0, -1.0])).unwrap();
        let b = Mollified::new(g, 0.3).unwrap();
        let v = b.eval(&[0.37]).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-14 && (v[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn width_must_cover_spacing() {
        let g = GridData::sample(&[(-1.0, 1.0)], 5, |p| DVector::from_vec(vec![p[0]])).unwrap();
        assert!(matches!(Mollified::new(g, 0.2), Err(Error::CannotAchieve(_))));
    }
}
