//! Tolerance-aware rank, spans and principal angles.
//!
//! All rank decisions count singular values above `rel_tol · σ_max`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Singular values in nonincreasing order and, when `left`, the thin `U`.
fn svd(m: &DMatrix<f64>, left: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    if !left {
        if let Ok(sv) = f.singular_values() {
            return (sv, None);
        }
    } else if let Ok(s) = f.thin_svd() {
        let sv = s.S().column_vector().iter().copied().collect();
        let u = s.U();
        return (sv, Some(DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)])));
    }
    // faer did not converge; nalgebra's iteration is the fallback
    let s = m.clone().svd(left, false);
    let mut idx: Vec<usize> = (0..s.singular_values.len()).collect();
    idx.sort_by(|&a, &b| s.singular_values[b].total_cmp(&s.singular_values[a]));
    let sv = idx.iter().map(|&i| s.singular_values[i]).collect();
    let u = s.u.map(|u| DMatrix::from_fn(u.nrows(), idx.len(), |r, c| u[(r, idx[c])]));
    (sv, u)
}

/// Singular values of `m`, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m, false).0
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal basis of a numerical column span.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subspace {
    ambient: usize,
    #[serde(serialize_with = "ser_basis")]
    basis: DMatrix<f64>,
    tol: f64,
}

fn ser_basis<S: serde::Serializer>(b: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(b.ncols()))?;
    for c in b.column_iter() {
        seq.serialize_element(&c.iter().copied().collect::<Vec<_>>())?;
    }
    seq.end()
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, basis: DMatrix::zeros(ambient, 0), tol: DEFAULT_REL_TOL }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace { ambient, basis: DMatrix::identity(ambient, ambient), tol: DEFAULT_REL_TOL }
    }

    /// Column span of `m`.
    pub fn from_columns(m: &DMatrix<f64>, rel_tol: f64) -> Self {
        let d = m.nrows();
        if m.ncols() == 0 || d == 0 {
            return Subspace { ambient: d, basis: DMatrix::zeros(d, 0), tol: rel_tol };
        }
        let (sv, u) = svd(m, true);
        let max = sv.iter().copied().fold(0.0, f64::max);
        let u = u.expect("left singular vectors requested");
        let keep: Vec<usize> = if max == 0.0 || !max.is_finite() {
            Vec::new()
        } else {
            (0..sv.len()).filter(|&i| sv[i] > rel_tol * max).collect()
        };
        let mut basis = DMatrix::zeros(d, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            basis.set_column(j, &u.column(i));
        }
        Subspace { ambient: d, basis, tol: rel_tol }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    /// Membership with residual at most `rel_tol · ‖v‖`.
    pub fn contains(&self, v: &DVector<f64>, rel_tol: f64) -> bool {
        self.residual(v) <= rel_tol * v.norm()
    }

    /// Smallest subspace containing both.
    pub fn sum(&self, other: &Subspace, rel_tol: f64) -> Subspace {
        let cols = self.basis.ncols() + other.basis.ncols();
        let mut m = DMatrix::zeros(self.ambient, cols);
        m.columns_mut(0, self.basis.ncols()).copy_from(&self.basis);
        m.columns_mut(self.basis.ncols(), other.basis.ncols()).copy_from(&other.basis);
        Subspace::from_columns(&m, rel_tol)
    }
}

/// Span of `vectors` in ℝᵈ.
pub fn span(d: usize, vectors: &[DVector<f64>], rel_tol: f64) -> Result<Subspace> {
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
    }
    let mut m = DMatrix::zeros(d, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    Ok(Subspace::from_columns(&m, rel_tol))
}

/// Largest principal angle, in radians.
///
/// Subspaces of different dimension are at distance π/2. The angle is taken
/// from its sine, `‖(I − P_U) V‖₂`, which stays accurate for tiny angles.
pub fn subspace_distance(u: &Subspace, v: &Subspace) -> Result<f64> {
    if u.ambient != v.ambient {
        return Err(Error::DimensionMismatch { expected: u.ambient, found: v.ambient });
    }
    if u.dim() != v.dim() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if u.dim() == 0 {
        return Ok(0.0);
    }
    let proj = &u.basis * (u.basis.transpose() * &v.basis);
    let perp = &v.basis - proj;
    let s = singular_values(&perp).into_iter().fold(0.0, f64::max);
    Ok(s.min(1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-9), 0);
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-9), 3);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        assert_eq!(numerical_rank(&d, 1e-9), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(0, 4), 1e-9), 0);
        assert_eq!(numerical_rank(&DMatrix::from_row_slice(2, 3, &[1., 2., 3., 2., 4., 6.]), 1e-9), 1);
    }

    #[test]
    fn span_examples() {
        let s = span(2, &[DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![2.0, 0.0])], 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.contains(&DVector::from_vec(vec![1.0, 0.0]), 1e-12));
        assert_eq!(span(2, &[], 1e-9).unwrap().dim(), 0);
        let s = span(2, &[DVector::from_vec(vec![1.0, 1e-12])], 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        let b = s.basis().column(0);
        let sign = b[0].signum();
        assert!((b[0] * sign - 1.0).abs() < 1e-9 && (b[1] * sign).abs() < 1e-9);
        assert!(span(2, &[DVector::from_vec(vec![1.0])], 1e-9).is_err());
    }

    #[test]
    fn distance_examples() {
        let e1 = span(2, &[DVector::from_vec(vec![1.0, 0.0])], 1e-9).unwrap();
        let e2 = span(2, &[DVector::from_vec(vec![0.0, 1.0])], 1e-9).unwrap();
        let diag = span(2, &[DVector::from_vec(vec![1.0, 1.0]) / 2f64.sqrt()], 1e-9).unwrap();
        assert!(subspace_distance(&e1, &e1).unwrap().abs() < 1e-15);
        assert!((subspace_distance(&e1, &e2).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!((subspace_distance(&e1, &diag).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert_eq!(subspace_distance(&e1, &Subspace::full(2)).unwrap(), FRAC_PI_2);
        assert_eq!(subspace_distance(&Subspace::zero(2), &Subspace::zero(2)).unwrap(), 0.0);
        assert!(subspace_distance(&e1, &Subspace::zero(3)).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        let vs: Vec<_> =
            (0..4).map(|i| DVector::from_fn(5, |r, _| ((r * 7 + i * 3) % 5) as f64 - 2.0 + 0.1 * i as f64)).collect();
        let s = span(5, &vs, 1e-9).unwrap();
        let g = s.basis().transpose() * s.basis();
        assert!((g - DMatrix::identity(s.dim(), s.dim())).amax() < 1e-10);
        for v in &vs {
            assert!(s.residual(v) <= 1e-9 * v.norm());
        }
    }
}
