//! Flow compositions, orbit coordinates and pushforward-based orbit dimension.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::integrate::{flow, flow_with_tangent, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::geo::VectorField;
use crate::numlin::numerical_rank;
use crate::system::DomainBox;

/// `X¹_{t₁} ∘ X²_{t₂} ∘ ⋯ ∘ Xᴺ_{t_N}` applied to a base point; the last
/// segment acts first.
#[derive(Clone, Debug)]
pub struct FlowComposition {
    pub segments: Vec<(VectorField, f64)>,
    pub base: DVector<f64>,
}

impl FlowComposition {
    pub fn new(segments: Vec<(VectorField, f64)>, base: &[f64]) -> Result<Self> {
        if let Some((f, _)) = segments.iter().find(|(f, _)| f.dim() != base.len()) {
            return Err(Error::DimensionMismatch { expected: base.len(), found: f.dim() });
        }
        Ok(FlowComposition { segments, base: DVector::from_column_slice(base) })
    }

    pub fn endpoint(&self, dt: f64, domain: Option<&DomainBox>) -> Result<DVector<f64>> {
        let mut p = self.base.clone();
        for (f, t) in self.segments.iter().rev() {
            p = flow(f, &p, *t, dt, domain)?;
        }
        Ok(p)
    }

    /// The composition undoing this one, based at `p`.
    pub fn inverse_at(&self, p: &[f64]) -> FlowComposition {
        let segments = self.segments.iter().rev().map(|(f, t)| (f.clone(), -t)).collect();
        FlowComposition { segments, base: DVector::from_column_slice(p) }
    }

    /// `(Φ_* X)(Φ(base))` for this composition `Φ`.
    pub fn push_forward(&self, x: &VectorField, dt: f64, domain: Option<&DomainBox>) -> Result<DVector<f64>> {
        let mut p = self.base.clone();
        let mut v = x.eval(p.as_slice())?;
        for (f, t) in self.segments.iter().rev() {
            (p, v) = flow_with_tangent(f, &p, &v, *t, dt, domain)?;
        }
        Ok(v)
    }
}

/// `L(ξ) = Y¹_{ξ₁} ∘ ⋯ ∘ Yᵈ_{ξ_d}(m)`.
pub fn flow_coords(
    fields: &[VectorField],
    m: &[f64],
    xi: &[f64],
    dt: f64,
    domain: Option<&DomainBox>,
) -> Result<DVector<f64>> {
    if fields.len() != xi.len() {
        return Err(Error::DimensionMismatch { expected: fields.len(), found: xi.len() });
    }
    let segs = fields.iter().cloned().zip(xi.iter().copied()).collect();
    FlowComposition::new(segs, m)?.endpoint(dt, domain)
}

/// Undoes [`flow_coords`]: flows each field back by `−ξ_i`, in reverse order.
pub fn flow_coords_inverse(
    fields: &[VectorField],
    p: &[f64],
    xi: &[f64],
    dt: f64,
    domain: Option<&DomainBox>,
) -> Result<DVector<f64>> {
    if fields.len() != xi.len() {
        return Err(Error::DimensionMismatch { expected: fields.len(), found: xi.len() });
    }
    let segs = fields.iter().cloned().zip(xi.iter().copied()).collect();
    FlowComposition::new(segs, p)?.inverse_at(p).endpoint(dt, domain)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitParams {
    /// Composition length of the pushforwards.
    pub depth: usize,
    /// Used with both signs.
    pub probe_times: Vec<f64>,
    pub rel_tol: f64,
    pub dt: f64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        OrbitParams { depth: 2, probe_times: vec![0.05, 0.1], rel_tol: 1e-9, dt: DEFAULT_DT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitReport {
    pub dimension: usize,
    pub vectors_tried: usize,
    pub params: OrbitParams,
}

/// Rank of the values at `m` of `(Y¹_{t₁} ∘ ⋯ ∘ Yᵏ_{t_k})_* X` for family
/// members `X, Yⁱ`, signed probe times and `k ≤ depth`.
///
/// A lower bound on the orbit dimension; stops once the ambient dimension
/// is reached.
pub fn orbit_dimension(
    family: &[VectorField],
    m: &[f64],
    params: &OrbitParams,
    domain: Option<&DomainBox>,
) -> Result<OrbitReport> {
    if family.is_empty() {
        return Err(Error::Input("orbit family is empty".into()));
    }
    let d = m.len();
    let times: Vec<f64> = params.probe_times.iter().flat_map(|&t| [t, -t]).collect();
    let mut vectors: Vec<DVector<f64>> = Vec::new();
    let mut rank = 0;
    let mut tried = 0;
    // sequences of (field, time) indices of each length, in lexicographic order
    let mut seqs: Vec<Vec<(usize, usize)>> = vec![vec![]];
    for len in 0..=params.depth {
        if len > 0 {
            let (nf, nt) = (family.len(), times.len());
            seqs = seqs
                .iter()
                .flat_map(|s| {
                    (0..nf).flat_map(move |i| {
                        (0..nt).map(move |j| {
                            let mut t = s.clone();
                            t.push((i, j));
                            t
                        })
                    })
                })
                .collect();
        }
        for seq in &seqs {
            let segs: Vec<(VectorField, f64)> = seq.iter().map(|&(i, j)| (family[i].clone(), times[j])).collect();
            let phi = FlowComposition::new(segs, m)?;
            // start where Φ maps onto m
            let start = phi.inverse_at(m).endpoint(params.dt, domain)?;
            let phi = FlowComposition { base: start, ..phi };
            for x in family {
                vectors.push(phi.push_forward(x, params.dt, domain)?);
                tried += 1;
            }
            rank = numerical_rank(&DMatrix::from_columns(&vectors), params.rel_tol);
            if rank == d {
                return Ok(OrbitReport { dimension: rank, vectors_tried: tried, params: params.clone() });
            }
        }
    }
    Ok(OrbitReport { dimension: rank, vectors_tried: tried, params: params.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ExprVec, Symbols};
    use std::sync::Arc;

    fn field(comps: &[&str]) -> VectorField {
        let s = Arc::new(Symbols::new(&["x", "y"]).unwrap());
        VectorField::from_exprs(ExprVec::parse(s, comps).unwrap())
    }

    #[test]
    fn translations_commute() {
        let f = [VectorField::constant(&[1.0, 0.0]), VectorField::constant(&[0.0, 1.0])];
        let p = flow_coords(&f, &[0.0, 0.0], &[0.3, -0.2], 1e-3, None).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] + 0.2).abs() < 1e-12);
        let z = flow_coords(&f, &[0.4, 0.1], &[0.0, 0.0], 1e-3, None).unwrap();
        assert_eq!(z.as_slice(), &[0.4, 0.1]);
    }

    #[test]
    fn riccati_coordinate() {
        let f = [VectorField::constant(&[1.0, 0.0]), field(&["0", "1 + y^2"])];
        let p = flow_coords(&f, &[0.0, 0.0], &[0.0, 0.5], 1e-3, None).unwrap();
        assert!(p[0].abs() < 1e-12 && (p[1] - 0.5f64.tan()).abs() < 1e-6);
        let back = flow_coords_inverse(&f, p.as_slice(), &[0.0, 0.5], 1e-3, None).unwrap();
        assert!(back.norm() < 1e-6);
    }

    #[test]
    fn orbit_dimensions() {
        let p = OrbitParams::default();
        let line = orbit_dimension(&[VectorField::constant(&[1.0, 0.0])], &[0.0, 0.0], &p, None).unwrap();
        assert_eq!(line.dimension, 1);
        let fam = [VectorField::constant(&[1.0, 0.0]), field(&["0", "x"])];
        assert_eq!(orbit_dimension(&fam, &[1.0, 0.0], &p, None).unwrap().dimension, 2);
        // at the origin only the pushforwards see the second direction
        assert_eq!(orbit_dimension(&fam, &[0.0, 0.0], &p, None).unwrap().dimension, 2);
        let shallow = OrbitParams { depth: 0, ..OrbitParams::default() };
        assert_eq!(orbit_dimension(&fam, &[0.0, 0.0], &shallow, None).unwrap().dimension, 1);
    }
}
