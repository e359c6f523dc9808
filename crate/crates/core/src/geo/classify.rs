//! Regular, weakly singular and strongly singular points.

use rayon::prelude::*;
use serde::Serialize;

use super::sample::box_samples;
use crate::error::Result;
use crate::numlin::numerical_rank;
use crate::system::ControlSystem;

/// Largest grid evaluated before switching to random sampling.
pub const MAX_CLASSIFY_SAMPLES: usize = 50_000;

/// How many times the neighborhood may be halved when the point's rank is the
/// neighborhood maximum but far samples still drop below it.
const MAX_SHRINK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PointTag {
    Regular,
    WeaklySingular,
    StronglySingular,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointClass {
    pub tag: PointTag,
    pub rank_at_point: usize,
    pub sup_rank_nbhd: usize,
    pub min_rank_nbhd: usize,
    pub samples_used: usize,
    /// Whether the full grid was evaluated (otherwise a seeded random sample).
    pub exhaustive: bool,
    /// Neighborhood radius finally used, in box-normalized units.
    pub radius: f64,
}

/// Samples `rank ∂f/∂u` on a `grid_per_axis^(n+m)` grid around `(x, u)`.
pub fn classify_point(
    sys: &ControlSystem,
    x: &[f64],
    u: &[f64],
    nbhd_radius: f64,
    grid_per_axis: usize,
    rel_tol: f64,
) -> Result<PointClass> {
    let rank_at_point = numerical_rank(&sys.jac_u(x, u)?, rel_tol);
    let center = sys.join(x, u);
    let (n, m) = (sys.n(), sys.m());
    let mut radius = nbhd_radius;
    let mut shrinks = 0;
    loop {
        let nb = sys.domain().neighborhood(&center, radius);
        let samples = box_samples(&nb, grid_per_axis, MAX_CLASSIFY_SAMPLES, 42);
        let ranks: Vec<usize> = samples
            .points
            .par_iter()
            .map(|p| Ok(numerical_rank(&sys.jac_u(&p[..n], &p[n..])?, rel_tol)))
            .collect::<Result<_>>()?;
        let sup = ranks.iter().copied().chain([rank_at_point]).max().unwrap_or(0);
        let min = ranks.iter().copied().chain([rank_at_point]).min().unwrap_or(0);
        let base = PointClass {
            tag: PointTag::Regular,
            rank_at_point,
            sup_rank_nbhd: sup,
            min_rank_nbhd: min,
            samples_used: samples.count,
            exhaustive: samples.exhaustive,
            radius,
        };
        if sup == min {
            return Ok(base);
        }
        if rank_at_point < sup {
            let tag = if sup == m { PointTag::WeaklySingular } else { PointTag::StronglySingular };
            return Ok(PointClass { tag, ..base });
        }
        // rank is lower semicontinuous: a maximal rank at the point is
        // constant on some smaller neighborhood
        if shrinks == MAX_SHRINK {
            let tag = if sup == m { PointTag::WeaklySingular } else { PointTag::StronglySingular };
            return Ok(PointClass { tag, ..base });
        }
        radius *= 0.5;
        shrinks += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::DomainBox;

    fn sys(states: &[&str], controls: &[&str], f: &[&str]) -> ControlSystem {
        ControlSystem::parse("t", states, controls, f, DomainBox::cube(states.len() + controls.len(), 1.0)).unwrap()
    }

    #[test]
    fn cubic_taxonomy() {
        let s = sys(&["x"], &["u"], &["u^3"]);
        let c = classify_point(&s, &[0.0], &[0.0], 0.1, 5, 1e-9).unwrap();
        assert_eq!(c.tag, PointTag::WeaklySingular);
        assert_eq!((c.rank_at_point, c.sup_rank_nbhd), (0, 1));
        let r = classify_point(&s, &[0.0], &[0.5], 0.1, 5, 1e-9).unwrap();
        assert_eq!(r.tag, PointTag::Regular);
        assert_eq!(r.samples_used, 25);
    }

    #[test]
    fn strongly_singular_two_inputs() {
        let s = sys(&["x"], &["u1", "u2"], &["u1^3"]);
        let c = classify_point(&s, &[0.0], &[0.0, 0.0], 0.1, 5, 1e-9).unwrap();
        assert_eq!(c.tag, PointTag::StronglySingular);
        assert_eq!((c.rank_at_point, c.sup_rank_nbhd), (0, 1));
    }

    #[test]
    fn far_rank_drop_shrinks_the_neighborhood() {
        // rank 1 except on u = 0.5, which the first two grids hit exactly
        let s = sys(&["x"], &["u"], &["(u - 0.5)^2"]);
        let c = classify_point(&s, &[0.0], &[0.0], 1.0, 5, 1e-9).unwrap();
        assert_eq!(c.tag, PointTag::Regular);
        assert_eq!(c.radius, 0.25);
    }
}
