//! Limit directions of secants of `u ↦ f(x, u)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numlin::{self, Subspace};
use crate::system::ControlSystem;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitParams {
    /// Random unit directions sampled in addition to the `±e_i` axes.
    pub n_samples: usize,
    /// Strictly decreasing sphere radii.
    pub radii: Vec<f64>,
    /// Angle within which the secants at the two smallest radii must agree.
    pub angle_tol: f64,
    /// Rank tolerance for the span of extrapolated directions.
    pub span_tol: f64,
    pub seed: u64,
}

impl Default for LimitParams {
    fn default() -> Self {
        LimitParams { n_samples: 16, radii: vec![1e-2, 1e-3, 1e-4], angle_tol: 1e-3, span_tol: 1e-6, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitDirections {
    pub space: Subspace,
    pub accepted: usize,
    pub rejected: usize,
    /// `f(x, ·)` was constant on every sampled sphere.
    pub degenerate: bool,
    /// Singular values of the accepted directions, scaled by the largest.
    pub singular_values: Vec<f64>,
}

impl LimitDirections {
    /// Dimension the span would have at another relative tolerance.
    pub fn dim_at(&self, rel_tol: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > rel_tol).count()
    }
}

/// Unit directions in ℝᵐ: the signed axes first, then seeded random ones.
pub fn sample_directions(m: usize, n_random: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(2 * m + n_random);
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(m);
            e[i] = s;
            out.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < 2 * m + n_random {
        let v = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let nrm = v.norm();
        if nrm > 1e-3 && nrm <= 1.0 {
            out.push(v / nrm);
        }
    }
    out
}

fn angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    // both unit; the chord is accurate for small angles
    2.0 * (0.5 * (a - b).norm()).min(1.0).asin()
}

/// Span of the limit directions of `(f(x,w) − f(x,u)) / ‖·‖` as `w → u`.
///
/// For each sampled direction the secants on the two smallest spheres must
/// agree to `angle_tol`, or else the Richardson extrapolants of the last two
/// radius pairs must. The accepted direction is the extrapolation of the two
/// smallest secants to radius zero. Directions whose secants vanish are skipped.
pub fn estimate_d(sys: &ControlSystem, x: &[f64], u: &[f64], params: &LimitParams) -> Result<LimitDirections> {
    let radii = &params.radii;
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[0] > w[1])) || radii[radii.len() - 1] <= 0.0 {
        return Err(Error::Input("radius schedule must be strictly decreasing to a positive value".into()));
    }
    let n = sys.n();
    let base = sys.eval(x, u)?;
    let (r1, r2) = (radii[radii.len() - 2], radii[radii.len() - 1]);
    let secant = |h: &DVector<f64>, r: f64| -> Result<Option<DVector<f64>>> {
        let w: Vec<f64> = u.iter().zip(h.iter()).map(|(a, b)| a + r * b).collect();
        let d = sys.eval(x, &w)? - &base;
        let nrm = d.norm();
        Ok(if nrm > 0.0 { Some(d / nrm) } else { None })
    };

    let mut accepted = Vec::new();
    let mut rejected = 0;
    let mut any_motion = false;
    let richardson = |a: &DVector<f64>, ra: f64, b: &DVector<f64>, rb: f64| -> Option<DVector<f64>> {
        let e = (b * ra - a * rb) / (ra - rb);
        let nrm = e.norm();
        (nrm > 0.0).then(|| e / nrm)
    };
    for h in sample_directions(sys.m(), params.n_samples, params.seed) {
        let mut s0 = None;
        for &r in &radii[..radii.len() - 2] {
            s0 = secant(&h, r)?;
            any_motion |= s0.is_some();
        }
        let (Some(s1), Some(s2)) = (secant(&h, r1)?, secant(&h, r2)?) else {
            continue;
        };
        any_motion = true;
        let extrap = richardson(&s1, r1, &s2, r2);
        let stable = angle(&s1, &s2) <= params.angle_tol
            || match (&s0, &extrap) {
                // curvature tilts the raw secants by O(r); the extrapolants agree to O(r²)
                (Some(s0), Some(e12)) => {
                    let r0 = radii[radii.len() - 3];
                    richardson(s0, r0, &s1, r1).is_some_and(|e01| angle(&e01, e12) <= params.angle_tol)
                }
                _ => false,
            };
        if !stable {
            rejected += 1;
            continue;
        }
        accepted.push(extrap.unwrap_or(s2));
    }
    let space = numlin::span(n, &accepted, params.span_tol)?;
    let singular_values = if accepted.is_empty() {
        Vec::new()
    } else {
        let sv = numlin::singular_values(&DMatrix::from_columns(&accepted));
        let max = sv.iter().copied().fold(0.0, f64::max);
        sv.iter().map(|s| s / max).collect()
    };
    Ok(LimitDirections { space, accepted: accepted.len(), rejected, degenerate: !any_motion, singular_values })
}
