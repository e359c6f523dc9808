//! The flag `Δ_{k+1} = Δ_k + [f_ū, Δ_k]` and the linearizability verdict.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::classify::{classify_point, PointClass, PointTag};
use super::field::VectorField;
use super::limit::{estimate_d, LimitDirections, LimitParams};
use super::sample::{box_samples, thin, Samples};
use crate::error::Result;
use crate::numlin::{numerical_rank, subspace_distance, Subspace};
use crate::system::ControlSystem;

/// Factor by which a measured defect must exceed its tolerance before a
/// failure counts as robust.
pub const ROBUST_MARGIN: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagParams {
    /// Rank tolerance for Jacobians and flag levels.
    pub rel_tol: f64,
    /// Involutivity residual tolerance, scaled by `1 + ‖g_i‖ + ‖g_j‖`.
    pub inv_tol: f64,
    /// Largest principal angle at which two estimates of `D` count as equal.
    pub angle_tol: f64,
    /// Neighborhood radius in box-normalized units.
    pub radius: f64,
    pub grid_per_axis: usize,
    /// Cap on flag sample states before falling back to random sampling.
    pub max_states: usize,
    /// States used for the `u`-independence and fibration checks.
    pub max_fiber_states: usize,
    /// States at which every basis pair is bracketed.
    pub max_involutivity_states: usize,
    /// Cap on control samples per state.
    pub max_controls: usize,
    pub limit: LimitParams,
    pub seed: u64,
}

impl Default for FlagParams {
    fn default() -> Self {
        FlagParams {
            rel_tol: 1e-9,
            inv_tol: 1e-6,
            angle_tol: 1e-3,
            radius: 0.1,
            grid_per_axis: 5,
            max_states: 729,
            max_fiber_states: 32,
            max_involutivity_states: 64,
            max_controls: 64,
            limit: LimitParams::default(),
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Delta0Source {
    /// Columns of `∂f/∂u(·, ū)`, used where the point is regular.
    JacobianColumns,
    /// Limit directions estimated at `x̄` and frozen as constant fields.
    FrozenLimitDirections,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerdictTag {
    SmoothLinearizable,
    QuasiSmoothCandidate,
    NotLinearizable,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub k: usize,
    pub rank_at_point: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    pub constant_rank: bool,
    /// Rank variation persists at both `rel_tol / 10` and `rel_tol · 10`.
    pub rank_variation_robust: bool,
    pub basis_size: usize,
    pub involutive: bool,
    /// Worst bracket residual divided by its tolerance.
    pub worst_involutivity_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    pub robust_failure: bool,
    /// The measured quantity the decision was made on.
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagReport {
    pub point_class: PointClass,
    pub delta0_source: Delta0Source,
    pub state_samples: usize,
    pub states_exhaustive: bool,
    pub levels: Vec<LevelReport>,
    /// `D(x, u)` does not depend on `u`.
    pub d_independent_of_u: Condition,
    /// `rank ∂f/∂u` is constant near the point.
    pub constant_rank: Condition,
    /// Constant-rank involutive flag reaching full rank.
    pub flag_condition: Condition,
    /// Sampled stand-in for the fibration condition.
    pub fibration_surrogate: Condition,
    pub tag: Option<VerdictTag>,
    pub params: FlagParams,
}

/// The base state followed by a grid over its neighborhood in the state box.
pub fn state_grid(sys: &ControlSystem, xbar: &[f64], params: &FlagParams) -> Samples {
    let nb = sys.state_box().neighborhood(xbar, params.radius);
    let mut s = box_samples(&nb, params.grid_per_axis, params.max_states.saturating_sub(1).max(1), params.seed);
    s.points.insert(0, xbar.to_vec());
    s.count += 1;
    s
}

fn columns(vs: &[DVector<f64>], d: usize) -> DMatrix<f64> {
    if vs.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(vs)
    }
}

/// Ranks at `tol · 10`, `tol` and `tol / 10`.
fn rank_triplet(m: &DMatrix<f64>, tol: f64) -> [usize; 3] {
    [numerical_rank(m, tol * 10.0), numerical_rank(m, tol), numerical_rank(m, tol / 10.0)]
}

/// Indices of a greedily chosen independent subset.
fn greedy_independent(vs: &[DVector<f64>], d: usize, tol: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut rank = 0;
    for i in 0..vs.len() {
        let mut trial: Vec<DVector<f64>> = chosen.iter().map(|&j| vs[j].clone()).collect();
        trial.push(vs[i].clone());
        let r = numerical_rank(&columns(&trial, d), tol);
        if r > rank {
            rank = r;
            chosen.push(i);
        }
    }
    chosen
}

fn rank_summary(k: usize, triplets: &[[usize; 3]], basis_size: usize) -> LevelReport {
    let mid: Vec<usize> = triplets.iter().map(|t| t[1]).collect();
    let (min, max) = (*mid.iter().min().unwrap_or(&0), *mid.iter().max().unwrap_or(&0));
    let varies = |i: usize| {
        let v = triplets.iter().map(|t| t[i]);
        v.clone().max() != v.min()
    };
    LevelReport {
        k,
        rank_at_point: mid.first().copied().unwrap_or(0),
        min_rank: min,
        max_rank: max,
        constant_rank: min == max,
        rank_variation_robust: min != max && varies(0) && varies(2),
        basis_size,
        involutive: true,
        worst_involutivity_ratio: 0.0,
    }
}

/// Brackets every pair of `basis` at every state and measures the distance
/// from the span of `span_fields`.
fn involutivity(
    basis: &[VectorField],
    span_fields: &[VectorField],
    states: &[Vec<f64>],
    params: &FlagParams,
) -> Result<f64> {
    let pairs: Vec<(usize, usize)> = (0..basis.len()).flat_map(|i| (i + 1..basis.len()).map(move |j| (i, j))).collect();
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let brackets: Vec<VectorField> = pairs.iter().map(|&(i, j)| VectorField::bracket(&basis[i], &basis[j])).collect();
    let worst = states
        .par_iter()
        .map(|x| -> Result<f64> {
            let d = x.len();
            let span_vals: Vec<DVector<f64>> = span_fields.iter().map(|g| g.eval(x)).collect::<Result<_>>()?;
            let sub = Subspace::from_columns(&columns(&span_vals, d), params.rel_tol);
            let norms: Vec<f64> = basis.iter().map(|g| g.eval(x).map(|v| v.norm())).collect::<Result<_>>()?;
            let mut w: f64 = 0.0;
            for (&(i, j), br) in pairs.iter().zip(&brackets) {
                let v = br.eval(x)?;
                let tol = params.inv_tol * (1.0 + norms[i] + norms[j]);
                w = w.max(sub.residual(&v) / tol);
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

fn control_samples(sys: &ControlSystem, ubar: &[f64], params: &FlagParams) -> Vec<Vec<f64>> {
    let nb = sys.control_box().neighborhood(ubar, params.radius);
    box_samples(&nb, params.grid_per_axis, params.max_controls, params.seed).points
}

/// `D(x, u')` against `D(x, ū)` over sampled states and controls.
fn check_u_independence(
    sys: &ControlSystem,
    ubar: &[f64],
    states: &[Vec<f64>],
    d_bar: &[LimitDirections],
    params: &FlagParams,
) -> Result<Condition> {
    let controls = control_samples(sys, ubar, params);
    let worst = states
        .par_iter()
        .zip(d_bar)
        .map(|(x, db)| -> Result<f64> {
            let mut w: f64 = 0.0;
            for u in &controls {
                let d = estimate_d(sys, x, u, &params.limit)?;
                w = w.max(subspace_distance(&d.space, &db.space)?);
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Condition {
        holds: worst <= params.angle_tol,
        robust_failure: worst > ROBUST_MARGIN * params.angle_tol,
        worst,
        detail: format!(
            "largest principal angle between D(x,u) and D(x,ū) over {} states × {} controls",
            states.len(),
            controls.len()
        ),
    })
}

/// Fiber dimension and openness of `u ↦ f(x, u)` onto `f(x, ū) + D(x, ū)`.
fn fibration_surrogate(
    sys: &ControlSystem,
    ubar: &[f64],
    states: &[Vec<f64>],
    d_bar: &[LimitDirections],
    params: &FlagParams,
) -> Result<Condition> {
    let controls = control_samples(sys, ubar, params);
    let per_state = states
        .par_iter()
        .zip(d_bar)
        .enumerate()
        .map(|(idx, (x, db))| -> Result<(bool, bool, f64)> {
            let r1 = db.space.dim();
            let mut sup_rank = 0;
            let mut above = false;
            let base = sys.eval(x, ubar)?;
            let mut diffs = Vec::with_capacity(controls.len());
            for u in &controls {
                let r = numerical_rank(&sys.jac_u(x, u)?, params.rel_tol);
                sup_rank = sup_rank.max(r);
                above |= numerical_rank(&sys.jac_u(x, u)?, params.rel_tol * ROBUST_MARGIN) > r1;
                diffs.push(sys.eval(x, u)? - &base);
            }
            let basis = db.space.basis();
            let mut dirs: Vec<DVector<f64>> = Vec::new();
            for c in basis.column_iter() {
                dirs.push(c.into_owned());
                dirs.push(-c.into_owned());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(idx as u64));
            for _ in 0..2 * r1 {
                let coef = DVector::from_fn(r1, |_, _| rng.gen_range(-1.0..1.0));
                let d = basis * coef;
                if d.norm() > 1e-3 {
                    dirs.push(d.normalize());
                }
            }
            let scale = diffs.iter().map(|d| d.norm()).fold(0.0, f64::max);
            // smallest, over directions, of the largest progress along it
            let mut margin = f64::INFINITY;
            for d in &dirs {
                let best = diffs.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max);
                margin = margin.min(if scale > 0.0 { best / scale } else { 0.0 });
            }
            if dirs.is_empty() {
                margin = 0.0;
            }
            let rank_ok = sup_rank == r1;
            Ok((rank_ok, !above, margin))
        })
        .collect::<Result<Vec<_>>>()?;
    let rank_ok = per_state.iter().all(|p| p.0);
    let rank_robust_fail = per_state.iter().any(|p| !p.1);
    let worst = per_state.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let open_ok = worst > 1e-12;
    Ok(Condition {
        holds: rank_ok && open_ok,
        robust_failure: rank_robust_fail || worst <= 0.0,
        worst,
        detail: format!(
            "sup rank ∂f/∂u {} dim D at every state; worst normalized openness margin {worst:.3e}",
            if rank_ok { "equals" } else { "differs from" }
        ),
    })
}

/// Samples the flag at `xbar` and the given states with `ū` frozen.
///
/// `states[0]` is taken as the base state. The report's tag is left unset.
pub fn build_flag(
    sys: &ControlSystem,
    xbar: &[f64],
    ubar: &[f64],
    states: &[Vec<f64>],
    params: &FlagParams,
) -> Result<FlagReport> {
    let n = sys.n();
    let mut states: Vec<Vec<f64>> = states.to_vec();
    if states.first().map(|s| s.as_slice()) != Some(xbar) {
        states.insert(0, xbar.to_vec());
    }
    let point_class = classify_point(sys, xbar, ubar, params.radius, params.grid_per_axis, params.rel_tol)?;
    let f_bar = VectorField::frozen(sys, ubar)?;

    let d_all: Vec<LimitDirections> =
        states.par_iter().map(|x| estimate_d(sys, x, ubar, &params.limit)).collect::<Result<_>>()?;

    let (delta0_source, mut basis): (Delta0Source, Vec<VectorField>) = if point_class.tag == PointTag::Regular {
        let cols: Vec<VectorField> = (0..sys.m())
            .map(|j| VectorField::ControlColumn { f: sys.f().clone(), n, u: ubar.to_vec(), column: j })
            .collect();
        let vals: Vec<DVector<f64>> = cols.iter().map(|c| c.eval(xbar)).collect::<Result<_>>()?;
        let keep = greedy_independent(&vals, n, params.rel_tol);
        (Delta0Source::JacobianColumns, keep.into_iter().map(|i| cols[i].clone()).collect())
    } else {
        let b = d_all[0].space.basis();
        let fields = b.column_iter().map(|c| VectorField::constant(c.as_slice())).collect();
        (Delta0Source::FrozenLimitDirections, fields)
    };

    // level 0 ranks are the dimensions of D(x, ū)
    let span_tol = params.limit.span_tol;
    let trip0: Vec<[usize; 3]> =
        d_all.iter().map(|d| [d.dim_at(span_tol * 10.0), d.space.dim(), d.dim_at(span_tol / 10.0)]).collect();
    let mut level = rank_summary(0, &trip0, basis.len());
    let mut levels = Vec::with_capacity(n);
    let mut span_fields = basis.clone();
    let mut final_robust_short = false;
    let inv_states = thin(&states[1..], params.max_involutivity_states.saturating_sub(1));
    let inv_states: Vec<Vec<f64>> = std::iter::once(states[0].clone()).chain(inv_states).collect();
    // basis values per state, carried from one level to the next
    let mut basis_vals: Vec<Vec<DVector<f64>>> = states
        .par_iter()
        .map(|x| basis.iter().map(|g| g.eval(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    for k in 0..n {
        if k > 0 {
            let brackets: Vec<VectorField> = basis.iter().map(|g| VectorField::bracket(&f_bar, g)).collect();
            let vals: Vec<Vec<DVector<f64>>> = states
                .par_iter()
                .zip(&basis_vals)
                .map(|(x, bv)| {
                    let mut v = bv.clone();
                    for g in &brackets {
                        v.push(g.eval(x)?);
                    }
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            let cand: Vec<VectorField> = basis.iter().cloned().chain(brackets).collect();
            let trips: Vec<[usize; 3]> = vals.iter().map(|v| rank_triplet(&columns(v, n), params.rel_tol)).collect();
            let keep = greedy_independent(&vals[0], n, params.rel_tol);
            basis = keep.iter().map(|&i| cand[i].clone()).collect();
            basis_vals = vals.into_iter().map(|v| keep.iter().map(|&i| v[i].clone()).collect()).collect();
            span_fields = cand;
            level = rank_summary(k, &trips, basis.len());
            final_robust_short = trips[0][2] < n;
        } else {
            final_robust_short = trip0[0][2] < n;
        }
        let worst = involutivity(&basis, &span_fields, &inv_states, params)?;
        level.worst_involutivity_ratio = worst;
        level.involutive = worst <= 1.0;
        levels.push(level.clone());
    }

    let all_constant = levels.iter().all(|l| l.constant_rank);
    let all_involutive = levels.iter().all(|l| l.involutive);
    let full = levels.last().map_or(n == 0, |l| l.min_rank == n);
    let flag_robust = levels.iter().any(|l| l.rank_variation_robust || l.worst_involutivity_ratio > ROBUST_MARGIN)
        || final_robust_short;
    let worst_ratio = levels.iter().map(|l| l.worst_involutivity_ratio).fold(0.0, f64::max);
    let flag_cond = Condition {
        holds: all_constant && all_involutive && full,
        robust_failure: flag_robust,
        worst: worst_ratio,
        detail: format!(
            "ranks {:?}; constant {all_constant}; involutive {all_involutive}; full rank at last level {full}",
            levels.iter().map(|l| (l.min_rank, l.max_rank)).collect::<Vec<_>>()
        ),
    };

    let fiber_states = thin(&states, params.max_fiber_states);
    let fiber_d = thin(&d_all, params.max_fiber_states);
    let u_indep = check_u_independence(sys, ubar, &fiber_states, &fiber_d, params)?;
    let surrogate = fibration_surrogate(sys, ubar, &fiber_states, &fiber_d, params)?;
    let regular = point_class.tag == PointTag::Regular;
    let rank_cond = Condition {
        holds: regular,
        robust_failure: false,
        worst: (point_class.sup_rank_nbhd - point_class.min_rank_nbhd) as f64,
        detail: format!(
            "rank ∂f/∂u in [{}, {}] over {} samples",
            point_class.min_rank_nbhd, point_class.sup_rank_nbhd, point_class.samples_used
        ),
    };

    Ok(FlagReport {
        point_class,
        delta0_source,
        state_samples: states.len(),
        states_exhaustive: true,
        levels,
        d_independent_of_u: u_indep,
        constant_rank: rank_cond,
        flag_condition: flag_cond,
        fibration_surrogate: surrogate,
        tag: None,
        params: params.clone(),
    })
}

/// Tag from the conditions of a flag report.
pub fn decide(r: &FlagReport) -> VerdictTag {
    let regular = r.point_class.tag == PointTag::Regular;
    if r.d_independent_of_u.robust_failure || r.flag_condition.robust_failure {
        return VerdictTag::NotLinearizable;
    }
    let (u_ok, flag_ok) = (r.d_independent_of_u.holds, r.flag_condition.holds);
    if regular {
        if u_ok && r.constant_rank.holds && flag_ok {
            return VerdictTag::SmoothLinearizable;
        }
        return VerdictTag::Inconclusive;
    }
    // singular points are never smoothly linearizable
    if r.fibration_surrogate.robust_failure {
        return VerdictTag::NotLinearizable;
    }
    if u_ok && flag_ok && r.fibration_surrogate.holds {
        VerdictTag::QuasiSmoothCandidate
    } else {
        VerdictTag::Inconclusive
    }
}

/// Classifies `(x̄, ū)`, samples the flag on the default state grid and tags
/// the result.
pub fn linearizability_verdict(
    sys: &ControlSystem,
    xbar: &[f64],
    ubar: &[f64],
    params: &FlagParams,
) -> Result<FlagReport> {
    let grid = state_grid(sys, xbar, params);
    let mut r = build_flag(sys, xbar, ubar, &grid.points, params)?;
    r.states_exhaustive = grid.exhaustive;
    r.tag = Some(decide(&r));
    Ok(r)
}
