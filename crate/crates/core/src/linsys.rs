//! Linear pairs `(A, B)`: controllability, Kronecker indices, Brunovsky form.
//!
//! The canonical form used here orders states by level: the top block holds
//! the ends of the longest integrator chains and the bottom `s_1` states are
//! driven directly by the inputs. With `J(s, r) = [I_s | 0]` (`s × r`),
//!
//! ```text
//! Ac = superdiagonal blocks J(s_{ρ-1}, s_{ρ-2}), …, J(s_2, s_1)
//! Bc = [0; J(s_1, s_0)]
//! ```
//!
//! so that `ż_top = z_next`, …, `ż_bottom = v_{1..s_1}`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numlin::numerical_rank;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearPair {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearPair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix entries must be finite".into()));
        }
        Ok(LinearPair { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `(P(A − BK)P⁻¹, PBQ⁻¹)`.
    pub fn transform(&self, p: &DMatrix<f64>, k: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LinearPair> {
        let p_inv = invert(p)?;
        let q_inv = invert(q)?;
        LinearPair::new(p * (&self.a - &self.b * k) * &p_inv, p * &self.b * q_inv)
    }

    /// `[B, AB, …, A^{j-1}B]`.
    pub fn krylov(&self, j: usize) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut out = DMatrix::zeros(n, m * j);
        let mut blk = self.b.clone();
        for i in 0..j {
            out.columns_mut(i * m, m).copy_from(&blk);
            blk = &self.a * blk;
        }
        out
    }
}

fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or_else(|| Error::Numerical("singular transformation matrix".into()))
}

/// Kalman rank of `[B, AB, …, A^{n-1}B]` and whether it equals `n`.
pub fn kalman_controllable(p: &LinearPair, rel_tol: f64) -> (usize, bool) {
    let n = p.n();
    let rank = numerical_rank(&p.krylov(n), rel_tol);
    (rank, rank == n)
}

/// Rank sequence and Kronecker indices.
///
/// `r[j-1] = r_j` for `j = 1..=rho`; `s[j] = s_j` and `sigma[i] = σ_i` for
/// `0 ≤ j, i ≤ rho`, with `s_0 = m` and `s_rho = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KroneckerData {
    pub r: Vec<usize>,
    pub s: Vec<usize>,
    pub sigma: Vec<usize>,
    pub rho: usize,
    pub kappa: Vec<usize>,
    pub controllable: bool,
}

impl KroneckerData {
    /// `r_j` with `r_0 = 0`; constant past `rho`.
    pub fn r_at(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.r[(j - 1).min(self.r.len() - 1)]
        }
    }
}

pub fn kronecker_data(p: &LinearPair, rel_tol: f64) -> KroneckerData {
    let (n, m) = (p.n(), p.m());
    let mut r = Vec::new();
    let mut s = vec![m];
    let mut prev = 0;
    // the chain stabilizes after at most n + 1 blocks
    for j in 1..=n + 1 {
        let rj = numerical_rank(&p.krylov(j), rel_tol);
        r.push(rj);
        s.push(rj.saturating_sub(prev));
        prev = rj;
        if s[j] == 0 {
            break;
        }
    }
    let rho = s.iter().position(|&v| v == 0).unwrap_or(s.len() - 1);
    s.truncate(rho + 1);
    r.truncate(rho.max(1));
    let sigma = (0..=rho).map(|i| s[i..].iter().sum()).collect();
    // conjugate partition: κ_j = #{k ≥ 1 : s_k ≥ j}
    let kappa = (1..=m).map(|j| s[1..].iter().filter(|&&sk| sk >= j).count()).collect();
    let controllable = r.last().copied().unwrap_or(0) == n;
    KroneckerData { r, s, sigma, rho, kappa, controllable }
}

/// The canonical pair with the given indices (sorted descending, padded to `m`).
pub fn canonical_pair(kappa: &[usize], m: usize) -> Result<LinearPair> {
    let mut kappa: Vec<usize> = kappa.to_vec();
    if kappa.len() > m {
        return Err(Error::Input(format!("{} indices for {m} inputs", kappa.len())));
    }
    kappa.resize(m, 0);
    kappa.sort_unstable_by(|a, b| b.cmp(a));
    let states = canonical_states(&kappa);
    let n = states.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    for (row, &(chain, level)) in states.iter().enumerate() {
        if level == 1 {
            b[(row, chain)] = 1.0;
        } else {
            let col = states.iter().position(|&s| s == (chain, level - 1)).expect("chain is contiguous");
            a[(row, col)] = 1.0;
        }
    }
    LinearPair::new(a, b)
}

/// `(chain, level)` per canonical state row; chains indexed in sorted order.
fn canonical_states(sorted_kappa: &[usize]) -> Vec<(usize, usize)> {
    let top = sorted_kappa.first().copied().unwrap_or(0);
    let mut out = Vec::new();
    for level in (1..=top).rev() {
        for (c, &k) in sorted_kappa.iter().enumerate() {
            if k >= level {
                out.push((c, level));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrunovskyResult {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub ac: DMatrix<f64>,
    pub bc: DMatrix<f64>,
    pub kappa: Vec<usize>,
}

impl BrunovskyResult {
    /// `‖Ac − P(A−BK)P⁻¹‖_F / max(1, ‖Ac‖_F) + ‖Bc − PBQ⁻¹‖_F / max(1, ‖Bc‖_F)`.
    pub fn residual(&self, pair: &LinearPair) -> Result<f64> {
        let t = pair.transform(&self.p, &self.k, &self.q)?;
        let ra = (&self.ac - t.a()).norm() / self.ac.norm().max(1.0);
        let rb = (&self.bc - t.b()).norm() / self.bc.norm().max(1.0);
        Ok(ra + rb)
    }
}

/// Feedback transformation `(P, K, Q)` to the canonical form.
///
/// Chains `b_i, Ab_i, …` are picked greedily level by level in input order;
/// the last row of each chain in the inverse Krylov basis generates the new
/// coordinates `q_i, q_i A, …, q_i A^{κ_i - 1}`.
pub fn brunovsky(p: &LinearPair, rel_tol: f64) -> Result<BrunovskyResult> {
    let (n, m) = (p.n(), p.m());
    let kd = kronecker_data(p, rel_tol);
    if !kd.controllable {
        return Err(Error::NotControllable { rank: kd.r.last().copied().unwrap_or(0), n });
    }

    // chain length per original input
    let mut chain_len = vec![0usize; m];
    let mut active: Vec<usize> = (0..m).collect();
    let mut picked: Vec<nalgebra::DVector<f64>> = Vec::new(); // orthonormal
    let mut level_vecs: Vec<nalgebra::DVector<f64>> = (0..m).map(|i| p.b.column(i).into_owned()).collect();
    let mut level = 0;
    while !active.is_empty() {
        let mut next_active = Vec::new();
        let mut count = 0;
        for &i in &active {
            let v = &level_vecs[i];
            let mut w = v.clone();
            for _ in 0..2 {
                for q in &picked {
                    let c = q.dot(&w);
                    w -= q * c;
                }
            }
            let vn = v.norm();
            if vn > 0.0 && w.norm() > rel_tol * vn {
                picked.push(w.normalize());
                chain_len[i] += 1;
                next_active.push(i);
                count += 1;
            }
        }
        level += 1;
        if kd.s.get(level).copied().unwrap_or(0) != count {
            return Err(Error::Numerical(format!(
                "chain selection found {count} vectors at level {level}, rank sequence says {}",
                kd.s.get(level).copied().unwrap_or(0)
            )));
        }
        for &i in &next_active {
            level_vecs[i] = &p.a * &level_vecs[i];
        }
        active = next_active;
    }

    let chains: Vec<usize> = (0..m).filter(|&i| chain_len[i] > 0).collect();
    let mut krylov = DMatrix::zeros(n, n);
    let mut last_pos = Vec::new();
    let mut col = 0;
    for &i in &chains {
        let mut v = p.b.column(i).into_owned();
        for _ in 0..chain_len[i] {
            krylov.set_column(col, &v);
            v = &p.a * v;
            col += 1;
        }
        last_pos.push(col - 1);
    }
    let kinv = invert(&krylov)?;

    // chain-ordered coordinates
    let mut t_rows: Vec<Vec<nalgebra::RowDVector<f64>>> = Vec::new();
    let mut r_rows = Vec::new();
    let mut g_rows = Vec::new();
    for (ci, &i) in chains.iter().enumerate() {
        let mut row = kinv.row(last_pos[ci]).into_owned();
        let mut rows = Vec::new();
        for _ in 0..chain_len[i] {
            rows.push(row.clone());
            row = &row * &p.a;
        }
        g_rows.push(rows.last().expect("nonempty chain") * &p.b);
        r_rows.push(row);
        t_rows.push(rows);
    }

    // complete G to an invertible Q0 with rows orthogonal to G's row space
    let g = chains.len();
    let mut basis: Vec<nalgebra::RowDVector<f64>> = Vec::new();
    for r in &g_rows {
        let mut w = r.clone();
        for q in &basis {
            let c = q.dot(&w);
            w -= q * c;
        }
        basis.push(w.normalize());
    }
    let mut extra = Vec::new();
    for e in 0..m {
        if basis.len() == m {
            break;
        }
        let mut w = nalgebra::RowDVector::from_fn(m, |_, j| if j == e { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w -= q * c;
            }
        }
        if w.norm() > 1e-6 {
            let w = w.normalize();
            basis.push(w.clone());
            extra.push(w);
        }
    }

    // chains sorted by κ descending, ties by input index
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| chain_len[chains[b]].cmp(&chain_len[chains[a]]).then(a.cmp(&b)));
    let sorted_kappa: Vec<usize> = {
        let mut k: Vec<usize> = order.iter().map(|&c| chain_len[chains[c]]).collect();
        k.resize(m, 0);
        k
    };

    let mut q0 = DMatrix::zeros(m, m);
    let mut rk = DMatrix::zeros(m, n);
    for (slot, &c) in order.iter().enumerate() {
        q0.set_row(slot, &g_rows[c]);
        rk.set_row(slot, &r_rows[c]);
    }
    for (j, w) in extra.iter().enumerate() {
        q0.set_row(g + j, w);
    }
    let k = invert(&q0)? * rk;

    let states = canonical_states(&sorted_kappa);
    let mut pm = DMatrix::zeros(n, n);
    for (row, &(slot, lvl)) in states.iter().enumerate() {
        let c = order[slot];
        let kc = chain_len[chains[c]];
        pm.set_row(row, &t_rows[c][kc - lvl]);
    }

    let canon = canonical_pair(&sorted_kappa, m)?;
    Ok(BrunovskyResult { p: pm, k, q: q0, ac: canon.a, bc: canon.b, kappa: sorted_kappa })
}

/// Linear conjugacy of controllable pairs: equal Kronecker indices.
///
/// Pairs of different dimensions are never conjugate.
pub fn linearly_conjugate(p1: &LinearPair, p2: &LinearPair, rel_tol: f64) -> Result<bool> {
    if p1.n() != p2.n() || p1.m() != p2.m() {
        return Ok(false);
    }
    let k1 = kronecker_data(p1, rel_tol);
    let k2 = kronecker_data(p2, rel_tol);
    for (k, pair) in [(&k1, p1), (&k2, p2)] {
        if !k.controllable {
            return Err(Error::NotControllable { rank: k.r.last().copied().unwrap_or(0), n: pair.n() });
        }
    }
    Ok(k1.kappa == k2.kappa)
}
