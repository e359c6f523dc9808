use nalgebra::DMatrix;
use proptest::prelude::*;
use quasilin::linsys::{brunovsky, canonical_pair, kronecker_data, linearly_conjugate};
use quasilin::numlin::numerical_rank;
use quasilin::{LinearPair, Subspace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussianish(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussianish(rng, n, n).qr().q()
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    DMatrix::from_fn(n, n, |i, j| if idx[i] == j { 1.0 } else { 0.0 })
}

fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rng.gen_range(-0.5..0.5) + if i == j { 2.0 } else { 0.0 })
}

fn random_kappa(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = rng.gen_range(1..=3);
    let mut k: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=3)).collect();
    k.sort_unstable_by(|a, b| b.cmp(a));
    k
}

fn disguise(rng: &mut ChaCha8Rng, pair: &LinearPair) -> LinearPair {
    let (n, m) = (pair.n(), pair.m());
    let p = well_conditioned(rng, n);
    let q = well_conditioned(rng, m);
    let k = gaussianish(rng, m, n);
    pair.transform(&p, &k, &q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn rank_survives_permutations_and_rotations(seed: u64, rows in 1usize..8, cols in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.gen_range(0..=rows.min(cols));
        let m = gaussianish(&mut rng, rows, r) * gaussianish(&mut rng, r, cols);
        let base = numerical_rank(&m, 1e-9);
        prop_assert_eq!(base, r);
        let t = permutation(&mut rng, rows) * &m * permutation(&mut rng, cols);
        prop_assert_eq!(numerical_rank(&t, 1e-9), base);
        let t = orthogonal(&mut rng, rows) * &m * orthogonal(&mut rng, cols);
        prop_assert_eq!(numerical_rank(&t, 1e-9), base);
    }

    #[test]
    fn subspace_bases_are_orthonormal(seed: u64, rows in 1usize..8, cols in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.gen_range(0..=rows.min(cols));
        let m = gaussianish(&mut rng, rows, r) * gaussianish(&mut rng, r, cols);
        let s = Subspace::from_columns(&m, 1e-9);
        prop_assert_eq!(s.dim(), r);
        let gram = s.basis().transpose() * s.basis();
        let err = (gram - DMatrix::<f64>::identity(r, r)).amax();
        prop_assert!(err <= 1e-10, "‖UᵀU − I‖ = {:e}", err);
        for j in 0..cols {
            prop_assert!(s.residual(&m.column(j).into_owned()) <= 1e-9 * (1.0 + m.column(j).norm()));
        }
    }

    #[test]
    fn kronecker_data_is_feedback_invariant(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kappa = random_kappa(&mut rng);
        let canon = canonical_pair(&kappa, kappa.len()).unwrap();
        let d0 = kronecker_data(&canon, 1e-9);
        prop_assert_eq!(&d0.kappa, &kappa);
        for k in 1..=4 {
            let expect: usize = kappa.iter().map(|&kj| kj.min(k)).sum();
            prop_assert_eq!(d0.r_at(k), expect);
        }
        let once = disguise(&mut rng, &canon);
        let twice = disguise(&mut rng, &once);
        prop_assert_eq!(&kronecker_data(&once, 1e-9), &d0);
        prop_assert_eq!(&kronecker_data(&twice, 1e-9), &d0);
    }

    #[test]
    fn brunovsky_is_idempotent(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kappa = random_kappa(&mut rng);
        let pair = disguise(&mut rng, &canonical_pair(&kappa, kappa.len()).unwrap());
        let first = brunovsky(&pair, 1e-9).unwrap();
        prop_assert!(first.residual(&pair).unwrap() <= 1e-8);
        prop_assert_eq!(&first.kappa, &kappa);
        let canon = LinearPair::new(first.ac.clone(), first.bc.clone()).unwrap();
        let second = brunovsky(&canon, 1e-9).unwrap();
        prop_assert_eq!(&second.ac, &first.ac);
        prop_assert_eq!(&second.bc, &first.bc);
        prop_assert_eq!(&second.kappa, &first.kappa);
    }

    #[test]
    fn conjugacy_is_an_equivalence(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kappa = random_kappa(&mut rng);
        let canon = canonical_pair(&kappa, kappa.len()).unwrap();
        let a = disguise(&mut rng, &canon);
        let b = disguise(&mut rng, &a);
        let c = disguise(&mut rng, &b);
        prop_assert!(linearly_conjugate(&a, &a, 1e-9).unwrap());
        prop_assert!(linearly_conjugate(&a, &b, 1e-9).unwrap());
        prop_assert!(linearly_conjugate(&b, &a, 1e-9).unwrap());
        prop_assert!(linearly_conjugate(&b, &c, 1e-9).unwrap());
        prop_assert!(linearly_conjugate(&a, &c, 1e-9).unwrap());
    }
}

#[test]
fn distinct_indices_are_not_conjugate() {
    let a = canonical_pair(&[2, 0], 2).unwrap();
    let b = canonical_pair(&[1, 1], 2).unwrap();
    assert!(!linearly_conjugate(&a, &b, 1e-9).unwrap());
    assert!(!linearly_conjugate(&b, &a, 1e-9).unwrap());
}

#[test]
fn canonical_pairs_have_nilpotent_chains() {
    let p = canonical_pair(&[3, 1], 2).unwrap();
    let a3 = p.a() * p.a() * p.a();
    assert!(a3.amax() == 0.0);
    assert_eq!(numerical_rank(&p.krylov(3), 1e-9), 4);
}

#[test]
fn rank_deficient_spans_contain_their_columns() {
    // rank 3; nalgebra 0.35 SVD does not reconstruct this product
    let mut rng = ChaCha8Rng::seed_from_u64(4830300247930468103);
    let r = rng.gen_range(0..=5);
    let m = gaussianish(&mut rng, 6, r) * gaussianish(&mut rng, r, 5);
    let s = Subspace::from_columns(&m, 1e-9);
    assert_eq!(s.dim(), 3);
    for c in m.column_iter() {
        assert!(s.residual(&c.into_owned()) <= 1e-12 * (1.0 + c.norm()));
    }
}
