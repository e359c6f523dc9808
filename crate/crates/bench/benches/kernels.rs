use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use quasilin::dynamics::{integrate, smooth_feedback, ControlInput, Feedback, GridData};
use quasilin::geo::{build_flag, estimate_d, state_grid, FlagParams, LimitParams, VectorField};
use quasilin::linsys::{brunovsky, canonical_pair};
use quasilin::{ControlSystem, DomainBox, ExprVec, Symbols};

fn pendulum() -> ControlSystem {
    let domain = DomainBox::new(vec![(-1.5, 1.5), (-2.0, 2.0), (-2.0, 2.0)]).unwrap();
    ControlSystem::parse("pendulum", &["th", "w"], &["u"], &["w", "-sin(th)+u"], domain).unwrap()
}

fn disguised_pair(kappa: &[usize]) -> quasilin::LinearPair {
    let canon = canonical_pair(kappa, kappa.len()).unwrap();
    let (n, m) = (canon.n(), canon.m());
    let p = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.1 * ((i * 7 + j * 3) % 5) as f64 - 0.2 });
    let q = DMatrix::from_fn(m, m, |i, j| if i == j { 1.5 } else { 0.3 });
    let k = DMatrix::from_fn(m, n, |i, j| 0.1 * (i + 2 * j) as f64 - 0.4);
    canon.transform(&p, &k, &q).unwrap()
}

fn jets(c: &mut Criterion) {
    let s = Arc::new(Symbols::new(&["x", "y", "z"]).unwrap());
    let f = VectorField::from_exprs(ExprVec::parse(s.clone(), &["y*z", "sin(x) - z^3", "tanh(x*y)"]).unwrap());
    let g = VectorField::from_exprs(ExprVec::parse(s, &["cos(z)", "x^2", "exp(-y)"]).unwrap());
    let b1 = VectorField::bracket(&f, &g);
    let b3 = VectorField::bracket(&f, &VectorField::bracket(&f, &b1));
    let p = [0.3, -0.2, 0.5];
    c.bench_function("bracket depth 1", |b| b.iter(|| b1.eval(black_box(&p)).unwrap()));
    c.bench_function("bracket depth 3", |b| b.iter(|| b3.eval(black_box(&p)).unwrap()));
}

fn linear(c: &mut Criterion) {
    let pair = disguised_pair(&[3, 2, 1]);
    c.bench_function("brunovsky n=6 m=3", |b| b.iter(|| brunovsky(black_box(&pair), 1e-9).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let sys = pendulum();
    let lp = LimitParams::default();
    c.bench_function("estimate_d pendulum", |b| {
        b.iter(|| estimate_d(&sys, black_box(&[0.1, 0.2]), &[0.3], &lp).unwrap())
    });
    let params = FlagParams::default();
    let states = state_grid(&sys, &[0.0, 0.0], &params);
    c.bench_function("build_flag pendulum", |b| {
        b.iter(|| build_flag(&sys, &[0.0, 0.0], &[0.0], black_box(&states.points), &params).unwrap())
    });
}

fn dynamics(c: &mut Criterion) {
    let sys = pendulum();
    let u = ControlInput::from_time_exprs(&["0.5*cos(3*t)"]).unwrap();
    c.bench_function("rk4 1000 steps", |b| {
        b.iter(|| integrate(&sys, black_box(&[0.2, 0.0]), &u, (0.0, 1.0), 1e-3).unwrap())
    });
    let grid =
        GridData::sample(&[(-1.0, 1.0), (-1.0, 1.0)], 21, |p| DVector::from_vec(vec![p[0].abs() - p[1].max(0.0)]))
            .unwrap();
    let alpha = Feedback::Grid(Arc::new(grid));
    c.bench_function("smooth_feedback 21x21", |b| b.iter(|| smooth_feedback(black_box(&alpha), 0.1, None).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = jets, linear, geometry, dynamics
}
criterion_main!(benches);
