use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use quasilin::dynamics::{
    chattering, conjugacy_residual, difference_field, feedback_from_exprs, flow, flow_coords, flow_coords_inverse,
    integrate, integrate_rhs, transport_feedback, verify_conjugacy_dynamic, Conjugation, ControlInput, Feedback,
};
use quasilin::geo::sample::box_samples;
use quasilin::geo::VectorField;
use quasilin::{ControlSystem, DomainBox, ExprVec, LinearPair, Symbols};

fn field(names: &[&str], comps: &[&str]) -> VectorField {
    let s = Arc::new(Symbols::new(names).unwrap());
    VectorField::from_exprs(ExprVec::parse(s, comps).unwrap())
}

fn pendulum() -> ControlSystem {
    let domain = DomainBox::new(vec![(-1.5, 1.5), (-2.0, 2.0), (-2.0, 2.0)]).unwrap();
    ControlSystem::parse("pendulum", &["th", "w"], &["u"], &["w", "-sin(th)+u"], domain).unwrap()
}

/// Endpoint of `ẏ = F(t, y)` at `t1` from `y0`.
fn endpoint(
    y0: &[f64],
    t1: f64,
    steps: usize,
    rhs: &mut dyn FnMut(f64, &DVector<f64>) -> quasilin::Result<DVector<f64>>,
) -> DVector<f64> {
    integrate_rhs(&DVector::from_column_slice(y0), (0.0, t1), steps, None, rhs).unwrap().final_state().clone()
}

#[test]
fn rk4_error_shrinks_sixteenfold_per_halving() {
    // ẏ = y cos t has y(t) = exp(sin t)
    let exact = 2f64.sin().exp();
    let err = |steps| {
        let y = endpoint(&[1.0], 2.0, steps, &mut |t, y| Ok(y * t.cos()));
        (y[0] - exact).abs()
    };
    let (e1, e2, e3) = (err(20), err(40), err(80));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((13.0..19.5).contains(&ratio), "ratios {} {}", e1 / e2, e2 / e3);
    }
}

/// `|x(T) − x(0) − ∫ f(x, u) dt|` by composite Simpson on the trajectory grid.
fn requadrature_residual(dt: f64) -> f64 {
    let sys = pendulum();
    let u = ControlInput::from_time_exprs(&["0.5*cos(3*t)"]).unwrap();
    let traj = integrate(&sys, &[0.2, 0.0], &u, (0.0, 1.0), dt).unwrap();
    let rates: Vec<DVector<f64>> =
        traj.x.iter().zip(&traj.u).map(|(x, u)| sys.eval(x.as_slice(), u.as_slice()).unwrap()).collect();
    let n = rates.len() - 1;
    assert!(n % 2 == 0);
    let mut integral = &rates[0] + &rates[n];
    for (i, r) in rates.iter().enumerate().take(n).skip(1) {
        integral += r * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    integral *= traj.dt / 3.0;
    (traj.final_state() - &traj.x[0] - integral).norm()
}

#[test]
fn trajectories_satisfy_the_integral_identity() {
    for dt in [0.02, 0.01, 0.005] {
        let r = requadrature_residual(dt);
        assert!(r <= 1.0 * dt.powi(4), "dt {dt}: residual {r:e}");
    }
}

#[test]
fn solutions_of_converging_time_dependent_fields_converge() {
    // X^k(t, x) = X(t, x) + sin(k t)/k · (1, x1)
    let base = |t: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], -y[0].sin() + 0.3 * t.cos()]);
    let limit =
        integrate_rhs(&DVector::from_vec(vec![0.3, 0.0]), (0.0, 1.0), 1000, None, &mut |t, y| Ok(base(t, y))).unwrap();
    let mut prev = f64::INFINITY;
    for k in [4.0, 16.0, 64.0, 256.0] {
        let traj = integrate_rhs(&DVector::from_vec(vec![0.3, 0.0]), (0.0, 1.0), 1000, None, &mut |t, y| {
            let bump = (k * t).sin() / k;
            Ok(base(t, y) + DVector::from_vec(vec![bump, bump * y[0]]))
        })
        .unwrap();
        let d = traj.sup_distance(&limit);
        assert!(d < prev && d <= 2.0 / k, "k {k}: {d:e}");
        prev = d;
    }
}

#[test]
fn flows_are_continuous_in_time_and_state() {
    let x = field(&["a", "b"], &["b", "-sin(a) - 0.1*b"]);
    let p = DVector::from_vec(vec![0.4, -0.2]);
    let t = 0.7;
    let here = flow(&x, &p, t, 1e-3, None).unwrap();
    let mut prev = f64::INFINITY;
    for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
        let q = &p + DVector::from_vec(vec![delta, -delta]);
        let near = flow(&x, &q, t + delta, 1e-3, None).unwrap();
        let d = (near - &here).norm();
        assert!(d < prev && d <= 5.0 * delta, "δ {delta}: {d:e}");
        prev = d;
    }
}

#[test]
fn flows_converge_uniformly_with_their_fields() {
    let limit = field(&["a", "b"], &["b", "-sin(a)"]);
    let starts = box_samples(&[(-0.5, 0.5), (-0.5, 0.5)], 5, 25, 42).points;
    let mut prev = f64::INFINITY;
    for k in [2.0, 8.0, 32.0] {
        let second = format!("-sin(a) + {}*cos(a*b)", 1.0 / k);
        let approx = field(&["a", "b"], &["b", second.as_str()]);
        let worst = starts
            .iter()
            .map(|s| {
                let p = DVector::from_column_slice(s);
                (flow(&approx, &p, 1.0, 1e-3, None).unwrap() - flow(&limit, &p, 1.0, 1e-3, None).unwrap()).norm()
            })
            .fold(0.0, f64::max);
        assert!(worst < prev && worst <= 2.0 / k, "k {k}: {worst:e}");
        prev = worst;
    }
}

#[test]
fn chattering_error_decays_like_one_over_l() {
    let x1 = field(&["a", "b"], &["1 + 0.2*b", "a"]);
    let x2 = field(&["a", "b"], &["-1", "sin(a)"]);
    let errs: Vec<f64> = [5, 10, 20, 40]
        .iter()
        .map(|&l| chattering(&x1, &x2, &[0.0, 0.0], l, (0.0, 1.0), 1e-3, None).unwrap().sup_error)
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.5).contains(&ratio), "errors {errs:?}");
    }
}

/// Flows `δf` for time `t1` from `x0` with step `dt`.
fn ride(f: &VectorField, x0: &[f64], t1: f64, dt: f64) -> DVector<f64> {
    flow(f, &DVector::from_column_slice(x0), t1, dt, None).unwrap()
}

#[test]
fn difference_fields_are_preserved_for_the_cubic_integrator() {
    let domain = DomainBox::new(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let sys = ControlSystem::parse("cubic", &["x"], &["u"], &["u^3"], domain.clone()).unwrap();
    let target =
        ControlSystem::linear(&LinearPair::new(DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap(), domain)
            .unwrap();
    let (a1, a2) = (["0.5 + 0.3*sin(x)"], ["-0.4*cos(2*x)"]);
    let alpha1 = feedback_from_exprs(&sys, &a1).unwrap();
    let alpha2 = feedback_from_exprs(&sys, &a2).unwrap();
    // χ_I is the identity, so χ□α = α³ over the target's state
    let beta = |a: &str| feedback_from_exprs(&target, &[format!("({})^3", a.replace('x', "x1"))]).unwrap();
    let df = difference_field(&sys, &alpha1, &alpha2).unwrap();
    let dg = difference_field(&target, &beta(a1[0]), &beta(a2[0])).unwrap();
    for x0 in [-0.6, 0.0, 0.35] {
        let x1 = ride(&df, &[x0], 0.5, 1e-4);
        let z1 = ride(&dg, &[x0], 0.5, 1e-4);
        assert!((x1 - z1).norm() < 1e-5);
    }
}

#[test]
fn difference_fields_are_preserved_for_the_pendulum() {
    let sys = pendulum();
    let pair = LinearPair::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )
    .unwrap();
    let target =
        ControlSystem::linear(&pair, DomainBox::new(vec![(-1.5, 1.5), (-2.0, 2.0), (-10.0, 10.0)]).unwrap()).unwrap();
    let zs = Arc::new(Symbols::new(&["z1", "z2"]).unwrap());
    let zv = Arc::new(Symbols::new(&["z1", "z2", "v"]).unwrap());
    let chi = Conjugation::parse(&sys, &["th", "w"], &["-sin(th)+u"])
        .unwrap()
        .with_inverse(ExprVec::parse(zs, &["z1", "z2"]).unwrap(), ExprVec::parse(zv, &["v + sin(z1)"]).unwrap())
        .unwrap();
    let alpha1 = feedback_from_exprs(&sys, &["-th - w"]).unwrap();
    let alpha2 = feedback_from_exprs(&sys, &["0.5*cos(w)"]).unwrap();
    let beta1 = transport_feedback(&sys, &chi, &alpha1).unwrap();
    let beta2 = transport_feedback(&sys, &chi, &alpha2).unwrap();
    let df = difference_field(&sys, &alpha1, &alpha2).unwrap();
    let dg = difference_field(&target, &beta1, &beta2).unwrap();
    for x0 in [[0.3, -0.2], [-0.5, 0.4], [0.0, 0.0]] {
        let x1 = ride(&df, &x0, 0.8, 1e-4);
        let z0 = chi.chi_i().eval(&sys.join(&x0, &[0.0])).unwrap();
        let z1 = ride(&dg, z0.as_slice(), 0.8, 1e-4);
        let mapped = chi.chi_i().eval(&sys.join(x1.as_slice(), &[0.0])).unwrap();
        assert!((mapped - z1).norm() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn flows_compose_additively(s in -0.5f64..0.5, t in -0.5f64..0.5, a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let x = field(&["a", "b"], &["b", "-sin(a) + 0.2*cos(b)"]);
        let p = DVector::from_vec(vec![a, b]);
        let two = flow(&x, &flow(&x, &p, t, 1e-3, None).unwrap(), s, 1e-3, None).unwrap();
        let one = flow(&x, &p, s + t, 1e-3, None).unwrap();
        prop_assert!((two - one).norm() <= 1e-9);
    }

    #[test]
    fn flow_coordinates_invert(xi in prop::collection::vec(-0.3f64..0.3, 2)) {
        let fields = [field(&["a", "b"], &["1", "a"]), field(&["a", "b"], &["sin(b)", "1"])];
        let m = [0.1, -0.2];
        let p = flow_coords(&fields, &m, &xi, 1e-3, None).unwrap();
        let back = flow_coords_inverse(&fields, p.as_slice(), &xi, 1e-3, None).unwrap();
        prop_assert!((back - DVector::from_column_slice(&m)).norm() <= 1e-9);
    }
}

#[test]
fn static_and_dynamic_checks_agree() {
    let domain = DomainBox::new(vec![(-2.0, 2.0), (-2.0, 2.0), (-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let sys = ControlSystem::parse("ex", &["x1", "x2"], &["u1", "u2"], &["u1", "u2^3 + x1"], domain.clone()).unwrap();
    let target = LinearPair::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
    let good = Conjugation::parse(&sys, &["x1", "x2"], &["u1", "u2^3 + x1"]).unwrap();
    let bad = good.shift_chi_ii(0.05);
    let samples = box_samples(domain.bounds(), 9, 10_000, 42).points;
    let controls = [
        ControlInput::from_time_exprs(&["0.5", "-0.3"]).unwrap(),
        ControlInput::from_time_exprs(&["0.8*sin(3*t)", "0.6*cos(2*t)"]).unwrap(),
        ControlInput::Feedback(Feedback::constant(2, &[0.1, 0.2])),
    ];
    for (chi, ok) in [(&good, true), (&bad, false)] {
        let stat = conjugacy_residual(&sys, chi, &target, &samples).unwrap();
        let dynm = verify_conjugacy_dynamic(&sys, chi, &target, &[0.1, -0.1], &controls, (0.0, 1.0), 1e-3).unwrap();
        if ok {
            assert!(stat <= 1e-12 && dynm.max_deviation <= 1e-9, "{stat:e} {:e}", dynm.max_deviation);
        } else {
            assert!(stat > 1e-3 && dynm.max_deviation > 1e-3, "{stat:e} {:e}", dynm.max_deviation);
        }
        assert!(dynm.triangularity_defect == 0.0);
    }
}
