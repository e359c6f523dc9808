//! Fixed-step RK4 for control systems and vector fields.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::feedback::Feedback;
use crate::error::{Error, Result};
use crate::expr::{ExprVec, Symbols};
use crate::geo::VectorField;
use crate::system::{ControlSystem, DomainBox};

pub const DEFAULT_DT: f64 = 1e-3;

/// Fraction of a step subtracted from the end stage time, so that controls
/// are read as left limits inside each step.
const LEFT_LIMIT: f64 = 1e-9;

pub type TimeFn = dyn Fn(f64) -> Result<DVector<f64>> + Send + Sync;

/// An open- or closed-loop control.
#[derive(Clone)]
pub enum ControlInput {
    Constant(DVector<f64>),
    Time(Arc<TimeFn>),
    Feedback(Feedback),
}

impl std::fmt::Debug for ControlInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControlInput::Constant(v) => write!(f, "Constant({:?})", v.as_slice()),
            ControlInput::Time(_) => write!(f, "Time(..)"),
            ControlInput::Feedback(fb) => write!(f, "{fb:?}"),
        }
    }
}

impl ControlInput {
    pub fn constant(v: &[f64]) -> Self {
        ControlInput::Constant(DVector::from_column_slice(v))
    }

    pub fn time(f: impl Fn(f64) -> Result<DVector<f64>> + Send + Sync + 'static) -> Self {
        ControlInput::Time(Arc::new(f))
    }

    /// Components written as expressions in the single symbol `t`.
    pub fn from_time_exprs<S: AsRef<str>>(texts: &[S]) -> Result<Self> {
        let e = ExprVec::parse(Arc::new(Symbols::new(&["t"])?), texts)?;
        Ok(ControlInput::time(move |t| e.eval(&[t])))
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<DVector<f64>> {
        match self {
            ControlInput::Constant(v) => Ok(v.clone()),
            ControlInput::Time(f) => f(t),
            ControlInput::Feedback(fb) => fb.eval(x),
        }
    }
}

/// States and controls on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub state_names: Vec<String>,
    pub control_names: Vec<String>,
    pub dt: f64,
    pub t: Vec<f64>,
    #[serde(serialize_with = "ser_vecs")]
    pub x: Vec<DVector<f64>>,
    #[serde(serialize_with = "ser_vecs")]
    pub u: Vec<DVector<f64>>,
    /// Time of the first sample found outside the domain box.
    pub exited_at: Option<f64>,
}

fn ser_vecs<S: serde::Serializer>(v: &[DVector<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|c| c.as_slice().to_vec()))
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.x.last().expect("trajectories hold at least the initial state")
    }

    /// `max_i ‖x_i − other.x_i‖` over the common samples.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.x.iter().zip(&other.x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// CSV with header `t, <states>, <controls>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in self.state_names.iter().chain(&self.control_names) {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for i in 0..self.t.len() {
            let _ = write!(out, "{}", self.t[i]);
            for v in self.x[i].iter().chain(self.u.get(i).into_iter().flat_map(|u| u.iter())) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Failing version: a grid exit becomes [`Error::BoxExit`].
    pub fn into_result(self) -> Result<Self> {
        match self.exited_at {
            Some(t) => Err(Error::BoxExit { t }),
            None => Ok(self),
        }
    }
}

/// Step count and step size that tile `[t0, t1]` with steps at most `dt`.
pub fn grid_steps(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    let len = t1 - t0;
    if !(dt > 0.0) || !len.is_finite() || len < 0.0 {
        return Err(Error::Input(format!("bad time grid [{t0}, {t1}] with dt = {dt}")));
    }
    if len == 0.0 {
        return Ok((0, dt));
    }
    let raw = len / dt;
    let steps = if (raw - raw.round()).abs() < 1e-9 * raw.max(1.0) { raw.round() } else { raw.ceil() } as usize;
    Ok((steps, len / steps as f64))
}

/// One classical RK4 step of `ẏ = F(t, y)`.
pub fn rk4_step(
    y: &DVector<f64>,
    t: f64,
    h: f64,
    rhs: &mut dyn FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
) -> Result<DVector<f64>> {
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = rhs(t + h * (1.0 - LEFT_LIMIT), &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn state_names(sys: &ControlSystem) -> (Vec<String>, Vec<String>) {
    let names = sys.symbols().names();
    (names[..sys.n()].to_vec(), names[sys.n()..].to_vec())
}

/// Integrates without failing on a box exit; the trajectory stops at the last
/// sample inside the box and records the exit time.
pub fn integrate_partial(
    sys: &ControlSystem,
    x0: &[f64],
    control: &ControlInput,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: x0.len() });
    }
    let (steps, h) = grid_steps(t_span.0, t_span.1, dt)?;
    let (sn, cn) = state_names(sys);
    let domain = sys.domain();
    let mut traj =
        Trajectory { state_names: sn, control_names: cn, dt: h, t: vec![], x: vec![], u: vec![], exited_at: None };
    let mut x = DVector::from_column_slice(x0);
    for i in 0..=steps {
        let t = t_span.0 + i as f64 * h;
        let u = control.eval(t, x.as_slice())?;
        if u.len() != sys.m() {
            return Err(Error::DimensionMismatch { expected: sys.m(), found: u.len() });
        }
        if !domain.contains(&sys.join(x.as_slice(), u.as_slice())) {
            traj.exited_at = Some(t);
            return Ok(traj);
        }
        traj.t.push(t);
        traj.x.push(x.clone());
        traj.u.push(u);
        if i == steps {
            break;
        }
        let mut rhs = |s: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let u = control.eval(s, y.as_slice())?;
            sys.eval(y.as_slice(), u.as_slice())
        };
        x = rk4_step(&x, t, h, &mut rhs)?;
    }
    Ok(traj)
}

/// RK4 trajectory of `ẋ = f(x, u(t))` on `t_span`; leaving the domain box is
/// an error.
pub fn integrate(
    sys: &ControlSystem,
    x0: &[f64],
    control: &ControlInput,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    integrate_partial(sys, x0, control, t_span, dt)?.into_result()
}

/// Trajectory of a time-dependent field `ẋ = F(t, x)`.
pub fn integrate_rhs(
    x0: &DVector<f64>,
    t_span: (f64, f64),
    steps: usize,
    domain: Option<&DomainBox>,
    rhs: &mut dyn FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
) -> Result<Trajectory> {
    let h = if steps == 0 { 0.0 } else { (t_span.1 - t_span.0) / steps as f64 };
    let names = (1..=x0.len()).map(|i| format!("x{i}")).collect();
    let mut traj = Trajectory {
        state_names: names,
        control_names: vec![],
        dt: h,
        t: vec![],
        x: vec![],
        u: vec![],
        exited_at: None,
    };
    let mut x = x0.clone();
    for i in 0..=steps {
        let t = t_span.0 + i as f64 * h;
        if let Some(b) = domain {
            if !b.contains(x.as_slice()) {
                return Err(Error::BoxExit { t });
            }
        }
        traj.t.push(t);
        traj.x.push(x.clone());
        if i < steps {
            x = rk4_step(&x, t, h, rhs)?;
        }
    }
    Ok(traj)
}

/// `Φ^X_t(p)`: flow of an autonomous field; negative `t` flows backwards.
pub fn flow(
    field: &VectorField,
    p: &DVector<f64>,
    t: f64,
    dt: f64,
    domain: Option<&DomainBox>,
) -> Result<DVector<f64>> {
    let (steps, h) = grid_steps(0.0, t.abs(), dt)?;
    let h = h * t.signum();
    let mut x = p.clone();
    let mut rhs = |_: f64, y: &DVector<f64>| field.eval(y.as_slice());
    for i in 0..steps {
        x = rk4_step(&x, i as f64 * h, h, &mut rhs)?;
        if let Some(b) = domain {
            if !b.contains(x.as_slice()) {
                return Err(Error::BoxExit { t: (i + 1) as f64 * h });
            }
        }
    }
    Ok(x)
}

/// Flow of `X` together with its variational equation: returns
/// `(Φ_t(p), DΦ_t(p)·v)`.
pub fn flow_with_tangent(
    field: &VectorField,
    p: &DVector<f64>,
    v: &DVector<f64>,
    t: f64,
    dt: f64,
    domain: Option<&DomainBox>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = p.len();
    let (steps, h) = grid_steps(0.0, t.abs(), dt)?;
    let h = h * t.signum();
    let mut y = DVector::zeros(2 * d);
    y.rows_mut(0, d).copy_from(p);
    y.rows_mut(d, d).copy_from(v);
    let mut rhs = |_: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let (x, w) = (y.rows(0, d).into_owned(), y.rows(d, d).into_owned());
        let mut out = DVector::zeros(2 * d);
        out.rows_mut(0, d).copy_from(&field.eval(x.as_slice())?);
        out.rows_mut(d, d).copy_from(&field.jvp(x.as_slice(), w.as_slice())?);
        Ok(out)
    };
    for i in 0..steps {
        y = rk4_step(&y, i as f64 * h, h, &mut rhs)?;
        if let Some(b) = domain {
            if !b.contains(&y.as_slice()[..d]) {
                return Err(Error::BoxExit { t: (i + 1) as f64 * h });
            }
        }
    }
    Ok((y.rows(0, d).into_owned(), y.rows(d, d).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> ControlSystem {
        ControlSystem::parse("cubic", &["x"], &["u"], &["u^3"], DomainBox::new(vec![(-2.0, 2.0), (-1.0, 1.0)]).unwrap())
            .unwrap()
    }

    #[test]
    fn closed_form_cases() {
        let s = cubic();
        let a = integrate(&s, &[0.0], &ControlInput::constant(&[1.0]), (0.0, 1.0), 1e-3).unwrap();
        assert!((a.final_state()[0] - 1.0).abs() < 1e-10);
        assert_eq!(a.len(), 1001);
        let ramp = ControlInput::time(|t| Ok(DVector::from_vec(vec![t])));
        let b = integrate(&s, &[0.0], &ramp, (0.0, 1.0), 1e-3).unwrap();
        assert!((b.final_state()[0] - 0.25).abs() < 1e-8);
        let decay = ControlSystem::parse("decay", &["x"], &["u"], &["-x"], DomainBox::cube(2, 2.0)).unwrap();
        let c = integrate(&decay, &[1.0], &ControlInput::constant(&[0.0]), (0.0, 1.0), 1e-3).unwrap();
        assert!((c.final_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn box_exit_is_reported() {
        let s = cubic();
        let r = integrate(&s, &[1.5], &ControlInput::constant(&[1.0]), (0.0, 1.0), 1e-3);
        match r {
            Err(Error::BoxExit { t }) => assert!((t - 0.5).abs() < 2e-3, "{t}"),
            other => panic!("expected a box exit, got {other:?}"),
        }
        let p = integrate_partial(&s, &[1.5], &ControlInput::constant(&[1.0]), (0.0, 1.0), 1e-3).unwrap();
        assert!(p.exited_at.is_some() && (500..=501).contains(&p.len()));
    }

    #[test]
    fn csv_header_uses_symbols() {
        let s = cubic();
        let a = integrate(&s, &[0.0], &ControlInput::constant(&[0.5]), (0.0, 0.002), 1e-3).unwrap();
        let csv = a.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x,u"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn tangent_flow_of_linear_field() {
        // ẋ = A x with A = [[0, 1], [-1, 0]]: rotation, tangent rotates too
        let s = Arc::new(Symbols::new(&["x", "y"]).unwrap());
        let f = VectorField::from_exprs(ExprVec::parse(s, &["y", "-x"]).unwrap());
        let (p, v) = flow_with_tangent(
            &f,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![0.0, 1.0]),
            0.5,
            1e-3,
            None,
        )
        .unwrap();
        assert!((p[0] - 0.5f64.cos()).abs() < 1e-12 && (p[1] + 0.5f64.sin()).abs() < 1e-12);
        assert!((v[0] - 0.5f64.sin()).abs() < 1e-12 && (v[1] - 0.5f64.cos()).abs() < 1e-12);
        let back = flow(&f, &p, -0.5, 1e-3, None).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-12 && back[1].abs() < 1e-12);
    }
}
