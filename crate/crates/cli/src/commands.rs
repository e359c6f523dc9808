//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use quasilin::dynamics::{
    chattering, conjugacy_residual, integrate, orbit_dimension, smooth_feedback, verify_conjugacy_dynamic,
    ControlInput, Feedback, GridData, OrbitParams, Trajectory,
};
use quasilin::geo::sample::box_samples;
use quasilin::geo::{
    build_flag, classify_point, estimate_d, linearizability_verdict, state_grid, FlagParams, FlagReport, LimitParams,
    VectorField,
};
use quasilin::linsys::{brunovsky, kronecker_data, linearly_conjugate};
use quasilin::numlin::numerical_rank;
use quasilin::LinearPair;
use serde_json::{json, Value};

use crate::plot::gnuplot_script;
use crate::report::{matrix, Tolerances};
use crate::sysfile::{self, SystemFile};
use crate::{write_file, CliError, Command, Common, PairArgs, PlotArgs};

/// Cap on residual sample points; denser grids fall back to seeded sampling.
const MAX_RESIDUAL_POINTS: usize = 200_000;

pub struct Outcome {
    pub text: String,
    pub result: Value,
    pub tolerances: Tolerances,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report payloads serialize")
}

fn load(path: &Path) -> Result<(Vec<u8>, SystemFile), CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{}: not valid UTF-8", path.display())))?;
    let file = SystemFile::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((bytes, file))
}

fn load_opt(path: Option<&PathBuf>) -> Result<(Vec<u8>, Option<SystemFile>), CliError> {
    match path {
        Some(p) => load(p).map(|(b, f)| (b, Some(f))),
        None => Ok((Vec::new(), None)),
    }
}

fn pair_from_text(a: &str, b: &str) -> Result<LinearPair, CliError> {
    let a = sysfile::matrix(a).map_err(|e| CliError::Input(format!("--A: {e}")))?;
    let b = sysfile::matrix(b).map_err(|e| CliError::Input(format!("--B: {e}")))?;
    Ok(LinearPair::new(a, b)?)
}

/// `--A/--B`, else the file's target with `--target`, else its linearization.
fn resolve_pair(pair: &PairArgs, file: Option<&SystemFile>) -> Result<(LinearPair, &'static str), CliError> {
    match (&pair.a, &pair.b, file) {
        (Some(a), Some(b), _) => Ok((pair_from_text(a, b)?, "command line")),
        (None, None, Some(f)) if pair.target => {
            f.target()?.map(|p| (p, "file target")).ok_or_else(|| CliError::Input("the file has no `A`, `B`".into()))
        }
        (None, None, Some(f)) => Ok((f.system()?.linearize(f.xbar(), f.ubar())?, "linearization at the point")),
        (None, None, None) => Err(CliError::Input("give a system file or both --A and --B".into())),
        _ => Err(CliError::Input("--A and --B go together".into())),
    }
}

fn flag_params(c: &Common) -> FlagParams {
    FlagParams {
        rel_tol: c.tol,
        inv_tol: c.inv_tol,
        angle_tol: c.angle_tol,
        radius: c.radius,
        grid_per_axis: c.grid,
        limit: limit_params(c),
        seed: c.seed,
        ..FlagParams::default()
    }
}

fn limit_params(c: &Common) -> LimitParams {
    LimitParams { angle_tol: c.limit_angle_tol, span_tol: c.span_tol, seed: c.seed, ..LimitParams::default() }
}

fn tolerances(pairs: &[(&'static str, f64)]) -> Tolerances {
    pairs.iter().copied().collect()
}

fn flag_tolerances(c: &Common) -> Tolerances {
    tolerances(&[
        ("tol", c.tol),
        ("inv_tol", c.inv_tol),
        ("angle_tol", c.angle_tol),
        ("limit_angle_tol", c.limit_angle_tol),
        ("span_tol", c.span_tol),
        ("radius", c.radius),
    ])
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn write_csv(plot: &PlotArgs, header: &[String], rows: &[Vec<f64>], title: &str) -> Result<(), CliError> {
    if plot.plot.is_some() && plot.csv.is_none() {
        return Err(CliError::Input("--plot needs --csv".into()));
    }
    let Some(csv) = &plot.csv else { return Ok(()) };
    let mut s = header.join(",") + "\n";
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    write_file(csv, s)?;
    if let Some(p) = &plot.plot {
        write_file(p, gnuplot_script(csv, header, title))?;
    }
    Ok(())
}

fn trajectory_rows(tr: &Trajectory) -> Vec<Vec<f64>> {
    (0..tr.len())
        .map(|i| {
            let mut row = vec![tr.t[i]];
            row.extend(tr.x[i].iter());
            if let Some(u) = tr.u.get(i) {
                row.extend(u.iter());
            }
            row
        })
        .collect()
}

pub fn dispatch(cmd: &Command, c: &Common) -> Result<(Vec<u8>, Outcome), CliError> {
    match cmd {
        Command::Classify { file } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, classify(&f, c)?))
        }
        Command::Indices { file, pair } => {
            let (bytes, f) = load_opt(file.as_ref())?;
            Ok((bytes, indices(pair, f.as_ref(), c)?))
        }
        Command::Brunovsky { file, pair } => {
            let (bytes, f) = load_opt(file.as_ref())?;
            Ok((bytes, brunovsky_cmd(pair, f.as_ref(), c)?))
        }
        Command::ConjugateLinear { file, pair, a2, b2 } => {
            let (bytes, f) = load_opt(file.as_ref())?;
            Ok((bytes, conjugate_linear(pair, a2.as_deref(), b2.as_deref(), f.as_ref(), c)?))
        }
        Command::Flag { file } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, flag(&f, c, false)?))
        }
        Command::Verdict { file } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, flag(&f, c, true)?))
        }
        Command::Residual { file, nodes } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, residual(&f, *nodes, c)?))
        }
        Command::Verify { file, t, perturb } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, verify(&f, *t, *perturb, c)?))
        }
        Command::Chatter { file, l, t, plot } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, chatter(&f, *l, *t, plot, c)?))
        }
        Command::OrbitDim { file, depth, probe } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, orbit(&f, *depth, probe, c)?))
        }
        Command::Simulate { file, t, plot } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, simulate(&f, *t, plot, c)?))
        }
        Command::SmoothFeedback { file, eps, nodes, width } => {
            let (bytes, f) = load(file)?;
            Ok((bytes, smooth(&f, *eps, *nodes, *width)?))
        }
    }
}

fn classify(f: &SystemFile, c: &Common) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let class = classify_point(&sys, f.xbar(), f.ubar(), c.radius, c.grid, c.tol)?;
    let lp = limit_params(c);
    let d = estimate_d(&sys, f.xbar(), f.ubar(), &lp)?;
    let jac_rank = numerical_rank(&sys.jac_u(f.xbar(), f.ubar())?, c.tol);
    let mut text = String::new();
    writeln!(text, "system: {}", sys.name()).unwrap();
    writeln!(text, "point: x = {}, u = {}", fmt_vec(f.xbar()), fmt_vec(f.ubar())).unwrap();
    writeln!(text, "class: {:?}", class.tag).unwrap();
    writeln!(
        text,
        "rank df/du: {} at the point, {}..{} over {} samples (radius {})",
        class.rank_at_point, class.min_rank_nbhd, class.sup_rank_nbhd, class.samples_used, class.radius
    )
    .unwrap();
    writeln!(text, "dim D(x,u): {} ({} directions accepted)", d.space.dim(), d.accepted).unwrap();
    let result = json!({
        "class": to_value(&class),
        "jacobian_rank": jac_rank,
        "limit_directions": {
            "dimension": d.space.dim(),
            "accepted": d.accepted,
            "rejected": d.rejected,
            "degenerate": d.degenerate,
            "singular_values": d.singular_values,
        },
    });
    let tol = tolerances(&[
        ("tol", c.tol),
        ("radius", c.radius),
        ("limit_angle_tol", c.limit_angle_tol),
        ("span_tol", c.span_tol),
    ]);
    Ok(Outcome { text, result, tolerances: tol })
}

fn indices(pair: &PairArgs, f: Option<&SystemFile>, c: &Common) -> Result<Outcome, CliError> {
    let (p, source) = resolve_pair(pair, f)?;
    let k = kronecker_data(&p, c.tol);
    let mut text = String::new();
    writeln!(text, "pair: {source} (n = {}, m = {})", p.n(), p.m()).unwrap();
    writeln!(text, "kappa: {:?}", k.kappa).unwrap();
    writeln!(text, "r: {:?}", k.r).unwrap();
    writeln!(text, "s: {:?}", k.s).unwrap();
    writeln!(text, "controllable: {}", k.controllable).unwrap();
    let result = json!({ "source": source, "kronecker": to_value(&k) });
    Ok(Outcome { text, result, tolerances: tolerances(&[("tol", c.tol)]) })
}

fn brunovsky_cmd(pair: &PairArgs, f: Option<&SystemFile>, c: &Common) -> Result<Outcome, CliError> {
    let (p, source) = resolve_pair(pair, f)?;
    let b = brunovsky(&p, c.tol)?;
    let res = b.residual(&p)?;
    let mut text = String::new();
    writeln!(text, "pair: {source} (n = {}, m = {})", p.n(), p.m()).unwrap();
    writeln!(text, "kappa: {:?}", b.kappa).unwrap();
    writeln!(text, "residual: {res:.3e}").unwrap();
    for (name, m) in [("P", &b.p), ("K", &b.k), ("Q", &b.q), ("Ac", &b.ac), ("Bc", &b.bc)] {
        writeln!(text, "{name} = {:?}", matrix(m)).unwrap();
    }
    let result = json!({
        "source": source,
        "kappa": b.kappa,
        "P": matrix(&b.p),
        "K": matrix(&b.k),
        "Q": matrix(&b.q),
        "Ac": matrix(&b.ac),
        "Bc": matrix(&b.bc),
        "residual": res,
    });
    Ok(Outcome { text, result, tolerances: tolerances(&[("tol", c.tol)]) })
}

fn conjugate_linear(
    pair: &PairArgs,
    a2: Option<&str>,
    b2: Option<&str>,
    f: Option<&SystemFile>,
    c: &Common,
) -> Result<Outcome, CliError> {
    let (p1, s1) = resolve_pair(pair, f)?;
    let (p2, s2) = match (a2, b2, f) {
        (Some(a), Some(b), _) => (pair_from_text(a, b)?, "command line"),
        (None, None, Some(f)) => (
            f.target()?.ok_or_else(|| CliError::Input("give --A2/--B2 or a file with `A`, `B`".into()))?,
            "file target",
        ),
        _ => return Err(CliError::Input("give both --A2 and --B2".into())),
    };
    let same = linearly_conjugate(&p1, &p2, c.tol)?;
    let (k1, k2) = (kronecker_data(&p1, c.tol), kronecker_data(&p2, c.tol));
    let mut text = String::new();
    writeln!(text, "first: {s1}, kappa {:?}", k1.kappa).unwrap();
    writeln!(text, "second: {s2}, kappa {:?}", k2.kappa).unwrap();
    writeln!(text, "conjugate: {same}").unwrap();
    let result = json!({
        "conjugate": same,
        "first": { "source": s1, "kronecker": to_value(&k1) },
        "second": { "source": s2, "kronecker": to_value(&k2) },
    });
    Ok(Outcome { text, result, tolerances: tolerances(&[("tol", c.tol)]) })
}

fn flag_text(r: &FlagReport) -> String {
    let mut text = String::new();
    writeln!(text, "class: {:?}", r.point_class.tag).unwrap();
    writeln!(text, "level-0 source: {:?}", r.delta0_source).unwrap();
    writeln!(text, "states sampled: {} (exhaustive: {})", r.state_samples, r.states_exhaustive).unwrap();
    for l in &r.levels {
        writeln!(
            text,
            "level {}: rank {} at the point, {}..{} nearby, involutive: {}",
            l.k, l.rank_at_point, l.min_rank, l.max_rank, l.involutive
        )
        .unwrap();
    }
    for (name, cnd) in [
        ("D independent of u", &r.d_independent_of_u),
        ("constant rank", &r.constant_rank),
        ("flag", &r.flag_condition),
        ("fibration surrogate", &r.fibration_surrogate),
    ] {
        writeln!(text, "{name}: {} ({})", if cnd.holds { "holds" } else { "fails" }, cnd.detail).unwrap();
    }
    if let Some(tag) = r.tag {
        writeln!(text, "verdict: {tag:?}").unwrap();
    }
    text
}

fn flag(f: &SystemFile, c: &Common, tagged: bool) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let params = flag_params(c);
    let r = if tagged {
        linearizability_verdict(&sys, f.xbar(), f.ubar(), &params)?
    } else {
        let grid = state_grid(&sys, f.xbar(), &params);
        let mut r = build_flag(&sys, f.xbar(), f.ubar(), &grid.points, &params)?;
        r.states_exhaustive = grid.exhaustive;
        r
    };
    Ok(Outcome { text: flag_text(&r), result: to_value(&r), tolerances: flag_tolerances(c) })
}

fn need_conjugation(
    f: &SystemFile,
    sys: &quasilin::ControlSystem,
) -> Result<(quasilin::dynamics::Conjugation, LinearPair), CliError> {
    let chi = f.conjugation(sys)?.ok_or_else(|| CliError::Input("the file has no `chi_I`, `chi_II`".into()))?;
    let target = f.target()?.ok_or_else(|| CliError::Input("the file has no `A`, `B`".into()))?;
    Ok((chi, target))
}

fn residual(f: &SystemFile, nodes: usize, c: &Common) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let (chi, target) = need_conjugation(f, &sys)?;
    let samples = box_samples(sys.domain().bounds(), nodes, MAX_RESIDUAL_POINTS, c.seed);
    let res = conjugacy_residual(&sys, &chi, &target, &samples.points)?;
    let mut text = String::new();
    writeln!(text, "samples: {} (grid: {})", samples.count, samples.exhaustive).unwrap();
    writeln!(text, "max residual: {res:.3e}").unwrap();
    let result = json!({ "max_residual": res, "samples": to_value(&samples) });
    Ok(Outcome { text, result, tolerances: Tolerances::new() })
}

fn verify(f: &SystemFile, t: f64, perturb: f64, c: &Common) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let (chi, target) = need_conjugation(f, &sys)?;
    let chi = if perturb != 0.0 { chi.shift_chi_ii(perturb) } else { chi };
    let mut controls = f.test_controls()?;
    if controls.is_empty() {
        controls.push(ControlInput::constant(f.ubar()));
    }
    let r = verify_conjugacy_dynamic(&sys, &chi, &target, f.xbar(), &controls, (0.0, t), c.dt)?;
    let mut text = String::new();
    writeln!(text, "controls: {}", controls.len()).unwrap();
    writeln!(text, "max deviation: {:.3e}", r.max_deviation).unwrap();
    writeln!(text, "per control: {}", fmt_vec(&r.per_control)).unwrap();
    writeln!(text, "triangularity defect: {:.3e}", r.triangularity_defect).unwrap();
    Ok(Outcome { text, result: to_value(&r), tolerances: tolerances(&[("dt", c.dt)]) })
}

fn chatter(f: &SystemFile, l: usize, t: f64, plot: &PlotArgs, c: &Common) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let (u1, u2) = f.switch.as_ref().ok_or_else(|| CliError::Input("the file has no `switch`".into()))?;
    let x1 = VectorField::frozen(&sys, u1)?;
    let x2 = VectorField::frozen(&sys, u2)?;
    let r = chattering(&x1, &x2, f.xbar(), l, (0.0, t), c.dt, Some(&sys.state_box()))?;
    let mut header = vec!["t".to_string()];
    header.extend(f.states.iter().map(|s| format!("{s}_switched")));
    header.extend(f.states.iter().map(|s| format!("{s}_averaged")));
    let rows: Vec<Vec<f64>> = (0..r.switched.len())
        .map(|i| {
            let mut row = vec![r.switched.t[i]];
            row.extend(r.switched.x[i].iter().chain(r.averaged.x[i].iter()));
            row
        })
        .collect();
    write_csv(plot, &header, &rows, &format!("{} switching, l = {l}", sys.name()))?;
    let mut text = String::new();
    writeln!(text, "l: {l}, step {:.3e} ({} per half period)", r.dt, r.steps_per_half).unwrap();
    writeln!(text, "sup error: {:.6e}", r.sup_error).unwrap();
    let result = json!({
        "l": r.l,
        "dt": r.dt,
        "steps_per_half": r.steps_per_half,
        "sup_error": r.sup_error,
        "switched_final": r.switched.final_state().as_slice(),
        "averaged_final": r.averaged.final_state().as_slice(),
    });
    Ok(Outcome { text, result, tolerances: tolerances(&[("dt", c.dt)]) })
}

/// The file's `field` entries, else `f(·, u)` at `ū` and at `ū` moved by half
/// the control box along each axis (clamped to the box).
fn orbit_family(f: &SystemFile, sys: &quasilin::ControlSystem) -> Result<Vec<VectorField>, CliError> {
    let fam = f.family()?;
    if !fam.is_empty() {
        return Ok(fam);
    }
    let ub = sys.control_box();
    let mut out = vec![VectorField::frozen(sys, f.ubar())?];
    for j in 0..sys.m() {
        let (lo, hi) = ub.bounds()[j];
        for s in [1.0, -1.0] {
            let mut u = f.ubar().to_vec();
            u[j] = (u[j] + s * 0.5 * (hi - lo)).clamp(lo, hi);
            if u[j] != f.ubar()[j] {
                out.push(VectorField::frozen(sys, &u)?);
            }
        }
    }
    Ok(out)
}

fn orbit(f: &SystemFile, depth: usize, probe: &str, c: &Common) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let probe_times = sysfile::numbers(probe).map_err(|e| CliError::Input(format!("--probe: {e}")))?;
    let family = orbit_family(f, &sys)?;
    let params = OrbitParams { depth, probe_times, rel_tol: c.tol, dt: c.dt };
    let r = orbit_dimension(&family, f.xbar(), &params, None)?;
    let mut text = String::new();
    writeln!(text, "family: {} fields", family.len()).unwrap();
    writeln!(text, "orbit dimension: {} ({} vectors)", r.dimension, r.vectors_tried).unwrap();
    Ok(Outcome { text, result: to_value(&r), tolerances: tolerances(&[("tol", c.tol), ("dt", c.dt)]) })
}

fn simulate(f: &SystemFile, t: f64, plot: &PlotArgs, c: &Common) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let (control, source) = if let Some(first) = f.test_controls()?.into_iter().next() {
        (first, "first `control` entry")
    } else if let Some(fb) = f.feedback(&sys)? {
        (ControlInput::Feedback(fb), "feedback")
    } else {
        (ControlInput::constant(f.ubar()), "constant u at the point")
    };
    let tr = integrate(&sys, f.xbar(), &control, (0.0, t), c.dt)?;
    let mut header = vec!["t".to_string()];
    header.extend(f.states.iter().cloned());
    header.extend(f.controls.iter().cloned());
    write_csv(plot, &header, &trajectory_rows(&tr), &format!("{} from the point", sys.name()))?;
    let mut text = String::new();
    writeln!(text, "control: {source}").unwrap();
    writeln!(text, "steps: {}, final state {}", tr.len() - 1, fmt_vec(tr.final_state().as_slice())).unwrap();
    let result = json!({
        "control": source,
        "steps": tr.len() - 1,
        "dt": tr.dt,
        "final_state": tr.final_state().as_slice(),
    });
    Ok(Outcome { text, result, tolerances: tolerances(&[("dt", c.dt)]) })
}

fn smooth(f: &SystemFile, eps: f64, nodes: usize, width: Option<f64>) -> Result<Outcome, CliError> {
    let sys = f.system()?;
    let alpha = f.feedback(&sys)?.ok_or_else(|| CliError::Input("the file has no `feedback`".into()))?;
    if nodes < 2 {
        return Err(CliError::Input("--nodes must be at least 2".into()));
    }
    let first_err = std::sync::Mutex::new(None);
    let grid = GridData::sample(sys.state_box().bounds(), nodes, |p| {
        alpha.eval(p).unwrap_or_else(|e| {
            first_err.lock().unwrap().get_or_insert(e);
            DVector::from_element(alpha.m(), f64::NAN)
        })
    })?;
    if let Some(e) = first_err.into_inner().unwrap() {
        return Err(e.into());
    }
    let (_, r) = smooth_feedback(&Feedback::Grid(Arc::new(grid)), eps, width)?;
    let mut text = String::new();
    writeln!(text, "kernel width: {:.4e} after {} halvings", r.width, r.halvings).unwrap();
    writeln!(text, "sup error: {:.4e} over {} check points (target {eps})", r.sup_error, r.check_points).unwrap();
    let result = json!({ "nodes": nodes, "smoothing": to_value(&r) });
    Ok(Outcome { text, result, tolerances: tolerances(&[("eps", eps)]) })
}
