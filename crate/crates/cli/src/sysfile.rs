//! The `.sys` system-definition format.
//!
//! One `key = value` entry per line; `#` starts a comment. Lists inside a
//! value are separated by `;` (expressions, matrix rows, vectors) and `,`
//! (numbers within a row or vector).
//!
//! ```text
//! name     = cubic
//! states   = x
//! controls = u
//! f        = u^3
//! point    = 0, 0            # x̄ then ū
//! box.x    = -2, 2
//! box.u    = -1, 1
//! chi_I    = x               # optional conjugation
//! chi_II   = u^3
//! A        = 0               # optional target pair, rows separated by `;`
//! B        = 1
//! switch   = 1; -1           # optional pair of controls for `chatter`
//! control  = sin(t)          # repeatable test controls, expressions in t
//! field    = 1; 0            # repeatable orbit family members over the states
//! feedback = sqrt(x^2)       # optional feedback over the states
//! ```

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use quasilin::dynamics::{feedback_from_exprs, Conjugation, ControlInput, Feedback};
use quasilin::expr::ExprVec;
use quasilin::geo::VectorField;
use quasilin::{ControlSystem, DomainBox, LinearPair};

use crate::CliError;

const SINGLE_KEYS: &[&str] =
    &["name", "states", "controls", "f", "point", "chi_I", "chi_II", "A", "B", "switch", "feedback"];
const REPEATED_KEYS: &[&str] = &["control", "field"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SystemFile {
    pub name: String,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub f: Vec<String>,
    pub point: Vec<f64>,
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub chi_i: Option<Vec<String>>,
    pub chi_ii: Option<Vec<String>>,
    pub a: Option<DMatrix<f64>>,
    pub b: Option<DMatrix<f64>>,
    pub switch: Option<(Vec<f64>, Vec<f64>)>,
    pub controls_t: Vec<Vec<String>>,
    pub fields: Vec<Vec<String>>,
    pub feedback: Option<Vec<String>>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("line {line}: {msg}"))
}

fn names(v: &str) -> Vec<String> {
    v.split(|c| c == ',' || c == ';').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn exprs(v: &str) -> Vec<String> {
    v.split(';').map(|s| s.trim().to_string()).collect()
}

pub fn numbers(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{}` is not a number ({e})", s.trim()))).collect()
}

/// `"r11,r12;r21,r22"` as a matrix; every row must have the same length.
pub fn matrix(v: &str) -> Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = v.split(';').map(numbers).collect::<Result<_, _>>()?;
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(format!("rows of `{v}` differ in length"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), c, rows.into_iter().flatten()))
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = SystemFile::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad(ln, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(sym) = key.strip_prefix("box.") {
                let v = numbers(value).map_err(|e| bad(ln, e))?;
                let [lo, hi] = v[..] else {
                    return Err(bad(ln, "a box entry needs `lo, hi`"));
                };
                if out.bounds.insert(sym.to_string(), (lo, hi)).is_some() {
                    return Err(bad(ln, format!("duplicate box entry for `{sym}`")));
                }
                continue;
            }
            if SINGLE_KEYS.contains(&key) {
                if let Some(prev) = seen.insert(key.to_string(), ln) {
                    return Err(bad(ln, format!("`{key}` already given on line {prev}")));
                }
            } else if !REPEATED_KEYS.contains(&key) {
                return Err(bad(ln, format!("unknown key `{key}`")));
            }
            match key {
                "name" => out.name = value.to_string(),
                "states" => out.states = names(value),
                "controls" => out.controls = names(value),
                "f" => out.f = exprs(value),
                "point" => out.point = numbers(value).map_err(|e| bad(ln, e))?,
                "chi_I" => out.chi_i = Some(exprs(value)),
                "chi_II" => out.chi_ii = Some(exprs(value)),
                "A" => out.a = Some(matrix(value).map_err(|e| bad(ln, e))?),
                "B" => out.b = Some(matrix(value).map_err(|e| bad(ln, e))?),
                "switch" => {
                    let parts: Vec<&str> = value.split(';').collect();
                    let [p, q] = parts[..] else {
                        return Err(bad(ln, "`switch` needs two controls separated by `;`"));
                    };
                    out.switch = Some((numbers(p).map_err(|e| bad(ln, e))?, numbers(q).map_err(|e| bad(ln, e))?));
                }
                "control" => out.controls_t.push(exprs(value)),
                "field" => out.fields.push(exprs(value)),
                "feedback" => out.feedback = Some(exprs(value)),
                _ => unreachable!("key list checked above"),
            }
        }
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<(), CliError> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Input(what.to_string()))
            }
        };
        need(!self.states.is_empty(), "`states` is missing")?;
        need(!self.controls.is_empty(), "`controls` is missing")?;
        need(self.f.len() == self.states.len(), "`f` needs one expression per state")?;
        let (n, m) = (self.states.len(), self.controls.len());
        need(self.point.len() == n + m, "`point` needs one value per state and control")?;
        for s in self.states.iter().chain(&self.controls) {
            need(self.bounds.contains_key(s), &format!("`box.{s}` is missing"))?;
        }
        for k in self.bounds.keys() {
            need(self.states.contains(k) || self.controls.contains(k), &format!("`box.{k}` names no symbol"))?;
        }
        need(self.chi_i.is_some() == self.chi_ii.is_some(), "`chi_I` and `chi_II` go together")?;
        need(self.a.is_some() == self.b.is_some(), "`A` and `B` go together")?;
        if let Some((p, q)) = &self.switch {
            need(p.len() == m && q.len() == m, "`switch` controls need one value per control")?;
        }
        for c in &self.controls_t {
            need(c.len() == m, "each `control` needs one expression per control")?;
        }
        for c in &self.fields {
            need(c.len() == n, "each `field` needs one expression per state")?;
        }
        let domain = self.domain()?;
        need(domain.contains(&self.point), "`point` lies outside the box")?;
        // parse everything now so errors surface on load
        let sys = self.system()?;
        self.conjugation(&sys)?;
        self.target()?;
        self.test_controls()?;
        self.family()?;
        self.feedback(&sys)?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn xbar(&self) -> &[f64] {
        &self.point[..self.n()]
    }

    pub fn ubar(&self) -> &[f64] {
        &self.point[self.n()..]
    }

    pub fn domain(&self) -> Result<DomainBox, CliError> {
        let b = self.states.iter().chain(&self.controls).map(|s| self.bounds[s]).collect();
        Ok(DomainBox::new(b)?)
    }

    pub fn system(&self) -> Result<ControlSystem, CliError> {
        let name = if self.name.is_empty() { "system" } else { &self.name };
        Ok(ControlSystem::parse(name, &self.states, &self.controls, &self.f, self.domain()?)?)
    }

    pub fn conjugation(&self, sys: &ControlSystem) -> Result<Option<Conjugation>, CliError> {
        match (&self.chi_i, &self.chi_ii) {
            (Some(a), Some(b)) => Ok(Some(Conjugation::parse(sys, a, b)?)),
            _ => Ok(None),
        }
    }

    pub fn target(&self) -> Result<Option<LinearPair>, CliError> {
        match (&self.a, &self.b) {
            (Some(a), Some(b)) => Ok(Some(LinearPair::new(a.clone(), b.clone())?)),
            _ => Ok(None),
        }
    }

    pub fn test_controls(&self) -> Result<Vec<ControlInput>, CliError> {
        self.controls_t.iter().map(|c| Ok(ControlInput::from_time_exprs(c)?)).collect()
    }

    pub fn family(&self) -> Result<Vec<VectorField>, CliError> {
        let symbols = std::sync::Arc::new(quasilin::Symbols::new(&self.states)?);
        self.fields.iter().map(|c| Ok(VectorField::from_exprs(ExprVec::parse(symbols.clone(), c)?))).collect()
    }

    pub fn feedback(&self, sys: &ControlSystem) -> Result<Option<Feedback>, CliError> {
        match &self.feedback {
            Some(f) => Ok(Some(feedback_from_exprs(sys, f)?)),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBIC: &str = "name = cubic\nstates = x\ncontrols = u\nf = u^3\npoint = 0, 0\nbox.x = -2, 2\nbox.u = -1, 1\n";

    #[test]
    fn parses_minimal_file() {
        let s = SystemFile::parse(CUBIC).unwrap();
        assert_eq!(s.name, "cubic");
        assert_eq!(s.system().unwrap().n(), 1);
        assert_eq!(s.ubar(), &[0.0]);
    }

    #[test]
    fn matrices_are_row_major() {
        let m = matrix("0,0;1,0").unwrap();
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert!(matrix("1,2;3").is_err());
    }

    #[test]
    fn rejects_inconsistent_files() {
        assert!(SystemFile::parse(&CUBIC.replace("point = 0, 0", "point = 0, 3")).is_err());
        assert!(SystemFile::parse(&CUBIC.replace("box.u = -1, 1\n", "")).is_err());
        assert!(SystemFile::parse(&format!("{CUBIC}f = u\n")).is_err());
        assert!(SystemFile::parse(&format!("{CUBIC}colour = red\n")).is_err());
        assert!(SystemFile::parse(&CUBIC.replace("u^3", "v^3")).is_err());
        assert!(SystemFile::parse(&format!("{CUBIC}chi_I = x\n")).is_err());
        // χ_I may not read the control
        assert!(SystemFile::parse(&format!("{CUBIC}chi_I = x + u\nchi_II = u\n")).is_err());
    }
}
