//! Scalar and vector expressions in named state and control variables.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' '-'? INTEGER)*
//! atom   := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
//! FUNC   := sin | cos | exp | tanh | sqrt
//! NUMBER := DIGITS ('.' DIGITS?)? (('e' | 'E') ('+' | '-')? DIGITS)?
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Exponents are
//! integer literals only.

mod jet;
mod parse;
mod print;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use jet::{Jet, Scalar};
pub use parse::{parse_expr, ParseError};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree. `Var` holds an index into the owning [`Symbols`] table.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    SqrtOfNegative,
    /// `sqrt` at exactly zero while derivatives are requested.
    SqrtSingular,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::SqrtOfNegative => "sqrt of negative",
            DomainKind::SqrtSingular => "sqrt not differentiable at 0",
        })
    }
}

/// Evaluation left the domain of one of the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainError {
    pub kind: DomainKind,
    pub node: Expr,
    /// Node printed with symbol names, once known.
    pub rendered: Option<String>,
}

impl DomainError {
    pub fn with_symbols(mut self, symbols: &Symbols) -> Self {
        self.rendered = Some(self.node.display(symbols).to_string());
        self
    }
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rendered {
            Some(r) => write!(f, "{} in `{}`", self.kind, r),
            None => write!(f, "{} in {:?}", self.kind, self.node),
        }
    }
}

impl std::error::Error for DomainError {}

macro_rules! bin {
    ($name:ident, $variant:ident) => {
        pub fn $name(a: Expr, b: Expr) -> Expr {
            Expr::$variant(Box::new(a), Box::new(b))
        }
    };
}

impl Expr {
    bin!(add, Add);
    bin!(sub, Sub);
    bin!(mul, Mul);
    bin!(div, Div);

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        Expr::Pow(Box::new(a), n)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// `Σ c_i · var_i`, skipping zero coefficients; `0` if all vanish.
    pub fn linear_combination(terms: &[(f64, usize)]) -> Expr {
        let mut acc: Option<Expr> = None;
        for &(c, v) in terms {
            if c == 0.0 {
                continue;
            }
            let mag = c.abs();
            let term = if mag == 1.0 { Expr::Var(v) } else { Expr::mul(Expr::Const(mag), Expr::Var(v)) };
            acc = Some(match (acc, c < 0.0) {
                (None, false) => term,
                (None, true) => Expr::neg(term),
                (Some(a), false) => Expr::add(a, term),
                (Some(a), true) => Expr::sub(a, term),
            });
        }
        acc.unwrap_or(Expr::Const(0.0))
    }

    /// Indices of all variables occurring in the tree.
    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Replaces every variable by the expression returned for its index.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(map));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => map(*i),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Pow(a, n) => Expr::Pow(s(a), *n),
            Expr::Call(f, a) => Expr::Call(*f, s(a)),
        }
    }

    /// Evaluates with plain doubles; `vals[i]` is the value of `Var(i)`.
    pub fn eval(&self, vals: &[f64]) -> std::result::Result<f64, DomainError> {
        self.eval_scalar(vals, &0.0)
    }

    /// Generic evaluation; `zero` fixes the shape of lifted constants.
    pub fn eval_scalar<S: Scalar>(&self, vals: &[S], zero: &S) -> std::result::Result<S, DomainError> {
        let err = |kind| DomainError { kind, node: self.clone(), rendered: None };
        Ok(match self {
            Expr::Const(c) => zero.lift(*c),
            Expr::Var(i) => vals[*i].clone(),
            Expr::Neg(a) => a.eval_scalar(vals, zero)?.neg(),
            Expr::Add(a, b) => a.eval_scalar(vals, zero)?.add(&b.eval_scalar(vals, zero)?),
            Expr::Sub(a, b) => a.eval_scalar(vals, zero)?.sub(&b.eval_scalar(vals, zero)?),
            Expr::Mul(a, b) => a.eval_scalar(vals, zero)?.mul(&b.eval_scalar(vals, zero)?),
            Expr::Div(a, b) => {
                let num = a.eval_scalar(vals, zero)?;
                let den = b.eval_scalar(vals, zero)?;
                if den.value() == 0.0 {
                    return Err(err(DomainKind::DivisionByZero));
                }
                num.div(&den)
            }
            Expr::Pow(a, n) => {
                let base = a.eval_scalar(vals, zero)?;
                if *n < 0 && base.value() == 0.0 {
                    return Err(err(DomainKind::DivisionByZero));
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => {
                let x = a.eval_scalar(vals, zero)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Tanh => x.tanh(),
                    Func::Sqrt => {
                        if x.value() < 0.0 {
                            return Err(err(DomainKind::SqrtOfNegative));
                        }
                        if x.value() == 0.0 && x.has_infinitesimals() {
                            return Err(err(DomainKind::SqrtSingular));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }

    /// Canonical printer with minimal parentheses.
    pub fn display<'a>(&'a self, symbols: &'a Symbols) -> print::Display<'a> {
        print::Display { expr: self, symbols }
    }
}

/// Ordered, duplicate-free symbol table shared by the expressions of one system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbols {
    names: Vec<String>,
}

impl Symbols {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if names.is_empty() {
            return Err(Error::Input("symbol table is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if !parse::is_identifier(n) || Func::from_name(n).is_some() {
                return Err(Error::Input(format!("`{n}` is not a valid symbol name")));
            }
            if names[..i].contains(n) {
                return Err(Error::Input(format!("duplicate symbol `{n}`")));
            }
        }
        Ok(Symbols { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Values for every symbol of a table, stored in table order.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    values: Vec<f64>,
}

impl EvalPoint {
    pub fn from_map(symbols: &Symbols, map: &HashMap<String, f64>) -> Result<Self> {
        let values = symbols
            .names()
            .iter()
            .map(|n| map.get(n).copied().ok_or_else(|| Error::MissingSymbol(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalPoint { values })
    }

    pub fn from_pairs(symbols: &Symbols, pairs: &[(&str, f64)]) -> Result<Self> {
        let map = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::from_map(symbols, &map)
    }

    pub fn from_values(symbols: &Symbols, values: Vec<f64>) -> Result<Self> {
        if values.len() != symbols.len() {
            return Err(Error::DimensionMismatch { expected: symbols.len(), found: values.len() });
        }
        Ok(EvalPoint { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Ordered list of expressions over one shared symbol table.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprVec {
    symbols: Arc<Symbols>,
    comps: Vec<Expr>,
}

impl ExprVec {
    pub fn new(symbols: Arc<Symbols>, comps: Vec<Expr>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::Input("expression vector must have at least one component".into()));
        }
        for e in &comps {
            if let Some(&bad) = e.vars().iter().find(|&&i| i >= symbols.len()) {
                return Err(Error::Input(format!("variable index {bad} outside symbol table")));
            }
        }
        Ok(ExprVec { symbols, comps })
    }

    /// Parses each component against the shared table.
    pub fn parse<S: AsRef<str>>(symbols: Arc<Symbols>, texts: &[S]) -> Result<Self> {
        let comps =
            texts.iter().map(|t| parse_expr(t.as_ref(), &symbols)).collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(symbols, comps)
    }

    pub fn symbols(&self) -> &Arc<Symbols> {
        &self.symbols
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, vals: &[f64]) -> Result<DVector<f64>> {
        self.check_arity(vals.len())?;
        let out = self
            .comps
            .iter()
            .map(|e| e.eval(vals).map_err(|d| d.with_symbols(&self.symbols)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(DVector::from_vec(out))
    }

    pub fn eval_point(&self, p: &EvalPoint) -> Result<DVector<f64>> {
        self.eval(p.values())
    }

    pub fn eval_scalar<S: Scalar>(&self, vals: &[S], zero: &S) -> Result<Vec<S>> {
        self.check_arity(vals.len())?;
        self.comps
            .iter()
            .map(|e| e.eval_scalar(vals, zero).map_err(|d| Error::Domain(d.with_symbols(&self.symbols))))
            .collect()
    }

    /// Directional derivative `Dv(vals)·dir` by one dual-number pass.
    pub fn jvp(&self, vals: &[f64], dir: &[f64]) -> Result<DVector<f64>> {
        let seeded: Vec<Jet> = vals.iter().zip(dir).map(|(&v, &d)| Jet::dual(v, d)).collect();
        let out = self.eval_scalar(&seeded, &Jet::constant(0.0, 1))?;
        Ok(DVector::from_iterator(out.len(), out.iter().map(|j| j.coeffs()[1])))
    }

    /// Jacobian with respect to the listed symbol indices.
    pub fn jacobian_idx(&self, wrt: &[usize], vals: &[f64]) -> Result<DMatrix<f64>> {
        self.check_arity(vals.len())?;
        let mut jac = DMatrix::zeros(self.dim(), wrt.len());
        let mut dir = vec![0.0; vals.len()];
        for (j, &w) in wrt.iter().enumerate() {
            dir[w] = 1.0;
            let col = self.jvp(vals, &dir)?;
            jac.set_column(j, &col);
            dir[w] = 0.0;
        }
        Ok(jac)
    }

    fn check_arity(&self, got: usize) -> Result<()> {
        if got != self.symbols.len() {
            return Err(Error::DimensionMismatch { expected: self.symbols.len(), found: got });
        }
        Ok(())
    }
}

/// Jacobian of `v` with respect to the named symbols at `p`, by forward-mode AD.
pub fn jacobian<S: AsRef<str>>(v: &ExprVec, wrt: &[S], p: &EvalPoint) -> Result<DMatrix<f64>> {
    let idx = wrt
        .iter()
        .map(|n| v.symbols.index_of(n.as_ref()).ok_or_else(|| Error::UnknownSymbol(n.as_ref().to_string())))
        .collect::<Result<Vec<_>>>()?;
    v.jacobian_idx(&idx, p.values())
}

/// Evaluates one expression at `p`.
pub fn eval(e: &Expr, p: &EvalPoint) -> std::result::Result<f64, DomainError> {
    e.eval(p.values())
}
