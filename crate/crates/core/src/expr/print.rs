use std::fmt;

use super::{Expr, Symbols};

pub struct Display<'a> {
    pub(super) expr: &'a Expr,
    pub(super) symbols: &'a Symbols,
}

// binding strength; higher binds tighter
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
        Expr::Pow(..) => 4,
        Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
    }
}

impl Display<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
        if prec(e) < min {
            f.write_str("(")?;
            self.write(f, e, 0)?;
            return f.write_str(")");
        }
        match e {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => f.write_str(self.symbols.name(*i)),
            Expr::Neg(a) => {
                f.write_str("-")?;
                match **a {
                    Expr::Const(c) if !c.is_sign_negative() => write!(f, "({c})"),
                    _ => self.write(f, a, 3),
                }
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                self.write(f, a, 1)?;
                f.write_str(if matches!(e, Expr::Add(..)) { "+" } else { "-" })?;
                self.write(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.write(f, a, 2)?;
                f.write_str(if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
                self.write(f, b, 3)
            }
            Expr::Pow(a, n) => {
                self.write(f, a, 4)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(f, a, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_expr;
    use super::*;

    #[test]
    fn minimal_parentheses() {
        let s = Symbols::new(&["x", "y", "z"]).unwrap();
        let cases = [
            ("x+y*z", "x+y*z"),
            ("(x+y)*z", "(x+y)*z"),
            ("x-(y-z)", "x-(y-z)"),
            ("(x-y)-z", "x-y-z"),
            ("x/(y*z)", "x/(y*z)"),
            ("-(x*y)", "-(x*y)"),
            ("(-x)^2", "(-x)^2"),
            ("-x^2", "-x^2"),
            ("x*-y", "x*-y"),
            ("sin((x))", "sin(x)"),
            ("(x^2)^3", "x^2^3"),
            ("1.5*x^-1", "1.5*x^-1"),
        ];
        for (src, want) in cases {
            let e = parse_expr(src, &s).unwrap();
            assert_eq!(e.display(&s).to_string(), want, "input {src}");
        }
    }
}
