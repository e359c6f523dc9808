use thiserror::Error;

use super::{Expr, Func, Symbols};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
}

pub(super) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Op(u8),
    End,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    symbols: &'a Symbols,
    tok: Tok,
    tok_start: usize,
}

/// Parses `text` against `symbols`.
pub fn parse_expr(text: &str, symbols: &Symbols) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, symbols, tok: Tok::End, tok_start: 0 };
    p.advance()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.tok_start, message: message.to_string() }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            self.tok = Tok::End;
            return Ok(());
        };
        if c.is_ascii_digit() || c == b'.' {
            self.tok = self.number()?;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            // identifiers are ASCII, so this slice is valid UTF-8
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
            self.tok = Tok::Ident(s.to_string());
        } else if b"+-*/^()".contains(&c) {
            self.pos += 1;
            self.tok = Tok::Op(c);
        } else {
            return Err(ParseError::Syntax { offset: self.pos, message: "unexpected character".into() });
        }
        Ok(())
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let int_digits = digits(self);
        let mut integral = true;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            integral = false;
            if digits(self) == 0 && int_digits == 0 {
                return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(ParseError::Syntax { offset: save, message: "malformed exponent".into() });
            }
            integral = false;
        }
        if self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphabetic() || self.src[self.pos] == b'_') {
            return Err(ParseError::Syntax { offset: self.pos, message: "identifier directly after number".into() });
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if integral {
            if let Ok(i) = text.parse::<i64>() {
                return Ok(Tok::Int(i));
            }
        }
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ParseError::Syntax { offset: start, message: "malformed number".into() })
    }

    fn is_op(&self, op: u8) -> bool {
        self.tok == Tok::Op(op)
    }

    fn expect(&mut self, op: u8) -> Result<(), ParseError> {
        if !self.is_op(op) {
            return Err(self.syntax(&format!("expected `{}`", op as char)));
        }
        self.advance()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.is_op(b'+') {
                self.advance()?;
                lhs = Expr::add(lhs, self.term()?);
            } else if self.is_op(b'-') {
                self.advance()?;
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_op(b'*') {
                self.advance()?;
                lhs = Expr::mul(lhs, self.unary()?);
            } else if self.is_op(b'/') {
                self.advance()?;
                lhs = Expr::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_op(b'-') {
            self.advance()?;
            // `-` directly on a bare literal is a negative constant
            let lit = match self.tok {
                Tok::Num(v) => Some(v),
                Tok::Int(i) => Some(i as f64),
                _ => None,
            };
            if let Some(v) = lit {
                self.advance()?;
                if !self.is_op(b'^') {
                    return Ok(Expr::Const(-v));
                }
                return Ok(Expr::neg(self.power_from(Expr::Const(v))?));
            }
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        self.power_from(base)
    }

    fn power_from(&mut self, mut base: Expr) -> Result<Expr, ParseError> {
        while self.is_op(b'^') {
            self.advance()?;
            let negative = if self.is_op(b'-') {
                self.advance()?;
                true
            } else {
                false
            };
            let Tok::Int(n) = self.tok else {
                return Err(self.syntax("exponent must be an integer literal"));
            };
            let n = if negative { -n } else { n };
            let n = i32::try_from(n).map_err(|_| self.syntax("exponent out of range"))?;
            self.advance()?;
            base = Expr::pow(base, n);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Const(v))
            }
            Tok::Int(i) => {
                self.advance()?;
                Ok(Expr::Const(i as f64))
            }
            Tok::Ident(name) => {
                let start = self.tok_start;
                self.advance()?;
                if let Some(f) = Func::from_name(&name) {
                    if !self.is_op(b'(') {
                        return Err(self.syntax(&format!("expected `(` after `{name}`")));
                    }
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::call(f, arg));
                }
                match self.symbols.index_of(&name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError::UnknownSymbol { name, offset: start }),
                }
            }
            Tok::Op(b'(') => {
                self.advance()?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Tok::Op(_) => Err(self.syntax("expected an operand")),
            Tok::End => Err(self.syntax("unexpected end of input")),
        }
    }
}
