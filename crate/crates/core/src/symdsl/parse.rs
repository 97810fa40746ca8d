//! Text syntax for symbols.
//!
//! ```text
//! [[cos(x1)*bracket(-1), 0], [1, -xi1*bracket(-1)]]
//! ```
//!
//! Variables are `x1.. xi1.. t`, functions `sin cos exp bracket(s) dyadic(j, J)`,
//! constants `i pi`, operators `+ - * /` and `^` with an integer exponent.

use num_complex::Complex64 as C64;

use super::expr::SymbolExpr;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let c = bytes[p] as char;
        if c.is_ascii_whitespace() {
            p += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = p;
            while p < bytes.len() && (bytes[p].is_ascii_digit() || bytes[p] == b'.') {
                p += 1;
            }
            if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
                let mut q = p + 1;
                if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                    q += 1;
                }
                if q < bytes.len() && bytes[q].is_ascii_digit() {
                    p = q;
                    while p < bytes.len() && bytes[p].is_ascii_digit() {
                        p += 1;
                    }
                }
            }
            let text = &src[start..p];
            let v: f64 = text.parse().map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{}'", text) })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = p;
            while p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
                p += 1;
            }
            out.push((start, Tok::Ident(src[start..p].to_string())));
        } else if "+-*/^()[],".contains(c) {
            out.push((p, Tok::Op(c)));
            p += 1;
        } else {
            return Err(Error::Parse { pos: p, msg: format!("unexpected character '{}'", c) });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    len: usize,
    d: Option<usize>,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0).unwrap_or(self.len)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c))
        }
    }

    fn expr(&mut self) -> Result<SymbolExpr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(SymbolExpr::sum(terms))
    }

    fn term(&mut self) -> Result<SymbolExpr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                acc = SymbolExpr::product([acc, rhs]);
            } else if self.eat('/') {
                let rhs = self.unary()?;
                if rhs.is_zero() {
                    return self.err("division by zero");
                }
                acc = SymbolExpr::product([acc, SymbolExpr::pow(rhs, -1)]);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<SymbolExpr> {
        if self.eat('-') {
            Ok(self.unary()?.neg())
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<SymbolExpr> {
        let base = self.atom()?;
        if self.eat('^') {
            let n = self.int_exponent()?;
            if n < 0 && base.is_zero() {
                return self.err("negative power of zero");
            }
            return Ok(SymbolExpr::pow(base, n));
        }
        Ok(base)
    }

    fn int_exponent(&mut self) -> Result<i32> {
        let paren = self.eat('(');
        let neg = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        let v = match self.peek() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() < 1e6 => *v as i32,
            _ => return self.err("exponent must be an integer literal"),
        };
        self.at += 1;
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { -v } else { v })
    }

    fn var_index(&mut self, name: &str, prefix: &str) -> Result<Option<usize>> {
        let Some(rest) = name.strip_prefix(prefix) else {
            return Ok(None);
        };
        let Ok(i) = rest.parse::<usize>() else {
            return Ok(None);
        };
        if i == 0 {
            return self.err(format!("variable indices start at 1: '{}'", name));
        }
        if let Some(d) = self.d {
            if i > d {
                return self.err(format!("'{}' exceeds dimension d = {}", name, d));
            }
        }
        Ok(Some(i - 1))
    }

    fn atom(&mut self) -> Result<SymbolExpr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        self.at += 1;
        match tok {
            Tok::Num(v) => Ok(SymbolExpr::real(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name),
            Tok::Op(c) => {
                self.at -= 1;
                self.err(format!("unexpected '{}'", c))
            }
        }
    }

    fn ident(&mut self, name: &str) -> Result<SymbolExpr> {
        match name {
            "i" => return Ok(SymbolExpr::constant(C64::new(0.0, 1.0))),
            "pi" => return Ok(SymbolExpr::real(std::f64::consts::PI)),
            "t" => return Ok(SymbolExpr::time()),
            "sin" | "cos" | "exp" | "bracket" => {
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                return match name {
                    "sin" => Ok(SymbolExpr::sin(arg)),
                    "cos" => Ok(SymbolExpr::cos(arg)),
                    "exp" => Ok(SymbolExpr::exp(arg)),
                    _ => match arg.as_const() {
                        Some(c) if c.im == 0.0 && c.re.is_finite() => Ok(SymbolExpr::bracket(c.re)),
                        _ => self.err("bracket(s) needs a real constant exponent"),
                    },
                };
            }
            "dyadic" => {
                self.expect('(')?;
                let mut args = vec![self.count_arg()?];
                while self.peek() == Some(&Tok::Op(',')) {
                    self.at += 1;
                    args.push(self.count_arg()?);
                }
                self.expect(')')?;
                return match args[..] {
                    [j, jm] if j <= jm + 1 => Ok(SymbolExpr::dyadic(j, jm)),
                    [j, jm, n] if j <= jm + 1 => Ok(SymbolExpr::dyadic_deriv(j, jm, n)),
                    _ => self.err("dyadic(j, J[, n]) needs integers with j <= J + 1"),
                };
            }
            _ => {}
        }
        if let Some(i) = self.var_index(name, "xi")? {
            return Ok(SymbolExpr::xi(i));
        }
        if let Some(i) = self.var_index(name, "x")? {
            return Ok(SymbolExpr::x(i));
        }
        self.at -= 1;
        self.err(format!("unknown identifier '{}'", name))
    }

    fn count_arg(&mut self) -> Result<usize> {
        match self.expr()?.as_const() {
            Some(c) if c.im == 0.0 && c.re >= 0.0 && c.re.fract() == 0.0 && c.re < 64.0 => Ok(c.re as usize),
            _ => self.err("expected a non-negative integer constant"),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.at < self.toks.len() {
            return self.err("trailing input");
        }
        Ok(())
    }
}

fn parser(src: &str, d: Option<usize>) -> Result<Parser> {
    Ok(Parser { toks: lex(src)?, at: 0, len: src.len(), d })
}

/// Parses a single scalar expression.
pub fn parse_expr(src: &str) -> Result<SymbolExpr> {
    let mut p = parser(src, None)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses either a bracketed square matrix or a bare scalar expression
/// (a 1×1 matrix). Variable indices above `d` are rejected when `d` is given.
pub fn parse_matrix(src: &str, d: Option<usize>) -> Result<Vec<Vec<SymbolExpr>>> {
    let mut p = parser(src, d)?;
    let is_matrix = p.toks.len() >= 2 && p.toks[0].1 == Tok::Op('[') && p.toks[1].1 == Tok::Op('[');
    let rows = if is_matrix {
        p.expect('[')?;
        let mut rows = Vec::new();
        loop {
            p.expect('[')?;
            let mut row = vec![p.expr()?];
            while p.eat(',') {
                row.push(p.expr()?);
            }
            p.expect(']')?;
            rows.push(row);
            if !p.eat(',') {
                break;
            }
        }
        p.expect(']')?;
        rows
    } else {
        vec![vec![p.expr()?]]
    };
    p.finish()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse {
            pos: 0,
            msg: format!("matrix must be square, got {} rows of lengths {:?}", n, rows.iter().map(|r| r.len()).collect::<Vec<_>>()),
        });
    }
    Ok(rows)
}

/// Canonical text of a matrix; parses back to the same trees.
pub fn print_matrix(rows: &[Vec<SymbolExpr>]) -> String {
    let body: Vec<String> = rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|e| e.to_string()).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", body.join(", "))
}
