//! Plain-text expression grammar.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = [ "-" | "+" ] power ;
//! power   = atom [ "^" exponent ] ;
//! exponent= [ "-" ] integer | "(" [ "-" ] integer ")" ;
//! atom    = number | ident | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "exp" | "log" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "-" | "+" ] digits ] ;
//! ident   = letter { letter | digit | "_" } ;
//! ```
//!
//! Identifiers resolve to chart coordinates first, then to declared
//! parameters. `pi` is the constant π unless shadowed.

use std::f64::consts::PI;

use super::expr::Expr;
use crate::error::{Error, Result};

/// Parses `src` with the given coordinate and parameter names.
pub fn parse_expr(src: &str, coords: &[String], params: &[String]) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        coords,
        params,
    };
    let e = p.expr()?;
    if let Some(t) = p.tokens.get(p.pos) {
        return Err(Error::Parse {
            column: t.column,
            message: format!("unexpected token {:?}", t.kind),
        });
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                column,
                message: format!("bad number `{text}`"),
            })?;
            out.push(Token { kind: Kind::Num(v), column });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: Kind::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token { kind: Kind::Op(c), column });
            i += 1;
        } else {
            return Err(Error::Parse {
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    coords: &'a [String],
    params: &'a [String],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token { kind: Kind::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.column)
            .or_else(|| self.tokens.last().map(|t| t.column + 1))
            .unwrap_or(1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            column: self.column(),
            message: message.into(),
        })
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{op}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            if op == '/' && rhs.is_zero() {
                return self.err("division by zero");
            }
            acc = if op == '*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.power()?)
            }
            Some('+') => {
                self.pos += 1;
                self.power()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let n = self.exponent()?;
            if n < 0 && base.is_zero() {
                return self.err("zero raised to a negative power");
            }
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32> {
        let paren = self.peek_op() == Some('(');
        if paren {
            self.pos += 1;
        }
        let neg = self.peek_op() == Some('-');
        if neg {
            self.pos += 1;
        }
        let n = match self.tokens.get(self.pos) {
            Some(Token { kind: Kind::Num(v), .. }) if v.fract() == 0.0 && v.abs() < 1e6 => *v as i32,
            _ => return self.err("exponent must be an integer"),
        };
        self.pos += 1;
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return self.err("unexpected end of input");
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok(Expr::Const(v)),
            Kind::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::Coord(i));
                }
                if self.params.iter().any(|p| *p == name) {
                    return Ok(Expr::param(&name));
                }
                match name.as_str() {
                    "sin" | "cos" | "exp" | "log" => {
                        self.expect('(')?;
                        let arg = self.expr()?;
                        self.expect(')')?;
                        Ok(match name.as_str() {
                            "sin" => arg.sin(),
                            "cos" => arg.cos(),
                            "exp" => arg.exp(),
                            _ => {
                                if let Some(c) = arg.as_const() {
                                    if c <= 0.0 {
                                        self.pos -= 1;
                                        return self.err("log of a non-positive constant");
                                    }
                                }
                                arg.ln()
                            }
                        })
                    }
                    "pi" => Ok(Expr::Const(PI)),
                    _ => Err(Error::UnknownName(name)),
                }
            }
            Kind::Op(c) => Err(Error::Parse {
                column: tok.column,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}
