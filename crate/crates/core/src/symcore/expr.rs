//! Expression trees over chart coordinates and named real parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Named real parameters, e.g. `lambda = 1`.
pub type Params = BTreeMap<String, f64>;

/// A scalar expression. Coordinates are referenced by index into the chart.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Param(Arc<str>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    /// Integer power; negative exponents encode division.
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Default for Expr {
    fn default() -> Self {
        Expr::Const(0.0)
    }
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn coord(i: usize) -> Expr {
        Expr::Coord(i)
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(Arc::from(name))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    pub fn powi(self, n: i32) -> Expr {
        simplify_pow(self, n)
    }

    pub fn sin(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.sin()),
            e => Expr::Sin(Box::new(e)),
        }
    }

    pub fn cos(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.cos()),
            e => Expr::Cos(Box::new(e)),
        }
    }

    pub fn exp(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.exp()),
            e => Expr::Exp(Box::new(e)),
        }
    }

    pub fn ln(self) -> Expr {
        match self {
            Expr::Const(c) if c > 0.0 => Expr::Const(c.ln()),
            e => Expr::Log(Box::new(e)),
        }
    }

    /// Evaluates at `point` with parameter assignment `params`.
    pub fn eval(&self, point: &[f64], params: &Params) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => *point.get(*i).ok_or(Error::DimensionMismatch {
                expected: i + 1,
                found: point.len(),
            })?,
            Expr::Param(name) => *params
                .get(name.as_ref())
                .ok_or_else(|| Error::UnboundParameter(name.to_string()))?,
            Expr::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(point, params)?;
                }
                acc
            }
            Expr::Product(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval(point, params)?;
                }
                acc
            }
            Expr::Pow(base, n) => {
                let b = base.eval(point, params)?;
                if *n < 0 && b == 0.0 {
                    return Err(Error::InvalidArgument {
                        function: "negative power",
                        value: b,
                    });
                }
                b.powi(*n)
            }
            Expr::Sin(a) => a.eval(point, params)?.sin(),
            Expr::Cos(a) => a.eval(point, params)?.cos(),
            Expr::Exp(a) => a.eval(point, params)?.exp(),
            Expr::Log(a) => {
                let v = a.eval(point, params)?;
                if v <= 0.0 || !v.is_finite() {
                    return Err(Error::InvalidArgument {
                        function: "log",
                        value: v,
                    });
                }
                v.ln()
            }
        })
    }

    /// Evaluates an expression that has no free parameters.
    pub fn eval_at(&self, point: &[f64]) -> Result<f64> {
        thread_local! {
            static EMPTY: Params = Params::new();
        }
        EMPTY.with(|p| self.eval(point, p))
    }

    /// Exact partial derivative with respect to coordinate `i`.
    pub fn diff_coord(&self, i: usize) -> Expr {
        self.diff_by(&|e| matches!(e, Expr::Coord(j) if *j == i))
    }

    /// Exact partial derivative with respect to parameter `name`.
    pub fn diff_param(&self, name: &str) -> Expr {
        self.diff_by(&|e| matches!(e, Expr::Param(p) if p.as_ref() == name))
    }

    fn diff_by(&self, is_var: &dyn Fn(&Expr) -> bool) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Coord(_) | Expr::Param(_) => {
                if is_var(self) {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Sum(terms) => sum(terms.iter().map(|t| t.diff_by(is_var)).collect()),
            Expr::Product(factors) => {
                let mut terms = Vec::with_capacity(factors.len());
                for (k, f) in factors.iter().enumerate() {
                    let d = f.diff_by(is_var);
                    if d.is_zero() {
                        continue;
                    }
                    let mut parts: Vec<Expr> = factors
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, g)| g.clone())
                        .collect();
                    parts.push(d);
                    terms.push(product(parts));
                }
                sum(terms)
            }
            Expr::Pow(base, n) => {
                let d = base.diff_by(is_var);
                if d.is_zero() {
                    return Expr::zero();
                }
                product(vec![
                    Expr::Const(*n as f64),
                    simplify_pow((**base).clone(), n - 1),
                    d,
                ])
            }
            Expr::Sin(a) => product(vec![(**a).clone().cos(), a.diff_by(is_var)]),
            Expr::Cos(a) => product(vec![
                Expr::Const(-1.0),
                (**a).clone().sin(),
                a.diff_by(is_var),
            ]),
            Expr::Exp(a) => product(vec![self.clone(), a.diff_by(is_var)]),
            Expr::Log(a) => product(vec![a.diff_by(is_var), simplify_pow((**a).clone(), -1)]),
        }
    }

    /// Replaces each `Coord(i)` by `subs[i]`.
    pub fn substitute_coords(&self, subs: &[Expr]) -> Expr {
        self.map_leaves(&|e| match e {
            Expr::Coord(i) => Some(subs.get(*i).cloned().unwrap_or_else(|| e.clone())),
            _ => None,
        })
    }

    /// Replaces parameters that have a value in `params` by constants.
    pub fn bind(&self, params: &Params) -> Expr {
        self.map_leaves(&|e| match e {
            Expr::Param(name) => params.get(name.as_ref()).map(|v| Expr::Const(*v)),
            _ => None,
        })
    }

    fn map_leaves(&self, f: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) | Expr::Coord(_) | Expr::Param(_) => {
                f(self).unwrap_or_else(|| self.clone())
            }
            Expr::Sum(t) => sum(t.iter().map(|e| e.map_leaves(f)).collect()),
            Expr::Product(t) => product(t.iter().map(|e| e.map_leaves(f)).collect()),
            Expr::Pow(b, n) => simplify_pow(b.map_leaves(f), *n),
            Expr::Sin(a) => a.map_leaves(f).sin(),
            Expr::Cos(a) => a.map_leaves(f).cos(),
            Expr::Exp(a) => a.map_leaves(f).exp(),
            Expr::Log(a) => a.map_leaves(f).ln(),
        }
    }

    /// Sorted indices of coordinates that occur in the expression.
    pub fn coords_used(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Coord(i) = e {
                out.push(*i);
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Sorted parameter names that occur in the expression.
    pub fn params_used(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                out.push(p.to_string());
            }
        });
        out.sort();
        out.dedup();
        out
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Sum(t) | Expr::Product(t) => t.iter().for_each(|e| e.visit(f)),
            Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Log(a) => {
                a.visit(f)
            }
            _ => {}
        }
    }

    /// Re-runs the simplifier bottom-up.
    pub fn simplify(&self) -> Expr {
        self.map_leaves(&|_| None)
    }

    /// Number of nodes; used to keep generated expressions bounded.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Displays with the given coordinate names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

/// Builds a simplified sum: flattens, folds constants, merges like terms.
pub fn sum(terms: Vec<Expr>) -> Expr {
    let mut constant = 0.0;
    // (coefficient, monomial-without-constant)
    let mut merged: Vec<(f64, Expr)> = Vec::new();
    let mut stack: Vec<Expr> = terms;
    stack.reverse();
    while let Some(t) = stack.pop() {
        match t {
            Expr::Const(c) => constant += c,
            Expr::Sum(inner) => stack.extend(inner.into_iter().rev()),
            other => {
                let (coef, rest) = split_coefficient(other);
                if let Some(slot) = merged.iter_mut().find(|(_, r)| *r == rest) {
                    slot.0 += coef;
                } else {
                    merged.push((coef, rest));
                }
            }
        }
    }
    let mut out: Vec<Expr> = merged
        .into_iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|(c, r)| {
            if c == 1.0 {
                r
            } else {
                product(vec![Expr::Const(c), r])
            }
        })
        .collect();
    if constant != 0.0 {
        out.push(Expr::Const(constant));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(out),
    }
}

fn split_coefficient(e: Expr) -> (f64, Expr) {
    match e {
        Expr::Product(mut factors) => {
            if let Some(Expr::Const(c)) = factors.first() {
                let c = *c;
                factors.remove(0);
                let rest = match factors.len() {
                    0 => Expr::one(),
                    1 => factors.pop().unwrap(),
                    _ => Expr::Product(factors),
                };
                (c, rest)
            } else {
                (1.0, Expr::Product(factors))
            }
        }
        other => (1.0, other),
    }
}

/// Builds a simplified product: flattens, folds constants, merges equal bases.
pub fn product(factors: Vec<Expr>) -> Expr {
    let mut constant = 1.0;
    let mut merged: Vec<(Expr, i32)> = Vec::new();
    let mut stack: Vec<Expr> = factors;
    stack.reverse();
    while let Some(f) = stack.pop() {
        match f {
            Expr::Const(c) => constant *= c,
            Expr::Product(inner) => stack.extend(inner.into_iter().rev()),
            other => {
                let (base, n) = match other {
                    Expr::Pow(b, n) => (*b, n),
                    b => (b, 1),
                };
                if let Some(slot) = merged.iter_mut().find(|(b, _)| *b == base) {
                    slot.1 += n;
                } else {
                    merged.push((base, n));
                }
            }
        }
    }
    if constant == 0.0 {
        return Expr::zero();
    }
    let mut out = Vec::with_capacity(merged.len() + 1);
    for (base, n) in merged {
        match simplify_pow(base, n) {
            Expr::Const(c) => constant *= c,
            e => out.push(e),
        }
    }
    if constant != 1.0 || out.is_empty() {
        out.insert(0, Expr::Const(constant));
    }
    match out.len() {
        1 => out.pop().unwrap(),
        _ => Expr::Product(out),
    }
}

fn simplify_pow(base: Expr, n: i32) -> Expr {
    match (base, n) {
        (_, 0) => Expr::one(),
        (b, 1) => b,
        (Expr::Const(c), n) if !(c == 0.0 && n < 0) => Expr::Const(c.powi(n)),
        (Expr::Pow(b, m), n) => simplify_pow(*b, m * n),
        (Expr::Product(fs), n) if n > 0 => product(fs.into_iter().map(|f| simplify_pow(f, n)).collect()),
        (b, n) => Expr::Pow(Box::new(b), n),
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        sum(vec![self, rhs])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sum(vec![self, -rhs])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        product(vec![self, rhs])
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        product(vec![self, simplify_pow(rhs, -1)])
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        product(vec![Expr::Const(-1.0), self])
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // precedence: 1 sum, 2 product, 3 power, 4 atom
        let own = match e {
            Expr::Sum(_) => 1,
            Expr::Product(_) => 2,
            Expr::Pow(..) => 3,
            Expr::Const(c) if *c < 0.0 => 1,
            _ => 4,
        };
        let paren = own < prec;
        if paren {
            write!(f, "(")?;
        }
        match e {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Coord(i) => match self.names.get(*i) {
                Some(n) => write!(f, "{n}")?,
                None => write!(f, "x{}", i + 1)?,
            },
            Expr::Param(p) => write!(f, "{p}")?,
            Expr::Sum(terms) => {
                for (k, t) in terms.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    self.write(t, 1, f)?;
                }
            }
            Expr::Product(fs) => {
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    self.write(t, 2, f)?;
                }
            }
            Expr::Pow(b, n) => {
                self.write(b, 4, f)?;
                if *n < 0 {
                    write!(f, "^({n})")?;
                } else {
                    write!(f, "^{n}")?;
                }
            }
            Expr::Sin(a) => self.func("sin", a, f)?,
            Expr::Cos(a) => self.func("cos", a, f)?,
            Expr::Exp(a) => self.func("exp", a, f)?,
            Expr::Log(a) => self.func("log", a, f)?,
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }

    fn func(&self, name: &str, a: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{name}(")?;
        self.write(a, 0, f)?;
        write!(f, ")")
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, 0, f)
    }
}
