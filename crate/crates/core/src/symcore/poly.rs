//! Dense-enough multivariate polynomials for Taylor-coefficient linear algebra.

use std::collections::BTreeMap;

use super::expr::Expr;

/// Exponent vector -> coefficient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, 1.0);
        p
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            *out.terms.entry(e.clone()).or_insert(0.0) += c;
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn powi(&self, n: u32) -> Poly {
        let mut out = Poly::constant(self.nvars, 1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Converts a parameter-free expression that is polynomial in the
    /// coordinates; `None` for anything else.
    pub fn from_expr(e: &Expr, nvars: usize) -> Option<Poly> {
        Some(match e {
            Expr::Const(c) => Poly::constant(nvars, *c),
            Expr::Coord(i) if *i < nvars => Poly::var(nvars, *i),
            Expr::Sum(ts) => {
                let mut acc = Poly::zero(nvars);
                for t in ts {
                    acc = acc.add(&Poly::from_expr(t, nvars)?);
                }
                acc
            }
            Expr::Product(fs) => {
                let mut acc = Poly::constant(nvars, 1.0);
                for f in fs {
                    acc = acc.mul(&Poly::from_expr(f, nvars)?);
                }
                acc
            }
            Expr::Pow(b, n) if *n >= 0 => Poly::from_expr(b, nvars)?.powi(*n as u32),
            _ => return None,
        })
    }

    /// Re-expands around `p`: the result `q` satisfies `q(u) = self(p + u)`.
    pub fn shift(&self, p: &[f64]) -> Poly {
        let shifted: Vec<Poly> = (0..self.nvars)
            .map(|i| Poly::var(self.nvars, i).add(&Poly::constant(self.nvars, p[i])))
            .collect();
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(self.nvars, *c);
            for (i, k) in e.iter().enumerate() {
                if *k > 0 {
                    term = term.mul(&shifted[i].powi(*k));
                }
            }
            out = out.add(&term);
        }
        out
    }
}

/// All exponent vectors in `nvars` variables of total degree `<= deg`,
/// in a fixed order.
pub fn monomials(nvars: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; nvars];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, deg, &mut cur, &mut out);
    out
}
