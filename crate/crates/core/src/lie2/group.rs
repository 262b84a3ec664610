//! Lie groups given by multiplication, inverse and exponential expressions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::report::Assertion;
use crate::sampling::halton;
use crate::symcore::{ChartManifold, CoordKind, Coordinate, Expr};

/// Tolerance for the sampled group axioms.
pub const GROUP_AXIOM_TOL: f64 = 1e-9;
pub const GROUP_AXIOM_SAMPLES: usize = 100;

/// A Lie group on a single chart.
///
/// `mult` is written in `2d` coordinates (the first factor's parameters,
/// then the second's); `exp` in Lie-algebra coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LieGroupModel {
    name: String,
    manifold: Arc<ChartManifold>,
    mult: Vec<Expr>,
    inverse: Vec<Expr>,
    unit: Vec<f64>,
    exp: Vec<Expr>,
    abelian: bool,
}

impl LieGroupModel {
    /// `(R^n, +)`.
    pub fn real_vector(n: usize) -> Self {
        let names: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let m = ChartManifold::euclidean(&format!("R^{n}"), &refs);
        Self::additive(format!("R^{n}"), m)
    }

    /// `U(1)` as the circle of the given period, written additively.
    pub fn circle(period: f64) -> Result<Self> {
        let m = ChartManifold::new("U(1)", vec![Coordinate::circle("a", period)])?;
        Ok(Self::additive("U(1)".into(), m))
    }

    /// The one-point group.
    pub fn trivial() -> Self {
        let m = ChartManifold::new("1", Vec::new()).expect("empty chart");
        Self::additive("1".into(), m)
    }

    fn additive(name: String, m: ChartManifold) -> Self {
        let d = m.dim();
        LieGroupModel {
            name,
            mult: (0..d).map(|i| Expr::coord(i) + Expr::coord(i + d)).collect(),
            inverse: (0..d).map(|i| -Expr::coord(i)).collect(),
            unit: vec![0.0; d],
            exp: (0..d).map(Expr::coord).collect(),
            manifold: Arc::new(m),
            abelian: true,
        }
    }

    /// A group from user expressions; the axioms are sampled before acceptance.
    pub fn generic(
        name: &str,
        manifold: Arc<ChartManifold>,
        mult: Vec<Expr>,
        inverse: Vec<Expr>,
        unit: Vec<f64>,
        exp: Vec<Expr>,
    ) -> Result<Self> {
        let d = manifold.dim();
        for (what, len) in [("mult", mult.len()), ("inverse", inverse.len()), ("unit", unit.len()), ("exp", exp.len())] {
            if len != d {
                return Err(Error::Precondition(format!("group `{name}`: {what} has {len} components, expected {d}")));
            }
        }
        let mut g = LieGroupModel {
            name: name.to_string(),
            manifold,
            mult,
            inverse,
            unit,
            exp,
            abelian: false,
        };
        let report = g.axiom_check(GROUP_AXIOM_SAMPLES);
        if let Some(bad) = report.iter().find(|a| !a.passed) {
            return Err(Error::Axiom(format!("{}: {}", bad.name, bad.witnesses.join("; "))));
        }
        g.abelian = g.sample_elements(20).windows(2).all(|w| {
            let ab = g.mul(&w[0], &w[1]);
            let ba = g.mul(&w[1], &w[0]);
            matches!((ab, ba), (Ok(x), Ok(y)) if g.distance(&x, &y) < GROUP_AXIOM_TOL)
        });
        Ok(g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn manifold(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    pub fn is_abelian(&self) -> bool {
        self.abelian
    }

    /// Multiplication in `2d` coordinates.
    pub fn mult_exprs(&self) -> &[Expr] {
        &self.mult
    }

    pub fn exp_exprs(&self) -> &[Expr] {
        &self.exp
    }

    pub fn inverse_exprs(&self) -> &[Expr] {
        &self.inverse
    }

    /// `g h g⁻¹` in `2d` coordinates (`g` first).
    pub fn conj_exprs(&self) -> Vec<Expr> {
        let subs: Vec<Expr> = self.mult.iter().chain(&self.inverse).cloned().collect();
        self.mult.iter().map(|c| c.substitute_coords(&subs).simplify()).collect()
    }

    pub fn mul(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let ab: Vec<f64> = a.iter().chain(b).copied().collect();
        self.eval_all(&self.mult, &ab)
    }

    pub fn inv(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.eval_all(&self.inverse, a)
    }

    pub fn exp(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_all(&self.exp, x)
    }

    /// `g h g⁻¹`.
    pub fn conj(&self, g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.mul(&self.mul(g, h)?, &self.inv(g)?)
    }

    /// Lie-algebra coordinates `x` with `exp(x) = g`, by Newton iteration
    /// from the origin.
    pub fn log(&self, g: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        for _ in 0..100 {
            let e = self.exp(&x)?;
            let r = self.manifold.displacement(&e, g);
            if linalg::norm(&r) < 1e-13 {
                return Ok(x);
            }
            let jac: Vec<Vec<f64>> = (0..d)
                .map(|j| self.exp[..].iter().map(|c| c.diff_coord(j).eval_at(&x)).collect::<Result<Vec<f64>>>())
                .collect::<Result<_>>()?;
            let (dx, _) = linalg::least_squares(&jac, &r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        let e = self.exp(&x)?;
        let r = linalg::norm(&self.manifold.displacement(&e, g));
        if r < 1e-9 {
            Ok(x)
        } else {
            Err(Error::Residual { residual: r, tolerance: 1e-9 })
        }
    }

    /// Differential of `exp` at the origin, as rows `∂exp^i/∂x_j`.
    pub fn dexp_at_zero(&self) -> Result<Vec<Vec<f64>>> {
        let zero = vec![0.0; self.dim()];
        self.exp
            .iter()
            .map(|c| (0..self.dim()).map(|j| c.diff_coord(j).eval_at(&zero)).collect())
            .collect()
    }

    pub fn normalize(&self, g: &[f64]) -> Vec<f64> {
        self.manifold.normalize(g)
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.manifold.distance(a, b)
    }

    /// Deterministic elements: Halton points of `[-2,2]` per line coordinate
    /// and of a full period per circle coordinate.
    pub fn sample_elements(&self, n: usize) -> Vec<Vec<f64>> {
        (1..=n as u64)
            .map(|i| {
                halton(i + 7, self.dim())
                    .iter()
                    .zip(self.manifold.coords())
                    .map(|(u, c)| match c.kind {
                        CoordKind::Line => 4.0 * u - 2.0,
                        CoordKind::Circle { period } => period * u,
                    })
                    .collect()
            })
            .collect()
    }

    /// Associativity, unit and inverse laws plus `exp(0) = e`.
    pub fn axiom_check(&self, samples: usize) -> Vec<Assertion> {
        let els = self.sample_elements(samples + 2);
        let mut assoc = Assertion::new(format!("{}: associativity", self.name), GROUP_AXIOM_TOL);
        let mut unit = Assertion::new(format!("{}: unit", self.name), GROUP_AXIOM_TOL);
        let mut inv = Assertion::new(format!("{}: inverse", self.name), GROUP_AXIOM_TOL);
        let e = self.unit.clone();
        for t in els.windows(3).take(samples) {
            let (a, b, c) = (&t[0], &t[1], &t[2]);
            match (|| -> Result<(f64, f64, f64)> {
                let l = self.mul(&self.mul(a, b)?, c)?;
                let r = self.mul(a, &self.mul(b, c)?)?;
                let u = self.distance(&self.mul(a, &e)?, a).max(self.distance(&self.mul(&e, a)?, a));
                let ai = self.inv(a)?;
                let i = self.distance(&self.mul(a, &ai)?, &e).max(self.distance(&self.mul(&ai, a)?, &e));
                Ok((self.distance(&l, &r), u, i))
            })() {
                Ok((dl, du, di)) => {
                    assoc.observe(dl, || format!("{a:?} {b:?} {c:?}"));
                    unit.observe(du, || format!("{a:?}"));
                    inv.observe(di, || format!("{a:?}"));
                }
                Err(err) => assoc.error(&err),
            }
        }
        let mut exp0 = Assertion::new(format!("{}: exp(0) = e", self.name), GROUP_AXIOM_TOL);
        match self.exp(&vec![0.0; self.dim()]) {
            Ok(z) => exp0.observe(self.distance(&z, &e), || format!("{z:?}")),
            Err(err) => exp0.error(&err),
        }
        vec![assoc, unit, inv, exp0]
    }

    fn eval_all(&self, exprs: &[Expr], at: &[f64]) -> Result<Vec<f64>> {
        let mut out = exprs.iter().map(|c| c.eval_at(at)).collect::<Result<Vec<_>>>()?;
        self.manifold.normalize_in_place(&mut out);
        Ok(out)
    }
}

/// The default circle group of period `2π`.
pub fn u1() -> LieGroupModel {
    LieGroupModel::circle(2.0 * PI).expect("positive period")
}
