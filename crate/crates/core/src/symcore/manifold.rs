use serde::Serialize;

use super::expr::Expr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CoordKind {
    Line,
    Circle { period: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coordinate {
    pub name: String,
    pub kind: CoordKind,
}

impl Coordinate {
    pub fn line(name: &str) -> Self {
        Coordinate {
            name: name.to_string(),
            kind: CoordKind::Line,
        }
    }

    pub fn circle(name: &str, period: f64) -> Self {
        Coordinate {
            name: name.to_string(),
            kind: CoordKind::Circle { period },
        }
    }
}

/// A single coordinate chart: products of lines and circles, cut down by an
/// open domain `{ p : f_i(p) > 0 for all i }`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartManifold {
    name: String,
    coords: Vec<Coordinate>,
    domain: Vec<Expr>,
    coord_names: Vec<String>,
}

impl ChartManifold {
    pub fn new(name: &str, coords: Vec<Coordinate>) -> Result<Self> {
        for c in &coords {
            if let CoordKind::Circle { period } = c.kind {
                if !(period > 0.0 && period.is_finite()) {
                    return Err(Error::Precondition(format!(
                        "circle coordinate `{}` needs a positive period",
                        c.name
                    )));
                }
            }
        }
        let coord_names = coords.iter().map(|c| c.name.clone()).collect();
        Ok(ChartManifold {
            name: name.to_string(),
            coords,
            domain: Vec::new(),
            coord_names,
        })
    }

    /// Euclidean space with coordinates named `names`.
    pub fn euclidean(name: &str, names: &[&str]) -> Self {
        Self::new(name, names.iter().map(|n| Coordinate::line(n)).collect())
            .expect("line coordinates are always valid")
    }

    /// Adds strict-inequality domain predicates (parameter-free).
    pub fn with_domain(mut self, predicates: Vec<Expr>) -> Result<Self> {
        for p in &predicates {
            if let Some(name) = p.params_used().into_iter().next() {
                return Err(Error::UnboundParameter(name));
            }
            if let Some(&i) = p.coords_used().last() {
                if i >= self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        found: i + 1,
                    });
                }
            }
        }
        self.domain = predicates;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn domain(&self) -> &[Expr] {
        &self.domain
    }

    pub fn has_domain(&self) -> bool {
        !self.domain.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.coord_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn period(&self, i: usize) -> Option<f64> {
        match self.coords.get(i)?.kind {
            CoordKind::Circle { period } => Some(period),
            CoordKind::Line => None,
        }
    }

    /// Wraps circle coordinates into `[0, period)`.
    pub fn normalize(&self, p: &[f64]) -> Vec<f64> {
        let mut q = p.to_vec();
        self.normalize_in_place(&mut q);
        q
    }

    pub fn normalize_in_place(&self, p: &mut [f64]) {
        for (x, c) in p.iter_mut().zip(&self.coords) {
            if let CoordKind::Circle { period } = c.kind {
                *x = x.rem_euclid(period);
                if *x >= period {
                    *x = 0.0;
                }
            }
        }
    }

    /// Smallest value among the domain predicates (`+inf` without a domain).
    /// Evaluation failures count as `-inf`, i.e. outside.
    pub fn domain_margin(&self, p: &[f64]) -> f64 {
        let q = self.normalize(p);
        let mut m = f64::INFINITY;
        for pred in &self.domain {
            match pred.eval_at(&q) {
                Ok(v) if v.is_finite() => m = m.min(v),
                _ => return f64::NEG_INFINITY,
            }
        }
        m
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().all(|x| x.is_finite()) && self.domain_margin(p) > 0.0
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        if !self.in_domain(p) {
            return Err(Error::OutOfDomain {
                manifold: self.name.clone(),
                point: p.to_vec(),
            });
        }
        Ok(())
    }

    /// `b - a`, with circle components taken as the shortest signed arc.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.coords)
            .map(|((x, y), c)| match c.kind {
                CoordKind::Line => y - x,
                CoordKind::Circle { period } => {
                    let d = (y - x).rem_euclid(period);
                    if d > period / 2.0 {
                        d - period
                    } else {
                        d
                    }
                }
            })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Evaluates `e` at the point after domain and wrapping checks.
    pub fn eval(&self, e: &Expr, p: &[f64], params: &super::Params) -> Result<f64> {
        self.check_point(p)?;
        e.eval(&self.normalize(p), params)
    }

    /// Partial derivative by coordinate or parameter name.
    pub fn diff(&self, e: &Expr, name: &str) -> Result<Expr> {
        if let Ok(i) = self.index_of(name) {
            return Ok(e.diff_coord(i));
        }
        if e.params_used().iter().any(|p| p == name) {
            return Ok(e.diff_param(name));
        }
        Err(Error::UnknownName(name.to_string()))
    }

    pub fn parse(&self, src: &str, params: &[String]) -> Result<Expr> {
        super::parse::parse_expr(src, &self.coord_names, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cylinder() -> ChartManifold {
        ChartManifold::new(
            "cyl",
            vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")],
        )
        .unwrap()
    }

    #[test]
    fn circles_wrap_into_fundamental_domain() {
        let m = cylinder();
        let q = m.normalize(&[-0.5, 3.0]);
        assert!((q[0] - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert_eq!(q[1], 3.0);
        assert!((m.distance(&[0.1, 0.0], &[2.0 * PI - 0.1, 0.0]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn boundary_points_are_outside() {
        let m = ChartManifold::euclidean("half", &["x"])
            .with_domain(vec![Expr::coord(0)])
            .unwrap();
        assert!(m.in_domain(&[0.5]));
        assert!(!m.in_domain(&[0.0]));
        let err = m.eval(&Expr::coord(0), &[0.0], &Default::default());
        assert!(matches!(err, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn eval_sin_at_half_pi() {
        let m = cylinder();
        let e = m.parse("sin(theta)", &[]).unwrap();
        let v = m.eval(&e, &[PI / 2.0, 0.0], &Default::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let e = m.parse("y*exp(theta)", &[]).unwrap();
        assert_eq!(m.eval(&e, &[0.0, 2.0], &Default::default()).unwrap(), 2.0);
    }

    #[test]
    fn diff_by_name() {
        let m = cylinder();
        let e = m.parse("sin(theta) + y^2", &[]).unwrap();
        let d = m.diff(&e, "y").unwrap();
        assert_eq!(d.eval_at(&[0.3, 1.5]).unwrap(), 3.0);
        assert_eq!(m.diff(&e, "z"), Err(Error::UnknownName("z".into())));
    }
}
