use std::fmt;
use std::sync::Arc;

use super::expr::{product, sum, Expr};
use super::manifold::ChartManifold;
use crate::error::{Error, Result};
use crate::sampling::Region;

/// Absolute/relative tolerance used when sampling for periodicity and
/// fiber-constancy.
pub const SAMPLE_TOL: f64 = 1e-9;
/// Number of quasi-random points used to decide expression equality.
pub const EQUALITY_SAMPLES: usize = 50;

/// A vector field on a chart: one parameter-free expression per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    manifold: Arc<ChartManifold>,
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(manifold: Arc<ChartManifold>, components: Vec<Expr>) -> Result<Self> {
        let field = Self::new_unchecked(manifold, components)?;
        field.check_periodic()?;
        Ok(field)
    }

    /// Skips the periodicity sampling (used for fields derived from
    /// already-validated ones).
    pub(crate) fn new_unchecked(manifold: Arc<ChartManifold>, components: Vec<Expr>) -> Result<Self> {
        let n = manifold.dim();
        if components.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: components.len(),
            });
        }
        for c in &components {
            if let Some(p) = c.params_used().into_iter().next() {
                return Err(Error::UnboundParameter(p));
            }
            if let Some(&i) = c.coords_used().last() {
                if i >= n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: i + 1,
                    });
                }
            }
        }
        Ok(VectorField {
            manifold,
            components,
        })
    }

    /// Parses one expression per coordinate.
    pub fn parse(manifold: Arc<ChartManifold>, components: &[&str]) -> Result<Self> {
        let exprs = components
            .iter()
            .map(|s| manifold.parse(s, &[]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifold, exprs)
    }

    pub fn zero(manifold: Arc<ChartManifold>) -> Self {
        let n = manifold.dim();
        VectorField {
            manifold,
            components: vec![Expr::zero(); n],
        }
    }

    /// The coordinate field `∂/∂x_i`.
    pub fn coordinate(manifold: Arc<ChartManifold>, i: usize) -> Self {
        let mut components = vec![Expr::zero(); manifold.dim()];
        components[i] = Expr::one();
        VectorField {
            manifold,
            components,
        }
    }

    pub fn manifold(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_symbolically_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Value at `p` (circle coordinates wrapped first).
    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval_at(p)?;
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> VectorField {
        self.map(|e| Expr::Const(c) * e.clone())
    }

    /// Multiplies by a function.
    pub fn times(&self, f: &Expr) -> VectorField {
        self.map(|e| f.clone() * e.clone())
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        same_manifold(self, other)?;
        Ok(VectorField {
            manifold: self.manifold.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    /// `Σ c_i X_i`.
    pub fn linear_combination(manifold: &Arc<ChartManifold>, coeffs: &[f64], fields: &[VectorField]) -> Result<VectorField> {
        if coeffs.len() != fields.len() {
            return Err(Error::DimensionMismatch {
                expected: fields.len(),
                found: coeffs.len(),
            });
        }
        let n = manifold.dim();
        let mut comps = Vec::with_capacity(n);
        for k in 0..n {
            let terms = coeffs
                .iter()
                .zip(fields)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, f)| Expr::Const(*c) * f.components[k].clone())
                .collect();
            comps.push(sum(terms));
        }
        Ok(VectorField {
            manifold: manifold.clone(),
            components: comps,
        })
    }

    fn map(&self, f: impl Fn(&Expr) -> Expr) -> VectorField {
        VectorField {
            manifold: self.manifold.clone(),
            components: self.components.iter().map(f).collect(),
        }
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        sum(self
            .components
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| product(vec![c.clone(), f.diff_coord(j)]))
            .collect())
    }

    fn check_periodic(&self) -> Result<()> {
        let m = &self.manifold;
        let circles: Vec<(usize, f64)> = (0..m.dim()).filter_map(|i| m.period(i).map(|p| (i, p))).collect();
        if circles.is_empty() {
            return Ok(());
        }
        let pts = sample_box(m);
        for (i, period) in circles {
            for p in &pts {
                let mut q = p.clone();
                q[i] += period;
                for (k, c) in self.components.iter().enumerate() {
                    let (a, b) = match (c.eval_at(p), c.eval_at(&q)) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => continue,
                    };
                    if (a - b).abs() > SAMPLE_TOL * (1.0 + a.abs()) {
                        return Err(Error::NotPeriodic {
                            component: k,
                            coord: m.coord_names()[i].clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn display(&self) -> FieldDisplay<'_> {
        FieldDisplay(self)
    }
}

pub struct FieldDisplay<'a>(&'a VectorField);

impl fmt::Display for FieldDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.0.manifold.coord_names();
        let mut first = true;
        for (c, n) in self.0.components.iter().zip(names) {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.is_one() {
                write!(f, "d/d{n}")?;
            } else {
                write!(f, "({})*d/d{n}", c.display(names))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn same_manifold(a: &VectorField, b: &VectorField) -> Result<()> {
    if Arc::ptr_eq(&a.manifold, &b.manifold) || a.manifold == b.manifold {
        Ok(())
    } else {
        Err(Error::ManifoldMismatch(
            a.manifold.name().to_string(),
            b.manifold.name().to_string(),
        ))
    }
}

fn sample_box(m: &ChartManifold) -> Vec<Vec<f64>> {
    // Periodicity and fiber tests ignore the domain: expressions are global.
    let r = Region::default_for(m).with_samples(EQUALITY_SAMPLES);
    (1..=r.samples as u64)
        .map(|i| {
            crate::sampling::halton(i, m.dim())
                .iter()
                .zip(r.lo.iter().zip(&r.hi))
                .map(|(t, (a, b))| a + t * (b - a))
                .collect()
        })
        .collect()
}

/// `[X, Y]^k = X(Y^k) - Y(X^k)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    same_manifold(x, y)?;
    let components = x
        .components
        .iter()
        .zip(&y.components)
        .map(|(xk, yk)| x.apply(yk) - y.apply(xk))
        .collect();
    Ok(VectorField {
        manifold: x.manifold.clone(),
        components,
    })
}

/// Equality decided by agreement at quasi-random in-domain points.
pub fn sampled_equal(a: &Expr, b: &Expr, m: &ChartManifold, tol: f64) -> bool {
    let pts = match Region::default_for(m).with_samples(EQUALITY_SAMPLES).points(m) {
        Ok(p) => p,
        Err(_) => return a == b,
    };
    pts.iter().all(|p| match (a.eval_at(p), b.eval_at(p)) {
        (Ok(u), Ok(v)) => (u - v).abs() <= tol * (1.0 + u.abs().max(v.abs())),
        (Err(_), Err(_)) => true,
        _ => false,
    })
}

pub fn fields_sampled_equal(a: &VectorField, b: &VectorField, tol: f64) -> bool {
    a.manifold == b.manifold
        && a
            .components
            .iter()
            .zip(&b.components)
            .all(|(u, v)| sampled_equal(u, v, &a.manifold, tol))
}

/// A smooth map between charts, given by one expression per target coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothMap {
    source: Arc<ChartManifold>,
    target: Arc<ChartManifold>,
    components: Vec<Expr>,
    section: Vec<Expr>,
}

impl SmoothMap {
    /// `section` is a right inverse in target coordinates; when omitted and
    /// every component is a distinct source coordinate, the section putting
    /// the remaining coordinates at 0 is used.
    pub fn new(
        source: Arc<ChartManifold>,
        target: Arc<ChartManifold>,
        components: Vec<Expr>,
        section: Option<Vec<Expr>>,
    ) -> Result<Self> {
        if components.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: components.len(),
            });
        }
        for c in &components {
            if let Some(&i) = c.coords_used().last() {
                if i >= source.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: source.dim(),
                        found: i + 1,
                    });
                }
            }
        }
        let section = match section {
            Some(s) => {
                if s.len() != source.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: source.dim(),
                        found: s.len(),
                    });
                }
                s
            }
            None => coordinate_section(&components, source.dim()).ok_or(Error::MissingSection)?,
        };
        Ok(SmoothMap {
            source,
            target,
            components,
            section,
        })
    }

    pub fn source(&self) -> &Arc<ChartManifold> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ChartManifold> {
        &self.target
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn section(&self) -> &[Expr] {
        &self.section
    }

    /// Image point, normalized on the target.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        let q = self.source.normalize(p);
        let mut out = self
            .components
            .iter()
            .map(|c| c.eval_at(&q))
            .collect::<Result<Vec<_>>>()?;
        self.target.normalize_in_place(&mut out);
        Ok(out)
    }

    pub fn apply_section(&self, m: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.section.iter().map(|c| c.eval_at(m)).collect::<Result<Vec<_>>>()?;
        self.source.normalize_in_place(&mut out);
        Ok(out)
    }

    /// `dF(X)` as expressions in source coordinates.
    pub fn differential(&self, x: &VectorField) -> Vec<Expr> {
        self.components.iter().map(|f| x.apply(f)).collect()
    }

    /// Jacobian `∂F^a/∂x_j` at `p`.
    pub fn jacobian(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.components
            .iter()
            .map(|f| (0..self.source.dim()).map(|j| f.diff_coord(j).eval_at(p)).collect())
            .collect()
    }
}

fn coordinate_section(components: &[Expr], n: usize) -> Option<Vec<Expr>> {
    let mut section = vec![Expr::zero(); n];
    let mut seen = vec![false; n];
    for (a, c) in components.iter().enumerate() {
        match c {
            Expr::Coord(j) if !seen[*j] => {
                seen[*j] = true;
                section[*j] = Expr::Coord(a);
            }
            _ => return None,
        }
    }
    Some(section)
}

/// Outcome of pushing a vector field forward along a smooth map.
#[derive(Debug, Clone, PartialEq)]
pub enum Pushforward {
    Projected(VectorField),
    NotProjectable { witness: Vec<f64>, deviation: f64 },
}

impl Pushforward {
    pub fn projected(self) -> Option<VectorField> {
        match self {
            Pushforward::Projected(v) => Some(v),
            Pushforward::NotProjectable { .. } => None,
        }
    }
}

/// Pushes `x` forward along `map` when `dF(X)` is constant along fibers.
pub fn pushforward_field(x: &VectorField, map: &SmoothMap) -> Result<Pushforward> {
    if x.dim() != map.source.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.source.dim(),
            found: x.dim(),
        });
    }
    let image = map.differential(x);
    let fiber_coords: Vec<usize> = map
        .section
        .iter()
        .enumerate()
        .filter(|(_, s)| !matches!(s, Expr::Coord(_)))
        .map(|(j, _)| j)
        .collect();
    // Candidate expressed on the target: dF(X) restricted to the section.
    let candidate: Vec<Expr> = image.iter().map(|e| e.substitute_coords(&map.section)).collect();
    let symbolic_ok = image
        .iter()
        .all(|e| e.coords_used().iter().all(|j| !fiber_coords.contains(j)));
    let pts = map
        .source
        .has_domain()
        .then(|| Region::default_for(&map.source).with_samples(EQUALITY_SAMPLES).points(&map.source).ok())
        .flatten()
        .unwrap_or_else(|| sample_box(&map.source));
    let mut worst = (0.0f64, Vec::new());
    for p in &pts {
        let m = map.apply(p)?;
        for (img, cand) in image.iter().zip(&candidate) {
            let (u, v) = match (img.eval_at(p), cand.eval_at(&m)) {
                (Ok(u), Ok(v)) => (u, v),
                (Err(_), Err(_)) => continue,
                _ => (0.0, f64::INFINITY),
            };
            let dev = (u - v).abs() / (1.0 + u.abs());
            if dev > worst.0 {
                worst = (dev, p.clone());
            }
        }
    }
    if worst.0 > 1e-8 || (!symbolic_ok && worst.0 > SAMPLE_TOL) {
        return Ok(Pushforward::NotProjectable {
            witness: worst.1,
            deviation: worst.0,
        });
    }
    let field = VectorField::new(map.target.clone(), candidate.into_iter().map(|e| e.simplify()).collect())?;
    Ok(Pushforward::Projected(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::Coordinate;
    use std::f64::consts::PI;

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(
            ChartManifold::new(
                "cyl",
                vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")],
            )
            .unwrap(),
        )
    }

    fn line() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::euclidean("R", &["y"]))
    }

    #[test]
    fn bracket_of_field_with_itself_vanishes() {
        let m = cylinder();
        let x = VectorField::parse(m, &["1", "y"]).unwrap();
        assert!(lie_bracket(&x, &x).unwrap().is_symbolically_zero());
    }

    #[test]
    fn bracket_dx_with_x_dx() {
        let m = Arc::new(ChartManifold::euclidean("R", &["x"]));
        let a = VectorField::parse(m.clone(), &["1"]).unwrap();
        let b = VectorField::parse(m.clone(), &["x"]).unwrap();
        let c = lie_bracket(&a, &b).unwrap();
        assert!(fields_sampled_equal(&c, &VectorField::coordinate(m, 0), 1e-9));
    }

    #[test]
    fn bracket_cancels_on_cylinder() {
        let m = cylinder();
        let a = VectorField::parse(m.clone(), &["1", "y"]).unwrap();
        let b = VectorField::parse(m, &["0", "y"]).unwrap();
        assert!(lie_bracket(&a, &b).unwrap().is_symbolically_zero());
    }

    #[test]
    fn mismatched_manifolds_rejected() {
        let a = VectorField::parse(cylinder(), &["1", "0"]).unwrap();
        let b = VectorField::parse(Arc::new(ChartManifold::euclidean("R2", &["x", "y"])), &["1", "0"]).unwrap();
        assert!(matches!(lie_bracket(&a, &b), Err(Error::ManifoldMismatch(..))));
    }

    #[test]
    fn non_periodic_component_rejected() {
        let err = VectorField::parse(cylinder(), &["theta", "0"]).unwrap_err();
        assert!(matches!(err, Error::NotPeriodic { component: 0, .. }));
        assert!(VectorField::parse(cylinder(), &["sin(theta)", "cos(2*theta)"]).is_ok());
    }

    #[test]
    fn pushforward_examples() {
        let p = cylinder();
        let second = SmoothMap::new(p.clone(), line(), vec![Expr::coord(1)], None).unwrap();
        let x = VectorField::parse(p.clone(), &["1", "y"]).unwrap();
        let img = pushforward_field(&x, &second).unwrap().projected().unwrap();
        assert!(fields_sampled_equal(&img, &VectorField::parse(line(), &["y"]).unwrap(), 1e-9));

        let circle = Arc::new(ChartManifold::new("S1", vec![Coordinate::circle("theta", 2.0 * PI)]).unwrap());
        let first = SmoothMap::new(p.clone(), circle, vec![Expr::coord(0)], None).unwrap();
        let twisted = VectorField::parse(p.clone(), &["y", "0"]).unwrap();
        assert!(matches!(
            pushforward_field(&twisted, &first).unwrap(),
            Pushforward::NotProjectable { .. }
        ));

        let vertical = VectorField::parse(p, &["0", "1"]).unwrap();
        let img = pushforward_field(&vertical, &first).unwrap().projected().unwrap();
        assert!(img.is_symbolically_zero());
    }

    #[test]
    fn pushforward_dimension_mismatch() {
        let map = SmoothMap::new(cylinder(), line(), vec![Expr::coord(1)], None).unwrap();
        let x = VectorField::parse(line(), &["1"]).unwrap();
        assert!(matches!(pushforward_field(&x, &map), Err(Error::DimensionMismatch { .. })));
    }
}
