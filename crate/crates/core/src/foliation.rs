//! Finitely generated modules of vector fields.
//!
//! Module membership is only ever tested pointwise: a field passes when its
//! value lies in the span of the generator values at every sampled point.
//! This is necessary for membership in the module and is the surrogate used
//! for the global hull throughout the crate.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::Region;
use crate::symcore::poly::{monomials, Poly};
use crate::symcore::{lie_bracket, ChartManifold, VectorField};

/// Residual threshold factor: `residual < MEMBERSHIP_TOL * (1 + |X(p)|)`.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct FoliationModule {
    manifold: Arc<ChartManifold>,
    generators: Vec<(String, VectorField)>,
}

impl FoliationModule {
    pub fn new(manifold: Arc<ChartManifold>, generators: Vec<(String, VectorField)>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Precondition(
                "a foliation needs at least one generator; use FoliationModule::zero".into(),
            ));
        }
        for (name, g) in &generators {
            if **g.manifold() != *manifold {
                return Err(Error::ManifoldMismatch(
                    name.clone(),
                    manifold.name().to_string(),
                ));
            }
        }
        Ok(FoliationModule {
            manifold,
            generators,
        })
    }

    /// Generators named `X1, X2, ...`.
    pub fn from_fields(manifold: Arc<ChartManifold>, fields: Vec<VectorField>) -> Result<Self> {
        let named = fields
            .into_iter()
            .enumerate()
            .map(|(i, f)| (format!("X{}", i + 1), f))
            .collect();
        Self::new(manifold, named)
    }

    /// The zero module (every leaf is a point).
    pub fn zero(manifold: Arc<ChartManifold>) -> Self {
        FoliationModule {
            manifold,
            generators: Vec::new(),
        }
    }

    /// The full foliation generated by the coordinate fields.
    pub fn full(manifold: Arc<ChartManifold>) -> Self {
        let generators = (0..manifold.dim())
            .map(|i| {
                (
                    format!("d{}", manifold.coord_names()[i]),
                    VectorField::coordinate(manifold.clone(), i),
                )
            })
            .collect();
        FoliationModule {
            manifold,
            generators,
        }
    }

    pub fn manifold(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    pub fn generators(&self) -> &[(String, VectorField)] {
        &self.generators
    }

    pub fn fields(&self) -> Vec<VectorField> {
        self.generators.iter().map(|(_, f)| f.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generator(&self, name: &str) -> Result<&VectorField> {
        self.generators
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    /// The module generated by both generator lists.
    pub fn union(&self, extra: &[(String, VectorField)]) -> Result<FoliationModule> {
        let mut generators = self.generators.clone();
        generators.extend(extra.iter().cloned());
        if generators.is_empty() {
            return Ok(FoliationModule::zero(self.manifold.clone()));
        }
        FoliationModule::new(self.manifold.clone(), generators)
    }

    /// Generator values at `p`, one row per generator.
    pub fn values_at(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.generators.iter().map(|(_, g)| g.eval(p)).collect()
    }

    /// Dimension of the tangent space `F_p = { X(p) : X ∈ F }`.
    pub fn tangent_dim(&self, p: &[f64]) -> Result<usize> {
        self.manifold.check_point(p)?;
        Ok(linalg::rank(&self.values_at(p)?))
    }

    /// Dimension of the fiber `F / I_p F`.
    ///
    /// With polynomial coefficients, this is `k` minus the dimension of the
    /// space of values at `p` of polynomial syzygies `Σ s_i X_i = 0`, searched
    /// with `deg s_i <= max deg + 1`. Otherwise the tangent dimension is
    /// returned and flagged as a lower bound.
    pub fn fiber_dim(&self, p: &[f64]) -> Result<FiberDim> {
        let k = self.generators.len();
        Ok(match self.syzygy_values(p)? {
            Some(values) => FiberDim {
                value: k - linalg::rank(&values),
                exact: true,
            },
            None => FiberDim {
                value: self.tangent_dim(p)?,
                exact: false,
            },
        })
    }

    /// Indices of generators whose classes form a basis of the fiber at `p`,
    /// chosen greedily in generator order.
    pub fn fiber_basis(&self, p: &[f64]) -> Result<(Vec<usize>, bool)> {
        let k = self.generators.len();
        let (mut rows, exact) = match self.syzygy_values(p)? {
            Some(v) => (v, true),
            None => {
                // Without syzygies, fall back to pointwise independence.
                let vals = self.values_at(p)?;
                let mut chosen: Vec<Vec<f64>> = Vec::new();
                let mut idx = Vec::new();
                for (i, v) in vals.into_iter().enumerate() {
                    chosen.push(v);
                    if linalg::rank(&chosen) == chosen.len() {
                        idx.push(i);
                    } else {
                        chosen.pop();
                    }
                }
                return Ok((idx, false));
            }
        };
        let mut idx = Vec::new();
        let mut r = linalg::rank(&rows);
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            rows.push(e);
            let r2 = linalg::rank(&rows);
            if r2 > r {
                idx.push(i);
                r = r2;
            } else {
                rows.pop();
            }
        }
        Ok((idx, exact))
    }

    /// Values at `p` of polynomial syzygies `Σ s_i X_i = 0` with
    /// `deg s_i <= max deg + 1`; `None` for non-polynomial coefficients.
    fn syzygy_values(&self, p: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        self.manifold.check_point(p)?;
        let n = self.manifold.dim();
        let k = self.generators.len();
        if k == 0 {
            return Ok(Some(Vec::new()));
        }
        let q = self.manifold.normalize(p);
        let mut polys: Vec<Vec<Poly>> = Vec::with_capacity(k);
        for (_, g) in &self.generators {
            let mut comps = Vec::with_capacity(n);
            for c in g.components() {
                match Poly::from_expr(c, n) {
                    Some(poly) => comps.push(poly.shift(&q)),
                    None => return Ok(None),
                }
            }
            polys.push(comps);
        }
        let deg = polys.iter().flatten().map(Poly::degree).max().unwrap_or(0);
        let syz_deg = deg + 1;
        let unknown_monos = monomials(n, syz_deg);
        let eq_monos = monomials(n, syz_deg + deg);
        let m = unknown_monos.len();
        let mut a = DMatrix::<f64>::zeros(n * eq_monos.len(), k * m);
        for comp in 0..n {
            for (row, beta) in eq_monos.iter().enumerate() {
                for i in 0..k {
                    for (col, alpha) in unknown_monos.iter().enumerate() {
                        if alpha.iter().zip(beta).any(|(x, y)| x > y) {
                            continue;
                        }
                        let gamma: Vec<u32> = beta.iter().zip(alpha).map(|(b, a)| b - a).collect();
                        let c = polys[i][comp].coeff(&gamma);
                        if c != 0.0 {
                            a[(comp * eq_monos.len() + row, i * m + col)] = c;
                        }
                    }
                }
            }
        }
        let kernel = linalg::null_space(&a);
        let const_col = unknown_monos
            .iter()
            .position(|e| e.iter().all(|x| *x == 0))
            .expect("constant monomial present");
        Ok(Some(
            kernel
                .iter()
                .map(|v| (0..k).map(|i| v[i * m + const_col]).collect())
                .collect(),
        ))
    }

    /// Tests `X(p) ∈ span{X_i(p)}` at every sample point of `region`.
    pub fn pointwise_membership(&self, x: &VectorField, region: &Region) -> Result<Membership> {
        let pts = region.points(&self.manifold)?;
        let mut report = Membership {
            member: true,
            worst_residual: 0.0,
            witness: None,
            label: "pointwise",
        };
        for p in &pts {
            let cols = self.values_at(p)?;
            let b = x.eval(p)?;
            let (_, r) = linalg::least_squares(&cols, &b);
            let scaled = r / (1.0 + linalg::norm(&b));
            if scaled > report.worst_residual {
                report.worst_residual = scaled;
                if scaled >= MEMBERSHIP_TOL {
                    report.witness = Some(p.clone());
                }
            }
            if scaled >= MEMBERSHIP_TOL {
                report.member = false;
            }
        }
        Ok(report)
    }

    /// Surrogate for `X ∈ F̂` (global hull): pointwise span containment.
    pub fn hull_membership(&self, x: &VectorField, region: &Region) -> Result<bool> {
        Ok(self.pointwise_membership(x, region)?.member)
    }

    /// Checks that every bracket of generators lies pointwise in the module.
    pub fn involutivity_check(&self, region: &Region) -> Result<InvolutivityReport> {
        let mut failures = Vec::new();
        for i in 0..self.generators.len() {
            for j in (i + 1)..self.generators.len() {
                let b = lie_bracket(&self.generators[i].1, &self.generators[j].1)?;
                let m = self.pointwise_membership(&b, region)?;
                if !m.member {
                    failures.push(BracketFailure {
                        pair: (self.generators[i].0.clone(), self.generators[j].0.clone()),
                        residual: m.worst_residual,
                        witness: m.witness.unwrap_or_default(),
                    });
                }
            }
        }
        Ok(InvolutivityReport {
            passed: failures.is_empty(),
            failures,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FiberDim {
    pub value: usize,
    /// `false` when only the tangent-dimension lower bound is available.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub worst_residual: f64,
    pub witness: Option<Vec<f64>>,
    pub label: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketFailure {
    pub pair: (String, String),
    pub residual: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvolutivityReport {
    pub passed: bool,
    pub failures: Vec<BracketFailure>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::Coordinate;
    use std::f64::consts::PI;

    fn line() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::euclidean("R", &["y"]))
    }

    fn plane() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::euclidean("R2", &["x", "y"]))
    }

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(
            ChartManifold::new(
                "cyl",
                vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")],
            )
            .unwrap(),
        )
    }

    fn module(m: Arc<ChartManifold>, gens: &[&[&str]]) -> FoliationModule {
        let fields = gens
            .iter()
            .map(|g| VectorField::parse(m.clone(), g).unwrap())
            .collect();
        FoliationModule::from_fields(m, fields).unwrap()
    }

    #[test]
    fn tangent_dim_of_y_dy() {
        let f = module(line(), &[&["y"]]);
        assert_eq!(f.tangent_dim(&[0.0]).unwrap(), 0);
        assert_eq!(f.tangent_dim(&[1.0]).unwrap(), 1);
        let f = module(cylinder(), &[&["1", "y"]]);
        for p in [[0.0, 0.0], [1.0, -2.0], [6.0, 3.0]] {
            assert_eq!(f.tangent_dim(&p).unwrap(), 1);
        }
    }

    #[test]
    fn fiber_dim_examples() {
        let f = module(line(), &[&["y"]]);
        assert_eq!(f.fiber_dim(&[0.0]).unwrap(), FiberDim { value: 1, exact: true });
        assert_eq!(f.fiber_dim(&[1.0]).unwrap(), FiberDim { value: 1, exact: true });
        let f = module(plane(), &[&["1", "0"]]);
        assert_eq!(f.fiber_dim(&[0.3, -0.7]).unwrap().value, 1);
        // redundant generator at a regular point: x*d/dx and d/dx
        let f = module(line(), &[&["1"], &["y"]]);
        assert_eq!(f.fiber_dim(&[0.5]).unwrap().value, 1);
        // pullback foliation on the cylinder jumps at y = 0
        let f = module(cylinder(), &[&["1", "0"], &["0", "y"]]);
        assert_eq!(f.fiber_dim(&[0.0, 0.0]).unwrap().value, 2);
        assert_eq!(f.fiber_dim(&[0.0, 1.0]).unwrap().value, 2);
        assert_eq!(f.tangent_dim(&[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn fiber_basis_skips_redundant_generators() {
        let f = module(line(), &[&["1"], &["y"]]);
        assert_eq!(f.fiber_basis(&[0.5]).unwrap(), (vec![0], true));
        let f = module(line(), &[&["y"], &["y^2"]]);
        assert_eq!(f.fiber_basis(&[0.0]).unwrap(), (vec![0], true));
        let f = module(cylinder(), &[&["1", "0"], &["0", "y"]]);
        assert_eq!(f.fiber_basis(&[0.0, 0.0]).unwrap(), (vec![0, 1], true));
    }

    #[test]
    fn fiber_dim_falls_back_for_transcendental_coefficients() {
        let f = module(plane(), &[&["sin(y)", "0"]]);
        assert_eq!(f.fiber_dim(&[0.0, 1.0]).unwrap(), FiberDim { value: 1, exact: false });
    }

    #[test]
    fn membership_examples() {
        let m = cylinder();
        let f = module(m.clone(), &[&["0", "y"]]);
        let x = VectorField::parse(m.clone(), &["0", "2*y"]).unwrap();
        let r = f.pointwise_membership(&x, &Region::default_for(&m)).unwrap();
        assert!(r.member);
        assert!(r.worst_residual < 1e-14);
        assert_eq!(r.label, "pointwise");

        let f = module(m.clone(), &[&["1", "1"]]);
        let dy = VectorField::parse(m.clone(), &["0", "1"]).unwrap();
        assert!(!f.pointwise_membership(&dy, &Region::default_for(&m)).unwrap().member);

        let f = module(m.clone(), &[&["1", "y"]]);
        let dtheta = VectorField::parse(m.clone(), &["1", "0"]).unwrap();
        let away = Region::default_for(&m).restrict(1, 0.5, 3.0);
        let r = f.pointwise_membership(&dtheta, &away).unwrap();
        assert!(!r.member);
        assert!(r.witness.is_some());
        assert!(!f.hull_membership(&dtheta, &Region::default_for(&m)).unwrap());
    }

    #[test]
    fn hull_membership_examples() {
        let m = cylinder();
        let f = module(m.clone(), &[&["0", "y"], &["1", "0"]]);
        let r = Region::default_for(&m);
        assert!(f.hull_membership(f.generator("X1").unwrap(), &r).unwrap());
        let ydy = VectorField::parse(m.clone(), &["0", "y"]).unwrap();
        assert!(f.hull_membership(&ydy, &r).unwrap());
    }

    #[test]
    fn membership_on_empty_region_fails() {
        let m = plane();
        let f = module(m.clone(), &[&["1", "0"]]);
        let empty = Region::new(vec![1.0, 1.0], vec![0.0, 0.0]);
        assert_eq!(
            f.pointwise_membership(f.generator("X1").unwrap(), &empty),
            Err(Error::EmptyRegion)
        );
    }

    #[test]
    fn involutivity_examples() {
        let m = plane();
        let r = Region::default_for(&m).with_probes(vec![vec![0.0, 1.0]]);
        assert!(module(m.clone(), &[&["1", "0"], &["0", "1"]]).involutivity_check(&r).unwrap().passed);
        let bad = module(m.clone(), &[&["1", "0"], &["0", "x"]]).involutivity_check(&r).unwrap();
        assert!(!bad.passed);
        assert_eq!(bad.failures[0].witness[0], 0.0);
        let c = cylinder();
        assert!(module(c.clone(), &[&["1", "y"]]).involutivity_check(&Region::default_for(&c)).unwrap().passed);
    }

    #[test]
    fn out_of_domain_points_rejected() {
        let m = Arc::new(
            ChartManifold::euclidean("half", &["x"])
                .with_domain(vec![crate::symcore::Expr::coord(0)])
                .unwrap(),
        );
        let f = FoliationModule::full(m);
        assert!(matches!(f.tangent_dim(&[-1.0]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(f.fiber_dim(&[0.0]), Err(Error::OutOfDomain { .. })));
    }
}
