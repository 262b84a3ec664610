//! Smooth left actions of Lie groups on charts.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::bisubmersion::GeneratorSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::report::Assertion;
use crate::sampling::Region;
use crate::symcore::{ChartManifold, Expr, VectorField};

use super::group::LieGroupModel;

/// Step and tolerance of the finite-difference check of the infinitesimal
/// generators.
pub const GENERATOR_FD_STEP: f64 = 1e-5;
pub const GENERATOR_FD_TOL: f64 = 1e-4;
/// Residual accepted by `solve`; matches the word endpoint tolerance.
const SOLVE_TOL: f64 = 1e-6;

/// `ĝ(p)` given by expressions in the group parameters followed by the point
/// coordinates.
#[derive(Debug)]
pub struct GroupAction {
    group: Arc<LieGroupModel>,
    manifold: Arc<ChartManifold>,
    map: Vec<Expr>,
    generators: Vec<VectorField>,
    pushed: Mutex<HashMap<(u64, Vec<u64>), Arc<GeneratorSet>>>,
}

impl PartialEq for GroupAction {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group && self.manifold == other.manifold && self.map == other.map
    }
}

impl GroupAction {
    pub fn new(group: Arc<LieGroupModel>, manifold: Arc<ChartManifold>, map: Vec<Expr>) -> Result<Self> {
        let d = group.dim();
        let n = manifold.dim();
        if map.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: map.len() });
        }
        if let Some(bad) = map.iter().flat_map(|c| c.coords_used()).find(|i| *i >= d + n) {
            return Err(Error::DimensionMismatch { expected: d + n, found: bad + 1 });
        }
        let dexp = group.dexp_at_zero()?;
        let at_unit: Vec<Expr> = group
            .unit()
            .iter()
            .map(|u| Expr::constant(*u))
            .chain((0..n).map(Expr::coord))
            .collect();
        let partials: Vec<Vec<Expr>> = (0..d)
            .map(|j| map.iter().map(|c| c.diff_coord(j).substitute_coords(&at_unit).simplify()).collect())
            .collect();
        let generators = (0..d)
            .map(|i| {
                let comps = (0..n)
                    .map(|k| {
                        let terms = (0..d).map(|j| partials[j][k].clone() * Expr::constant(dexp[j][i])).collect();
                        crate::symcore::sum(terms).simplify()
                    })
                    .collect();
                VectorField::new(manifold.clone(), comps)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupAction {
            group,
            manifold,
            map,
            generators,
            pushed: Mutex::new(HashMap::new()),
        })
    }

    /// Translation of line coordinates: `a_i` moves coordinate `coords[i]`.
    pub fn translation(group: Arc<LieGroupModel>, manifold: Arc<ChartManifold>, coords: &[usize]) -> Result<Self> {
        let d = group.dim();
        let map = (0..manifold.dim())
            .map(|k| match coords.iter().position(|c| *c == k) {
                Some(i) => Expr::coord(d + k) + Expr::coord(i),
                None => Expr::coord(d + k),
            })
            .collect();
        GroupAction::new(group, manifold, map)
    }

    pub fn group(&self) -> &Arc<LieGroupModel> {
        &self.group
    }

    pub fn manifold(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    pub fn map(&self) -> &[Expr] {
        &self.map
    }

    /// Infinitesimal generators `v_x` for the coordinate basis of the Lie algebra.
    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    /// `v_x` for an arbitrary Lie-algebra vector.
    pub fn generator(&self, x: &[f64]) -> Result<VectorField> {
        VectorField::linear_combination(&self.manifold, x, &self.generators)
    }

    pub fn apply(&self, g: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let gp: Vec<f64> = g.iter().chain(p).copied().collect();
        let mut out = self.map.iter().map(|c| c.eval_at(&gp)).collect::<Result<Vec<_>>>()?;
        self.manifold.normalize_in_place(&mut out);
        self.manifold.check_point(&out)?;
        Ok(out)
    }

    /// The map `p ↦ ĝ(p)` as expressions in the point coordinates.
    pub fn map_for(&self, g: &[f64]) -> Vec<Expr> {
        let subs: Vec<Expr> = g
            .iter()
            .map(|a| Expr::constant(*a))
            .chain((0..self.manifold.dim()).map(Expr::coord))
            .collect();
        self.map.iter().map(|c| c.substitute_coords(&subs).simplify()).collect()
    }

    /// `ĝ_*X`, i.e. `q ↦ dĝ(X(ĝ⁻¹ q))`, built symbolically.
    pub fn pushforward(&self, g: &[f64], x: &VectorField) -> Result<VectorField> {
        let n = self.manifold.dim();
        let fwd = self.map_for(g);
        let back = self.map_for(&self.group.inv(g)?);
        let comps = (0..n)
            .map(|i| {
                let terms = (0..n)
                    .map(|j| fwd[i].diff_coord(j).substitute_coords(&back) * x.components()[j].substitute_coords(&back))
                    .collect();
                crate::symcore::sum(terms).simplify()
            })
            .collect();
        VectorField::new(self.manifold.clone(), comps)
    }

    /// `ĝ_*` of a whole generator set, cached per `(set, g)`.
    pub fn pushforward_set(&self, g: &[f64], set: &Arc<GeneratorSet>) -> Result<Arc<GeneratorSet>> {
        let g = self.group.normalize(g);
        if self.group.distance(&g, self.group.unit()) == 0.0 {
            return Ok(set.clone());
        }
        let key = (set.uid(), g.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        if let Some(s) = self.pushed.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let fields = set.fields().iter().map(|x| self.pushforward(&g, x)).collect::<Result<Vec<_>>>()?;
        let pushed = Arc::new(GeneratorSet::new(format!("{}*{}", fmt_element(&g), set.id()), fields)?);
        self.pushed.lock().expect("cache lock").insert(key, pushed.clone());
        Ok(pushed)
    }

    /// Some `g` with `ĝ(p) = q`, by Gauss–Newton from several starts.
    pub fn solve(&self, p: &[f64], q: &[f64]) -> Option<Vec<f64>> {
        let d = self.group.dim();
        let mut starts = vec![self.group.unit().to_vec()];
        starts.extend(self.group.sample_elements(8));
        for start in starts {
            let mut g = start;
            for _ in 0..60 {
                let Ok(gp) = self.apply(&g, p) else { break };
                let r = self.manifold.displacement(&gp, q);
                if linalg::norm(&r) < 1e-13 {
                    break;
                }
                let at: Vec<f64> = g.iter().chain(p).copied().collect();
                let Ok(cols) = (0..d)
                    .map(|j| self.map.iter().map(|c| c.diff_coord(j).eval_at(&at)).collect::<Result<Vec<f64>>>())
                    .collect::<Result<Vec<_>>>()
                else {
                    break;
                };
                let (dg, _) = linalg::least_squares(&cols, &r);
                if linalg::norm(&dg) < 1e-15 {
                    break;
                }
                for (gi, di) in g.iter_mut().zip(&dg) {
                    *gi += di;
                }
                g = self.group.normalize(&g);
            }
            if let Ok(gp) = self.apply(&g, p) {
                if self.manifold.distance(&gp, q) < SOLVE_TOL {
                    return Some(g);
                }
            }
        }
        None
    }

    /// Unit law, compatibility with multiplication, generator finite
    /// differences and a freeness spot check.
    pub fn check(&self, region: &Region, samples: usize) -> Vec<Assertion> {
        let g = &self.group;
        let pts = match region.clone().with_samples(samples).points(&self.manifold) {
            Ok(p) => p,
            Err(e) => {
                let mut a = Assertion::new("action: sample points", 0.0);
                a.error(&e);
                return vec![a];
            }
        };
        let els = g.sample_elements(samples + 1);
        let mut unit = Assertion::new("action: unit acts trivially", 1e-9);
        let mut compat = Assertion::new("action: g1(g2 p) = (g1 g2) p", 1e-9);
        let mut fd = Assertion::new("action: generators match finite differences", GENERATOR_FD_TOL);
        let mut free = Assertion::new("action: freeness spot check", 0.0);
        for (k, p) in pts.iter().enumerate() {
            let (g1, g2) = (&els[k % els.len()], &els[(k + 1) % els.len()]);
            let r = (|| -> Result<()> {
                unit.observe(self.manifold.distance(&self.apply(g.unit(), p)?, p), || format!("{p:?}"));
                let lhs = self.apply(g1, &self.apply(g2, p)?)?;
                let rhs = self.apply(&g.mul(g1, g2)?, p)?;
                compat.observe(self.manifold.distance(&lhs, &rhs), || format!("g1={g1:?} g2={g2:?} p={p:?}"));
                for (i, v) in self.generators.iter().enumerate() {
                    let mut x = vec![0.0; g.dim()];
                    x[i] = GENERATOR_FD_STEP;
                    let plus = self.apply(&g.exp(&x)?, p)?;
                    x[i] = -GENERATOR_FD_STEP;
                    let minus = self.apply(&g.exp(&x)?, p)?;
                    let diff = self.manifold.displacement(&minus, &plus);
                    let vp = v.eval(p)?;
                    let dev = diff
                        .iter()
                        .zip(&vp)
                        .map(|(d, v)| (d / (2.0 * GENERATOR_FD_STEP) - v).abs())
                        .fold(0.0, f64::max);
                    fd.observe(dev, || format!("generator {i} at {p:?}"));
                }
                if g.distance(g1, g.unit()) > 0.1 {
                    let moved = self.manifold.distance(&self.apply(g1, p)?, p);
                    free.check(moved > 1e-6, || format!("g={g1:?} fixes {p:?}"));
                }
                Ok(())
            })();
            if let Err(e) = r {
                compat.error(&e);
            }
        }
        vec![unit, compat, fd, free]
    }
}

fn fmt_element(g: &[f64]) -> String {
    let parts: Vec<String> = g.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie2::group::u1;
    use crate::symcore::Coordinate;
    use std::f64::consts::PI;

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::new("cyl", vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")]).unwrap())
    }

    #[test]
    fn rotation_of_cylinder() {
        let a = GroupAction::translation(Arc::new(u1()), cylinder(), &[0]).unwrap();
        assert_eq!(a.generators()[0].components(), &[Expr::one(), Expr::zero()]);
        let q = a.apply(&[1.0], &[6.0, 2.0]).unwrap();
        assert!((q[0] - (7.0 - 2.0 * PI)).abs() < 1e-12 && q[1] == 2.0);
        assert!(a.check(&Region::default_for(&cylinder()), 30).iter().all(|r| r.passed));
        let g = a.solve(&[0.5, 1.0], &[2.0, 1.0]).unwrap();
        assert!((g[0] - 1.5).abs() < 1e-9);
        assert!(a.solve(&[0.5, 1.0], &[2.0, 1.5]).is_none());
    }

    #[test]
    fn rotation_leaves_spiral_field_invariant() {
        let c = cylinder();
        let a = GroupAction::translation(Arc::new(u1()), c.clone(), &[0]).unwrap();
        let x = VectorField::parse(c, &["1", "y"]).unwrap();
        let pushed = a.pushforward(&[0.7], &x).unwrap();
        assert!(crate::symcore::fields_sampled_equal(&pushed, &x, 1e-12));
    }

    #[test]
    fn scaling_pushes_forward_by_jacobian() {
        // R acting on R^2 by (x, y) ↦ (e^a x, y); pushforward of ∂x is e^a ∂x
        let m = Arc::new(ChartManifold::euclidean("R2", &["x", "y"]));
        let map = vec![Expr::coord(0).exp() * Expr::coord(1), Expr::coord(2)];
        let a = GroupAction::new(Arc::new(LieGroupModel::real_vector(1)), m.clone(), map).unwrap();
        let r = a.check(&Region::default_for(&m), 30);
        assert!(r[..3].iter().all(|r| r.passed), "{r:?}");
        // the y-axis is fixed, and the Halton sample contains it
        assert!(!r[3].passed);
        let pushed = a.pushforward(&[2.0], &VectorField::coordinate(m.clone(), 0)).unwrap();
        let v = pushed.eval(&[0.3, 0.4]).unwrap();
        assert!((v[0] - 2f64.exp()).abs() < 1e-12 && v[1] == 0.0);
    }

    #[test]
    fn non_action_fails_compatibility() {
        let m = Arc::new(ChartManifold::euclidean("R", &["x"]));
        let map = vec![Expr::coord(1) + Expr::coord(0) * Expr::coord(0)];
        let a = GroupAction::new(Arc::new(LieGroupModel::real_vector(1)), m.clone(), map).unwrap();
        let r = a.check(&Region::default_for(&m), 30);
        assert!(!r[1].passed);
    }
}
