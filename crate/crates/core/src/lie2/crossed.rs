//! Crossed modules and the Lie 2-groups `H ⋊ G ⇉ G` they define.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::report::Assertion;
use crate::symcore::Expr;

use super::group::{LieGroupModel, GROUP_AXIOM_TOL};

/// `∂: H → G` with an action `C` of `G` on `H` by automorphisms.
///
/// `boundary` is written in the coordinates of `H`; `action` in the
/// coordinates of `G` followed by those of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossedModule {
    h: Arc<LieGroupModel>,
    g: Arc<LieGroupModel>,
    boundary: Vec<Expr>,
    action: Vec<Expr>,
}

impl CrossedModule {
    pub fn new(h: Arc<LieGroupModel>, g: Arc<LieGroupModel>, boundary: Vec<Expr>, action: Vec<Expr>) -> Result<Self> {
        if boundary.len() != g.dim() || action.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: boundary.len(),
            });
        }
        Ok(CrossedModule { h, g, boundary, action })
    }

    /// `H = G`, `∂ = id`, `C` = conjugation.
    pub fn inclusion(g: Arc<LieGroupModel>) -> Self {
        let d = g.dim();
        CrossedModule {
            boundary: (0..d).map(Expr::coord).collect(),
            action: g.conj_exprs(),
            h: g.clone(),
            g,
        }
    }

    /// `∂` constant at the unit: `H ⋊ G` is an ordinary semidirect product.
    pub fn trivial_boundary(h: Arc<LieGroupModel>, g: Arc<LieGroupModel>, action: Vec<Expr>) -> Result<Self> {
        let boundary = g.unit().iter().map(|u| Expr::constant(*u)).collect();
        CrossedModule::new(h, g, boundary, action)
    }

    /// `C` trivial and `∂` constant.
    pub fn direct_product(h: Arc<LieGroupModel>, g: Arc<LieGroupModel>) -> Self {
        let dg = g.dim();
        let action = (0..h.dim()).map(|i| Expr::coord(dg + i)).collect();
        CrossedModule::trivial_boundary(h, g, action).expect("dimensions match by construction")
    }

    pub fn h(&self) -> &Arc<LieGroupModel> {
        &self.h
    }

    pub fn g(&self) -> &Arc<LieGroupModel> {
        &self.g
    }

    pub fn boundary(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.boundary.iter().map(|c| c.eval_at(h)).collect::<Result<Vec<_>>>()?;
        self.g.manifold().normalize_in_place(&mut out);
        Ok(out)
    }

    /// `C_g(h)`.
    pub fn act(&self, g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let at: Vec<f64> = g.iter().chain(h).copied().collect();
        let mut out = self.action.iter().map(|c| c.eval_at(&at)).collect::<Result<Vec<_>>>()?;
        self.h.manifold().normalize_in_place(&mut out);
        Ok(out)
    }

    /// The two crossed-module identities plus: `∂` and every `C_g` are
    /// homomorphisms and `C` is an action.
    pub fn axiom_check(&self, samples: usize) -> Vec<Assertion> {
        let (hg, gg) = (&self.h, &self.g);
        let hs = hg.sample_elements(samples + 1);
        let gs = gg.sample_elements(samples + 1);
        let mut equiv = Assertion::new("crossed module: ∂(C_g h) = g ∂(h) g⁻¹", GROUP_AXIOM_TOL);
        let mut peiffer = Assertion::new("crossed module: C_∂(h) j = h j h⁻¹", GROUP_AXIOM_TOL);
        let mut hom = Assertion::new("crossed module: ∂ and C_g are homomorphisms", GROUP_AXIOM_TOL);
        let mut action = Assertion::new("crossed module: C_{g1 g2} = C_g1 C_g2", GROUP_AXIOM_TOL);
        for i in 0..samples {
            let (h, j) = (&hs[i], &hs[i + 1]);
            let (g1, g2) = (&gs[i], &gs[i + 1]);
            let r = (|| -> Result<()> {
                let l = self.boundary(&self.act(g1, h)?)?;
                let r = gg.conj(g1, &self.boundary(h)?)?;
                equiv.observe(gg.distance(&l, &r), || format!("g={g1:?} h={h:?}"));
                let l = self.act(&self.boundary(h)?, j)?;
                let r = hg.conj(h, j)?;
                peiffer.observe(hg.distance(&l, &r), || format!("h={h:?} j={j:?}"));
                let d1 = gg.distance(&self.boundary(&hg.mul(h, j)?)?, &gg.mul(&self.boundary(h)?, &self.boundary(j)?)?);
                let d2 = hg.distance(&self.act(g1, &hg.mul(h, j)?)?, &hg.mul(&self.act(g1, h)?, &self.act(g1, j)?)?);
                hom.observe(d1.max(d2), || format!("g={g1:?} h={h:?} j={j:?}"));
                let l = self.act(&gg.mul(g1, g2)?, h)?;
                let r = self.act(g1, &self.act(g2, h)?)?;
                action.observe(hg.distance(&l, &r), || format!("g1={g1:?} g2={g2:?} h={h:?}"));
                Ok(())
            })();
            if let Err(e) = r {
                equiv.error(&e);
            }
        }
        vec![equiv, peiffer, hom, action]
    }
}

/// An element `(h, g)` of `H ⋊ G`; as an arrow it goes from `g` to `∂(h) g`.
pub type TwoElement = (Vec<f64>, Vec<f64>);

/// The Lie 2-group of a crossed module.
#[derive(Debug, Clone, PartialEq)]
pub struct Lie2Group {
    cm: CrossedModule,
}

/// Checks the crossed-module axioms and builds `H ⋊ G`.
pub fn semidirect_product(cm: CrossedModule) -> Result<Lie2Group> {
    let g = Lie2Group { cm };
    let mut report = g.cm.axiom_check(50);
    report.extend(g.group_axiom_check(50));
    report.extend(g.groupoid_axiom_check(50));
    if let Some(bad) = report.iter().find(|a| !a.passed) {
        return Err(Error::Axiom(format!("{}: {}", bad.name, bad.witnesses.join("; "))));
    }
    Ok(g)
}

impl Lie2Group {
    pub fn crossed_module(&self) -> &CrossedModule {
        &self.cm
    }

    pub fn h(&self) -> &Arc<LieGroupModel> {
        &self.cm.h
    }

    pub fn g(&self) -> &Arc<LieGroupModel> {
        &self.cm.g
    }

    pub fn unit(&self) -> TwoElement {
        (self.cm.h.unit().to_vec(), self.cm.g.unit().to_vec())
    }

    /// `(h1, g1)(h2, g2) = (h1 C_g1(h2), g1 g2)`.
    pub fn mul(&self, a: &TwoElement, b: &TwoElement) -> Result<TwoElement> {
        Ok((
            self.cm.h.mul(&a.0, &self.cm.act(&a.1, &b.0)?)?,
            self.cm.g.mul(&a.1, &b.1)?,
        ))
    }

    /// `(h, g)⁻¹ = (C_{g⁻¹}(h⁻¹), g⁻¹)`.
    pub fn inv(&self, a: &TwoElement) -> Result<TwoElement> {
        let gi = self.cm.g.inv(&a.1)?;
        Ok((self.cm.act(&gi, &self.cm.h.inv(&a.0)?)?, gi))
    }

    pub fn source(&self, a: &TwoElement) -> Vec<f64> {
        a.1.clone()
    }

    pub fn target(&self, a: &TwoElement) -> Result<Vec<f64>> {
        self.cm.g.mul(&self.cm.boundary(&a.0)?, &a.1)
    }

    /// `(h2, ∂(h1) g) ∘ (h1, g) = (h2 h1, g)`.
    pub fn compose(&self, b: &TwoElement, a: &TwoElement) -> Result<TwoElement> {
        let t = self.target(a)?;
        if self.cm.g.distance(&t, &b.1) > GROUP_AXIOM_TOL {
            return Err(Error::InvalidArrow(format!("{b:?} does not start at {t:?}")));
        }
        Ok((self.cm.h.mul(&b.0, &a.0)?, a.1.clone()))
    }

    pub fn identity(&self, g: &[f64]) -> TwoElement {
        (self.cm.h.unit().to_vec(), g.to_vec())
    }

    /// Groupoid inverse `(h⁻¹, ∂(h) g)`.
    pub fn invert_arrow(&self, a: &TwoElement) -> Result<TwoElement> {
        Ok((self.cm.h.inv(&a.0)?, self.target(a)?))
    }

    pub fn distance(&self, a: &TwoElement, b: &TwoElement) -> f64 {
        self.cm.h.distance(&a.0, &b.0).max(self.cm.g.distance(&a.1, &b.1))
    }

    pub fn sample_elements(&self, n: usize) -> Vec<TwoElement> {
        let hs = self.cm.h.sample_elements(n);
        let gs = self.cm.g.sample_elements(n + 3);
        hs.into_iter().zip(gs.into_iter().skip(3)).collect()
    }

    /// Group axioms on `H ⋊ G`.
    pub fn group_axiom_check(&self, samples: usize) -> Vec<Assertion> {
        let els = self.sample_elements(samples + 2);
        let e = self.unit();
        let mut assoc = Assertion::new("H⋊G: associativity", GROUP_AXIOM_TOL);
        let mut unit = Assertion::new("H⋊G: unit", GROUP_AXIOM_TOL);
        let mut inv = Assertion::new("H⋊G: inverse", GROUP_AXIOM_TOL);
        for t in els.windows(3).take(samples) {
            let r = (|| -> Result<()> {
                let (a, b, c) = (&t[0], &t[1], &t[2]);
                let l = self.mul(&self.mul(a, b)?, c)?;
                let r = self.mul(a, &self.mul(b, c)?)?;
                assoc.observe(self.distance(&l, &r), || format!("{a:?} {b:?} {c:?}"));
                let du = self.distance(&self.mul(a, &e)?, a).max(self.distance(&self.mul(&e, a)?, a));
                unit.observe(du, || format!("{a:?}"));
                let ai = self.inv(a)?;
                let di = self.distance(&self.mul(a, &ai)?, &e).max(self.distance(&self.mul(&ai, a)?, &e));
                inv.observe(di, || format!("{a:?}"));
                Ok(())
            })();
            if let Err(err) = r {
                assoc.error(&err);
            }
        }
        vec![assoc, unit, inv]
    }

    /// Groupoid axioms over `G` and the interchange law
    /// `(b1∘a1)(b2∘a2) = (b1 b2)∘(a1 a2)`.
    pub fn groupoid_axiom_check(&self, samples: usize) -> Vec<Assertion> {
        let (hg, gg) = (&self.cm.h, &self.cm.g);
        let els = self.sample_elements(samples + 3);
        let hs = hg.sample_elements(samples + 11);
        let mut units = Assertion::new("H⋊G ⇉ G: identities", GROUP_AXIOM_TOL);
        let mut st = Assertion::new("H⋊G ⇉ G: source/target of composites", GROUP_AXIOM_TOL);
        let mut assoc = Assertion::new("H⋊G ⇉ G: associativity", GROUP_AXIOM_TOL);
        let mut inv = Assertion::new("H⋊G ⇉ G: inverses", GROUP_AXIOM_TOL);
        let mut interchange = Assertion::new("H⋊G: multiplication is a groupoid morphism", GROUP_AXIOM_TOL);
        for i in 0..samples {
            let r = (|| -> Result<()> {
                let a = &els[i];
                let b = (hs[i + 5].clone(), self.target(a)?);
                let c = (hs[i + 9].clone(), self.target(&b)?);
                let g = &a.1;
                let id = self.identity(g);
                let d = gg.distance(&self.source(&id), g).max(gg.distance(&self.target(&id)?, g));
                let d2 = self.distance(&self.compose(a, &id)?, a).max(self.distance(&self.compose(&self.identity(&self.target(a)?), a)?, a));
                units.observe(d.max(d2), || format!("{a:?}"));
                let ba = self.compose(&b, a)?;
                let d = gg.distance(&self.source(&ba), &self.source(a)).max(gg.distance(&self.target(&ba)?, &self.target(&b)?));
                st.observe(d, || format!("{a:?} {b:?}"));
                let l = self.compose(&c, &ba)?;
                let r = self.compose(&self.compose(&c, &b)?, a)?;
                assoc.observe(self.distance(&l, &r), || format!("{a:?} {b:?} {c:?}"));
                let ai = self.invert_arrow(a)?;
                let d = self.distance(&self.compose(&ai, a)?, &self.identity(&self.source(a))).max(
                    self.distance(&self.compose(a, &ai)?, &self.identity(&self.target(a)?)),
                );
                inv.observe(d, || format!("{a:?}"));
                let a2 = &els[i + 1];
                let b2 = (hs[i + 7].clone(), self.target(a2)?);
                let l = self.mul(&ba, &self.compose(&b2, a2)?)?;
                let r = self.compose(&self.mul(&b, &b2)?, &self.mul(a, a2)?)?;
                interchange.observe(self.distance(&l, &r), || format!("{a:?} {b:?} {a2:?} {b2:?}"));
                Ok(())
            })();
            if let Err(err) = r {
                st.error(&err);
            }
        }
        vec![units, st, assoc, inv, interchange]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie2::group::u1;
    use crate::report::all_passed;

    #[test]
    fn direct_product_of_abelian_groups() {
        let r = Arc::new(LieGroupModel::real_vector(1));
        let g = semidirect_product(CrossedModule::direct_product(r.clone(), r)).unwrap();
        let ab = g.mul(&(vec![1.0], vec![2.0]), &(vec![3.0], vec![4.0])).unwrap();
        assert_eq!(ab, (vec![4.0], vec![6.0]));
        assert_eq!(g.target(&(vec![1.0], vec![2.0])).unwrap(), vec![2.0]);
    }

    #[test]
    fn inclusion_crossed_modules_pass() {
        for g in [Arc::new(u1()), Arc::new(LieGroupModel::real_vector(2))] {
            let cm = CrossedModule::inclusion(g);
            assert!(all_passed(&cm.axiom_check(60)));
            let two = semidirect_product(cm).unwrap();
            assert!(all_passed(&two.group_axiom_check(60)));
            assert!(all_passed(&two.groupoid_axiom_check(60)));
        }
    }

    #[test]
    fn inclusion_into_nonabelian_group() {
        let m = Arc::new(crate::symcore::ChartManifold::euclidean("Aff", &["a", "b"]));
        let c = |i| Expr::coord(i);
        let aff = LieGroupModel::generic(
            "Aff",
            m,
            vec![c(0) + c(2), c(1) + c(0).exp() * c(3)],
            vec![-c(0), -(c(1) * (-c(0)).exp())],
            vec![0.0, 0.0],
            vec![c(0), c(1)],
        )
        .unwrap();
        let two = semidirect_product(CrossedModule::inclusion(Arc::new(aff))).unwrap();
        let a = (vec![0.3, -0.2], vec![1.0, 0.5]);
        assert!(two.distance(&two.mul(&a, &two.inv(&a).unwrap()).unwrap(), &two.unit()) < 1e-12);
    }

    #[test]
    fn nonabelian_h_with_trivial_boundary_fails_peiffer() {
        let m = Arc::new(crate::symcore::ChartManifold::euclidean("Aff", &["a", "b"]));
        let c = |i| Expr::coord(i);
        let aff = Arc::new(
            LieGroupModel::generic(
                "Aff",
                m,
                vec![c(0) + c(2), c(1) + c(0).exp() * c(3)],
                vec![-c(0), -(c(1) * (-c(0)).exp())],
                vec![0.0, 0.0],
                vec![c(0), c(1)],
            )
            .unwrap(),
        );
        let cm = CrossedModule::direct_product(aff, Arc::new(LieGroupModel::real_vector(1)));
        let report = cm.axiom_check(30);
        assert!(!report[1].passed);
        assert!(semidirect_product(cm).is_err());
    }
}
