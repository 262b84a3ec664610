//! Concrete groupoid models and the normal-subgroupoid-system checker.
//!
//! Arrows are typed points; two arrows are compared through
//! [`Groupoid::deviation`], which is a distance after normalization (or the
//! carried-map distance for holonomy words).

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use crate::bisubmersion::{self, max_deviation, random_word, GeneratorSet, HolonomyWord};
use crate::error::{Error, Result};
use crate::lie2::{lifted_action, GroupAction, Lie2Group, LieGroupModel, TwoElement};
use crate::quotient::SubmersionQuotient;
use crate::report::Assertion;
use crate::sampling::{Region, SeededRng};
use crate::symcore::ChartManifold;

/// Arrow comparison tolerance for the exact models.
pub const ARROW_TOL: f64 = 1e-9;

pub trait Groupoid {
    type Arrow: Clone + Debug;

    /// The manifold of objects.
    fn base(&self) -> &Arc<ChartManifold>;
    fn source(&self, a: &Self::Arrow) -> Result<Vec<f64>>;
    fn target(&self, a: &Self::Arrow) -> Result<Vec<f64>>;
    /// `b ∘ a`, defined when `s(b) = t(a)`.
    fn compose(&self, b: &Self::Arrow, a: &Self::Arrow) -> Result<Self::Arrow>;
    fn invert(&self, a: &Self::Arrow) -> Result<Self::Arrow>;
    fn identity(&self, p: &[f64]) -> Result<Self::Arrow>;
    /// Distance between arrows, `∞` when incomparable.
    fn deviation(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<f64>;
    fn sample_arrow_from(&self, p: &[f64], rng: &mut SeededRng) -> Result<Self::Arrow>;

    fn sample_object(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        rng.point_in(self.base(), &Region::default_for(self.base()))
            .ok_or(Error::EmptyRegion)
    }
}

fn check_composable(m: &ChartManifold, s: &[f64], t: &[f64], tol: f64) -> Result<()> {
    if m.distance(s, t) > tol {
        return Err(Error::NotComposable {
            target: t.to_vec(),
            source_point: s.to_vec(),
        });
    }
    Ok(())
}

/// Uniform element with coordinates in `[-2, 2]` (full period on circles).
pub fn random_element(group: &LieGroupModel, rng: &mut SeededRng) -> Vec<f64> {
    let m = group.manifold();
    let g: Vec<f64> = (0..group.dim())
        .map(|i| match m.period(i) {
            Some(p) => rng.uniform(0.0, p),
            None => rng.uniform(-2.0, 2.0),
        })
        .collect();
    group.normalize(&g)
}

/// `M × M`, arrows `(target, source)`.
#[derive(Debug, Clone)]
pub struct PairGroupoid {
    pub manifold: Arc<ChartManifold>,
}

impl Groupoid for PairGroupoid {
    type Arrow = (Vec<f64>, Vec<f64>);

    fn base(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    fn source(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(a.1.clone())
    }

    fn target(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(a.0.clone())
    }

    fn compose(&self, b: &Self::Arrow, a: &Self::Arrow) -> Result<Self::Arrow> {
        check_composable(&self.manifold, &b.1, &a.0, ARROW_TOL)?;
        Ok((b.0.clone(), a.1.clone()))
    }

    fn invert(&self, a: &Self::Arrow) -> Result<Self::Arrow> {
        Ok((a.1.clone(), a.0.clone()))
    }

    fn identity(&self, p: &[f64]) -> Result<Self::Arrow> {
        let p = self.manifold.normalize(p);
        Ok((p.clone(), p))
    }

    fn deviation(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<f64> {
        Ok(self.manifold.distance(&a.0, &b.0) + self.manifold.distance(&a.1, &b.1))
    }

    fn sample_arrow_from(&self, p: &[f64], rng: &mut SeededRng) -> Result<Self::Arrow> {
        Ok((self.sample_object(rng)?, self.manifold.normalize(p)))
    }
}

/// Identities only; the arrow is its base point.
#[derive(Debug, Clone)]
pub struct UnitGroupoid {
    pub manifold: Arc<ChartManifold>,
}

impl Groupoid for UnitGroupoid {
    type Arrow = Vec<f64>;

    fn base(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    fn source(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(a.clone())
    }

    fn target(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(a.clone())
    }

    fn compose(&self, b: &Self::Arrow, a: &Self::Arrow) -> Result<Self::Arrow> {
        check_composable(&self.manifold, b, a, ARROW_TOL)?;
        Ok(a.clone())
    }

    fn invert(&self, a: &Self::Arrow) -> Result<Self::Arrow> {
        Ok(a.clone())
    }

    fn identity(&self, p: &[f64]) -> Result<Self::Arrow> {
        Ok(self.manifold.normalize(p))
    }

    fn deviation(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<f64> {
        Ok(self.manifold.distance(a, b))
    }

    fn sample_arrow_from(&self, p: &[f64], _rng: &mut SeededRng) -> Result<Self::Arrow> {
        Ok(self.manifold.normalize(p))
    }
}

/// `G × P` with `s(g, p) = p`, `t(g, p) = g·p`.
#[derive(Debug, Clone)]
pub struct TransformationGroupoid {
    pub action: Arc<GroupAction>,
}

impl TransformationGroupoid {
    pub fn new(action: Arc<GroupAction>) -> Self {
        TransformationGroupoid { action }
    }

    fn group(&self) -> &LieGroupModel {
        GroupAction::group(&self.action)
    }
}

impl Groupoid for TransformationGroupoid {
    type Arrow = (Vec<f64>, Vec<f64>);

    fn base(&self) -> &Arc<ChartManifold> {
        self.action.manifold()
    }

    fn source(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(self.base().normalize(&a.1))
    }

    fn target(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        self.action.apply(&a.0, &a.1)
    }

    fn compose(&self, b: &Self::Arrow, a: &Self::Arrow) -> Result<Self::Arrow> {
        check_composable(self.base(), &b.1, &self.target(a)?, ARROW_TOL)?;
        Ok((self.group().mul(&b.0, &a.0)?, a.1.clone()))
    }

    fn invert(&self, a: &Self::Arrow) -> Result<Self::Arrow> {
        Ok((self.group().inv(&a.0)?, self.target(a)?))
    }

    fn identity(&self, p: &[f64]) -> Result<Self::Arrow> {
        Ok((self.group().unit().to_vec(), self.base().normalize(p)))
    }

    fn deviation(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<f64> {
        Ok(self.group().distance(&a.0, &b.0) + self.base().distance(&a.1, &b.1))
    }

    fn sample_arrow_from(&self, p: &[f64], rng: &mut SeededRng) -> Result<Self::Arrow> {
        for _ in 0..50 {
            let g = random_element(self.group(), rng);
            if self.action.apply(&g, p).is_ok() {
                return Ok((g, self.base().normalize(p)));
            }
        }
        Err(Error::EmptyRegion)
    }
}

/// Words over one generator set, compared by their carried maps.
#[derive(Debug, Clone)]
pub struct HolonomyGroupoid {
    pub set: Arc<GeneratorSet>,
    pub max_len: usize,
    pub scale: f64,
}

impl HolonomyGroupoid {
    pub fn new(set: Arc<GeneratorSet>) -> Self {
        HolonomyGroupoid {
            set,
            max_len: 3,
            scale: 1.0,
        }
    }
}

impl Groupoid for HolonomyGroupoid {
    type Arrow = HolonomyWord;

    fn base(&self) -> &Arc<ChartManifold> {
        self.set.manifold()
    }

    fn source(&self, a: &HolonomyWord) -> Result<Vec<f64>> {
        Ok(a.source().to_vec())
    }

    fn target(&self, a: &HolonomyWord) -> Result<Vec<f64>> {
        Ok(a.target().to_vec())
    }

    fn compose(&self, b: &HolonomyWord, a: &HolonomyWord) -> Result<HolonomyWord> {
        bisubmersion::compose(b, a)
    }

    fn invert(&self, a: &HolonomyWord) -> Result<HolonomyWord> {
        bisubmersion::invert(a)
    }

    fn identity(&self, p: &[f64]) -> Result<HolonomyWord> {
        HolonomyWord::empty(self.base().clone(), p)
    }

    fn deviation(&self, a: &HolonomyWord, b: &HolonomyWord) -> Result<f64> {
        Ok(max_deviation(a, b)?.unwrap_or(f64::INFINITY))
    }

    fn sample_arrow_from(&self, p: &[f64], rng: &mut SeededRng) -> Result<HolonomyWord> {
        random_word(&self.set, p, self.max_len, self.scale, rng)
    }
}

/// `H ⇉ G` of a Lie 2-group: `s(h, g) = g`, `t(h, g) = ∂(h) g`.
impl Groupoid for Lie2Group {
    type Arrow = TwoElement;

    fn base(&self) -> &Arc<ChartManifold> {
        self.g().manifold()
    }

    fn source(&self, a: &TwoElement) -> Result<Vec<f64>> {
        Ok(Lie2Group::source(self, a))
    }

    fn target(&self, a: &TwoElement) -> Result<Vec<f64>> {
        Lie2Group::target(self, a)
    }

    fn compose(&self, b: &TwoElement, a: &TwoElement) -> Result<TwoElement> {
        Lie2Group::compose(self, b, a)
    }

    fn invert(&self, a: &TwoElement) -> Result<TwoElement> {
        self.invert_arrow(a)
    }

    fn identity(&self, g: &[f64]) -> Result<TwoElement> {
        Ok(Lie2Group::identity(self, g))
    }

    fn deviation(&self, a: &TwoElement, b: &TwoElement) -> Result<f64> {
        Ok(self.distance(a, b))
    }

    fn sample_arrow_from(&self, g: &[f64], rng: &mut SeededRng) -> Result<TwoElement> {
        Ok((random_element(self.h(), rng), self.g().normalize(g)))
    }

    fn sample_object(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        Ok(random_element(self.g(), rng))
    }
}

/// An arrow `(p, h, q)` of `P ×_M H ×_M P`: `π(p) = t(h)`, `π(q) = s(h)`.
#[derive(Debug, Clone)]
pub struct PullbackArrow<A> {
    pub target: Vec<f64>,
    pub inner: A,
    pub source: Vec<f64>,
}

/// The pullback of a groupoid over `M` along `π : P → M`.
#[derive(Debug)]
pub struct PullbackGroupoid<G> {
    pub inner: G,
    pub quotient: Arc<SubmersionQuotient>,
}

impl<G: Groupoid> PullbackGroupoid<G> {
    pub fn new(inner: G, quotient: Arc<SubmersionQuotient>) -> Result<Self> {
        if **inner.base() != **quotient.target() {
            return Err(Error::ManifoldMismatch(
                inner.base().name().to_string(),
                quotient.target().name().to_string(),
            ));
        }
        Ok(PullbackGroupoid { inner, quotient })
    }

    /// Builds `(p, h, q)` after checking the two fiber conditions.
    pub fn arrow(&self, p: &[f64], h: G::Arrow, q: &[f64]) -> Result<PullbackArrow<G::Arrow>> {
        let m = self.quotient.target();
        let tp = self.quotient.project(p)?;
        let sq = self.quotient.project(q)?;
        let (th, sh) = (self.inner.target(&h)?, self.inner.source(&h)?);
        if m.distance(&tp, &th) > bisubmersion::ENDPOINT_TOL || m.distance(&sq, &sh) > bisubmersion::ENDPOINT_TOL {
            return Err(Error::InvalidArrow(format!(
                "π(p) = {tp:?}, t(h) = {th:?}, π(q) = {sq:?}, s(h) = {sh:?}"
            )));
        }
        let n = self.quotient.source();
        Ok(PullbackArrow {
            target: n.normalize(p),
            inner: h,
            source: n.normalize(q),
        })
    }

    /// A point over `m`: the section, moved along the fiber by a random
    /// group element when an action is present.
    fn point_over(&self, m: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
        let base = self.quotient.map().apply_section(m)?;
        if let Some(action) = self.quotient.action() {
            for _ in 0..20 {
                let g = random_element(action.group(), rng);
                if let Ok(p) = action.apply(&g, &base) {
                    return Ok(p);
                }
            }
        }
        Ok(base)
    }
}

impl<G: Groupoid> Groupoid for PullbackGroupoid<G> {
    type Arrow = PullbackArrow<G::Arrow>;

    fn base(&self) -> &Arc<ChartManifold> {
        self.quotient.source()
    }

    fn source(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(a.source.clone())
    }

    fn target(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        Ok(a.target.clone())
    }

    fn compose(&self, b: &Self::Arrow, a: &Self::Arrow) -> Result<Self::Arrow> {
        check_composable(self.base(), &b.source, &a.target, bisubmersion::ENDPOINT_TOL)?;
        Ok(PullbackArrow {
            target: b.target.clone(),
            inner: self.inner.compose(&b.inner, &a.inner)?,
            source: a.source.clone(),
        })
    }

    fn invert(&self, a: &Self::Arrow) -> Result<Self::Arrow> {
        Ok(PullbackArrow {
            target: a.source.clone(),
            inner: self.inner.invert(&a.inner)?,
            source: a.target.clone(),
        })
    }

    fn identity(&self, p: &[f64]) -> Result<Self::Arrow> {
        let m = self.quotient.project(p)?;
        let p = self.base().normalize(p);
        Ok(PullbackArrow {
            target: p.clone(),
            inner: self.inner.identity(&m)?,
            source: p,
        })
    }

    fn deviation(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<f64> {
        let n = self.base();
        Ok(n.distance(&a.target, &b.target) + self.inner.deviation(&a.inner, &b.inner)? + n.distance(&a.source, &b.source))
    }

    fn sample_arrow_from(&self, q: &[f64], rng: &mut SeededRng) -> Result<Self::Arrow> {
        let h = self.inner.sample_arrow_from(&self.quotient.project(q)?, rng)?;
        let p = self.point_over(&self.inner.target(&h)?, rng)?;
        self.arrow(&p, h, q)
    }
}

/// `G` acting on a groupoid `K` by automorphisms covering an action on objects.
pub trait GroupoidAction<K: Groupoid> {
    fn acting_group(&self) -> &LieGroupModel;
    fn act_point(&self, g: &[f64], p: &[f64]) -> Result<Vec<f64>>;
    fn act_arrow(&self, g: &[f64], a: &K::Arrow) -> Result<K::Arrow>;
}

impl GroupoidAction<UnitGroupoid> for Arc<GroupAction> {
    fn acting_group(&self) -> &LieGroupModel {
        GroupAction::group(self.as_ref())
    }

    fn act_point(&self, g: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.apply(g, p)
    }

    fn act_arrow(&self, g: &[f64], a: &Vec<f64>) -> Result<Vec<f64>> {
        self.apply(g, a)
    }
}

impl GroupoidAction<HolonomyGroupoid> for Arc<GroupAction> {
    fn acting_group(&self) -> &LieGroupModel {
        GroupAction::group(self.as_ref())
    }

    fn act_point(&self, g: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.apply(g, p)
    }

    fn act_arrow(&self, g: &[f64], a: &HolonomyWord) -> Result<HolonomyWord> {
        lifted_action(g, a, self)
    }
}

/// Sampled check that `g ⋆ ·` is an action by groupoid automorphisms
/// covering `g · ·`.
pub fn automorphism_check<K: Groupoid, A: GroupoidAction<K>>(
    k: &K,
    action: &A,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Vec<Assertion> {
    let mut cover = Assertion::new("s(g⋆ξ) = g·s(ξ), t(g⋆ξ) = g·t(ξ)", tol);
    let mut morph = Assertion::new("g⋆(ξ₂∘ξ₁) = (g⋆ξ₂)∘(g⋆ξ₁)", tol);
    let mut law = Assertion::new("g₁⋆(g₂⋆ξ) = (g₁g₂)⋆ξ and e⋆ξ = ξ", tol);
    let mut rng = SeededRng::new(seed);
    let group = action.acting_group();
    let m = k.base();
    for i in 0..samples {
        let run = |rng: &mut SeededRng, cover: &mut Assertion, morph: &mut Assertion, law: &mut Assertion| -> Result<()> {
            let p = k.sample_object(rng)?;
            let x1 = k.sample_arrow_from(&p, rng)?;
            let x2 = k.sample_arrow_from(&k.target(&x1)?, rng)?;
            let (g1, g2) = (random_element(group, rng), random_element(group, rng));
            let gx = action.act_arrow(&g1, &x1)?;
            let ds = m.distance(&k.source(&gx)?, &action.act_point(&g1, &k.source(&x1)?)?);
            let dt = m.distance(&k.target(&gx)?, &action.act_point(&g1, &k.target(&x1)?)?);
            cover.observe(ds.max(dt), || format!("sample {i}: g = {g1:?}"));
            let lhs = action.act_arrow(&g1, &k.compose(&x2, &x1)?)?;
            let rhs = k.compose(&action.act_arrow(&g1, &x2)?, &gx)?;
            morph.observe(k.deviation(&lhs, &rhs)?, || format!("sample {i}: g = {g1:?}"));
            let a = action.act_arrow(&g1, &action.act_arrow(&g2, &x1)?)?;
            let b = action.act_arrow(&group.mul(&g1, &g2)?, &x1)?;
            let e = action.act_arrow(group.unit(), &x1)?;
            law.observe(k.deviation(&a, &b)?.max(k.deviation(&e, &x1)?), || {
                format!("sample {i}: g₁ = {g1:?}, g₂ = {g2:?}")
            });
            Ok(())
        };
        if let Err(e) = run(&mut rng, &mut cover, &mut morph, &mut law) {
            morph.error(&e);
        }
    }
    vec![cover, morph, law]
}

/// An arrow `(ξ, g)` of `K ⋊ G`.
#[derive(Debug, Clone)]
pub struct SemiArrow<A> {
    pub inner: A,
    pub g: Vec<f64>,
}

/// `K ⋊ G`: `s(ξ, g) = g⁻¹·s(ξ)`, `t(ξ, g) = t(ξ)`,
/// `(ξ₂, g₂)∘(ξ₁, g₁) = (ξ₂∘(g₂⋆ξ₁), g₂g₁)`.
#[derive(Debug)]
pub struct SemidirectGroupoid<K, A> {
    pub inner: K,
    pub action: A,
}

impl<K: Groupoid, A: GroupoidAction<K>> SemidirectGroupoid<K, A> {
    /// Runs the automorphism check first.
    pub fn new(inner: K, action: A, samples: usize, tol: f64) -> Result<Self> {
        let report = automorphism_check(&inner, &action, samples, tol, 0x5E41);
        if let Some(bad) = report.iter().find(|a| !a.passed) {
            return Err(Error::Axiom(format!("{}: {:?}", bad.name, bad.witnesses)));
        }
        Ok(SemidirectGroupoid { inner, action })
    }
}

impl<K: Groupoid, A: GroupoidAction<K>> Groupoid for SemidirectGroupoid<K, A> {
    type Arrow = SemiArrow<K::Arrow>;

    fn base(&self) -> &Arc<ChartManifold> {
        self.inner.base()
    }

    fn source(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        let ginv = self.action.acting_group().inv(&a.g)?;
        self.action.act_point(&ginv, &self.inner.source(&a.inner)?)
    }

    fn target(&self, a: &Self::Arrow) -> Result<Vec<f64>> {
        self.inner.target(&a.inner)
    }

    fn compose(&self, b: &Self::Arrow, a: &Self::Arrow) -> Result<Self::Arrow> {
        let moved = self.action.act_arrow(&b.g, &a.inner)?;
        Ok(SemiArrow {
            inner: self.inner.compose(&b.inner, &moved)?,
            g: self.action.acting_group().mul(&b.g, &a.g)?,
        })
    }

    fn invert(&self, a: &Self::Arrow) -> Result<Self::Arrow> {
        let ginv = self.action.acting_group().inv(&a.g)?;
        Ok(SemiArrow {
            inner: self.action.act_arrow(&ginv, &self.inner.invert(&a.inner)?)?,
            g: ginv,
        })
    }

    fn identity(&self, p: &[f64]) -> Result<Self::Arrow> {
        Ok(SemiArrow {
            inner: self.inner.identity(p)?,
            g: self.action.acting_group().unit().to_vec(),
        })
    }

    fn deviation(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<f64> {
        Ok(self.inner.deviation(&a.inner, &b.inner)? + self.action.acting_group().distance(&a.g, &b.g))
    }

    /// `(ξ, g)` with `s(ξ) = g·p`.
    fn sample_arrow_from(&self, p: &[f64], rng: &mut SeededRng) -> Result<Self::Arrow> {
        let mut last = Error::EmptyRegion;
        for _ in 0..20 {
            let g = random_element(self.action.acting_group(), rng);
            match self
                .action
                .act_point(&g, p)
                .and_then(|gp| self.inner.sample_arrow_from(&gp, rng))
            {
                Ok(inner) => return Ok(SemiArrow { inner, g }),
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

/// Sampled structural laws: identities, source/target of composites,
/// associativity, unit and inverse laws.
pub fn groupoid_axiom_check<G: Groupoid>(g: &G, samples: usize, tol: f64, seed: u64) -> Vec<Assertion> {
    let mut ident = Assertion::new("s(e_p) = t(e_p) = p", tol);
    let mut st = Assertion::new("s(b∘a) = s(a), t(b∘a) = t(b)", tol);
    let mut assoc = Assertion::new("associativity", tol);
    let mut unit = Assertion::new("unit laws", tol);
    let mut inv = Assertion::new("inverse laws", tol);
    let mut rng = SeededRng::new(seed);
    let m = g.base();
    for i in 0..samples {
        let run = |rng: &mut SeededRng,
                   ident: &mut Assertion,
                   st: &mut Assertion,
                   assoc: &mut Assertion,
                   unit: &mut Assertion,
                   inv: &mut Assertion|
         -> Result<()> {
            let p = g.sample_object(rng)?;
            let e = g.identity(&p)?;
            let d = m.distance(&g.source(&e)?, &p).max(m.distance(&g.target(&e)?, &p));
            ident.observe(d, || format!("sample {i}: p = {p:?}"));
            let a = g.sample_arrow_from(&p, rng)?;
            let b = g.sample_arrow_from(&g.target(&a)?, rng)?;
            let c = g.sample_arrow_from(&g.target(&b)?, rng)?;
            let ba = g.compose(&b, &a)?;
            let d = m
                .distance(&g.source(&ba)?, &g.source(&a)?)
                .max(m.distance(&g.target(&ba)?, &g.target(&b)?));
            st.observe(d, || format!("sample {i}: a = {a:?}"));
            let l = g.compose(&c, &ba)?;
            let r = g.compose(&g.compose(&c, &b)?, &a)?;
            assoc.observe(g.deviation(&l, &r)?, || format!("sample {i}: a = {a:?}"));
            let et = g.identity(&g.target(&a)?)?;
            let du = g.deviation(&g.compose(&et, &a)?, &a)?.max(g.deviation(&g.compose(&a, &e)?, &a)?);
            unit.observe(du, || format!("sample {i}: a = {a:?}"));
            let ai = g.invert(&a)?;
            let di = g
                .deviation(&g.compose(&ai, &a)?, &e)?
                .max(g.deviation(&g.compose(&a, &ai)?, &et)?);
            inv.observe(di, || format!("sample {i}: a = {a:?}"));
            Ok(())
        };
        if let Err(e) = run(&mut rng, &mut ident, &mut st, &mut assoc, &mut unit, &mut inv) {
            assoc.error(&e);
        }
    }
    vec![ident, st, assoc, unit, inv]
}

/// Sampled check that `phi` is a groupoid morphism covering `base`.
pub fn groupoid_morphism_check<G1, G2, F, B>(
    phi: F,
    h1: &G1,
    h2: &G2,
    base: B,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Vec<Assertion>
where
    G1: Groupoid,
    G2: Groupoid,
    F: Fn(&G1::Arrow) -> Result<G2::Arrow>,
    B: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut comp = Assertion::new("Φ(b∘a) = Φ(b)∘Φ(a)", tol);
    let mut unit = Assertion::new("Φ(e_p) = e_{base(p)}", tol);
    let mut st = Assertion::new("s, t compatibility", tol);
    let mut rng = SeededRng::new(seed);
    let m2 = h2.base();
    for i in 0..samples {
        let run = |rng: &mut SeededRng, comp: &mut Assertion, unit: &mut Assertion, st: &mut Assertion| -> Result<()> {
            let p = h1.sample_object(rng)?;
            let a = h1.sample_arrow_from(&p, rng)?;
            let b = h1.sample_arrow_from(&h1.target(&a)?, rng)?;
            let (pa, pb) = (phi(&a)?, phi(&b)?);
            let du = h2.deviation(&phi(&h1.identity(&p)?)?, &h2.identity(&base(&p)?)?)?;
            unit.observe(du, || format!("sample {i}: p = {p:?}"));
            let ds = m2.distance(&h2.source(&pa)?, &base(&h1.source(&a)?)?);
            let dt = m2.distance(&h2.target(&pa)?, &base(&h1.target(&a)?)?);
            st.observe(ds.max(dt), || format!("sample {i}: a = {a:?}"));
            let lhs = phi(&h1.compose(&b, &a)?)?;
            comp.observe(h2.deviation(&lhs, &h2.compose(&pb, &pa)?)?, || format!("sample {i}: a = {a:?}, b = {b:?}"));
            Ok(())
        };
        if let Err(e) = run(&mut rng, &mut comp, &mut unit, &mut st) {
            comp.error(&e);
        }
    }
    vec![comp, unit, st]
}

/// `(K, R, θ)` on a groupoid `H ⇉ P`. Cosets `Kξ` are represented by `ξ`;
/// `Kξ = Kξ'` iff `ξ'∘ξ⁻¹ ∈ K`.
pub struct NormalSubgroupoidSystem<'a, H: Groupoid> {
    pub ambient: &'a H,
    pub in_k: Box<dyn Fn(&H::Arrow) -> Result<bool> + 'a>,
    /// `(p, q) ∈ R`.
    pub related: Box<dyn Fn(&[f64], &[f64]) -> Result<bool> + 'a>,
    /// Some `p` with `(p, q) ∈ R`.
    pub sample_related: Box<dyn Fn(&[f64], &mut SeededRng) -> Result<Vec<f64>> + 'a>,
    /// A representative of `θ(p, q)(Kξ)` for `s(ξ) = q`.
    pub theta: Box<dyn Fn(&[f64], &[f64], &H::Arrow) -> Result<H::Arrow> + 'a>,
}

impl<H: Groupoid> NormalSubgroupoidSystem<'_, H> {
    /// `Kξ = Kξ'`.
    pub fn same_coset(&self, a: &H::Arrow, b: &H::Arrow) -> Result<bool> {
        let h = self.ambient;
        (self.in_k)(&h.compose(b, &h.invert(a)?)?)
    }
}

/// The three conditions of a normal subgroupoid system plus `K` being wide.
pub fn nss_check<H: Groupoid>(n: &NormalSubgroupoidSystem<'_, H>, samples: usize, seed: u64) -> Vec<Assertion> {
    let h = n.ambient;
    let mut wide = Assertion::new("e_p ∈ K", 0.0);
    let mut c1 = Assertion::new("nss 1: (t(ξ₁), t(ξ)) ∈ R", 0.0);
    let mut c2 = Assertion::new("nss 2: θ(p,q)(K e_q) = K e_p", 0.0);
    let mut c3 = Assertion::new("nss 3: θ(p,q)(K(ξ₁∘ξ₂)) = K(ξ₁'∘ξ₂')", 0.0);
    let mut rng = SeededRng::new(seed);
    for i in 0..samples {
        let q = match h.sample_object(&mut rng) {
            Ok(q) => q,
            Err(e) => {
                wide.error(&e);
                continue;
            }
        };
        let step = |rng: &mut SeededRng, c: &mut Assertion, f: &dyn Fn(&mut SeededRng) -> Result<(bool, String)>| match f(rng) {
            Ok((ok, w)) => c.check(ok, || format!("sample {i}: {w}")),
            Err(e) => c.error(&e),
        };
        step(&mut rng, &mut wide, &|_| Ok(((n.in_k)(&h.identity(&q)?)?, format!("q = {q:?}"))));
        step(&mut rng, &mut c1, &|rng| {
            let p = (n.sample_related)(&q, rng)?;
            let xi = h.sample_arrow_from(&q, rng)?;
            let x1 = (n.theta)(&p, &q, &xi)?;
            Ok(((n.related)(&h.target(&x1)?, &h.target(&xi)?)?, format!("p = {p:?}, q = {q:?}, ξ = {xi:?}")))
        });
        step(&mut rng, &mut c2, &|rng| {
            let p = (n.sample_related)(&q, rng)?;
            let image = (n.theta)(&p, &q, &h.identity(&q)?)?;
            Ok((n.same_coset(&h.identity(&p)?, &image)?, format!("p = {p:?}, q = {q:?}")))
        });
        step(&mut rng, &mut c3, &|rng| {
            let p = (n.sample_related)(&q, rng)?;
            let x2 = h.sample_arrow_from(&q, rng)?;
            let x1 = h.sample_arrow_from(&h.target(&x2)?, rng)?;
            let x2p = (n.theta)(&p, &q, &x2)?;
            let x1p = (n.theta)(&h.target(&x2p)?, &h.target(&x2)?, &x1)?;
            let lhs = (n.theta)(&p, &q, &h.compose(&x1, &x2)?)?;
            let rhs = h.compose(&x1p, &x2p)?;
            Ok((n.same_coset(&lhs, &rhs)?, format!("p = {p:?}, q = {q:?}, ξ₂ = {x2:?}, ξ₁ = {x1:?}")))
        });
    }
    vec![wide, c1, c2, c3]
}

/// The model `K\H / θ` of the spiral example: `H = ℝ × P` (flow of
/// `∂θ + λ∂y`), `(T, (θ, y)) ↦ (T mod 2π, θ)` onto the rotation groupoid of
/// `S¹`, compared with the pair groupoid `S¹ × S¹`.
pub struct SpiralQuotientModel {
    pub upstairs: TransformationGroupoid,
    pub rotations: TransformationGroupoid,
    pub pair: PairGroupoid,
}

impl SpiralQuotientModel {
    pub fn new(lambda: f64) -> Result<Self> {
        use crate::symcore::{Coordinate, Expr};
        let cyl = Arc::new(ChartManifold::new(
            "cylinder",
            vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")],
        )?);
        let s1 = Arc::new(ChartManifold::new("S1", vec![Coordinate::circle("theta", 2.0 * PI)])?);
        let flow = GroupAction::new(
            Arc::new(LieGroupModel::real_vector(1)),
            cyl,
            vec![Expr::coord(1) + Expr::coord(0), Expr::coord(2) + Expr::constant(lambda) * Expr::coord(0)],
        )?;
        let rot = GroupAction::new(Arc::new(crate::lie2::u1()), s1.clone(), vec![Expr::coord(1) + Expr::coord(0)])?;
        Ok(SpiralQuotientModel {
            upstairs: TransformationGroupoid::new(Arc::new(flow)),
            rotations: TransformationGroupoid::new(Arc::new(rot)),
            pair: PairGroupoid { manifold: s1 },
        })
    }

    /// `(T, (θ, y)) ↦ (T mod 2π, θ)`.
    pub fn quotient_arrow(&self, a: &(Vec<f64>, Vec<f64>)) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![a.0[0].rem_euclid(2.0 * PI)], vec![a.1[0].rem_euclid(2.0 * PI)]))
    }

    /// `(α, θ) ↦ (θ + α, θ)`.
    pub fn to_pair(&self, a: &(Vec<f64>, Vec<f64>)) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.rotations.target(a)?, a.1.clone()))
    }

    /// Composition-table agreement of both maps, invariance of the quotient
    /// map under `K` and under the vertical translations, and the inverse
    /// of the pair isomorphism.
    pub fn check(&self, samples: usize, seed: u64) -> Vec<Assertion> {
        let base = |p: &[f64]| Ok(vec![p[0].rem_euclid(2.0 * PI)]);
        let mut out: Vec<Assertion> = groupoid_morphism_check(
            |a| self.quotient_arrow(a),
            &self.upstairs,
            &self.rotations,
            base,
            samples,
            ARROW_TOL,
            seed,
        )
        .into_iter()
        .map(|a| prefixed("quotient map", a))
        .collect();
        out.extend(
            groupoid_morphism_check(|a| self.to_pair(a), &self.rotations, &self.pair, |p| Ok(p.to_vec()), samples, ARROW_TOL, seed)
                .into_iter()
                .map(|a| prefixed("rotations ≅ S¹×S¹", a)),
        );
        let mut inv = Assertion::new("K- and θ-invariance of the quotient map", ARROW_TOL);
        let mut bij = Assertion::new("(θ', θ) ↦ (θ' − θ, θ) inverts the pair isomorphism", ARROW_TOL);
        let mut rng = SeededRng::new(seed ^ 0xABCD);
        for i in 0..samples {
            let t = rng.uniform(-10.0, 10.0);
            let p = vec![rng.uniform(0.0, 2.0 * PI), rng.uniform(-3.0, 3.0)];
            let k = (rng.index(5) as f64) - 2.0;
            let g = rng.uniform(-3.0, 3.0);
            let a = self.quotient_arrow(&(vec![t], p.clone()));
            let b = self.quotient_arrow(&(vec![t + 2.0 * PI * k], vec![p[0], p[1] + g]));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let d = self.rotations.deviation(&a, &b).unwrap_or(f64::INFINITY);
                    inv.observe(d, || format!("sample {i}: T = {t}, k = {k}, g = {g}"));
                    if let Ok(pair) = self.to_pair(&a) {
                        let back = (vec![(pair.0[0] - pair.1[0]).rem_euclid(2.0 * PI)], pair.1.clone());
                        bij.observe(self.rotations.deviation(&back, &a).unwrap_or(f64::INFINITY), || format!("sample {i}"));
                    }
                }
                (Err(e), _) | (_, Err(e)) => inv.error(&e),
            }
        }
        out.push(inv);
        out.push(bij);
        out
    }
}

fn prefixed(prefix: &str, mut a: Assertion) -> Assertion {
    a.name = format!("{prefix}: {}", a.name);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::FoliationModule;
    use crate::lie2::u1;
    use crate::quotient::{kernel_test, pushforward_foliation};
    use crate::report::all_passed;
    use crate::symcore::{Coordinate, Expr, SmoothMap, VectorField};

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::new("cyl", vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")]).unwrap())
    }

    fn line() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::euclidean("R", &["y"]))
    }

    #[test]
    fn flow_transformation_groupoid() {
        let act = GroupAction::new(Arc::new(LieGroupModel::real_vector(1)), line(), vec![Expr::coord(1) * Expr::coord(0).exp()]).unwrap();
        let h = TransformationGroupoid::new(Arc::new(act));
        assert!(all_passed(&groupoid_axiom_check(&h, 50, 1e-9, 1)));
        let a = h.compose(&(vec![0.5], vec![0.3f64.exp()]), &(vec![0.3], vec![1.0])).unwrap();
        assert!(h.deviation(&a, &(vec![0.8], vec![1.0])).unwrap() < 1e-12);
        let unit = TransformationGroupoid::new(Arc::new(
            GroupAction::new(Arc::new(LieGroupModel::trivial()), line(), vec![Expr::coord(0)]).unwrap(),
        ));
        let mut rng = SeededRng::new(3);
        let a = unit.sample_arrow_from(&[0.4], &mut rng).unwrap();
        assert_eq!(unit.target(&a).unwrap(), vec![0.4]);
    }

    #[test]
    fn pair_unit_and_lie2_models() {
        let pair = PairGroupoid { manifold: cylinder() };
        assert!(all_passed(&groupoid_axiom_check(&pair, 50, 1e-9, 2)));
        let unit = UnitGroupoid { manifold: cylinder() };
        assert!(all_passed(&groupoid_axiom_check(&unit, 50, 1e-9, 2)));
        let two = crate::lie2::semidirect_product(crate::lie2::CrossedModule::inclusion(Arc::new(u1()))).unwrap();
        assert!(all_passed(&groupoid_axiom_check(&two, 50, 1e-9, 2)));
    }

    fn radial() -> Arc<SubmersionQuotient> {
        let c = cylinder();
        let map = SmoothMap::new(c.clone(), line(), vec![Expr::coord(1)], None).unwrap();
        let act = Arc::new(GroupAction::translation(Arc::new(u1()), c, &[0]).unwrap());
        Arc::new(SubmersionQuotient::from_action(map, act).unwrap())
    }

    #[test]
    fn pullback_groupoids() {
        let q = radial();
        let unit = PullbackGroupoid::new(UnitGroupoid { manifold: line() }, q.clone()).unwrap();
        assert!(all_passed(&groupoid_axiom_check(&unit, 50, 1e-9, 4)));
        let mut rng = SeededRng::new(1);
        let a = unit.sample_arrow_from(&[0.2, 1.5], &mut rng).unwrap();
        assert!((a.target[1] - 1.5).abs() < 1e-12);
        let pair = PullbackGroupoid::new(PairGroupoid { manifold: line() }, q.clone()).unwrap();
        let big = PairGroupoid { manifold: cylinder() };
        let r = groupoid_morphism_check(|a: &PullbackArrow<_>| Ok((a.target.clone(), a.source.clone())), &pair, &big, |p| Ok(p.to_vec()), 50, 1e-9, 5);
        assert!(all_passed(&r), "{r:?}");
        assert!(pair.arrow(&[0.0, 1.0], (vec![2.0], vec![3.0]), &[0.0, 3.0]).is_err());
    }

    #[test]
    fn semidirect_of_unit_is_transformation() {
        let c = cylinder();
        let act = Arc::new(GroupAction::translation(Arc::new(u1()), c.clone(), &[0]).unwrap());
        let semi = SemidirectGroupoid::new(UnitGroupoid { manifold: c.clone() }, act.clone(), 20, 1e-9).unwrap();
        assert!(all_passed(&groupoid_axiom_check(&semi, 50, 1e-9, 6)));
        let tg = TransformationGroupoid::new(act.clone());
        let r = groupoid_morphism_check(
            |a: &SemiArrow<Vec<f64>>| Ok((a.g.clone(), act.apply(&u1().inv(&a.g)?, &a.inner)?)),
            &semi,
            &tg,
            |p| Ok(p.to_vec()),
            50,
            1e-9,
            7,
        );
        assert!(all_passed(&r), "{r:?}");
    }

    #[test]
    fn broken_morphism_fails_the_unit_law() {
        let fl = |c: Arc<ChartManifold>, e: Expr| {
            TransformationGroupoid::new(Arc::new(GroupAction::new(Arc::new(LieGroupModel::real_vector(1)), c, vec![Expr::coord(1) + Expr::coord(0), e]).unwrap()))
        };
        let c = cylinder();
        let up = fl(c.clone(), Expr::coord(2) * Expr::coord(0).exp());
        let down = TransformationGroupoid::new(Arc::new(
            GroupAction::new(Arc::new(LieGroupModel::real_vector(1)), line(), vec![Expr::coord(1) * Expr::coord(0).exp()]).unwrap(),
        ));
        let base = |p: &[f64]| Ok(vec![p[1]]);
        let good = groupoid_morphism_check(|a: &(Vec<f64>, Vec<f64>)| Ok((a.0.clone(), vec![a.1[1]])), &up, &down, base, 50, 1e-9, 8);
        assert!(all_passed(&good), "{good:?}");
        let bad = groupoid_morphism_check(|a: &(Vec<f64>, Vec<f64>)| Ok((vec![a.0[0] + 1.0], vec![a.1[1]])), &up, &down, base, 20, 1e-9, 8);
        assert!(!bad[1].passed);
    }

    #[test]
    fn spiral_quotient_model() {
        let m = SpiralQuotientModel::new(1.0).unwrap();
        let r = m.check(100, 9);
        assert!(all_passed(&r), "{r:?}");
        let a = m.quotient_arrow(&(vec![2.0 * PI + 0.5], vec![1.0, 4.0])).unwrap();
        assert!((a.0[0] - 0.5).abs() < 1e-12 && a.1 == vec![1.0]);
    }

    fn spiral_system(broken: bool) -> Vec<Assertion> {
        let c = cylinder();
        let f = FoliationModule::from_fields(c.clone(), vec![VectorField::parse(c.clone(), &["1", "1"]).unwrap()]).unwrap();
        let s1 = Arc::new(ChartManifold::new("S1", vec![Coordinate::circle("theta", 2.0 * PI)]).unwrap());
        let map = SmoothMap::new(c.clone(), s1, vec![Expr::coord(0)], None).unwrap();
        let act = Arc::new(GroupAction::translation(Arc::new(LieGroupModel::real_vector(1)), c.clone(), &[1]).unwrap());
        let q = SubmersionQuotient::from_action(map, act.clone()).unwrap();
        assert_eq!(pushforward_foliation(&f, &q).unwrap().len(), 1);
        let set = GeneratorSet::of_foliation(&f, "F");
        let h = HolonomyGroupoid::new(set.clone());
        let qr = &q;
        let n = NormalSubgroupoidSystem {
            ambient: &h,
            in_k: Box::new(move |w| kernel_test(w, qr)),
            related: Box::new(move |p, r| Ok(qr.target().distance(&qr.project(p)?, &qr.project(r)?) < 1e-9)),
            sample_related: Box::new(|r, rng| Ok(vec![r[0], r[1] + rng.uniform(-1.0, 1.0)])),
            theta: Box::new(move |p, r, w| {
                let g = act.solve(r, p).ok_or_else(|| Error::Precondition("not related".into()))?;
                let moved = lifted_action(&g, w, &act)?;
                if broken {
                    let extra = HolonomyWord::single(&set, vec![0.5], moved.target())?;
                    bisubmersion::compose(&extra, &moved)
                } else {
                    Ok(moved)
                }
            }),
        };
        nss_check(&n, 10, 11)
    }

    #[test]
    fn spiral_normal_subgroupoid_system() {
        let r = spiral_system(false);
        assert!(all_passed(&r), "{r:?}");
        let r = spiral_system(true);
        assert!(!r[1].passed);
    }

    #[test]
    fn everything_collapses() {
        let pair = PairGroupoid { manifold: cylinder() };
        let n = NormalSubgroupoidSystem {
            ambient: &pair,
            in_k: Box::new(|_| Ok(true)),
            related: Box::new(|_, _| Ok(true)),
            sample_related: Box::new(|_, rng| Ok(vec![rng.uniform(0.0, 6.0), rng.uniform(-3.0, 3.0)])),
            theta: Box::new(|p, _, a| Ok((a.0.clone(), p.to_vec()))),
        };
        assert!(all_passed(&nss_check(&n, 50, 12)));
    }
}
