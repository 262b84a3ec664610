//! Lie 2-group actions on groupoids: the `∗` action on the pullback
//! groupoid, the sampled action axioms, and the comparison with the action
//! on words.

use std::sync::Arc;

use crate::error::Result;
use crate::groupoid::{random_element, Groupoid, HolonomyGroupoid, PullbackArrow, PullbackGroupoid};
use crate::quotient::{xi, PullbackCase, SubmersionQuotient};
use crate::report::Assertion;
use crate::sampling::SeededRng;

use super::action::GroupAction;
use super::crossed::{Lie2Group, TwoElement};
use super::holonomy::WordAction;

/// `(h, g) ∗ (p, ζ, q) = (∂(h) g·p, ζ, g·q)`.
pub fn star_pullback<A: Clone>(
    two: &Lie2Group,
    action: &GroupAction,
    a: &TwoElement,
    arrow: &PullbackArrow<A>,
) -> Result<PullbackArrow<A>> {
    Ok(PullbackArrow {
        target: action.apply(&two.target(a)?, &arrow.target)?,
        inner: arrow.inner.clone(),
        source: action.apply(&a.1, &arrow.source)?,
    })
}

/// Sampled check that `act : (H⋊G) × K → K` is a group action and a
/// groupoid morphism `(H⋊G ⇉ G) × (K ⇉ P) → (K ⇉ P)` covering
/// `(g, p) ↦ g·p`.
pub fn action_axiom_check<K, F, O>(
    two: &Lie2Group,
    k: &K,
    act: F,
    act_object: O,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Vec<Assertion>
where
    K: Groupoid,
    F: Fn(&TwoElement, &K::Arrow) -> Result<K::Arrow>,
    O: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let mut unit = Assertion::new("action: (e, e) ∗ ξ = ξ", tol);
    let mut law = Assertion::new("action: (a·b) ∗ ξ = a ∗ (b ∗ ξ)", tol);
    let mut cover = Assertion::new("action: s(a ∗ ξ) = s(a)·s(ξ), t(a ∗ ξ) = t(a)·t(ξ)", tol);
    let mut ident = Assertion::new("action: e_g ∗ e_p = e_{g·p}", tol);
    let mut morph = Assertion::new("action: (b∘a) ∗ (ξ₂∘ξ₁) = (b ∗ ξ₂)∘(a ∗ ξ₁)", tol);
    let mut rng = SeededRng::new(seed);
    let m = k.base();
    for i in 0..samples {
        let run = |rng: &mut SeededRng, asr: &mut [&mut Assertion; 5]| -> Result<()> {
            let p = k.sample_object(rng)?;
            let x1 = k.sample_arrow_from(&p, rng)?;
            let x2 = k.sample_arrow_from(&k.target(&x1)?, rng)?;
            let a = two.sample_arrow_from(&random_element(two.g(), rng), rng)?;
            let b = two.sample_arrow_from(&two.target(&a)?, rng)?;
            let ax = act(&a, &x1)?;
            asr[0].observe(k.deviation(&act(&two.unit(), &x1)?, &x1)?, || format!("sample {i}: ξ = {x1:?}"));
            let ab = act(&two.mul(&a, &b)?, &x1)?;
            let a_b = act(&a, &act(&b, &x1)?)?;
            asr[1].observe(k.deviation(&ab, &a_b)?, || format!("sample {i}: a = {a:?}, b = {b:?}"));
            let ds = m.distance(&k.source(&ax)?, &act_object(&a.1, &k.source(&x1)?)?);
            let dt = m.distance(&k.target(&ax)?, &act_object(&two.target(&a)?, &k.target(&x1)?)?);
            asr[2].observe(ds.max(dt), || format!("sample {i}: a = {a:?}, ξ = {x1:?}"));
            let gp = act_object(&a.1, &p)?;
            let di = k.deviation(&act(&two.identity(&a.1), &k.identity(&p)?)?, &k.identity(&gp)?)?;
            asr[3].observe(di, || format!("sample {i}: g = {:?}, p = {p:?}", a.1));
            let lhs = act(&two.compose(&b, &a)?, &k.compose(&x2, &x1)?)?;
            let rhs = k.compose(&act(&b, &x2)?, &ax)?;
            asr[4].observe(k.deviation(&lhs, &rhs)?, || format!("sample {i}: a = {a:?}, b = {b:?}"));
            Ok(())
        };
        let mut all = [&mut unit, &mut law, &mut cover, &mut ident, &mut morph];
        if let Err(e) = run(&mut rng, &mut all) {
            // the first assertion not yet sampled this round gets the error
            let idx = all.iter().position(|a| a.samples <= i).unwrap_or(4);
            all[idx].error(&e);
        }
    }
    vec![unit, law, cover, ident, morph]
}

/// The pullback groupoid `P ×_M H(F_M) ×_M P` over the projected generators.
pub fn pullback_word_groupoid(
    wa: &WordAction,
    q: &Arc<SubmersionQuotient>,
) -> Result<PullbackGroupoid<HolonomyGroupoid>> {
    let down = q.project_set(wa.set())?;
    PullbackGroupoid::new(HolonomyGroupoid::new(down), q.clone())
}

/// `φ((h, g) ⋆ w) = (h, g) ∗ φ(w)` on sampled words and elements, `φ` the
/// map `[w] ↦ (t(w), Ξ(w), s(w))`.
pub fn same_action_check(
    wa: &WordAction,
    case: &PullbackCase<'_>,
    q: &Arc<SubmersionQuotient>,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<Assertion> {
    let two = wa.lie2_group();
    let words = HolonomyGroupoid::new(wa.set().clone());
    let pb = pullback_word_groupoid(wa, q)?;
    let mut a = Assertion::new("φ((h,g) ⋆ w) = (h,g) ∗ φ(w)", tol);
    let mut rng = SeededRng::new(seed);
    for i in 0..samples {
        let r = (|| -> Result<f64> {
            let p = words.sample_object(&mut rng)?;
            let w = words.sample_arrow_from(&p, &mut rng)?;
            let el = two.sample_arrow_from(&random_element(two.g(), &mut rng), &mut rng)?;
            let (t, z, s) = case.varphi(&wa.act(&el, &w)?)?;
            let lhs = pb.arrow(&t, z, &s)?;
            let (t, z, s) = case.varphi(&w)?;
            let rhs = star_pullback(two, wa.action(), &el, &pb.arrow(&t, z, &s)?)?;
            pb.deviation(&lhs, &rhs)
        })();
        match r {
            Ok(d) => a.observe(d, || format!("sample {i}")),
            Err(e) => a.error(&e),
        }
    }
    Ok(a)
}

/// `Ξ((h, g) ⋆ w) = Ξ(w)` on sampled words and elements.
pub fn orbit_in_fiber_check(
    wa: &WordAction,
    q: &SubmersionQuotient,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Assertion {
    let two = wa.lie2_group();
    let words = HolonomyGroupoid::new(wa.set().clone());
    let mut a = Assertion::new("Ξ((h,g) ⋆ w) = Ξ(w)", tol);
    let mut rng = SeededRng::new(seed);
    for i in 0..samples {
        let r = (|| -> Result<f64> {
            let p = words.sample_object(&mut rng)?;
            let w = words.sample_arrow_from(&p, &mut rng)?;
            let el = two.sample_arrow_from(&random_element(two.g(), &mut rng), &mut rng)?;
            let moved = xi(&wa.act(&el, &w)?, q)?;
            Ok(crate::bisubmersion::max_deviation(&moved, &xi(&w, q)?)?.unwrap_or(f64::INFINITY))
        })();
        match r {
            Ok(d) => a.observe(d, || format!("sample {i}")),
            Err(e) => a.error(&e),
        }
    }
    a
}
