//! The action of a Lie 2-group on holonomy words.
//!
//! `G` acts by conjugating the legs of each step by `ĝ`; the subgroup `H`
//! integrating the ideal `𝔥 = { x : v_x ∈ F̂ }` acts by left multiplication
//! with the words `φ(h, p)` that carry `ĥ` near `p`.

use std::sync::Arc;

use crate::bisubmersion::{compose, invert, max_deviation, GeneratorSet, HolonomyWord, Step};
use crate::groupoid::{random_element, Groupoid, HolonomyGroupoid};
use crate::error::{Error, Result};
use crate::foliation::{FoliationModule, MEMBERSHIP_TOL};
use crate::linalg;
use crate::report::Assertion;
use crate::sampling::{Region, SeededRng};
use crate::symcore::{lie_bracket, Expr};

use super::action::GroupAction;
use super::crossed::{semidirect_product, CrossedModule, Lie2Group, TwoElement};
use super::group::LieGroupModel;

/// Discretization step (in the path parameter) of `φ`.
pub const PHI_STEP: f64 = 0.05;
/// Relative least-squares residual allowed when writing `v_x` in the generators.
pub const PHI_LSQ_TOL: f64 = 1e-6;

/// `g ⋆ w`: source moved by `ĝ`, every path step over `ĝ_*` of its set.
pub fn lifted_action(g: &[f64], w: &HolonomyWord, action: &GroupAction) -> Result<HolonomyWord> {
    let group = action.group();
    let g = group.normalize(g);
    if group.distance(&g, group.unit()) == 0.0 {
        return Ok(w.clone());
    }
    let source = action.apply(&g, w.source())?;
    let steps = w
        .steps()
        .iter()
        .map(|s| {
            Ok(match s {
                Step::Path { set, coeffs } => Step::Path {
                    set: action.pushforward_set(&g, set)?,
                    coeffs: coeffs.clone(),
                },
                Step::Twist { action: a, g: k } => Step::Twist {
                    action: a.clone(),
                    g: a.group().conj(&g, k)?,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HolonomyWord::new(w.manifold().clone(), &source, steps)
}

/// `g ⋆ w` written as `ĝ ∘ w ∘ ĝ⁻¹` with explicit twist steps.
pub fn lifted_action_twisted(g: &[f64], w: &HolonomyWord, action: &Arc<GroupAction>) -> Result<HolonomyWord> {
    let group = action.group();
    let source = action.apply(g, w.source())?;
    let mut steps = vec![Step::Twist {
        action: action.clone(),
        g: group.inv(g)?,
    }];
    steps.extend(w.steps().iter().cloned());
    steps.push(Step::Twist {
        action: action.clone(),
        g: group.normalize(g),
    });
    HolonomyWord::new(w.manifold().clone(), &source, steps)
}

/// A basis of `𝔥` in Lie-algebra coordinates, with the sampled check that
/// it is an ideal.
#[derive(Debug, Clone)]
pub struct Ideal {
    pub basis: Vec<Vec<f64>>,
    pub algebra_dim: usize,
    pub ideal_check: Assertion,
}

impl Ideal {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.algebra_dim
    }
}

/// `𝔥 = { x : v_x(p) ∈ F_p at every sample point }`.
pub fn compute_ideal(f: &FoliationModule, action: &GroupAction, region: &Region) -> Result<Ideal> {
    let m = f.manifold();
    let n = m.dim();
    let d = action.group().dim();
    let pts = region.points(m)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        let proj = linalg::complement_projector(&f.values_at(p)?, n);
        let vals: Vec<Vec<f64>> = action.generators().iter().map(|v| v.eval(p)).collect::<Result<_>>()?;
        for i in 0..n {
            let row: Vec<f64> = (0..d).map(|j| (0..n).map(|k| proj[(i, k)] * vals[j][k]).sum()).collect();
            rows.push(row);
        }
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let scale = rows.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let basis = if scale <= MEMBERSHIP_TOL { identity_basis(d) } else { linalg::null_space(&a) };
    let mut check = Assertion::new("𝔥 is an ideal: [v_x, v_y] ∈ F for y ∈ 𝔥", MEMBERSHIP_TOL);
    let probe = region.clone().with_samples(region.samples.min(50));
    for y in &basis {
        let vy = action.generator(y)?;
        for (i, vx) in action.generators().iter().enumerate() {
            let b = lie_bracket(vx, &vy)?;
            let r = f.pointwise_membership(&b, &probe)?;
            check.observe(r.worst_residual, || format!("x = e{i}, y = {y:?} at {:?}", r.witness));
        }
    }
    Ok(Ideal {
        basis,
        algebra_dim: d,
        ideal_check: check,
    })
}

fn identity_basis(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

#[derive(Debug, Clone)]
enum Integration {
    Trivial,
    Whole,
    Abelian(Vec<Vec<f64>>),
}

/// The Lie 2-group `H ⋊ G` acting on the words of a foliation.
#[derive(Debug)]
pub struct WordAction {
    foliation: FoliationModule,
    set: Arc<GeneratorSet>,
    action: Arc<GroupAction>,
    ideal: Ideal,
    two: Lie2Group,
    integration: Integration,
}

impl WordAction {
    /// Computes `𝔥` on `region`, integrates it to `H ⊂ G` and builds `H ⋊ G`.
    pub fn new(foliation: FoliationModule, action: Arc<GroupAction>, region: &Region) -> Result<Self> {
        let ideal = compute_ideal(&foliation, &action, region)?;
        let g = action.group().clone();
        let (cm, integration) = if ideal.is_zero() {
            let h = Arc::new(LieGroupModel::trivial());
            (CrossedModule::direct_product(h, g), Integration::Trivial)
        } else if ideal.is_full() {
            (CrossedModule::inclusion(g), Integration::Whole)
        } else if g.is_abelian() {
            let k = ideal.dim();
            let h = Arc::new(LieGroupModel::real_vector(k));
            let lin: Vec<Expr> = (0..g.dim())
                .map(|j| {
                    crate::symcore::sum((0..k).map(|i| Expr::constant(ideal.basis[i][j]) * Expr::coord(i)).collect())
                })
                .collect();
            let boundary = g.exp_exprs().iter().map(|c| c.substitute_coords(&lin).simplify()).collect();
            let dg = g.dim();
            let act = (0..k).map(|i| Expr::coord(dg + i)).collect();
            (
                CrossedModule::new(h, g, boundary, act)?,
                Integration::Abelian(ideal.basis.clone()),
            )
        } else {
            return Err(Error::Precondition(
                "proper non-zero ideals of non-abelian groups are not integrated".into(),
            ));
        };
        let two = semidirect_product(cm)?;
        let set = GeneratorSet::of_foliation(&foliation, "F");
        Ok(WordAction {
            foliation,
            set,
            action,
            ideal,
            two,
            integration,
        })
    }

    pub fn foliation(&self) -> &FoliationModule {
        &self.foliation
    }

    /// The generator set used for the steps of `φ`.
    pub fn set(&self) -> &Arc<GeneratorSet> {
        &self.set
    }

    pub fn action(&self) -> &Arc<GroupAction> {
        &self.action
    }

    pub fn ideal(&self) -> &Ideal {
        &self.ideal
    }

    pub fn lie2_group(&self) -> &Lie2Group {
        &self.two
    }

    /// `x ∈ 𝔤` with `exp(x) = ∂(h)`.
    pub fn algebra_vector(&self, h: &[f64]) -> Result<Vec<f64>> {
        let g = self.action.group();
        Ok(match &self.integration {
            Integration::Trivial => vec![0.0; g.dim()],
            Integration::Whole => g.log(h)?,
            Integration::Abelian(basis) => (0..g.dim()).map(|j| basis.iter().zip(h).map(|(b, c)| b[j] * c).sum()).collect(),
        })
    }

    /// `g ⋆ w`.
    pub fn lifted(&self, g: &[f64], w: &HolonomyWord) -> Result<HolonomyWord> {
        lifted_action(g, w, &self.action)
    }

    /// The word carrying `ĥ` near `p`: the path `t ↦ exp(t x)·p` cut into
    /// pieces of length `PHI_STEP`, each a constant combination of the
    /// generators fitted to `v_x` at the piece's midpoint.
    pub fn phi(&self, h: &[f64], p: &[f64]) -> Result<HolonomyWord> {
        let x = self.algebra_vector(h)?;
        let m = self.foliation.manifold();
        if x.iter().all(|c| *c == 0.0) {
            return HolonomyWord::empty(m.clone(), p);
        }
        let g = self.action.group();
        let v = self.action.generator(&x)?;
        let pieces = (1.0 / PHI_STEP).round() as usize;
        let mut steps: Vec<Step> = Vec::new();
        let mut last: Option<Vec<f64>> = None;
        for j in 0..pieces {
            let t = (j as f64 + 0.5) / pieces as f64;
            let tx: Vec<f64> = x.iter().map(|c| c * t).collect();
            let at = self.action.apply(&g.exp(&tx)?, p)?;
            let target = v.eval(&at)?;
            let (c, r) = linalg::least_squares(&self.foliation.values_at(&at)?, &target);
            let tol = PHI_LSQ_TOL * (1.0 + linalg::norm(&target));
            if r > tol {
                return Err(Error::Residual { residual: r, tolerance: tol });
            }
            let c: Vec<f64> = c.iter().map(|ci| ci / pieces as f64).collect();
            match (&mut last, steps.last_mut()) {
                (Some(prev), Some(Step::Path { coeffs, .. })) if prev.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-12) => {
                    for (acc, ci) in coeffs.iter_mut().zip(&c) {
                        *acc += ci;
                    }
                }
                _ => {
                    last = Some(c.clone());
                    steps.push(Step::Path {
                        set: self.set.clone(),
                        coeffs: c,
                    });
                }
            }
        }
        HolonomyWord::new(m.clone(), p, steps)
    }

    /// `h ⋆ w = φ(h, t(w)) ∘ w`.
    pub fn left(&self, h: &[f64], w: &HolonomyWord) -> Result<HolonomyWord> {
        compose(&self.phi(h, w.target())?, w)
    }

    /// `(h, g) ⋆ w = h ⋆ (g ⋆ w)`.
    pub fn act(&self, a: &TwoElement, w: &HolonomyWord) -> Result<HolonomyWord> {
        self.left(&a.0, &self.lifted(&a.1, w)?)
    }

    /// The base action of `(h, g)`: `p ↦ ∂(h) g · p`.
    pub fn act_on_point(&self, a: &TwoElement, p: &[f64]) -> Result<Vec<f64>> {
        let t = self.two.target(a)?;
        self.action.apply(&t, p)
    }
}

fn sampled<F>(name: &str, samples: usize, tol: f64, seed: u64, mut f: F) -> Assertion
where
    F: FnMut(&mut SeededRng) -> Result<f64>,
{
    let mut a = Assertion::new(name, tol);
    let mut rng = SeededRng::new(seed);
    for i in 0..samples {
        match f(&mut rng) {
            Ok(d) => a.observe(d, || format!("sample {i}")),
            Err(e) => a.error(&e),
        }
    }
    a
}

fn deviation(a: &HolonomyWord, b: &HolonomyWord) -> Result<f64> {
    Ok(max_deviation(a, b)?.unwrap_or(f64::INFINITY))
}

/// Sampled laws of the action on words: `G` acts by groupoid
/// automorphisms, `H ⋊ G` acts as a group, and the two equivariance facts
/// `g ⋆ φ(h, p) = φ(C_g h, g·p)` and
/// `∂(h) ⋆ w = φ(h, t(w)) ∘ w ∘ φ(h⁻¹, ∂(h)·s(w))`.
pub fn word_action_check(wa: &WordAction, samples: usize, tol: f64, seed: u64) -> Vec<Assertion> {
    let words = HolonomyGroupoid::new(wa.set().clone());
    let two = wa.lie2_group();
    let g_of = |rng: &mut SeededRng| random_element(two.g(), rng);
    let h_of = |rng: &mut SeededRng| random_element(two.h(), rng);
    let word = |rng: &mut SeededRng| -> Result<HolonomyWord> {
        let p = words.sample_object(rng)?;
        words.sample_arrow_from(&p, rng)
    };
    let auto = sampled("g ⋆ (w₂∘w₁) = (g ⋆ w₂)∘(g ⋆ w₁)", samples, tol, seed, |rng| {
        let w1 = word(rng)?;
        let w2 = words.sample_arrow_from(w1.target(), rng)?;
        let g = g_of(rng);
        let lhs = wa.lifted(&g, &compose(&w2, &w1)?)?;
        deviation(&lhs, &compose(&wa.lifted(&g, &w2)?, &wa.lifted(&g, &w1)?)?)
    });
    let law = sampled("(a·b) ⋆ w = a ⋆ (b ⋆ w)", samples, tol, seed ^ 1, |rng| {
        let w = word(rng)?;
        let a = (h_of(rng), g_of(rng));
        let b = (h_of(rng), g_of(rng));
        deviation(&wa.act(&two.mul(&a, &b)?, &w)?, &wa.act(&a, &wa.act(&b, &w)?)?)
    });
    let fact1 = sampled("g ⋆ φ(h, p) = φ(C_g h, g·p)", samples, tol, seed ^ 2, |rng| {
        let p = words.sample_object(rng)?;
        let (g, h) = (g_of(rng), h_of(rng));
        let lhs = wa.lifted(&g, &wa.phi(&h, &p)?)?;
        let ch = two.crossed_module().act(&g, &h)?;
        deviation(&lhs, &wa.phi(&ch, &wa.action().apply(&g, &p)?)?)
    });
    let fact2 = sampled("∂(h) ⋆ w = φ(h, t(w)) ∘ w ∘ φ(h⁻¹, ∂(h)·s(w))", samples, tol, seed ^ 3, |rng| {
        let w = word(rng)?;
        let h = h_of(rng);
        let dh = two.crossed_module().boundary(&h)?;
        let hs = wa.action().apply(&dh, w.source())?;
        let hinv = two.h().inv(&h)?;
        let rhs = compose(&compose(&wa.phi(&h, w.target())?, &w)?, &wa.phi(&hinv, &hs)?)?;
        deviation(&wa.lifted(&dh, &w)?, &rhs)
    });
    vec![auto, law, fact1, fact2]
}

/// Words in `ker Ξ` are `φ(h, s(w))` for the `h` moving `s(w)` to `t(w)`.
pub fn kernel_image_check(
    wa: &WordAction,
    q: &crate::quotient::SubmersionQuotient,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Assertion {
    let words = HolonomyGroupoid::new(wa.set().clone());
    let two = wa.lie2_group();
    sampled("ker Ξ = image of φ", samples, tol, seed, |rng| {
        let p = words.sample_object(rng)?;
        let w = words.sample_arrow_from(&p, rng)?;
        let g = random_element(two.h(), rng);
        let dg = two.crossed_module().boundary(&g)?;
        let k = compose(&invert(&wa.lifted(&dg, &w)?)?, &compose(&wa.phi(&g, w.target())?, &w)?)?;
        if !crate::quotient::kernel_test(&k, q)? {
            return Ok(f64::INFINITY);
        }
        let x = wa
            .action()
            .solve(k.source(), k.target())
            .ok_or_else(|| Error::Precondition("no group element moves s(k) to t(k)".into()))?;
        let h = match &wa.integration {
            Integration::Whole => x,
            _ => return Err(Error::Precondition("kernel image check needs 𝔥 = 𝔤".into())),
        };
        deviation(&k, &wa.phi(&h, k.source())?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisubmersion::equivalent;
    use crate::lie2::group::u1;
    use crate::symcore::{ChartManifold, Coordinate, VectorField};
    use std::f64::consts::PI;

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::new("cyl", vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")]).unwrap())
    }

    fn foliation(m: &Arc<ChartManifold>, gens: &[&[&str]]) -> FoliationModule {
        let fields = gens.iter().map(|g| VectorField::parse(m.clone(), g).unwrap()).collect();
        FoliationModule::from_fields(m.clone(), fields).unwrap()
    }

    fn rotation(m: &Arc<ChartManifold>) -> Arc<GroupAction> {
        Arc::new(GroupAction::translation(Arc::new(u1()), m.clone(), &[0]).unwrap())
    }

    fn vertical(m: &Arc<ChartManifold>) -> Arc<GroupAction> {
        Arc::new(GroupAction::translation(Arc::new(LieGroupModel::real_vector(1)), m.clone(), &[1]).unwrap())
    }

    #[test]
    fn ideals_of_the_examples() {
        let c = cylinder();
        let region = Region::default_for(&c);
        let spiral = foliation(&c, &[&["1", "y"]]);
        assert_eq!(compute_ideal(&spiral, &rotation(&c), &region).unwrap().dim(), 0);
        let slanted = foliation(&c, &[&["1", "1"]]);
        assert_eq!(compute_ideal(&slanted, &vertical(&c), &region).unwrap().dim(), 0);
        let pullback = foliation(&c, &[&["1", "0"], &["0", "y"]]);
        let ideal = compute_ideal(&pullback, &rotation(&c), &region).unwrap();
        assert!(ideal.is_full() && ideal.ideal_check.passed);
    }

    #[test]
    fn rotation_lifts_words_by_translation() {
        let c = cylinder();
        let f = foliation(&c, &[&["1", "y"]]);
        let set = GeneratorSet::of_foliation(&f, "F");
        let w = HolonomyWord::single(&set, vec![0.8], &[0.3, 0.5]).unwrap();
        let a = rotation(&c);
        let lifted = lifted_action(&[0.4], &w, &a).unwrap();
        assert!(c.distance(lifted.source(), &[0.7, 0.5]) < 1e-12);
        let direct = HolonomyWord::single(&set, vec![0.8], &[0.7, 0.5]).unwrap();
        assert!(equivalent(&lifted, &direct).unwrap());
        assert!(equivalent(&lifted, &lifted_action_twisted(&[0.4], &w, &a).unwrap()).unwrap());
        assert_eq!(lifted_action(&[0.0], &w, &a).unwrap().source(), w.source());
    }

    #[test]
    fn phi_on_the_pullback_foliation() {
        let c = cylinder();
        let f = foliation(&c, &[&["1", "0"], &["0", "y"]]);
        let wa = WordAction::new(f, rotation(&c), &Region::default_for(&c)).unwrap();
        let p = [0.5, 1.5];
        let w = wa.phi(&[0.9], &p).unwrap();
        assert_eq!(w.len(), 1);
        let direct = HolonomyWord::single(wa.set(), vec![0.9, 0.0], &p).unwrap();
        assert!(equivalent(&w, &direct).unwrap());
        assert!(wa.phi(&[0.0], &p).unwrap().is_empty());
        // morphism law: φ(h2 h1, p) ≡ φ(h2, ĥ1 p) ∘ φ(h1, p)
        let (h1, h2) = ([0.4], [1.1]);
        let h21 = wa.lie2_group().h().mul(&h2, &h1).unwrap();
        let w1 = wa.phi(&h1, &p).unwrap();
        let w2 = wa.phi(&h2, w1.target()).unwrap();
        assert!(equivalent(&wa.phi(&h21, &p).unwrap(), &compose(&w2, &w1).unwrap()).unwrap());
    }

    #[test]
    fn phi_needs_the_ideal() {
        let c = cylinder();
        let f = foliation(&c, &[&["1", "y"]]);
        let wa = WordAction::new(f, rotation(&c), &Region::default_for(&c)).unwrap();
        assert_eq!(wa.lie2_group().h().dim(), 0);
        let w = HolonomyWord::single(wa.set(), vec![0.3], &[0.0, 1.0]).unwrap();
        let acted = wa.act(&(vec![], vec![1.0]), &w).unwrap();
        assert!(equivalent(&acted, &wa.lifted(&[1.0], &w).unwrap()).unwrap());
    }

    #[test]
    fn left_action_preserves_source_and_fact_two_holds() {
        let c = cylinder();
        let f = foliation(&c, &[&["1", "0"], &["0", "y"]]);
        let wa = WordAction::new(f, rotation(&c), &Region::default_for(&c)).unwrap();
        let w = HolonomyWord::single(wa.set(), vec![0.3, 0.7], &[0.2, 1.0]).unwrap();
        let h = [0.6];
        let l = wa.left(&h, &w).unwrap();
        assert_eq!(l.source(), w.source());
        let hs = wa.action().apply(&h, w.source()).unwrap();
        let hinv = wa.lie2_group().h().inv(&h).unwrap();
        let rhs = compose(&compose(&wa.phi(&h, w.target()).unwrap(), &w).unwrap(), &wa.phi(&hinv, &hs).unwrap()).unwrap();
        assert!(equivalent(&wa.lifted(&h, &w).unwrap(), &rhs).unwrap());
        assert!(equivalent(&invert(&invert(&l).unwrap()).unwrap(), &l).unwrap());
    }

    #[test]
    fn word_action_laws_on_the_pullback_case() {
        let c = cylinder();
        let f = foliation(&c, &[&["1", "0"], &["0", "y"]]);
        let wa = WordAction::new(f, rotation(&c), &Region::default_for(&c)).unwrap();
        let r = word_action_check(&wa, 10, 1e-5, 1);
        assert!(crate::report::all_passed(&r), "{r:?}");
        let line = Arc::new(ChartManifold::euclidean("R", &["y"]));
        let map = crate::symcore::SmoothMap::new(c.clone(), line, vec![Expr::coord(1)], None).unwrap();
        let q = crate::quotient::SubmersionQuotient::from_action(map, wa.action().clone()).unwrap();
        let a = kernel_image_check(&wa, &q, 10, 1e-5, 2);
        assert!(a.passed, "{a:?}");
    }
}
