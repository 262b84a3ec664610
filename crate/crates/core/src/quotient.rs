//! Surjective submersions `π : P → M`, pushforward and pullback of
//! foliations, the morphism `Ξ : H(F) → H(F_M)` on words, and the
//! fibration diagnostics.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::bisubmersion::{compose, equivalent, invert, GeneratorSet, HolonomyWord, Step};
use crate::error::{Error, Result};
use crate::flows::{leaf_sample, LEAF_SEED};
use crate::foliation::{FoliationModule, MEMBERSHIP_TOL};
use crate::lie2::{lifted_action, GroupAction};
use crate::linalg;
use crate::report::Assertion;
use crate::sampling::{ball_points, Region, SeededRng};
use crate::symcore::{lie_bracket, pushforward_field, ChartManifold, Expr, Pushforward, SmoothMap, VectorField};

/// Radius of the transverse slice used by `kernel_test`.
pub const SLICE_RADIUS: f64 = 0.05;
pub const SLICE_SAMPLES: usize = 11;
/// `π ∘ f = π` on the slice within this distance.
pub const KERNEL_TOL: f64 = 1e-5;
/// Distance to the target fiber counted as reaching it in leaf searches.
pub const FIBER_EPS: f64 = 0.05;
/// Perturbation size in the openness spot check.
pub const OPENNESS_STEP: f64 = 1e-2;
/// Group-parameter step of the smoothness probe.
pub const SMOOTHNESS_STEP: f64 = 1e-3;
/// Largest admitted difference quotient of the pushforward coefficients.
pub const SMOOTHNESS_BOUND: f64 = 1e3;

/// `π : P → M` with vertical fields spanning `ker dπ` and an optional free
/// action whose orbits are the fibers.
#[derive(Debug)]
pub struct SubmersionQuotient {
    map: SmoothMap,
    verticals: Vec<VectorField>,
    action: Option<Arc<GroupAction>>,
    projected: Mutex<HashMap<u64, Arc<GeneratorSet>>>,
}

impl SubmersionQuotient {
    /// Rejects vertical fields with `dπ(V) ≠ 0`.
    pub fn new(map: SmoothMap, verticals: Vec<VectorField>) -> Result<Self> {
        for (i, v) in verticals.iter().enumerate() {
            match pushforward_field(v, &map)? {
                Pushforward::Projected(w) if is_zero_field(&w) => {}
                _ => return Err(Error::Precondition(format!("vertical field {} is not in ker dπ", i + 1))),
            }
        }
        Ok(SubmersionQuotient {
            map,
            verticals,
            action: None,
            projected: Mutex::new(HashMap::new()),
        })
    }

    /// Uses the infinitesimal generators of a free action as verticals.
    pub fn from_action(map: SmoothMap, action: Arc<GroupAction>) -> Result<Self> {
        let mut q = SubmersionQuotient::new(map, action.generators().to_vec())?;
        q.action = Some(action);
        Ok(q)
    }

    pub fn with_action(mut self, action: Arc<GroupAction>) -> Self {
        self.action = Some(action);
        self
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn source(&self) -> &Arc<ChartManifold> {
        self.map.source()
    }

    pub fn target(&self) -> &Arc<ChartManifold> {
        self.map.target()
    }

    pub fn verticals(&self) -> &[VectorField] {
        &self.verticals
    }

    pub fn action(&self) -> Option<&Arc<GroupAction>> {
        self.action.as_ref()
    }

    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.map.apply(p)
    }

    /// The section checked against `π ∘ σ = id` on `region`.
    pub fn section_check(&self, region: &Region) -> Result<Assertion> {
        let mut a = Assertion::new("π ∘ section = id", 1e-9);
        for m in region.points(self.target())? {
            match self.map.apply_section(&m).and_then(|p| self.map.apply(&p)) {
                Ok(back) => a.observe(self.target().distance(&back, &m), || format!("m = {m:?}")),
                Err(e) => a.error(&e),
            }
        }
        Ok(a)
    }

    /// The projected generator set, cached per source set.
    pub fn project_set(&self, set: &Arc<GeneratorSet>) -> Result<Arc<GeneratorSet>> {
        if let Some(s) = self.projected.lock().expect("cache lock").get(&set.uid()) {
            return Ok(s.clone());
        }
        let fields = set
            .fields()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                pushforward_field(x, &self.map)?
                    .projected()
                    .ok_or_else(|| Error::NotProjectable(format!("{}[{}]", set.id(), i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let out = Arc::new(GeneratorSet::with_manifold(
            format!("π_*{}", set.id()),
            self.target().clone(),
            fields,
        )?);
        self.projected
            .lock()
            .expect("cache lock")
            .insert(set.uid(), out.clone());
        Ok(out)
    }
}

fn is_zero_field(v: &VectorField) -> bool {
    v.is_symbolically_zero() || v.components().iter().all(|c| c.simplify().is_zero())
}

/// `[V, X] ∈ ⟨verticals ∪ F⟩` pointwise for every vertical `V` and generator `X`.
pub fn invariance_check(f: &FoliationModule, q: &SubmersionQuotient, region: &Region) -> Result<Assertion> {
    let extra: Vec<(String, VectorField)> = q
        .verticals
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("V{}", i + 1), v.clone()))
        .collect();
    let big = f.union(&extra)?;
    let mut a = Assertion::new("[Γ(ker dπ), F] ⊂ Γ(ker dπ) + F (pointwise)", MEMBERSHIP_TOL);
    for (vi, v) in q.verticals.iter().enumerate() {
        for (name, x) in f.generators() {
            let m = big.pointwise_membership(&lie_bracket(v, x)?, region)?;
            a.observe(m.worst_residual, || format!("[V{}, {name}] at {:?}", vi + 1, m.witness.clone().unwrap_or_default()));
        }
    }
    Ok(a)
}

/// `π_*F` together with, for each downstairs generator, the index of the
/// upstairs generator it comes from.
#[derive(Debug, Clone)]
pub struct Projection {
    pub module: FoliationModule,
    pub lifts: Vec<usize>,
}

/// Pushes every projectable generator forward, dropping those that land on
/// zero (vertical ones).
pub fn project_foliation(f: &FoliationModule, q: &SubmersionQuotient) -> Result<Projection> {
    let mut gens = Vec::new();
    let mut lifts = Vec::new();
    for (i, (name, x)) in f.generators().iter().enumerate() {
        match pushforward_field(x, &q.map)? {
            Pushforward::Projected(y) => {
                if !is_zero_field(&y) {
                    gens.push((format!("π_*{name}"), y));
                    lifts.push(i);
                }
            }
            Pushforward::NotProjectable { .. } => return Err(Error::NotProjectable(name.clone())),
        }
    }
    let module = if gens.is_empty() {
        FoliationModule::zero(q.target().clone())
    } else {
        FoliationModule::new(q.target().clone(), gens)?
    };
    Ok(Projection { module, lifts })
}

/// `F_M = π_*F`.
pub fn pushforward_foliation(f: &FoliationModule, q: &SubmersionQuotient) -> Result<FoliationModule> {
    Ok(project_foliation(f, q)?.module)
}

/// `π⁻¹(F_M)`: the verticals plus lifts `dσ(Y)∘π` of the generators of `F_M`.
pub fn pullback_foliation(fm: &FoliationModule, q: &SubmersionQuotient) -> Result<FoliationModule> {
    let p = q.source();
    let pi = q.map.components();
    let mut gens: Vec<(String, VectorField)> = q
        .verticals
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("V{}", i + 1), v.clone()))
        .collect();
    for (name, y) in fm.generators() {
        if is_zero_field(y) {
            continue;
        }
        let comps: Vec<Expr> = q
            .map
            .section()
            .iter()
            .map(|s| {
                let terms = (0..fm.manifold().dim())
                    .map(|a| s.diff_coord(a) * y.components()[a].clone())
                    .collect();
                crate::symcore::sum(terms).substitute_coords(pi).simplify()
            })
            .collect();
        gens.push((format!("{name}^h"), VectorField::new(p.clone(), comps)?));
    }
    if gens.is_empty() {
        return Ok(FoliationModule::zero(p.clone()));
    }
    FoliationModule::new(p.clone(), gens)
}

/// `Ξ(w)`: the same steps over the projected generator sets, twists dropped.
pub fn xi(w: &HolonomyWord, q: &SubmersionQuotient) -> Result<HolonomyWord> {
    let steps = w
        .steps()
        .iter()
        .filter_map(|s| match s {
            Step::Path { set, coeffs } => Some(q.project_set(set).map(|set| Step::Path {
                set,
                coeffs: coeffs.clone(),
            })),
            Step::Twist { .. } => None,
        })
        .collect::<Result<Vec<_>>>()?;
    HolonomyWord::new(q.target().clone(), &q.project(w.source())?, steps)
}

/// Largest `|π(f(p)) − π(p)|` over a slice through `source(w)` transverse
/// to the fibers, `f` the carried map of `w`.
pub fn kernel_deviation(w: &HolonomyWord, q: &SubmersionQuotient) -> Result<f64> {
    let p0 = w.source();
    let m0 = q.project(p0)?;
    let m = q.target();
    let jac = section_jacobian(q, &m0)?;
    let mut worst = 0.0f64;
    let mut used = 0;
    for mp in ball_points(m, &m0, SLICE_RADIUS, SLICE_SAMPLES) {
        let d = m.displacement(&m0, &mp);
        let p: Vec<f64> = (0..p0.len())
            .map(|j| p0[j] + jac[j].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        if !q.source().in_domain(&p) {
            continue;
        }
        let image = w.apply(&p)?;
        worst = worst.max(m.distance(&q.project(&image)?, &q.project(&p)?));
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(worst)
}

fn section_jacobian(q: &SubmersionQuotient, m0: &[f64]) -> Result<Vec<Vec<f64>>> {
    q.map
        .section()
        .iter()
        .map(|s| (0..m0.len()).map(|a| s.diff_coord(a).eval_at(m0)).collect())
        .collect()
}

/// `w ∈ ker Ξ`: the carried map preserves the `π`-fibers on a slice.
pub fn kernel_test(w: &HolonomyWord, q: &SubmersionQuotient) -> Result<bool> {
    Ok(kernel_deviation(w, q)? <= KERNEL_TOL)
}

/// The two decisions of `Ξ(w₁) = Ξ(w₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct XiFiberTest {
    /// `Ξ(w₁) ≡ Ξ(w₂)` compared downstairs.
    pub direct: bool,
    /// `w₂ ∘ (g ⋆ w₁)⁻¹ ∈ ker Ξ` with `g·s(w₁) = s(w₂)`.
    pub structural: bool,
}

impl XiFiberTest {
    pub fn agree(&self) -> bool {
        self.direct == self.structural
    }
}

pub fn xi_fiber_test(w1: &HolonomyWord, w2: &HolonomyWord, q: &SubmersionQuotient) -> Result<XiFiberTest> {
    let action = q
        .action
        .as_ref()
        .ok_or_else(|| Error::Precondition("xi_fiber_test needs a group action".into()))?;
    let direct = equivalent(&xi(w1, q)?, &xi(w2, q)?)?;
    let structural = match action.solve(w1.source(), w2.source()) {
        None => false,
        Some(g) => {
            let moved = lifted_action(&g, w1, action)?;
            kernel_test(&compose(w2, &invert(&moved)?)?, q)?
        }
    };
    Ok(XiFiberTest { direct, structural })
}

/// The pullback situation `Γ(ker dπ) ⊂ F`, where `H(F) ≅ P ×_M H(F_M) ×_M P`.
#[derive(Debug)]
pub struct PullbackCase<'a> {
    pub foliation: &'a FoliationModule,
    pub quotient: &'a SubmersionQuotient,
}

impl<'a> PullbackCase<'a> {
    pub fn new(f: &'a FoliationModule, q: &'a SubmersionQuotient, region: &Region) -> Result<Self> {
        for (i, v) in q.verticals.iter().enumerate() {
            let m = f.pointwise_membership(v, region)?;
            if !m.member {
                return Err(Error::Precondition(format!(
                    "vertical field V{} is not in F (residual {:.3e} at {:?})",
                    i + 1,
                    m.worst_residual,
                    m.witness
                )));
            }
        }
        Ok(PullbackCase { foliation: f, quotient: q })
    }

    /// `[w] ↦ (t(w), Ξ(w), s(w))`.
    pub fn varphi(&self, w: &HolonomyWord) -> Result<(Vec<f64>, HolonomyWord, Vec<f64>)> {
        Ok((w.target().to_vec(), xi(w, self.quotient)?, w.source().to_vec()))
    }
}

/// A downstairs word together with an upstairs point over its source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FibrationProbe {
    pub point: Vec<f64>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurjectivityFailure {
    pub zeta_source: Vec<f64>,
    pub zeta_target: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub point: Vec<f64>,
    pub leaf_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FibrationReport {
    pub surjectivity: Assertion,
    pub openness: Assertion,
    pub failures: Vec<SurjectivityFailure>,
}

impl FibrationReport {
    pub fn assertions(&self) -> Vec<Assertion> {
        vec![self.surjectivity.clone(), self.openness.clone()]
    }

    pub fn passed(&self) -> bool {
        self.surjectivity.passed && self.openness.passed
    }
}

enum Realization {
    Lifted,
    Reachable,
    Separated(usize),
}

/// Samples pairs `(ζ, p)` with `π(p) = s(ζ)` and tries to find `ξ` with
/// `s(ξ) = p` and `Ξ(ξ) = ζ`. Direct lifts through the projectable
/// generators are tried first; when they leave the domain, a leaf search
/// from `p` that never meets `π⁻¹(t(ζ))` is a hard failure and anything
/// else a soft pass.
pub fn fibration_check(
    f: &FoliationModule,
    q: &SubmersionQuotient,
    probes: &[FibrationProbe],
    random_pairs: usize,
    budget: usize,
    seed: u64,
) -> Result<FibrationReport> {
    let proj = project_foliation(f, q)?;
    let up = GeneratorSet::of_foliation(f, "F");
    let down = GeneratorSet::of_foliation(&proj.module, "F_M");
    let mut pairs: Vec<FibrationProbe> = probes.to_vec();
    let mut rng = SeededRng::new(seed);
    let region = Region::default_for(q.source());
    let k = proj.module.len();
    while pairs.len() < probes.len() + random_pairs && k > 0 {
        let Some(p) = rng.point_in(q.source(), &region) else { break };
        let coeffs = (0..k).map(|_| rng.uniform(-1.0, 1.0)).collect();
        pairs.push(FibrationProbe { point: p, coeffs });
    }
    let mut surj = Assertion::new("surjectivity of (Ξ, s)", 0.0);
    let mut open = Assertion::new("openness (sampled)", 0.0);
    let mut failures = Vec::new();
    let mut soft = 0usize;
    for pr in &pairs {
        if pr.coeffs.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: pr.coeffs.len(),
            });
        }
        let m = q.project(&pr.point)?;
        let zeta = match HolonomyWord::new(q.target().clone(), &m, vec![down_step(&down, &pr.coeffs)]) {
            Ok(z) => z,
            Err(_) => continue,
        };
        match realize(pr, &zeta, &proj, &up, f, q, budget, seed)? {
            Realization::Lifted => {
                surj.check(true, String::new);
                for j in 0..4 {
                    let dp = rng.direction(pr.point.len(), OPENNESS_STEP);
                    let p2: Vec<f64> = pr.point.iter().zip(&dp).map(|(a, b)| a + b).collect();
                    if !q.source().in_domain(&p2) {
                        continue;
                    }
                    let c2: Vec<f64> = pr.coeffs.iter().map(|c| c + OPENNESS_STEP * rng.uniform(-1.0, 1.0)).collect();
                    let ok = HolonomyWord::new(q.target().clone(), &q.project(&p2)?, vec![down_step(&down, &c2)])
                        .ok()
                        .map(|z2| {
                            let pr2 = FibrationProbe { point: p2.clone(), coeffs: c2.clone() };
                            lift_word(&pr2, &proj, &up, f)
                                .and_then(|xi_w| Ok(equivalent(&xi(&xi_w, q)?, &z2)?))
                                .unwrap_or(false)
                        })
                        .unwrap_or(true);
                    open.check(ok, || format!("perturbation {j} of ζ {:?} at p = {:?}", pr.coeffs, pr.point));
                }
            }
            Realization::Reachable => {
                soft += 1;
                surj.check(true, String::new);
            }
            Realization::Separated(n) => {
                let fail = SurjectivityFailure {
                    zeta_source: zeta.source().to_vec(),
                    zeta_target: zeta.target().to_vec(),
                    coeffs: pr.coeffs.clone(),
                    point: pr.point.clone(),
                    leaf_points: n,
                };
                surj.check(false, || {
                    format!(
                        "ζ: {:?} → {:?} from p = {:?}: the sampled leaf of p ({n} points, budget {budget}) misses π⁻¹({:?})",
                        fail.zeta_source, fail.zeta_target, fail.point, fail.zeta_target
                    )
                });
                failures.push(fail);
            }
        }
    }
    if soft > 0 {
        surj = surj.note(format!(
            "{soft} pair(s) had no direct lift but the target fiber is reachable; counted as soft passes"
        ));
    }
    Ok(FibrationReport {
        surjectivity: surj,
        openness: open,
        failures,
    })
}

fn down_step(down: &Arc<GeneratorSet>, coeffs: &[f64]) -> Step {
    Step::Path {
        set: down.clone(),
        coeffs: coeffs.to_vec(),
    }
}

fn lift_word(pr: &FibrationProbe, proj: &Projection, up: &Arc<GeneratorSet>, f: &FoliationModule) -> Result<HolonomyWord> {
    let mut c = vec![0.0; f.len()];
    for (a, &i) in proj.lifts.iter().enumerate() {
        c[i] = pr.coeffs[a];
    }
    HolonomyWord::new(
        f.manifold().clone(),
        &pr.point,
        vec![Step::Path {
            set: up.clone(),
            coeffs: c,
        }],
    )
}

#[allow(clippy::too_many_arguments)]
fn realize(
    pr: &FibrationProbe,
    zeta: &HolonomyWord,
    proj: &Projection,
    up: &Arc<GeneratorSet>,
    f: &FoliationModule,
    q: &SubmersionQuotient,
    budget: usize,
    seed: u64,
) -> Result<Realization> {
    if let Ok(w) = lift_word(pr, proj, up, f) {
        if equivalent(&xi(&w, q)?, zeta)? {
            return Ok(Realization::Lifted);
        }
    }
    let leaf = leaf_sample(f, &pr.point, budget, seed ^ LEAF_SEED)?;
    let m = q.target();
    for p in &leaf.points {
        if m.distance(&q.project(p)?, zeta.target()) < FIBER_EPS {
            return Ok(Realization::Reachable);
        }
    }
    Ok(Realization::Separated(leaf.points.len()))
}

/// `ĝ_*X ∈ F` pointwise for sampled `g`, with coefficients whose difference
/// quotients in `g` stay bounded.
pub fn product_foliation_assumption_check(
    f: &FoliationModule,
    action: &GroupAction,
    region: &Region,
    samples: usize,
) -> Result<Vec<Assertion>> {
    let group = action.group();
    let mut member = Assertion::new("ĝ_* F ⊂ F (pointwise)", MEMBERSHIP_TOL);
    let mut smooth = Assertion::new("coefficients of ĝ_* X depend smoothly on g", SMOOTHNESS_BOUND);
    let probe = region.clone().with_samples(region.samples.min(40));
    let pts = probe.points(f.manifold())?;
    for g in group.sample_elements(samples) {
        for (name, x) in f.generators() {
            let pushed = action.pushforward(&g, x)?;
            let m = f.pointwise_membership(&pushed, &probe)?;
            member.observe(m.worst_residual, || format!("g = {g:?}, X = {name} at {:?}", m.witness.clone().unwrap_or_default()));
            if !m.member {
                continue;
            }
            let mut g2 = g.clone();
            g2[0] += SMOOTHNESS_STEP;
            let pushed2 = action.pushforward(&g2, x)?;
            let p = &pts[0];
            let cols = f.values_at(p)?;
            let (c1, _) = linalg::least_squares(&cols, &pushed.eval(p)?);
            let (c2, _) = linalg::least_squares(&cols, &pushed2.eval(p)?);
            let dq = c1.iter().zip(&c2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / SMOOTHNESS_STEP;
            smooth.observe(dq, || format!("g = {g:?}, X = {name} at {p:?}"));
        }
    }
    Ok(vec![member, smooth])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie2::{u1, LieGroupModel};
    use crate::symcore::Coordinate;
    use std::f64::consts::PI;

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::new("cyl", vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")]).unwrap())
    }

    fn circle() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::new("S1", vec![Coordinate::circle("theta", 2.0 * PI)]).unwrap())
    }

    fn line() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::euclidean("R", &["y"]))
    }

    fn fol(m: &Arc<ChartManifold>, gens: &[&[&str]]) -> FoliationModule {
        let fields = gens.iter().map(|g| VectorField::parse(m.clone(), g).unwrap()).collect();
        FoliationModule::from_fields(m.clone(), fields).unwrap()
    }

    /// Cylinder over the line `y`, fibers the circles.
    fn radial() -> SubmersionQuotient {
        let c = cylinder();
        let map = SmoothMap::new(c.clone(), line(), vec![Expr::coord(1)], None).unwrap();
        let act = Arc::new(GroupAction::translation(Arc::new(u1()), c, &[0]).unwrap());
        SubmersionQuotient::from_action(map, act).unwrap()
    }

    /// Cylinder over the circle `θ`, fibers the lines.
    fn angular() -> SubmersionQuotient {
        let c = cylinder();
        let map = SmoothMap::new(c.clone(), circle(), vec![Expr::coord(0)], None).unwrap();
        let act = Arc::new(GroupAction::translation(Arc::new(LieGroupModel::real_vector(1)), c, &[1]).unwrap());
        SubmersionQuotient::from_action(map, act).unwrap()
    }

    #[test]
    fn pushforwards_of_the_examples() {
        let c = cylinder();
        let q = radial();
        let fm = pushforward_foliation(&fol(&c, &[&["1", "y"]]), &q).unwrap();
        assert_eq!(fm.len(), 1);
        assert_eq!(fm.tangent_dim(&[0.0]).unwrap(), 0);
        assert_eq!(fm.tangent_dim(&[0.7]).unwrap(), 1);
        let q2 = angular();
        let fm2 = pushforward_foliation(&fol(&c, &[&["1", "1"]]), &q2).unwrap();
        assert_eq!(fm2.tangent_dim(&[1.0]).unwrap(), 1);
        assert!(pushforward_foliation(&fol(&c, &[&["0", "1"]]), &q2).unwrap().is_empty());
        assert!(matches!(
            pushforward_foliation(&fol(&c, &[&["y", "0"]]), &angular()),
            Err(Error::NotProjectable(_))
        ));
    }

    #[test]
    fn pullbacks_round_trip() {
        let q = radial();
        let fm = fol(&line(), &[&["y"]]);
        let f = pullback_foliation(&fm, &q).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.tangent_dim(&[0.3, 0.0]).unwrap(), 1);
        assert_eq!(f.tangent_dim(&[0.3, 2.0]).unwrap(), 2);
        let back = pushforward_foliation(&f, &q).unwrap();
        for y in [-1.0, 0.0, 0.5] {
            assert_eq!(back.tangent_dim(&[y]).unwrap(), fm.tangent_dim(&[y]).unwrap());
        }
        let zero = pullback_foliation(&FoliationModule::zero(line()), &q).unwrap();
        assert_eq!(zero.len(), 1);
        let full = pullback_foliation(&FoliationModule::full(line()), &q).unwrap();
        assert_eq!(full.tangent_dim(&[1.0, 0.0]).unwrap(), 2);
    }

    #[test]
    fn invariance_examples() {
        let c = cylinder();
        let region = Region::default_for(&c);
        assert!(invariance_check(&fol(&c, &[&["1", "y"]]), &radial(), &region).unwrap().passed);
        assert!(invariance_check(&fol(&c, &[&["1", "1"]]), &angular(), &region).unwrap().passed);
        let plane = Arc::new(ChartManifold::euclidean("R2", &["x", "y"]));
        let map = SmoothMap::new(plane.clone(), Arc::new(ChartManifold::euclidean("R", &["x"])), vec![Expr::coord(0)], None).unwrap();
        let q = SubmersionQuotient::new(map, vec![VectorField::parse(plane.clone(), &["0", "1"]).unwrap()]).unwrap();
        let f = fol(&plane, &[&["sin(y)", "0"]]);
        let probe = Region::default_for(&plane).with_probes(vec![vec![0.5, 0.0]]);
        let a = invariance_check(&f, &q, &probe).unwrap();
        assert!(!a.passed);
    }

    #[test]
    fn xi_on_cylinder_words() {
        let c = cylinder();
        let q = radial();
        let f = fol(&c, &[&["1", "y"]]);
        let set = GeneratorSet::of_foliation(&f, "F");
        let p = [0.4, 1.3];
        let w = HolonomyWord::single(&set, vec![0.7], &p).unwrap();
        let down = xi(&w, &q).unwrap();
        assert!((down.source()[0] - 1.3).abs() < 1e-12);
        assert!((down.target()[0] - q.project(w.target()).unwrap()[0]).abs() < 1e-6);
        let fm = pushforward_foliation(&f, &q).unwrap();
        let direct = HolonomyWord::single(&GeneratorSet::of_foliation(&fm, "F_M"), vec![0.7], &[1.3]).unwrap();
        assert!(equivalent(&down, &direct).unwrap());
        let e = xi(&HolonomyWord::empty(c.clone(), &p).unwrap(), &q).unwrap();
        assert!(e.is_empty() && e.source() == [1.3]);
    }

    #[test]
    fn spiral_kernel() {
        let c = cylinder();
        let q = angular();
        let f = fol(&c, &[&["1", "1"]]);
        let set = GeneratorSet::of_foliation(&f, "F");
        let p = [0.5, 0.2];
        let expected = [true, false, true, false, true];
        for (k, e) in expected.iter().enumerate() {
            let w = HolonomyWord::single(&set, vec![k as f64 * PI], &p).unwrap();
            assert_eq!(kernel_test(&w, &q).unwrap(), *e, "t = {k}π");
        }
        let w = HolonomyWord::single(&set, vec![0.8], &p).unwrap();
        let shifted = HolonomyWord::single(&set, vec![0.8 + 2.0 * PI], &[0.5, 1.7]).unwrap();
        let t = xi_fiber_test(&w, &shifted, &q).unwrap();
        assert!(t.direct && t.structural);
        let half = HolonomyWord::single(&set, vec![0.8 + PI], &[0.5, 1.7]).unwrap();
        let t = xi_fiber_test(&w, &half, &q).unwrap();
        assert!(!t.direct && !t.structural);
    }

    #[test]
    fn varphi_in_the_pullback_case() {
        let c = cylinder();
        let q = radial();
        let f = fol(&c, &[&["1", "0"], &["0", "y"]]);
        let region = Region::default_for(&c);
        let case = PullbackCase::new(&f, &q, &region).unwrap();
        let set = GeneratorSet::of_foliation(&f, "F");
        let w = HolonomyWord::single(&set, vec![0.0, 0.5], &[0.3, 1.0]).unwrap();
        let (t, down, s) = case.varphi(&w).unwrap();
        assert!(c.distance(&t, &[0.3, 0.5f64.exp()]) < 1e-6);
        assert_eq!(s, vec![0.3, 1.0]);
        assert!((down.target()[0] - 0.5f64.exp()).abs() < 1e-6);
        let vert = HolonomyWord::single(&set, vec![1.0, 0.0], &[0.3, 1.0]).unwrap();
        let (_, down, _) = case.varphi(&vert).unwrap();
        assert!(equivalent(&down, &HolonomyWord::empty(line(), &[1.0]).unwrap()).unwrap());
        assert!(PullbackCase::new(&fol(&c, &[&["1", "y"]]), &q, &region).is_err());
    }

    #[test]
    fn fibration_passes_without_obstruction() {
        let c = cylinder();
        let r = fibration_check(&fol(&c, &[&["1", "1"]]), &angular(), &[], 10, 200, 7).unwrap();
        assert!(r.passed(), "{r:?}");
        let r = fibration_check(&fol(&c, &[&["1", "0"], &["0", "y"]]), &radial(), &[], 10, 200, 7).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn rotation_does_not_preserve_a_coordinate_field() {
        let plane = Arc::new(ChartManifold::euclidean("R2", &["x", "y"]));
        let g = Arc::new(u1());
        let map = vec![
            crate::symcore::parse_expr("x*cos(g) - y*sin(g)", &["g".into(), "x".into(), "y".into()], &[]).unwrap(),
            crate::symcore::parse_expr("x*sin(g) + y*cos(g)", &["g".into(), "x".into(), "y".into()], &[]).unwrap(),
        ];
        let rot = GroupAction::new(g, plane.clone(), map).unwrap();
        let region = Region::default_for(&plane);
        let a = product_foliation_assumption_check(&fol(&plane, &[&["1", "0"]]), &rot, &region, 8).unwrap();
        assert!(!a[0].passed);
        let c = cylinder();
        let q = radial();
        let a = product_foliation_assumption_check(&fol(&c, &[&["1", "y"]]), q.action().unwrap(), &Region::default_for(&c), 8).unwrap();
        assert!(a.iter().all(|x| x.passed), "{a:?}");
    }

    #[test]
    fn punctured_plane_is_not_a_fibration() {
        let names = vec!["x".to_string(), "y".to_string()];
        let slit = crate::symcore::parse_expr("exp(log(x^2+y^2)/2) - y", &names, &[]).unwrap();
        let plane = Arc::new(ChartManifold::euclidean("slit", &["x", "y"]).with_domain(vec![slit]).unwrap());
        let line = Arc::new(ChartManifold::euclidean("R", &["x"]));
        let map = SmoothMap::new(plane.clone(), line, vec![Expr::coord(0)], None).unwrap();
        let q = SubmersionQuotient::new(map, vec![VectorField::parse(plane.clone(), &["0", "1"]).unwrap()]).unwrap();
        let f = fol(&plane, &[&["1", "0"]]);
        let probe = FibrationProbe { point: vec![1.0, 1.0], coeffs: vec![-2.0] };
        let r = fibration_check(&f, &q, &[probe], 0, 10_000, 1).unwrap();
        assert!(!r.surjectivity.passed);
        assert_eq!(r.failures.len(), 1);
        assert!((r.failures[0].zeta_target[0] + 1.0).abs() < 1e-6);
        let below = FibrationProbe { point: vec![1.0, -1.0], coeffs: vec![-2.0] };
        assert!(fibration_check(&f, &q, &[below], 0, 1000, 1).unwrap().passed());
    }
}
