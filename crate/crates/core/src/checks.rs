//! Named checks over a scenario and their JSON reports.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bisubmersion::{equivalent, invert, max_deviation, GeneratorSet, HolonomyWord};
use crate::error::{Error, Result};
use crate::flows::{flow, leaf_sample};
use crate::foliation::FoliationModule;
use crate::groupoid::{
    groupoid_axiom_check, groupoid_morphism_check, nss_check, random_element, Groupoid, HolonomyGroupoid,
    NormalSubgroupoidSystem, SpiralQuotientModel,
};
use crate::lie2::{
    action_axiom_check, compute_ideal, kernel_image_check, lifted_action, orbit_in_fiber_check, pullback_word_groupoid,
    same_action_check, star_pullback, word_action_check, WordAction,
};
use crate::quotient::{
    fibration_check, kernel_test, product_foliation_assumption_check, project_foliation, pullback_foliation,
    invariance_check, xi, xi_fiber_test, PullbackCase, SubmersionQuotient, FIBER_EPS,
};
use crate::report::{all_passed, Assertion};
use crate::sampling::{Region, SeededRng};
use crate::scenario::Scenario;

/// Samples per sampled property unless overridden.
pub const DEFAULT_SAMPLES: usize = 50;
/// Random `(ζ, p)` pairs tried by the fibration check besides the probes.
pub const FIBRATION_PAIRS: usize = 20;
/// Times `kπ` tried by the kernel check.
pub const KERNEL_TIMES: usize = 5;

/// Every check name with a one-line description.
pub const CHECKS: [(&str, &str); 17] = [
    ("action", "the group action: unit, compatibility, generators, freeness spot checks"),
    ("fiber", "Ξ(g ⋆ w) = Ξ(w), and both decisions of Ξ(w₁) = Ξ(w₂) agree"),
    ("fibers-connected", "sampled π-fibers are reached by the vertical leaf search"),
    ("fibration", "surjectivity and openness of (Ξ, s)"),
    ("flow", "flow composition and inversion for each generator"),
    ("groupoid", "groupoid axioms on holonomy words"),
    ("ideal", "the ideal 𝔥 of algebra elements whose generators lie in F"),
    ("involutivity", "brackets of generators lie in F"),
    ("kernel", "kernel test against Ξ(w) ≡ unit on words along the first generator"),
    ("lie2", "crossed module, H⋊G and the action on words with both equivariance facts"),
    ("nss", "the normal subgroupoid system (ker Ξ, π-fibers, lifted action)"),
    ("product-foliation", "ĝ_* F ⊂ F with coefficients smooth in g"),
    ("pullback", "F ⊂ π⁻¹(π_* F)"),
    ("pushforward", "π_* F exists and F is invariant along the fibers"),
    ("quotient-model", "the spiral quotient model against the pair groupoid of S¹"),
    ("star", "the ∗ action on the pullback groupoid and its agreement with ⋆"),
    ("xi-morphism", "Ξ respects composition, inversion and units"),
];

/// Run settings; scenario values are the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckOptions {
    pub seed: u64,
    pub budget: usize,
    pub tol: f64,
    pub samples: usize,
}

impl CheckOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        CheckOptions {
            seed: s.seed,
            budget: s.budget,
            tol: s.tol,
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
}

/// All reports of one run, sorted by check name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub options: CheckOptions,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    /// `0` iff no assertion failed.
    pub fn exit_status(&self) -> i32 {
        i32::from(!self.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Runs `names` (the scenario's own list when empty; `all` for every
/// check). Errors inside a check become failed assertions.
pub fn run_checks(s: &Scenario, names: &[String], opts: &CheckOptions) -> Result<RunReport> {
    let mut names: Vec<String> = if names.is_empty() {
        s.checks.clone()
    } else if names.iter().any(|n| n == "all") {
        CHECKS.iter().map(|c| c.0.to_string()).collect()
    } else {
        names.to_vec()
    };
    if let Some(bad) = names.iter().find(|n| !CHECKS.iter().any(|c| c.0 == n.as_str())) {
        return Err(Error::UnknownCheck(bad.clone()));
    }
    names.sort();
    names.dedup();
    let checks: Vec<CheckReport> = names.par_iter().map(|n| run_check(s, n, opts)).collect::<Result<_>>()?;
    Ok(RunReport {
        scenario: s.name.clone(),
        options: *opts,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// A single named check.
pub fn run_check(s: &Scenario, name: &str, opts: &CheckOptions) -> Result<CheckReport> {
    let body = match name {
        "action" => action(s, opts),
        "fiber" => fiber(s, opts),
        "fibers-connected" => fibers_connected(s, opts),
        "fibration" => fibration(s, opts),
        "flow" => flows(s, opts),
        "groupoid" => groupoid(s, opts),
        "ideal" => ideal(s),
        "involutivity" => involutivity(s),
        "kernel" => kernel(s),
        "lie2" => lie2(s, opts),
        "nss" => nss(s, opts),
        "product-foliation" => product(s, opts),
        "pullback" => pullback(s),
        "pushforward" => pushforward(s),
        "quotient-model" => quotient_model(s, opts),
        "star" => star(s, opts),
        "xi-morphism" => xi_morphism(s, opts),
        _ => return Err(Error::UnknownCheck(name.into())),
    };
    let assertions = body.unwrap_or_else(|e| {
        let mut a = Assertion::new(format!("{name} could not run"), 0.0);
        a.error(&e);
        vec![a]
    });
    Ok(CheckReport {
        check: name.into(),
        passed: all_passed(&assertions),
        assertions,
    })
}

fn region(s: &Scenario) -> Result<Region> {
    Ok(Region::default_for(s.manifold()?))
}

fn word_action(s: &Scenario) -> Result<WordAction> {
    WordAction::new(s.foliation()?.clone(), s.action()?.clone(), &region(s)?)
}

fn up_down(f: &FoliationModule, q: &SubmersionQuotient) -> Result<(HolonomyGroupoid, HolonomyGroupoid)> {
    let set = GeneratorSet::of_foliation(f, "F");
    let down = q.project_set(&set)?;
    Ok((HolonomyGroupoid::new(set), HolonomyGroupoid::new(down)))
}

fn sampled(name: &str, samples: usize, tol: f64, seed: u64, mut f: impl FnMut(&mut SeededRng) -> Result<f64>) -> Assertion {
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

fn word_deviation(a: &HolonomyWord, b: &HolonomyWord) -> Result<f64> {
    Ok(max_deviation(a, b)?.unwrap_or(f64::INFINITY))
}

fn action(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    Ok(s.action()?.check(&region(s)?, opts.samples))
}

fn involutivity(s: &Scenario) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let r = f.involutivity_check(&region(s)?)?;
    let mut a = Assertion::new("[X_i, X_j] ∈ F", 0.0);
    a.samples = f.len() * f.len().saturating_sub(1) / 2;
    for b in &r.failures {
        a.fail(format!("[{}, {}]", b.pair.0, b.pair.1));
    }
    Ok(vec![a])
}

fn pushforward(s: &Scenario) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let q = s.quotient()?;
    let proj = project_foliation(f, q)?;
    let names: Vec<&str> = proj.module.generators().iter().map(|g| g.0.as_str()).collect();
    let exists = Assertion::expect("π_* F is generated by projected generators", true, String::new)
        .note(format!("π_* F = ⟨{}⟩", names.join(", ")));
    Ok(vec![exists, invariance_check(f, q, &region(s)?)?])
}

fn pullback(s: &Scenario) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let q = s.quotient()?;
    let fm = project_foliation(f, q)?.module;
    let back = pullback_foliation(&fm, q)?;
    let r = region(s)?;
    let mut a = Assertion::new("F ⊂ π⁻¹(π_* F)", crate::foliation::MEMBERSHIP_TOL);
    let mut equal = true;
    for (n, x) in f.generators() {
        let m = back.pointwise_membership(x, &r)?;
        a.observe(m.worst_residual, || format!("{n} at {:?}", m.witness.clone().unwrap_or_default()));
    }
    for (_, y) in back.generators() {
        equal &= f.pointwise_membership(y, &r)?.member;
    }
    let note = if equal { "F = π⁻¹(π_* F)" } else { "π⁻¹(π_* F) is strictly larger than F" };
    Ok(vec![a.note(note)])
}

fn flows(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let m = f.manifold().clone();
    let r = region(s)?;
    let fields = f.fields();
    if fields.is_empty() {
        return Ok(vec![Assertion::new("φ_s ∘ φ_t = φ_{s+t}", opts.tol).note("zero module")]);
    }
    let mut comp = Assertion::new("φ_s ∘ φ_t = φ_{s+t}", opts.tol);
    let mut inv = Assertion::new("φ_{-t} ∘ φ_t = id", opts.tol);
    let mut rng = SeededRng::new(opts.seed);
    for i in 0..opts.samples {
        let Some(p) = rng.point_in(&m, &r) else { break };
        let x = &fields[rng.index(fields.len())];
        let (t1, t2) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        let run = || -> Result<(f64, f64)> {
            let a = flow(x, &p, t1)?.completed(&p)?;
            let ab = flow(x, &a, t2)?.completed(&a)?;
            let direct = flow(x, &p, t1 + t2)?.completed(&p)?;
            let back = flow(x, &a, -t1)?.completed(&a)?;
            Ok((m.distance(&ab, &direct), m.distance(&back, &p)))
        };
        match run() {
            Ok((d1, d2)) => {
                comp.observe(d1, || format!("sample {i}: p = {p:?}, s = {t2}, t = {t1}"));
                inv.observe(d2, || format!("sample {i}: p = {p:?}, t = {t1}"));
            }
            // flows leaving the domain are not composition failures
            Err(Error::FlowLeftDomain { .. }) => {}
            Err(e) => comp.error(&e),
        }
    }
    Ok(vec![comp, inv])
}

fn groupoid(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let h = HolonomyGroupoid::new(GeneratorSet::of_foliation(s.foliation()?, "F"));
    Ok(groupoid_axiom_check(&h, opts.samples, opts.tol, opts.seed))
}

fn xi_morphism(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let q = s.quotient()?;
    let (up, down) = up_down(f, q)?;
    let mut out = groupoid_morphism_check(|w| xi(w, q), &up, &down, |p| q.project(p), opts.samples, opts.tol, opts.seed);
    out.push(sampled("Ξ(w⁻¹) = Ξ(w)⁻¹", opts.samples, opts.tol, opts.seed ^ 0x1, |rng| {
        let p = up.sample_object(rng)?;
        let w = up.sample_arrow_from(&p, rng)?;
        word_deviation(&xi(&invert(&w)?, q)?, &invert(&xi(&w, q)?)?)
    }));
    Ok(out)
}

fn kernel(s: &Scenario) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let q = s.quotient()?;
    let set = GeneratorSet::of_foliation(f, "F");
    if f.is_empty() {
        return Err(Error::Precondition("kernel check needs a generator".into()));
    }
    let m = f.manifold();
    let p = m.normalize(&vec![0.5; m.dim()]);
    let mut a = Assertion::new("kernel test ⇔ Ξ(w) ≡ unit", 0.0);
    let mut pattern = Vec::new();
    for k in 0..KERNEL_TIMES {
        let mut coeffs = vec![0.0; f.len()];
        coeffs[0] = k as f64 * PI;
        let w = HolonomyWord::single(&set, coeffs, &p)?;
        let in_kernel = kernel_test(&w, q)?;
        let z = xi(&w, q)?;
        let unit = q.target().distance(z.source(), z.target()) < crate::bisubmersion::ENDPOINT_TOL
            && equivalent(&z, &HolonomyWord::empty(q.target().clone(), z.source())?)?;
        a.check(in_kernel == unit, || format!("t = {k}π: kernel test {in_kernel}, Ξ(w) ≡ unit {unit}"));
        pattern.push(if in_kernel { 'T' } else { 'F' });
    }
    let times: Vec<String> = (0..KERNEL_TIMES).map(|k| format!("{k}π")).collect();
    Ok(vec![a.note(format!("t ∈ {{{}}} → {{{}}}", times.join(", "), pattern.iter().map(char::to_string).collect::<Vec<_>>().join(",")))])
}

fn fibration(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let r = fibration_check(s.foliation()?, s.quotient()?, &s.probes, FIBRATION_PAIRS, opts.budget, opts.seed)?;
    Ok(r.assertions())
}

fn fibers_connected(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let q = s.quotient()?;
    let declared = s.connected_fibers.first().copied().unwrap_or(true);
    let verticals = FoliationModule::from_fields(q.source().clone(), q.verticals().to_vec())?;
    let mut a = Assertion::new("vertical leaf search meets the sampled fiber point", FIBER_EPS);
    let mut rng = SeededRng::new(opts.seed);
    let r = Region::default_for(q.source());
    for i in 0..opts.samples.min(10) {
        let Some(p) = rng.point_in(q.source(), &r) else { break };
        let other = match q.action() {
            Some(act) => act.apply(&random_element(act.group(), &mut rng), &p),
            None => q.map().apply_section(&q.project(&p)?),
        };
        let Ok(other) = other else { continue };
        if !q.source().in_domain(&other) {
            continue;
        }
        let leaf = leaf_sample(&verticals, &p, opts.budget, opts.seed)?;
        let d = leaf.nearest(&other).map_or(f64::INFINITY, |(_, d)| d);
        a.observe(d, || format!("sample {i}: {other:?} not reached from {p:?}"));
    }
    if !declared {
        let reached = a.passed;
        a = Assertion::expect("declared disconnected fibers", true, String::new)
            .note(if reached { "sampled fiber points were all reached" } else { "some fiber point was not reached" });
    }
    Ok(vec![a])
}

fn ideal(s: &Scenario) -> Result<Vec<Assertion>> {
    let i = compute_ideal(s.foliation()?, s.action()?, &region(s)?)?;
    Ok(vec![i.ideal_check.clone().note(format!("dim 𝔥 = {} of {}", i.dim(), i.algebra_dim))])
}

fn lie2(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let wa = word_action(s)?;
    let two = wa.lie2_group();
    let mut out = two.crossed_module().axiom_check(opts.samples);
    out.extend(two.group_axiom_check(opts.samples));
    out.extend(two.groupoid_axiom_check(opts.samples));
    out.extend(word_action_check(&wa, opts.samples, opts.tol, opts.seed));
    Ok(out)
}

fn star(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let wa = word_action(s)?;
    let q = s.quotient()?;
    let pb = pullback_word_groupoid(&wa, q)?;
    let two = wa.lie2_group();
    let act = wa.action();
    let mut out = action_axiom_check(two, &pb, |a, x| star_pullback(two, act, a, x), |g, p| act.apply(g, p), opts.samples, opts.tol, opts.seed);
    let case = PullbackCase::new(s.foliation()?, q, &region(s)?)?;
    out.push(same_action_check(&wa, &case, q, opts.samples, opts.tol, opts.seed ^ 0x2)?);
    if wa.ideal().is_full() {
        out.push(kernel_image_check(&wa, q, opts.samples, opts.tol, opts.seed ^ 0x3));
    }
    Ok(out)
}

fn fiber(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let q = s.quotient()?;
    let act = s.action()?;
    let up = HolonomyGroupoid::new(GeneratorSet::of_foliation(f, "F"));
    let orbit = sampled("Ξ(g ⋆ w) = Ξ(w)", opts.samples, opts.tol, opts.seed, |rng| {
        let p = up.sample_object(rng)?;
        let w = up.sample_arrow_from(&p, rng)?;
        let g = random_element(act.group(), rng);
        word_deviation(&xi(&lifted_action(&g, &w, act)?, q)?, &xi(&w, q)?)
    });
    let mut agree = Assertion::new("both decisions of Ξ(w₁) = Ξ(w₂) agree", 0.0);
    let mut rng = SeededRng::new(opts.seed ^ 0x5);
    let mut same = 0usize;
    for i in 0..opts.samples {
        let r = (|| -> Result<(bool, bool)> {
            let p = up.sample_object(&mut rng)?;
            let w1 = up.sample_arrow_from(&p, &mut rng)?;
            let g = random_element(act.group(), &mut rng);
            let w2 = if i % 2 == 0 {
                lifted_action(&g, &w1, act)?
            } else {
                up.sample_arrow_from(&act.apply(&g, &p)?, &mut rng)?
            };
            let t = xi_fiber_test(&w1, &w2, q)?;
            Ok((t.agree(), t.direct))
        })();
        match r {
            Ok((ok, direct)) => {
                same += usize::from(direct);
                agree.check(ok, || format!("sample {i}"));
            }
            Err(e) => agree.error(&e),
        }
    }
    let wa = word_action(s);
    let mut out = vec![orbit, agree.note(format!("{same} sampled pair(s) in a common Ξ-fiber"))];
    if let Ok(wa) = wa {
        out.push(orbit_in_fiber_check(&wa, q, opts.samples, opts.tol, opts.seed ^ 0x7));
    }
    Ok(out)
}

fn nss(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let f = s.foliation()?;
    let q: &SubmersionQuotient = s.quotient()?;
    let act: Arc<_> = s.action()?.clone();
    let h = HolonomyGroupoid::new(GeneratorSet::of_foliation(f, "F"));
    let act2 = act.clone();
    let n = NormalSubgroupoidSystem {
        ambient: &h,
        in_k: Box::new(move |w| kernel_test(w, q)),
        related: Box::new(move |p, r| Ok(q.target().distance(&q.project(p)?, &q.project(r)?) < 1e-9)),
        sample_related: Box::new(move |r, rng| act2.apply(&random_element(act2.group(), rng), r)),
        theta: Box::new(move |p, r, w| {
            let g = act.solve(r, p).ok_or_else(|| Error::Precondition("points are not related".into()))?;
            lifted_action(&g, w, &act)
        }),
    };
    Ok(nss_check(&n, opts.samples, opts.seed))
}

fn quotient_model(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    let lambda = *s
        .params
        .get("lambda")
        .ok_or_else(|| Error::Precondition("quotient-model needs the parameter `lambda`".into()))?;
    Ok(SpiralQuotientModel::new(lambda)?.check(opts.samples.max(100), opts.seed))
}

fn product(s: &Scenario, opts: &CheckOptions) -> Result<Vec<Assertion>> {
    product_foliation_assumption_check(s.foliation()?, s.action()?, &region(s)?, opts.samples.min(10))
}
