//! The acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p holfol --test acceptance -- --nocapture` to see
//! the lines.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use holfol::bisubmersion::{equivalent, random_word, GeneratorSet, HolonomyWord, Step};
use holfol::checks::{run_check, CheckOptions, CheckReport};
use holfol::flows::{flow, leaf_sample, LEAF_SEED};
use holfol::groupoid::SpiralQuotientModel;
use holfol::lie2::compute_ideal;
use holfol::quotient::{fibration_check, kernel_test, pushforward_foliation, xi, FIBER_EPS};
use holfol::report::all_passed;
use holfol::sampling::{random_field, Region, SeededRng};
use holfol::scenario::Scenario;
use holfol::symcore::{lie_bracket, ChartManifold, VectorField};

const SEED: u64 = 20_240_601;
const SUITE_SAMPLES: usize = 50;
const SUITE_TOL: f64 = 1e-5;

struct Criterion {
    id: usize,
    title: &'static str,
    parts: Vec<(bool, String)>,
}

impl Criterion {
    fn new(id: usize, title: &'static str) -> Self {
        Criterion { id, title, parts: Vec::new() }
    }

    fn part(&mut self, ok: bool, detail: impl Into<String>) {
        self.parts.push((ok, detail.into()));
    }

    fn passed(&self) -> bool {
        !self.parts.is_empty() && self.parts.iter().all(|p| p.0)
    }
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(name).expect("built-in scenario loads")
}

fn suite_check(name: &str, check: &str) -> CheckReport {
    let s = scenario(name);
    let opts = CheckOptions {
        seed: SEED,
        budget: s.budget,
        tol: SUITE_TOL,
        samples: SUITE_SAMPLES,
    };
    run_check(&s, check, &opts).expect("known check")
}

/// A check passes with every sampled assertion at the suite size.
fn suite_part(c: &mut Criterion, name: &str, check: &str) {
    let r = suite_check(name, check);
    let min = r.assertions.iter().map(|a| a.samples).min().unwrap_or(0);
    let worst = r.assertions.iter().map(|a| a.worst).fold(0.0, f64::max);
    let failed: Vec<&str> = r.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
    c.part(
        r.passed && min >= SUITE_SAMPLES,
        format!(
            "{name} {check}: {} assertions, ≥{min} samples each, worst {worst:.1e}{}",
            r.assertions.len(),
            if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
        ),
    );
}

fn cylinder_example() -> Criterion {
    let mut c = Criterion::new(1, "cylinder: π_*F = ⟨y∂y⟩, exact flow, Ξ(t, p) = (t, π(p))");
    let s = scenario("cylinder");
    let f = s.foliation().unwrap();
    let q = s.quotient().unwrap();
    let fm = pushforward_foliation(f, q).unwrap();
    let at0 = fm.tangent_dim(&[0.0]).unwrap();
    let elsewhere: Vec<usize> = [-2.0, -0.5, 0.5, 1.0, 3.0].iter().map(|y| fm.tangent_dim(&[*y]).unwrap()).collect();
    c.part(at0 == 0 && elsewhere.iter().all(|d| *d == 1), format!("tangent_dim 0 at y=0 ({at0}), 1 elsewhere ({elsewhere:?})"));

    let x = &f.fields()[0];
    let m = f.manifold();
    let mut rng = SeededRng::new(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p = vec![rng.uniform(0.0, 2.0 * PI), rng.uniform(-1.0, 1.0)];
        for k in 0..=20 {
            let t = -2.0 + 0.2 * k as f64;
            let got = flow(x, &p, t).unwrap().completed(&p).unwrap();
            let exact = [(p[0] + t).rem_euclid(2.0 * PI), t.exp() * p[1]];
            worst = worst.max(m.distance(&got, &exact));
        }
    }
    c.part(worst <= 1e-6, format!("flow vs (θ+t mod 2π, e^t y) on 210 cases, t ∈ [−2,2]: worst {worst:.1e} (tol 1e-6)"));

    let set = GeneratorSet::of_foliation(f, "F");
    let down = q.project_set(&set).unwrap();
    let region = Region::default_for(m);
    let (mut agree, mut endpoint) = (0, 0.0f64);
    for _ in 0..SUITE_SAMPLES {
        let p = rng.point_in(m, &region).unwrap();
        let w = random_word(&set, &p, 4, 1.0, &mut rng).unwrap();
        let t: f64 = w
            .steps()
            .iter()
            .map(|st| match st {
                Step::Path { coeffs, .. } => coeffs[0],
                _ => f64::NAN,
            })
            .sum();
        let z = xi(&w, q).unwrap();
        let reference = HolonomyWord::single(&down, vec![t], &[p[1]]).unwrap();
        agree += usize::from(equivalent(&z, &reference).unwrap());
        endpoint = endpoint.max((z.target()[0] - p[1] * t.exp()).abs());
    }
    c.part(
        agree == SUITE_SAMPLES && endpoint <= 1e-6,
        format!("Ξ(w) ≡ (Σt, π(p)) on {agree}/{SUITE_SAMPLES} random words; |t(Ξ w) − e^t y| ≤ {endpoint:.1e}"),
    );
    c
}

fn spiral_example() -> Criterion {
    let mut c = Criterion::new(2, "spiral: ker Ξ at t ∈ 2πℤ, quotient model = S¹×S¹, nss");
    let s = scenario("spiral");
    let f = s.foliation().unwrap();
    let q = s.quotient().unwrap();
    let set = GeneratorSet::of_foliation(f, "F");
    let expected = [true, false, true, false, true];
    for p in [[0.5, 0.5], [2.0, -1.0], [4.0, 2.0]] {
        let got: Vec<bool> = (0..5)
            .map(|k| kernel_test(&HolonomyWord::single(&set, vec![k as f64 * PI], &p).unwrap(), q).unwrap())
            .collect();
        let pattern: String = got.iter().map(|b| if *b { 'T' } else { 'F' }).collect();
        c.part(got == expected, format!("kernel_test at t ∈ {{0, π, 2π, 3π, 4π}} from {p:?}: {pattern} (expected TFTFT)"));
    }
    let model = SpiralQuotientModel::new(s.params["lambda"]).unwrap();
    let r = model.check(100, SEED);
    let worst = r.iter().map(|a| a.worst).fold(0.0, f64::max);
    c.part(all_passed(&r), format!("quotient model on 100 sampled arrows: worst {worst:.1e} (tol 1e-9)"));
    suite_part(&mut c, "spiral", "nss");
    c
}

fn punctured_example() -> Criterion {
    let mut c = Criterion::new(3, "punctured plane: (Ξ, s) not surjective; spiral and pullback are fibrations");
    let s = scenario("punctured");
    let f = s.foliation().unwrap();
    let q = s.quotient().unwrap();
    let leaf = leaf_sample(f, &[1.0, 1.0], 10_000, LEAF_SEED).unwrap();
    let reached = leaf.reached(&[-1.0, 1.0], FIBER_EPS);
    c.part(!reached, format!("leaf of (1,1) at budget 10⁴ ({} points) reaches (−1,1) within 0.05: {reached}", leaf.points.len()));
    let r = fibration_check(f, q, &s.probes, 20, 10_000, SEED).unwrap();
    let witness = r.failures.iter().find(|w| {
        (w.zeta_source[0] - 1.0).abs() < 1e-6 && (w.zeta_target[0] + 1.0).abs() < 1e-6 && w.point == [1.0, 1.0]
    });
    c.part(
        !r.surjectivity.passed && witness.is_some(),
        format!("fibration_check fails with witness ζ: 1 → −1, p = (1,1): {}", witness.is_some()),
    );
    for name in ["spiral", "cylinder-pullback"] {
        let r = suite_check(name, "fibration");
        c.part(r.passed, format!("{name} fibration: {}", if r.passed { "pass" } else { "fail" }));
    }
    c
}

fn morphism_suite() -> Criterion {
    let mut c = Criterion::new(4, "Ξ respects composition, inversion and units (50 words, tol 1e-5)");
    for name in ["cylinder", "spiral", "punctured", "cylinder-pullback"] {
        suite_part(&mut c, name, "xi-morphism");
    }
    c
}

fn lie2_suite() -> Criterion {
    let mut c = Criterion::new(5, "Lie 2-group suite on cylinder-pullback (≥50 samples, tol 1e-5)");
    suite_part(&mut c, "cylinder-pullback", "lie2");
    suite_part(&mut c, "cylinder-pullback", "star");
    c
}

fn ideal_dims() -> Criterion {
    let mut c = Criterion::new(6, "dim 𝔥: 0 on cylinder and spiral, full on cylinder-pullback");
    for (name, full) in [("cylinder", false), ("spiral", false), ("cylinder-pullback", true)] {
        let s = scenario(name);
        let f = s.foliation().unwrap();
        let i = compute_ideal(f, s.action().unwrap(), &Region::default_for(f.manifold())).unwrap();
        let ok = if full { i.is_full() } else { i.is_zero() };
        c.part(ok && i.ideal_check.passed, format!("{name}: dim {} of {}", i.dim(), i.algebra_dim));
    }
    c
}

fn fiber_suite() -> Criterion {
    let mut c = Criterion::new(7, "Ξ(g ⋆ w) = Ξ(w) and both Ξ-fiber decisions agree (50 samples)");
    for name in ["cylinder", "spiral", "cylinder-pullback"] {
        suite_part(&mut c, name, "fiber");
    }
    c
}

/// Central differences of `y` along `x`: `(DY·X)(p)`.
fn directional(y: &VectorField, x: &[f64], p: &[f64], h: f64) -> Vec<f64> {
    let plus: Vec<f64> = p.iter().zip(x).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - h * b).collect();
    let (a, b) = (y.eval(&plus).unwrap(), y.eval(&minus).unwrap());
    a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect()
}

fn numeric_foundations() -> Criterion {
    let mut c = Criterion::new(8, "bracket vs finite differences, flow composition and inversion, Jacobi (20 random fields)");
    let m = std::sync::Arc::new(ChartManifold::euclidean("R3", &["x", "y", "z"]));
    let mut rng = SeededRng::new(SEED);
    let fields: Vec<VectorField> = (0..20).map(|_| random_field(&m, &mut rng)).collect();
    let points: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
    let (mut fd, mut jac, mut comp, mut inv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..20 {
        let (x, y, z) = (&fields[i], &fields[(i + 1) % 20], &fields[(i + 2) % 20]);
        let b = lie_bracket(x, y).unwrap();
        let jacobi = [
            lie_bracket(x, &lie_bracket(y, z).unwrap()).unwrap(),
            lie_bracket(y, &lie_bracket(z, x).unwrap()).unwrap(),
            lie_bracket(z, &lie_bracket(x, y).unwrap()).unwrap(),
        ];
        for p in &points {
            let sym = b.eval(p).unwrap();
            let dy = directional(y, &x.eval(p).unwrap(), p, 1e-5);
            let dx = directional(x, &y.eval(p).unwrap(), p, 1e-5);
            for k in 0..3 {
                let num = dy[k] - dx[k];
                fd = fd.max((sym[k] - num).abs() / (1.0 + num.abs()));
            }
            let total: Vec<f64> = (0..3).map(|k| jacobi.iter().map(|j| j.eval(p).unwrap()[k]).sum()).collect();
            jac = jac.max(total.iter().map(|v| v.abs()).fold(0.0, f64::max));
            let (s, t) = (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
            let a = flow(x, p, s).unwrap().completed(p).unwrap();
            let ab = flow(x, &a, t).unwrap().completed(&a).unwrap();
            let direct = flow(x, p, s + t).unwrap().completed(p).unwrap();
            comp = comp.max(m.distance(&ab, &direct));
            let back = flow(&x.scale(-1.0), &a, s).unwrap().completed(&a).unwrap();
            inv = inv.max(m.distance(&back, p));
        }
    }
    c.part(fd <= 1e-6, format!("[X,Y] vs central differences (h = 1e-5): worst relative {fd:.1e} (tol 1e-6)"));
    c.part(comp <= 1e-6, format!("φ_t ∘ φ_s = φ_(s+t): worst {comp:.1e} (tol 1e-6)"));
    c.part(inv <= 1e-6, format!("flow of −X inverts flow of X: worst {inv:.1e} (tol 1e-6)"));
    c.part(jac <= 1e-8, format!("Jacobi identity: worst {jac:.1e} (tol 1e-8)"));
    c
}

#[test]
fn acceptance() {
    let suites: [fn() -> Criterion; 8] = [
        cylinder_example,
        spiral_example,
        punctured_example,
        morphism_suite,
        lie2_suite,
        ideal_dims,
        fiber_suite,
        numeric_foundations,
    ];
    let mut failed = Vec::new();
    for run in suites {
        let start = Instant::now();
        let c = run();
        let secs = start.elapsed().as_secs_f64();
        let mut out = std::io::stderr().lock();
        let _ = writeln!(out, "[{}] criterion {}: {} ({secs:.1}s)", if c.passed() { "PASS" } else { "FAIL" }, c.id, c.title);
        for (ok, d) in &c.parts {
            let _ = writeln!(out, "       {} {d}", if *ok { "ok  " } else { "FAIL" });
        }
        if !c.passed() {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
