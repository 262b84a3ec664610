//! Path-holonomy bisubmersions and holonomy words.
//!
//! The holonomy groupoid is never built as a set. An arrow is represented by
//! a word: a source point and a sequence of steps, each the time-one flow of
//! a constant combination of generators or a translation by a group element.
//! Two words represent the same arrow when the local diffeomorphisms they
//! carry (through the constant bisection) agree on a small ball.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flows::exp_combination;
use crate::foliation::FoliationModule;
use crate::lie2::GroupAction;
use crate::linalg;
use crate::sampling::{ball_points, halton, SeededRng};
use crate::symcore::{ChartManifold, VectorField};

/// Endpoints closer than this are composable.
pub const ENDPOINT_TOL: f64 = 1e-6;
/// Carried maps agreeing within this are equal.
pub const EQUIV_TOL: f64 = 1e-5;
pub const EQUIV_RADIUS: f64 = 0.05;
pub const EQUIV_SAMPLES: usize = 20;
/// Smallest radius tried before giving up.
pub const MIN_RADIUS: f64 = 1e-4;
const SUBMERSION_SAMPLES: usize = 50;

static NEXT_SET: AtomicU64 = AtomicU64::new(1);

/// An ordered list of vector fields used as the legs of path steps.
#[derive(Debug)]
pub struct GeneratorSet {
    uid: u64,
    id: String,
    manifold: Arc<ChartManifold>,
    fields: Vec<VectorField>,
}

impl GeneratorSet {
    pub fn new(id: impl Into<String>, fields: Vec<VectorField>) -> Result<Self> {
        let manifold = fields
            .first()
            .map(|f| f.manifold().clone())
            .ok_or_else(|| Error::Precondition("generator set needs at least one field".into()))?;
        GeneratorSet::with_manifold(id, manifold, fields)
    }

    pub fn with_manifold(id: impl Into<String>, manifold: Arc<ChartManifold>, fields: Vec<VectorField>) -> Result<Self> {
        if let Some(f) = fields.iter().find(|f| **f.manifold() != *manifold) {
            return Err(Error::ManifoldMismatch(manifold.name().into(), f.manifold().name().into()));
        }
        Ok(GeneratorSet {
            uid: NEXT_SET.fetch_add(1, Ordering::Relaxed),
            id: id.into(),
            manifold,
            fields,
        })
    }

    /// All generators of `f`, in order.
    pub fn of_foliation(f: &FoliationModule, id: impl Into<String>) -> Arc<Self> {
        Arc::new(
            GeneratorSet::with_manifold(id, f.manifold().clone(), f.fields()).expect("fields share the foliation's chart"),
        )
    }

    /// Process-unique key, used for caching derived sets.
    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn manifold(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// One step of a holonomy word.
#[derive(Debug, Clone)]
pub enum Step {
    /// Time-one flow of `Σ coeffs_i X_i`.
    Path { set: Arc<GeneratorSet>, coeffs: Vec<f64> },
    /// The translation `p ↦ ĝ(p)`.
    Twist { action: Arc<GroupAction>, g: Vec<f64> },
}

impl Step {
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        match self {
            Step::Path { set, coeffs } => {
                if coeffs.len() != set.len() {
                    return Err(Error::DimensionMismatch {
                        expected: set.len(),
                        found: coeffs.len(),
                    });
                }
                if set.is_empty() {
                    set.manifold().check_point(p)?;
                    return Ok(set.manifold().normalize(p));
                }
                exp_combination(coeffs, set.fields(), p)?.completed(p)
            }
            Step::Twist { action, g } => action.apply(g, p),
        }
    }

    pub fn inverse(&self) -> Result<Step> {
        Ok(match self {
            Step::Path { set, coeffs } => Step::Path {
                set: set.clone(),
                coeffs: coeffs.iter().map(|c| -c).collect(),
            },
            Step::Twist { action, g } => Step::Twist {
                action: action.clone(),
                g: action.group().inv(g)?,
            },
        })
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Path { set, coeffs } => write!(f, "{}{:?}", set.id(), coeffs),
            Step::Twist { g, .. } => write!(f, "twist{g:?}"),
        }
    }
}

/// A representative of an arrow of the holonomy groupoid.
#[derive(Debug, Clone)]
pub struct HolonomyWord {
    manifold: Arc<ChartManifold>,
    source: Vec<f64>,
    steps: Vec<Step>,
    target: Vec<f64>,
}

impl HolonomyWord {
    /// Builds the word and computes its target; fails if a step leaves the domain.
    pub fn new(manifold: Arc<ChartManifold>, source: &[f64], steps: Vec<Step>) -> Result<Self> {
        manifold.check_point(source)?;
        let source = manifold.normalize(source);
        let mut target = source.clone();
        for s in &steps {
            target = s.apply(&target)?;
        }
        Ok(HolonomyWord {
            manifold,
            source,
            steps,
            target,
        })
    }

    /// The identity arrow at `p`.
    pub fn empty(manifold: Arc<ChartManifold>, p: &[f64]) -> Result<Self> {
        HolonomyWord::new(manifold, p, Vec::new())
    }

    /// A single path step.
    pub fn single(set: &Arc<GeneratorSet>, coeffs: Vec<f64>, p: &[f64]) -> Result<Self> {
        HolonomyWord::new(
            set.manifold().clone(),
            p,
            vec![Step::Path {
                set: set.clone(),
                coeffs,
            }],
        )
    }

    pub fn manifold(&self) -> &Arc<ChartManifold> {
        &self.manifold
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Runs the steps from an arbitrary point (the constant bisection).
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut q = self.manifold.normalize(p);
        self.manifold.check_point(&q)?;
        for s in &self.steps {
            q = s.apply(&q)?;
        }
        Ok(q)
    }
}

impl fmt::Display for HolonomyWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:", self.source)?;
        if self.steps.is_empty() {
            return write!(f, " empty");
        }
        for s in &self.steps {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

/// Reverses the steps and negates each; source and target swap.
pub fn invert(w: &HolonomyWord) -> Result<HolonomyWord> {
    let steps = w.steps.iter().rev().map(Step::inverse).collect::<Result<Vec<_>>>()?;
    HolonomyWord::new(w.manifold.clone(), &w.target, steps)
}

/// `w2 ∘ w1`: first `w1`, then `w2`.
pub fn compose(w2: &HolonomyWord, w1: &HolonomyWord) -> Result<HolonomyWord> {
    if w1.manifold != w2.manifold {
        return Err(Error::ManifoldMismatch(
            w1.manifold.name().into(),
            w2.manifold.name().into(),
        ));
    }
    if w1.manifold.distance(&w1.target, &w2.source) > ENDPOINT_TOL {
        return Err(Error::NotComposable {
            target: w1.target.clone(),
            source_point: w2.source.clone(),
        });
    }
    let steps = w1.steps.iter().chain(&w2.steps).cloned().collect();
    HolonomyWord::new(w1.manifold.clone(), &w1.source, steps)
}

/// The local diffeomorphism carried by a word on a ball around its source.
#[derive(Debug, Clone)]
pub struct CarriedDiffeo {
    word: HolonomyWord,
    radius: f64,
}

impl CarriedDiffeo {
    pub fn base(&self) -> &[f64] {
        self.word.source()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.word.apply(p)
    }
}

/// The carried map on the ball of radius `r`; every sample point of the
/// ball must flow without leaving the domain.
pub fn carried_diffeo(w: &HolonomyWord, r: f64) -> Result<CarriedDiffeo> {
    for p in ball_points(&w.manifold, &w.source, r, EQUIV_SAMPLES) {
        if let Err(e) = w.apply(&p) {
            return Err(match e {
                Error::FlowLeftDomain { start, time, .. } => Error::FlowLeftDomain {
                    start,
                    time,
                    suggested_radius: r / 2.0,
                },
                other => other,
            });
        }
    }
    Ok(CarriedDiffeo {
        word: w.clone(),
        radius: r,
    })
}

/// Witness test for equality in the holonomy groupoid.
pub fn equivalent(w1: &HolonomyWord, w2: &HolonomyWord) -> Result<bool> {
    Ok(max_deviation(w1, w2)?.is_some_and(|d| d <= EQUIV_TOL))
}

/// Largest distance between the carried maps on the common ball, or `None`
/// when the sources differ.
pub fn max_deviation(w1: &HolonomyWord, w2: &HolonomyWord) -> Result<Option<f64>> {
    let m = &w1.manifold;
    if **m != *w2.manifold || m.distance(&w1.source, &w2.source) > ENDPOINT_TOL {
        return Ok(None);
    }
    let mut r = EQUIV_RADIUS;
    loop {
        let pts = ball_points(m, &w1.source, r, EQUIV_SAMPLES);
        let dev = pts
            .iter()
            .map(|p| Ok(m.distance(&w1.apply(p)?, &w2.apply(p)?)))
            .collect::<Result<Vec<f64>>>();
        match dev {
            Ok(d) => return Ok(Some(d.into_iter().fold(0.0, f64::max))),
            Err(e) if r / 2.0 < MIN_RADIUS => {
                return Err(Error::NoCommonBall(format!("at {:?}: {e}", w1.source)));
            }
            Err(_) => r /= 2.0,
        }
    }
}

/// A word of `1..=max_len` steps over `set` from `p`, with coefficients
/// uniform in `[-scale, scale]`; steps leaving the domain are redrawn.
pub fn random_word(
    set: &Arc<GeneratorSet>,
    p: &[f64],
    max_len: usize,
    scale: f64,
    rng: &mut SeededRng,
) -> Result<HolonomyWord> {
    let len = 1 + rng.index(max_len.max(1));
    let mut steps = Vec::with_capacity(len);
    let mut at = set.manifold().normalize(p);
    for _ in 0..len {
        for attempt in 0..20 {
            let shrink = 0.5f64.powi(attempt / 5);
            let coeffs: Vec<f64> = (0..set.len()).map(|_| scale * shrink * rng.uniform(-1.0, 1.0)).collect();
            let step = Step::Path {
                set: set.clone(),
                coeffs,
            };
            if let Ok(q) = step.apply(&at) {
                at = q;
                steps.push(step);
                break;
            }
        }
    }
    HolonomyWord::new(set.manifold().clone(), p, steps)
}

/// The bisubmersion `(v, p) ↦ (exp(Σ v_i X_i)(p), p)` near `(0, p0)`.
#[derive(Debug, Clone)]
pub struct PathHolonomyBisubmersion {
    set: Arc<GeneratorSet>,
    indices: Vec<usize>,
    base: Vec<f64>,
    radius: f64,
}

impl PathHolonomyBisubmersion {
    pub fn set(&self) -> &Arc<GeneratorSet> {
        &self.set
    }

    /// Positions, in the foliation's generator list, of the chosen generators.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.set.len()
    }

    pub fn source_map(&self, _v: &[f64], p: &[f64]) -> Vec<f64> {
        p.to_vec()
    }

    pub fn target_map(&self, v: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        Step::Path {
            set: self.set.clone(),
            coeffs: v.to_vec(),
        }
        .apply(p)
    }

    /// The word represented by the point `(v, p)`.
    pub fn word(&self, v: &[f64], p: &[f64]) -> Result<HolonomyWord> {
        if self.set.is_empty() {
            return HolonomyWord::empty(self.set.manifold().clone(), p);
        }
        HolonomyWord::single(&self.set, v.to_vec(), p)
    }
}

/// Chooses generators whose classes form a basis of the fiber at `p0` and
/// shrinks the radius until the target map passes sampled rank checks.
pub fn path_holonomy_bisubmersion(f: &FoliationModule, p0: &[f64]) -> Result<PathHolonomyBisubmersion> {
    let m = f.manifold().clone();
    m.check_point(p0)?;
    let (indices, _) = f.fiber_basis(p0)?;
    let names: Vec<&str> = indices.iter().map(|i| f.generators()[*i].0.as_str()).collect();
    let fields = indices.iter().map(|i| f.generators()[*i].1.clone()).collect();
    let set = Arc::new(GeneratorSet::with_manifold(
        format!("{}[{}]", m.name(), names.join(",")),
        m.clone(),
        fields,
    )?);
    let mut b = PathHolonomyBisubmersion {
        set,
        indices,
        base: m.normalize(p0),
        radius: 1.0,
    };
    let k = b.dim();
    let n = m.dim();
    while b.radius >= MIN_RADIUS {
        if submersion_checks_pass(&b, &m, k, n) {
            return Ok(b);
        }
        b.radius /= 2.0;
    }
    Err(Error::RankDetection(format!(
        "target map is not a submersion near {:?} for any radius above {MIN_RADIUS}",
        b.base
    )))
}

fn submersion_checks_pass(b: &PathHolonomyBisubmersion, m: &ChartManifold, k: usize, n: usize) -> bool {
    let h = 1e-6;
    let mut index = 1u64;
    let mut checked = 0;
    while checked < SUBMERSION_SAMPLES && index < 100 * SUBMERSION_SAMPLES as u64 {
        let u = halton(index, k + n);
        index += 1;
        let off: Vec<f64> = u.iter().map(|t| b.radius * (2.0 * t - 1.0)).collect();
        if linalg::norm(&off) > b.radius {
            continue;
        }
        let v = &off[..k];
        let p: Vec<f64> = b.base.iter().zip(&off[k..]).map(|(c, o)| c + o).collect();
        if !m.in_domain(&p) {
            continue;
        }
        checked += 1;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[j] += h;
            minus[j] -= h;
            match (b.target_map(v, &plus), b.target_map(v, &minus)) {
                (Ok(a), Ok(c)) => cols.push(m.displacement(&c, &a)),
                _ => return false,
            }
        }
        if linalg::rank(&cols) < n {
            return false;
        }
    }
    checked > 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::Coordinate;
    use std::f64::consts::PI;

    fn cylinder() -> Arc<ChartManifold> {
        Arc::new(ChartManifold::new("cyl", vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")]).unwrap())
    }

    fn foliation(m: Arc<ChartManifold>, gens: &[&[&str]]) -> FoliationModule {
        let fields = gens.iter().map(|g| VectorField::parse(m.clone(), g).unwrap()).collect();
        FoliationModule::from_fields(m, fields).unwrap()
    }

    #[test]
    fn bisubmersion_of_y_dy() {
        let line = Arc::new(ChartManifold::euclidean("R", &["y"]));
        let f = foliation(line, &[&["y"]]);
        let b = path_holonomy_bisubmersion(&f, &[0.0]).unwrap();
        assert_eq!(b.dim(), 1);
        let t = b.target_map(&[0.5], &[0.3]).unwrap();
        assert!((t[0] - 0.3 * 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn bisubmersion_of_spiral_field() {
        let f = foliation(cylinder(), &[&["1", "y"]]);
        let b = path_holonomy_bisubmersion(&f, &[1.0, 0.5]).unwrap();
        let t = b.target_map(&[0.3], &[1.0, 0.5]).unwrap();
        assert!((t[0] - 1.3).abs() < 1e-9 && (t[1] - 0.5 * 0.3f64.exp()).abs() < 1e-9);
        assert_eq!(b.source_map(&[0.3], &[1.0, 0.5]), vec![1.0, 0.5]);
    }

    #[test]
    fn bisubmersion_of_zero_module() {
        let f = FoliationModule::zero(cylinder());
        let b = path_holonomy_bisubmersion(&f, &[1.0, 0.5]).unwrap();
        assert_eq!(b.dim(), 0);
        assert_eq!(b.target_map(&[], &[1.0, 0.5]).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn invert_and_compose() {
        let f = foliation(cylinder(), &[&["1", "y"]]);
        let set = GeneratorSet::of_foliation(&f, "F");
        let p = [0.2, 1.0];
        let e = HolonomyWord::empty(cylinder(), &p).unwrap();
        let ie = invert(&e).unwrap();
        assert!(ie.is_empty() && ie.source() == e.source());
        let w = HolonomyWord::single(&set, vec![0.7], &p).unwrap();
        let wi = invert(&w).unwrap();
        assert!(cylinder().distance(wi.target(), &p) < 1e-6);
        assert!(equivalent(&compose(&wi, &w).unwrap(), &e).unwrap());
        assert!(equivalent(&invert(&wi).unwrap(), &w).unwrap());
        let two = compose(&HolonomyWord::single(&set, vec![0.4], w.target()).unwrap(), &w).unwrap();
        assert!(equivalent(&two, &HolonomyWord::single(&set, vec![1.1], &p).unwrap()).unwrap());
        assert!(compose(&w, &w).is_err());
    }

    #[test]
    fn carried_diffeo_of_single_step() {
        let f = foliation(cylinder(), &[&["1", "y"]]);
        let set = GeneratorSet::of_foliation(&f, "F");
        let w = HolonomyWord::single(&set, vec![0.5], &[0.0, 1.0]).unwrap();
        let d = carried_diffeo(&w, 0.05).unwrap();
        let q = d.apply(&[0.01, 1.02]).unwrap();
        assert!((q[0] - 0.51).abs() < 1e-9 && (q[1] - 1.02 * 0.5f64.exp()).abs() < 1e-8);
        assert!(cylinder().distance(&d.apply(w.source()).unwrap(), w.target()) < 1e-7);
    }

    #[test]
    fn full_turn_on_spiral_is_not_the_identity() {
        let f = foliation(cylinder(), &[&["1", "1"]]);
        let set = GeneratorSet::of_foliation(&f, "F");
        let w = HolonomyWord::single(&set, vec![2.0 * PI], &[0.0, 0.0]).unwrap();
        assert!(!equivalent(&w, &HolonomyWord::empty(cylinder(), &[0.0, 0.0]).unwrap()).unwrap());
    }

    #[test]
    fn different_sources_are_not_equivalent() {
        let a = HolonomyWord::empty(cylinder(), &[0.0, 0.0]).unwrap();
        let b = HolonomyWord::empty(cylinder(), &[0.0, 0.1]).unwrap();
        assert!(!equivalent(&a, &b).unwrap());
    }
}
