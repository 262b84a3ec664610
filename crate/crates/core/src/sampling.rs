//! Deterministic sampling: Halton points in boxes and a seeded generator.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use std::sync::Arc;

use crate::symcore::{sum, ChartManifold, CoordKind, Expr, VectorField};

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// The `index`-th point of the Halton sequence in `[0,1)^dim` (index starts at 1).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|k| radical_inverse(index, PRIMES[k % PRIMES.len()])).collect()
}

/// A bounded sample box plus optional explicit probe points.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    pub samples: usize,
}

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_HALF_WIDTH: f64 = 3.0;

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Region {
            lo,
            hi,
            probes: Vec::new(),
            samples: DEFAULT_SAMPLES,
        }
    }

    /// `[-3,3]` on line coordinates and one full period on circles.
    pub fn default_for(m: &ChartManifold) -> Self {
        let (lo, hi) = m
            .coords()
            .iter()
            .map(|c| match c.kind {
                CoordKind::Line => (-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH),
                CoordKind::Circle { period } => (0.0, period),
            })
            .unzip();
        Region::new(lo, hi)
    }

    /// A ball-like box of half-width `r` around `center`.
    pub fn around(center: &[f64], r: f64) -> Self {
        Region::new(
            center.iter().map(|c| c - r).collect(),
            center.iter().map(|c| c + r).collect(),
        )
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_probes(mut self, probes: Vec<Vec<f64>>) -> Self {
        self.probes = probes;
        self
    }

    /// Replaces the extent of coordinate `i`.
    pub fn restrict(mut self, i: usize, lo: f64, hi: f64) -> Self {
        self.lo[i] = lo;
        self.hi[i] = hi;
        self
    }

    /// In-domain sample points: probes first, then Halton points.
    pub fn points(&self, m: &ChartManifold) -> Result<Vec<Vec<f64>>> {
        if self.lo.len() != m.dim() || self.hi.len() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                found: self.lo.len(),
            });
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::EmptyRegion);
        }
        let mut out: Vec<Vec<f64>> = self
            .probes
            .iter()
            .filter(|p| m.in_domain(p))
            .cloned()
            .collect();
        let budget = self.samples.max(1) * 20;
        let mut index = 1u64;
        let mut taken = 0;
        while taken < self.samples && (index as usize) <= budget {
            let u = halton(index, m.dim());
            index += 1;
            let p: Vec<f64> = u
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(t, (a, b))| a + t * (b - a))
                .collect();
            if m.in_domain(&p) {
                out.push(p);
                taken += 1;
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(out)
    }
}

/// `center` followed by Halton points of the ball of radius `r` around it,
/// keeping only in-domain points; at most `n` points in total.
pub fn ball_points(m: &ChartManifold, center: &[f64], r: f64, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![m.normalize(center)];
    let dim = center.len();
    let mut index = 1u64;
    while out.len() < n && index < 100 * n as u64 + 100 {
        let u = halton(index, dim);
        index += 1;
        let off: Vec<f64> = u.iter().map(|t| r * (2.0 * t - 1.0)).collect();
        if off.iter().map(|x| x * x).sum::<f64>() > r * r {
            continue;
        }
        let p: Vec<f64> = center.iter().zip(&off).map(|(c, o)| c + o).collect();
        if m.in_domain(&p) {
            out.push(m.normalize(&p));
        }
    }
    out
}

/// Seeded generator used for every randomized procedure in the crate
/// (SplitMix64).
#[derive(Debug, Clone)]
pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.random()
    }

    /// A uniformly random direction in `R^k`, scaled to length `radius`.
    pub fn direction(&mut self, k: usize, radius: f64) -> Vec<f64> {
        if k == 0 {
            return Vec::new();
        }
        loop {
            let v: Vec<f64> = (0..k).map(|_| self.uniform(-1.0, 1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 && n <= 1.0 {
                return v.into_iter().map(|x| x * radius / n).collect();
            }
        }
    }

    /// A point drawn uniformly from the in-domain part of `region`'s box.
    pub fn point_in(&mut self, m: &ChartManifold, region: &Region) -> Option<Vec<f64>> {
        for _ in 0..1000 {
            let p: Vec<f64> = region
                .lo
                .iter()
                .zip(&region.hi)
                .map(|(a, b)| self.uniform(*a, *b))
                .collect();
            if m.in_domain(&p) {
                return Some(p);
            }
        }
        None
    }
}

/// A random vector field mixing constants, linear and quadratic monomials,
/// `sin` and `cos`, with coefficients in `[-1/2, 1/2]`. Circle coordinates
/// enter through `sin` and `cos` of the angle so components stay periodic.
pub fn random_field(m: &Arc<ChartManifold>, rng: &mut SeededRng) -> VectorField {
    let n = m.dim();
    let vars: Vec<Expr> = (0..n)
        .map(|i| match m.period(i) {
            Some(p) => (Expr::constant(2.0 * std::f64::consts::PI / p) * Expr::coord(i)).sin(),
            None => Expr::coord(i),
        })
        .collect();
    let comps = (0..n)
        .map(|_| {
            let mut terms = vec![Expr::constant(rng.uniform(-0.5, 0.5))];
            for _ in 0..3 {
                let c = Expr::constant(rng.uniform(-0.5, 0.5));
                let a = vars[rng.index(n)].clone();
                let b = vars[rng.index(n)].clone();
                terms.push(match rng.index(4) {
                    0 => c * a,
                    1 => c * a * b,
                    2 => c * a.sin(),
                    _ => c * (a * b).cos(),
                });
            }
            sum(terms).simplify()
        })
        .collect();
    VectorField::new(m.clone(), comps).expect("components are periodic by construction")
}
