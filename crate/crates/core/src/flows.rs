//! Numeric flows of vector fields and leaf exploration.
//!
//! Integration uses the Dormand–Prince 5(4) pair with local tolerance
//! `FLOW_TOL`. On charts with a domain predicate every accepted step is
//! scanned for an exit: a sign change of the predicate is located by
//! bisection, and a predicate that dips to zero without changing sign (a
//! trajectory crossing a removed hypersurface such as a slit) is located by
//! golden-section minimization.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::foliation::FoliationModule;
use crate::sampling::SeededRng;
use crate::symcore::{ChartManifold, VectorField};

pub const FLOW_TOL: f64 = 1e-9;
/// Largest step on charts with a domain predicate.
pub const DOMAIN_MAX_STEP: f64 = 0.1;
/// Exit times are resolved to this precision.
pub const EXIT_TIME_TOL: f64 = 1e-10;
/// Predicate values at or below this count as touching the removed set.
pub const TOUCH_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 8;
/// Grid minima above this are not refined.
const TOUCH_SCREEN: f64 = 1e-3;
const MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum FlowStatus {
    Completed,
    /// Last in-domain time; strictly smaller in magnitude than the request.
    LeftDomain { time: f64 },
    StepFailure { time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    pub status: FlowStatus,
    pub error_estimate: f64,
}

impl FlowResult {
    pub fn is_completed(&self) -> bool {
        matches!(self.status, FlowStatus::Completed)
    }

    /// The endpoint, or an error describing why the flow stopped.
    pub fn completed(self, start: &[f64]) -> Result<Vec<f64>> {
        match self.status {
            FlowStatus::Completed => Ok(self.endpoint),
            FlowStatus::LeftDomain { time } => Err(Error::FlowLeftDomain {
                start: start.to_vec(),
                time,
                suggested_radius: 0.5 * time.abs(),
            }),
            FlowStatus::StepFailure { time } => Err(Error::StepFailure(format!(
                "step size underflow at t = {time} from {start:?}"
            ))),
        }
    }
}

/// Right-hand side of an autonomous ODE.
pub trait Rhs {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

impl Rhs for VectorField {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_into(x, out)
    }
}

/// `Σ v_i X_i`, evaluated numerically.
pub struct Combination<'a> {
    pub coeffs: &'a [f64],
    pub fields: &'a [VectorField],
}

impl Rhs for Combination<'_> {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; out.len()];
        for (c, f) in self.coeffs.iter().zip(self.fields) {
            if *c == 0.0 {
                continue;
            }
            f.eval_into(x, &mut tmp)?;
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += c * t;
            }
        }
        Ok(())
    }
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the 5th-order state and the error vector.
fn dopri_step(rhs: &dyn Rhs, y: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    for s in 0..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += h * A[s][j] * kj[i];
            }
            tmp[i] = acc;
        }
        let _ = C[s];
        rhs.eval(&tmp, &mut k[s])?;
    }
    let mut y5 = y.to_vec();
    let mut err = vec![0.0; n];
    for i in 0..n {
        for s in 0..7 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    if y5.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailure("non-finite state".into()));
    }
    Ok((y5, err))
}

/// Integrates `rhs` from `p` for time `t` on `manifold`.
pub fn integrate(
    rhs: &dyn Rhs,
    manifold: &ChartManifold,
    p: &[f64],
    t: f64,
    mut trajectory: Option<&mut Vec<(f64, Vec<f64>)>>,
) -> Result<FlowResult> {
    manifold.check_point(p)?;
    let mut y = p.to_vec();
    if let Some(tr) = trajectory.as_deref_mut() {
        tr.push((0.0, manifold.normalize(&y)));
    }
    if t == 0.0 {
        return Ok(FlowResult {
            endpoint: manifold.normalize(p),
            status: FlowStatus::Completed,
            error_estimate: 0.0,
        });
    }
    let monitor = manifold.has_domain();
    let dir = t.signum();
    let h_max = if monitor { DOMAIN_MAX_STEP } else { f64::INFINITY };
    let h_min = 1e-14 * t.abs().max(1.0);
    let mut h = t.abs().min(0.1).min(h_max);
    let mut elapsed = 0.0f64;
    let mut total_err = 0.0;
    let mut steps = 0usize;
    let fail = |elapsed: f64, y: &[f64], total_err: f64| FlowResult {
        endpoint: manifold.normalize(y),
        status: FlowStatus::StepFailure { time: dir * elapsed },
        error_estimate: total_err,
    };
    while elapsed < t.abs() {
        steps += 1;
        if steps > MAX_STEPS {
            return Ok(fail(elapsed, &y, total_err));
        }
        let last = t.abs() - elapsed <= h;
        let step = if last { t.abs() - elapsed } else { h };
        let (y_new, err) = match dopri_step(rhs, &y, dir * step) {
            Ok(r) => r,
            Err(_) => {
                h = step / 4.0;
                if h < h_min {
                    return Ok(fail(elapsed, &y, total_err));
                }
                continue;
            }
        };
        let mut norm = 0.0f64;
        for i in 0..y.len() {
            let sc = FLOW_TOL + FLOW_TOL * y[i].abs().max(y_new[i].abs());
            norm = norm.max(err[i].abs() / sc);
        }
        if norm > 1.0 {
            h = step * (0.9 * norm.powf(-0.2)).max(0.2);
            if h < h_min {
                return Ok(fail(elapsed, &y, total_err));
            }
            continue;
        }
        if monitor {
            if let Some((s, point)) = scan_for_exit(rhs, manifold, &y, dir * step)? {
                let time = dir * (elapsed + s.abs());
                if let Some(tr) = trajectory.as_deref_mut() {
                    tr.push((time, manifold.normalize(&point)));
                }
                return Ok(FlowResult {
                    endpoint: manifold.normalize(&point),
                    status: FlowStatus::LeftDomain { time },
                    error_estimate: total_err,
                });
            }
        }
        total_err += err.iter().map(|e| e * e).sum::<f64>().sqrt();
        y = y_new;
        elapsed += step;
        if let Some(tr) = trajectory.as_deref_mut() {
            tr.push((dir * elapsed, manifold.normalize(&y)));
        }
        let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * grow).min(h_max);
        if last {
            break;
        }
    }
    Ok(FlowResult {
        endpoint: manifold.normalize(&y),
        status: FlowStatus::Completed,
        error_estimate: total_err,
    })
}

/// Looks for the first domain exit inside the step `y -> y + h`.
/// Returns the signed sub-step and the last in-domain state.
fn scan_for_exit(rhs: &dyn Rhs, m: &ChartManifold, y: &[f64], h: f64) -> Result<Option<(f64, Vec<f64>)>> {
    let state = |s: f64| -> Vec<f64> {
        if s == 0.0 {
            return y.to_vec();
        }
        match dopri_step(rhs, y, s) {
            Ok((z, _)) => z,
            Err(_) => vec![f64::NAN; y.len()],
        }
    };
    let margin = |s: f64| -> f64 {
        let z = state(s);
        if z.iter().any(|v| !v.is_finite()) {
            f64::NEG_INFINITY
        } else {
            m.domain_margin(&z)
        }
    };
    let grid: Vec<f64> = (0..=SCAN_POINTS).map(|j| h * j as f64 / SCAN_POINTS as f64).collect();
    let g: Vec<f64> = grid.iter().map(|s| margin(*s)).collect();
    // Sign change: bisect on "still inside".
    if let Some(j) = (1..g.len()).find(|j| g[*j] <= 0.0) {
        let (mut lo, mut hi) = (grid[j - 1], grid[j]);
        while (hi - lo).abs() > EXIT_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            if margin(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(Some((lo, state(lo))));
    }
    // Touching without a sign change: minimize over each candidate bracket.
    let mut best: Option<(f64, f64)> = None;
    for j in 0..g.len() {
        let left_ok = j == 0 || g[j] <= g[j - 1];
        let right_ok = j + 1 == g.len() || g[j] <= g[j + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        if g[j] > TOUCH_SCREEN && parabola_min(&g, j) > TOUCH_SCREEN {
            continue;
        }
        let lo = grid[j.saturating_sub(1)];
        let hi = grid[(j + 1).min(g.len() - 1)];
        let (s, v) = golden_min(&margin, lo, hi);
        if v <= TOUCH_TOL && best.is_none_or(|(bs, _)| s.abs() < bs.abs()) {
            best = Some((s, v));
        }
    }
    if let Some((s, _)) = best {
        // Back off until strictly inside.
        let mut back = s;
        let mut delta = EXIT_TIME_TOL * h.signum();
        while !(margin(back) > 0.0) && back.abs() > 0.0 {
            back -= delta;
            delta *= 2.0;
            if back.signum() != h.signum() {
                back = 0.0;
            }
        }
        return Ok(Some((back, state(back))));
    }
    Ok(None)
}

/// Minimum of the parabola through the grid values around `j`.
fn parabola_min(g: &[f64], j: usize) -> f64 {
    if j == 0 || j + 1 == g.len() {
        return g[j];
    }
    let (a, b, c) = (g[j - 1], g[j], g[j + 1]);
    let curv = a - 2.0 * b + c;
    if curv <= 0.0 {
        return b;
    }
    b - (c - a).powi(2) / (8.0 * curv)
}

fn golden_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() <= EXIT_TIME_TOL * 1e-2 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(a, fa), (b, fb), (c, fc), (d, fd)]
        .into_iter()
        .fold((a, f64::INFINITY), |acc, (s, v)| if v < acc.1 { (s, v) } else { acc })
}

/// Flow of `x` from `p` for time `t`.
pub fn flow(x: &VectorField, p: &[f64], t: f64) -> Result<FlowResult> {
    integrate(x, x.manifold(), p, t, None)
}

/// Flow with every accepted step recorded as `(time, point)`.
pub fn flow_trajectory(x: &VectorField, p: &[f64], t: f64) -> Result<(FlowResult, Vec<(f64, Vec<f64>)>)> {
    let mut tr = Vec::new();
    let r = integrate(x, x.manifold(), p, t, Some(&mut tr))?;
    Ok((r, tr))
}

/// Time-one flow of `Σ v_i X_i` from `p`.
pub fn exp_combination(v: &[f64], fields: &[VectorField], p: &[f64]) -> Result<FlowResult> {
    if v.len() != fields.len() {
        return Err(Error::DimensionMismatch {
            expected: fields.len(),
            found: v.len(),
        });
    }
    let Some(first) = fields.first() else {
        return Ok(FlowResult {
            endpoint: p.to_vec(),
            status: FlowStatus::Completed,
            error_estimate: 0.0,
        });
    };
    if v.iter().all(|c| *c == 0.0) {
        first.manifold().check_point(p)?;
        return Ok(FlowResult {
            endpoint: first.manifold().normalize(p),
            status: FlowStatus::Completed,
            error_estimate: 0.0,
        });
    }
    let rhs = Combination { coeffs: v, fields };
    integrate(&rhs, first.manifold(), p, 1.0, None)
}

/// Coefficient-space length of each exploration step.
pub const LEAF_STEP: f64 = 0.1;
pub const LEAF_SEED: u64 = 0x5EED_F011;
const CHILDREN_PER_POINT: usize = 4;

/// Points reached from a base point by composing small flows, with the
/// exploration tree needed to rebuild a path to each point.
#[derive(Debug, Clone)]
pub struct LeafSample {
    pub points: Vec<Vec<f64>>,
    /// For each point except the root: parent index and step coefficients.
    pub parents: Vec<Option<(usize, Vec<f64>)>>,
    pub attempts: usize,
    manifold: ChartManifold,
}

impl LeafSample {
    /// True iff some visited point is within `eps` of `q`.
    pub fn reached(&self, q: &[f64], eps: f64) -> bool {
        self.nearest(q).is_some_and(|(_, d)| d < eps)
    }

    /// Index and distance of the visited point nearest to `q`.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, self.manifold.distance(p, q)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Step coefficients along the exploration tree from the root to `idx`.
    pub fn path_to(&self, mut idx: usize) -> Vec<Vec<f64>> {
        let mut steps = Vec::new();
        while let Some(Some((parent, v))) = self.parents.get(idx) {
            steps.push(v.clone());
            idx = *parent;
        }
        steps.reverse();
        steps
    }
}

/// Breadth-first exploration of the leaf through `p`.
///
/// Each visited point spawns a few steps `exp(±Σ v_i X_i)` with `v` a random
/// direction of length `LEAF_STEP`. Endpoints landing in an already-visited
/// cell of side `LEAF_STEP / 2` are dropped; steps that leave the domain are
/// discarded. `budget` bounds the number of flow evaluations.
pub fn leaf_sample(f: &FoliationModule, p: &[f64], budget: usize, seed: u64) -> Result<LeafSample> {
    let m = f.manifold();
    m.check_point(p)?;
    let fields = f.fields();
    let k = fields.len();
    let root = m.normalize(p);
    let cell = LEAF_STEP / 2.0;
    let key = |q: &[f64]| -> Vec<i64> { q.iter().map(|x| (x / cell).floor() as i64).collect() };
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(key(&root));
    let mut out = LeafSample {
        points: vec![root.clone()],
        parents: vec![None],
        attempts: 0,
        manifold: (**m).clone(),
    };
    if k == 0 {
        return Ok(out);
    }
    let mut rng = SeededRng::new(seed);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let mut dirs = Vec::with_capacity(CHILDREN_PER_POINT);
        while dirs.len() < CHILDREN_PER_POINT {
            let v = rng.direction(k, LEAF_STEP);
            dirs.push(v.iter().map(|c| -c).collect::<Vec<f64>>());
            dirs.push(v);
        }
        for v in dirs {
            if out.attempts >= budget {
                return Ok(out);
            }
            out.attempts += 1;
            let r = exp_combination(&v, &fields, &out.points[idx].clone())?;
            if !r.is_completed() {
                continue;
            }
            if seen.insert(key(&r.endpoint)) {
                out.points.push(r.endpoint);
                out.parents.push(Some((idx, v)));
                queue.push_back(out.points.len() - 1);
            }
        }
    }
    Ok(out)
}

/// Writes `step, x1..xn` rows.
pub fn write_points_csv<W: std::io::Write>(w: W, names: &[String], points: &[Vec<f64>]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["step".to_string()];
    header.extend(names.iter().cloned());
    wr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for (i, p) in points.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.iter().map(|x| format!("{x:.12}")));
        wr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}
