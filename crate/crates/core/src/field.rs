//! Distance functions of presented sets and their diagnostics.
//!
//! Nearest features are selected by exact rational comparison of squared
//! distances; only the final square root is taken in floating point. The
//! float feature set [`Features`] serves the sampling-heavy callers.

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, Zero};
use serde::Serialize;

use crate::error::{precondition, Result};
use crate::planar::Point;
use crate::scalar::Scalar;
use crate::sets::RealizedSet;
use crate::Rational;

type P = Point<Rational>;

#[derive(Clone, Debug, Serialize)]
pub struct DistanceResult {
    pub value: f64,
    /// Exact squared distance.
    #[serde(with = "crate::planar::scalar_string")]
    pub value2: Rational,
    /// Nearest points, exact and deduplicated.
    pub projections: Vec<P>,
}

/// Nearest point of segment `a`–`b` to `p`, exactly.
pub fn project_to_segment(p: &P, a: &P, b: &P) -> P {
    let ab = b.clone() - a.clone();
    let len2 = ab.norm2();
    if len2.is_zero() {
        return a.clone();
    }
    let t = (p.clone() - a.clone()).dot(&ab) / len2;
    if t.is_negative() {
        a.clone()
    } else if t > Rational::one() {
        b.clone()
    } else {
        a.clone() + ab * t
    }
}

/// Exact distance from `p` to the realized set.
pub fn distance(m: &RealizedSet, p: &P) -> Result<DistanceResult> {
    let pres = &m.presentation;
    if pres.skeleton.is_empty() && m.points.is_empty() {
        return precondition("distance to the empty set is not computed");
    }
    if m.in_fill_or_on(p) {
        return Ok(DistanceResult { value: 0.0, value2: Rational::zero(), projections: vec![p.clone()] });
    }
    let mut best: Option<Rational> = None;
    let mut proj: Vec<P> = Vec::new();
    let mut consider = |q: P| {
        let d2 = p.dist2(&q);
        match &best {
            Some(b) if &d2 > b => {}
            Some(b) if &d2 == b => proj.push(q),
            _ => {
                best = Some(d2);
                proj = vec![q];
            }
        }
    };
    for e in &m.arrangement.edges {
        consider(project_to_segment(p, &m.arrangement.vertices[e.a], &m.arrangement.vertices[e.b]));
    }
    for q in &m.points {
        consider(q.clone());
    }
    let value2 = best.expect("nonempty set");
    proj.sort_by(|a, b| a.lex_cmp(b));
    proj.dedup();
    Ok(DistanceResult { value: value2.to_f64_lossy().sqrt(), value2, projections: proj })
}

impl RealizedSet {
    pub(crate) fn in_fill_or_on(&self, p: &P) -> bool {
        self.arrangement.on_graph(p) || self.in_fill(p)
    }
}

/// Exact rational value of a finite float.
pub fn exact(v: f64) -> Rational {
    BigRational::from_f64(v).expect("finite float")
}

pub fn exact_point(p: [f64; 2]) -> P {
    Point::new(exact(p[0]), exact(p[1]))
}

/// Float copy of a set's features: segments, points and rays.
#[derive(Clone, Debug, Default)]
pub struct Features {
    pub segments: Vec<[f64; 4]>,
    pub points: Vec<[f64; 2]>,
    /// Origin and unit direction.
    pub rays: Vec<([f64; 2], [f64; 2])>,
}

fn seg_dist2(p: [f64; 2], s: &[f64; 4]) -> f64 {
    let (ax, ay, bx, by) = (s[0], s[1], s[2], s[3]);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - ax) * dx + (p[1] - ay) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (ax + t * dx - p[0], ay + t * dy - p[1]);
    qx * qx + qy * qy
}

impl Features {
    pub fn from_realized(m: &RealizedSet) -> Self {
        let arr = &m.arrangement;
        let segments = arr
            .edges
            .iter()
            .map(|e| {
                let [ax, ay] = arr.vertices[e.a].to_f64();
                let [bx, by] = arr.vertices[e.b].to_f64();
                [ax, ay, bx, by]
            })
            .collect();
        Self { segments, points: m.points.iter().map(|p| p.to_f64()).collect(), rays: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.points.is_empty() && self.rays.is_empty()
    }

    pub fn dist2(&self, p: [f64; 2]) -> f64 {
        let mut best = f64::INFINITY;
        for s in &self.segments {
            best = best.min(seg_dist2(p, s));
        }
        for q in &self.points {
            best = best.min((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2));
        }
        for (o, d) in &self.rays {
            let t = ((p[0] - o[0]) * d[0] + (p[1] - o[1]) * d[1]).max(0.0);
            best = best.min((o[0] + t * d[0] - p[0]).powi(2) + (o[1] + t * d[1] - p[1]).powi(2));
        }
        best
    }

    /// Distance ignoring fills.
    pub fn dist(&self, p: [f64; 2]) -> f64 {
        self.dist2(p).sqrt()
    }

    pub fn bbox(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for s in &self.segments {
            pts.push([s[0], s[1]]);
            pts.push([s[2], s[3]]);
        }
        pts.extend(self.points.iter().copied());
        pts.extend(self.rays.iter().map(|(o, _)| *o));
        let first = *pts.first()?;
        Some(pts.iter().fold((first, first), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        }))
    }
}

/// Float distance evaluator honouring fills.
#[derive(Clone, Debug)]
pub struct Field<'a> {
    pub set: &'a RealizedSet,
    pub features: Features,
}

impl<'a> Field<'a> {
    pub fn new(set: &'a RealizedSet) -> Self {
        Self { set, features: Features::from_realized(set) }
    }

    pub fn dist(&self, p: [f64; 2]) -> f64 {
        let d = self.features.dist(p);
        if d > 0.0 && !self.set.fill_signatures.is_empty() && self.set.in_fill(&exact_point(p)) {
            return 0.0;
        }
        d
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LineProfile {
    pub base: [f64; 2],
    pub dir: [f64; 2],
    pub t_range: [f64; 2],
    pub ts: Vec<f64>,
    pub ds: Vec<f64>,
    /// Difference quotients on consecutive samples; `dq[i]` belongs to `[t_i, t_{i+1}]`.
    pub dq: Vec<f64>,
    /// Running partition convexity; `khat_cumulative[i]` uses samples `0..=i`.
    pub khat_cumulative: Vec<f64>,
    /// Partition convexity of the sampled partition (an estimate from below).
    pub khat: f64,
    /// `K̂` on 1, 2, 4, 8, 16 times the sample count.
    pub refinements: Vec<f64>,
    pub suspect_unbounded: bool,
}

/// Growth of `K̂` per dyadic refinement that counts as suspicious.
pub const BLOWUP_INCREMENT: f64 = 0.5;

fn sample_profile(eval: &dyn Fn(f64) -> f64, t0: f64, t1: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let ts: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
    let ds = ts.iter().map(|&t| eval(t)).collect();
    (ts, ds)
}

fn khat_of(ts: &[f64], ds: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dq: Vec<f64> = (0..ts.len() - 1).map(|i| (ds[i + 1] - ds[i]) / (ts[i + 1] - ts[i])).collect();
    let mut cum = vec![0.0; ts.len()];
    for i in 2..ts.len() {
        cum[i] = cum[i - 1] + (dq[i - 1] - dq[i - 2]).abs();
    }
    (dq, cum)
}

/// Sample `t ↦ d_M(base + t·dir)` and estimate its convexity.
///
/// The profile is flagged when `K̂` grows by at least [`BLOWUP_INCREMENT`]
/// on each of four successive dyadic refinements.
pub fn line_profile(m: &RealizedSet, base: [f64; 2], dir: [f64; 2], t_range: [f64; 2], n: usize) -> Result<LineProfile> {
    if n < 3 {
        return precondition("a line profile needs at least 3 samples");
    }
    let norm = dir[0].hypot(dir[1]);
    if !(norm.is_finite() && norm > 1e-12) {
        return precondition("degenerate direction");
    }
    if !(t_range[0] < t_range[1]) {
        return precondition("empty parameter interval");
    }
    let dir = [dir[0] / norm, dir[1] / norm];
    let field = Field::new(m);
    let eval = |t: f64| field.dist([base[0] + t * dir[0], base[1] + t * dir[1]]);
    let (ts, ds) = sample_profile(&eval, t_range[0], t_range[1], n);
    let (dq, cum) = khat_of(&ts, &ds);
    let khat = *cum.last().expect("n ≥ 3");
    let mut refinements = vec![khat];
    let mut count = n;
    for _ in 0..4 {
        count = 2 * count - 1;
        let (t, d) = sample_profile(&eval, t_range[0], t_range[1], count);
        refinements.push(*khat_of(&t, &d).1.last().expect("nonempty"));
    }
    let suspect_unbounded = refinements.windows(2).all(|w| w[1] - w[0] >= BLOWUP_INCREMENT);
    Ok(LineProfile {
        base,
        dir,
        t_range,
        ts,
        ds,
        dq,
        khat_cumulative: cum,
        khat,
        refinements,
        suspect_unbounded,
    })
}

impl LineProfile {
    /// CSV with columns `t,d,dq,khat`; `dq` of the last row is empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,d,dq,khat\n");
        for i in 0..self.ts.len() {
            let dq = self.dq.get(i).map(|v| format!("{v:.12e}")).unwrap_or_default();
            out.push_str(&format!("{:.12e},{:.12e},{},{:.12e}\n", self.ts[i], self.ds[i], dq, self.khat_cumulative[i]));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub point: [f64; 2],
    pub distance: f64,
    /// Extrapolated `d'_+(p, v) + d'_+(p, −v)` for each direction.
    pub sums: Vec<f64>,
    pub max_sum: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SemiconcavityReport {
    pub probes: Vec<ProbeResult>,
    pub skipped: Vec<([f64; 2], String)>,
    pub passed: bool,
}

pub const SEMICONCAVITY_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Second symmetric difference quotient at step `h`, divided by `h`.
fn symmetric_sum(dist: &dyn Fn([f64; 2]) -> f64, p: [f64; 2], d0: f64, v: [f64; 2], h: f64) -> f64 {
    let f = |s: f64| dist([p[0] + s * v[0], p[1] + s * v[1]]);
    (f(h) + f(-h) - 2.0 * d0) / h
}

/// Check `d'_+(p, v) + d'_+(p, −v) ≤ 0` at probes off the set.
///
/// The one-sided sums are estimated with steps `h ∈ {1e-3, 1e-4, 1e-5}·d(p)`
/// and Richardson-extrapolated from the two smallest to remove the
/// first-order curvature term.
pub fn semiconcavity_probe(m: &RealizedSet, probes: &[[f64; 2]]) -> SemiconcavityReport {
    let field = Field::new(m);
    let dist = |p: [f64; 2]| field.dist(p);
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for &p in probes {
        let d0 = dist(p);
        if !(d0 > 0.0) {
            skipped.push((p, "probe lies on the set".to_string()));
            continue;
        }
        let sums: Vec<f64> = (0..8)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / 8.0;
                let v = [a.cos(), a.sin()];
                let s = SEMICONCAVITY_STEPS.map(|c| symmetric_sum(&dist, p, d0, v, c * d0));
                (10.0 * s[2] - s[1]) / 9.0
            })
            .collect();
        let max_sum = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let passed = max_sum <= 1e-6 * d0;
        results.push(ProbeResult { point: p, distance: d0, sums, max_sum, passed });
    }
    let passed = results.iter().all(|r| r.passed);
    SemiconcavityReport { probes: results, skipped, passed }
}
