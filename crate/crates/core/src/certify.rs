//! Certification pipelines.
//!
//! Positive direction: grid approximations `M_n` of an (s)-set, cone
//! potentials at the grid nodes, and a probe-ball check that
//! `d_{M_n} + Ψ_n` is locally concave off `M_n`.
//!
//! Negative direction: exact cone-emptiness witnesses accumulating at a point,
//! the spine through them, and the growth of the sampled convexity of
//! `x ↦ d_M(x, g(x))`.

use std::f64::consts::FRAC_PI_2;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, precondition, Result};
use crate::field::{Features, Field};
use crate::planar::{opt_scalar_string, scalar_string, Point};
use crate::plcalc::{mix_control, partition_convexity_of_samples, sequence_to_function, PiecewiseLinear, Side};
use crate::scalar::{q, Scalar};
use crate::sets::{Piece, PlanarSetPresentation, RealizedSet, SSetPresentation};
use crate::{PlFunction, Rational};

type P = Point<Rational>;

// ---------------------------------------------------------------------------
// Grid approximation

/// One-sided slopes of the grid interpolants through a node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeStats {
    /// Grid index `i` of the abscissa `i·r/n`.
    pub index: usize,
    pub a: P,
    /// `s^+`: largest right slope.
    #[serde(with = "scalar_string")]
    pub s_plus_max: Rational,
    /// `s_+`: smallest right slope.
    #[serde(with = "scalar_string")]
    pub s_plus_min: Rational,
    /// `s^-`: largest left slope.
    #[serde(with = "scalar_string")]
    pub s_minus_max: Rational,
    /// `s_-`: smallest left slope.
    #[serde(with = "scalar_string")]
    pub s_minus_min: Rational,
}

impl SlopeStats {
    pub fn in_class(&self, class: NodeClass) -> bool {
        match class {
            NodeClass::First => self.s_plus_max > self.s_minus_min,
            NodeClass::Second => self.s_minus_max > self.s_plus_min,
        }
    }

    /// The two slopes bounding the angle of the given class: `(upper, lower)`.
    fn class_slopes(&self, class: NodeClass) -> (&Rational, &Rational) {
        match class {
            NodeClass::First => (&self.s_plus_max, &self.s_minus_min),
            NodeClass::Second => (&self.s_minus_max, &self.s_plus_min),
        }
    }

    /// Exact gap `s^+ − s_-` (first class) or `s^- − s_+` (second class).
    pub fn gap(&self, class: NodeClass) -> Rational {
        let (hi, lo) = self.class_slopes(class);
        hi - lo
    }

    /// `p^+, p_+, p^-, p_-` for grid step `step`.
    pub fn p_points(&self, step: &Rational) -> [P; 4] {
        let fwd = |s: &Rational| Point::new(&self.a.x + step, &self.a.y + s * step);
        let bwd = |s: &Rational| Point::new(&self.a.x - step, &self.a.y - s * step);
        [fwd(&self.s_plus_max), fwd(&self.s_plus_min), bwd(&self.s_minus_max), bwd(&self.s_minus_min)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    First,
    Second,
}

/// Grid interpolants `h_n` of the selections and their node statistics.
#[derive(Clone, Debug, Serialize)]
pub struct GridApprox {
    pub n: usize,
    #[serde(with = "scalar_string")]
    pub r: Rational,
    #[serde(with = "scalar_string")]
    pub step: Rational,
    /// Distinct interpolants on `[0, r]`, constant beyond.
    pub interpolants: Vec<PlFunction>,
    pub nodes: Vec<SlopeStats>,
}

/// Interpolate every selection at `i·r/n` and collect slope statistics per node.
pub fn grid_approx(sset: &SSetPresentation, n: usize) -> Result<GridApprox> {
    if n < 2 {
        return precondition("grid count n must be at least 2");
    }
    if sset.selections.is_empty() {
        return precondition("selection list is empty");
    }
    if !sset.r.is_positive() {
        return precondition("r must be positive");
    }
    let step = sset.r.clone() / Rational::from_integer((n as i64).into());
    let xs: Vec<Rational> = (0..=n).map(|i| &step * Rational::from_integer((i as i64).into())).collect();
    let mut interpolants: Vec<PlFunction> = Vec::new();
    for (j, h) in sset.selections.iter().enumerate() {
        if h.start() != &Rational::zero() || h.end() != &sset.r {
            return precondition(format!("selection {j} is not defined on [0, r]"));
        }
        let ys = xs.iter().map(|x| h.eval(x)).collect::<Result<Vec<_>>>()?;
        let hn = PiecewiseLinear::new(xs.clone(), ys)?;
        if !interpolants.contains(&hn) {
            interpolants.push(hn);
        }
    }
    let mut nodes = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let mut values: Vec<Rational> = interpolants.iter().map(|h| h.values()[i].clone()).collect();
        values.sort();
        values.dedup();
        for y in values {
            let through: Vec<&PlFunction> = interpolants.iter().filter(|h| h.values()[i] == y).collect();
            let right: Vec<Rational> =
                through.iter().map(|h| if i < n { h.slope(i) } else { Rational::zero() }).collect();
            let left: Vec<Rational> =
                through.iter().map(|h| if i > 0 { h.slope(i - 1) } else { Rational::zero() }).collect();
            let max = |v: &[Rational]| v.iter().max().expect("nonempty").clone();
            let min = |v: &[Rational]| v.iter().min().expect("nonempty").clone();
            nodes.push(SlopeStats {
                index: i,
                a: Point::new(x.clone(), y),
                s_plus_max: max(&right),
                s_plus_min: min(&right),
                s_minus_max: max(&left),
                s_minus_min: min(&left),
            });
        }
    }
    Ok(GridApprox { n, r: sset.r.clone(), step, interpolants, nodes })
}

impl GridApprox {
    /// `M_n` as float features: the interpolant segments and the horizontal rays.
    pub fn features(&self) -> Features {
        let mut f = Features::default();
        let mut segs: Vec<[f64; 4]> = Vec::new();
        let mut left: Vec<f64> = Vec::new();
        let mut right: Vec<f64> = Vec::new();
        for h in &self.interpolants {
            let xs: Vec<f64> = h.breakpoints().iter().map(|x| x.to_f64_lossy()).collect();
            let ys: Vec<f64> = h.values().iter().map(|y| y.to_f64_lossy()).collect();
            for i in 0..xs.len() - 1 {
                let s = [xs[i], ys[i], xs[i + 1], ys[i + 1]];
                if !segs.contains(&s) {
                    segs.push(s);
                }
            }
            left.push(ys[0]);
            right.push(*ys.last().expect("nonempty"));
        }
        for v in [&mut left, &mut right] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let r = self.r.to_f64_lossy();
        f.segments = segs;
        f.rays.extend(left.into_iter().map(|y| ([0.0, y], [-1.0, 0.0])));
        f.rays.extend(right.into_iter().map(|y| ([r, y], [1.0, 0.0])));
        f
    }
}

// ---------------------------------------------------------------------------
// Cone potentials

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    Global,
    Clamped,
}

/// Concave `ψ` with affine `S` such that `|z − v| + ψ(z) = S(z)` on the angle `V`.
#[derive(Clone, Debug, Serialize)]
pub struct ConePotential {
    pub vertex: P,
    pub class: NodeClass,
    /// Directions of the two boundary rays of `V`.
    pub rays: [P; 2],
    /// `V = {z : ⟨z − v, m⟩ ≤ 0 for both m}`; the `m` are `p − v` for the defining p-points.
    pub normals: [P; 2],
    /// Half of the angle measure.
    pub beta: f64,
    /// Unit bisector `e`.
    pub bisector: [f64; 2],
    pub mode: PsiMode,
    pub lipschitz: f64,
    #[serde(skip)]
    v: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Region {
    Inside,
    /// Outside, nearest point of `V` on the ray with this sign of the lateral coordinate.
    Side(bool),
    Vertex,
}

/// `(|p| + |q| − |p + q|) / 2`, without cancellation.
fn norm_defect(p: [f64; 2], q: [f64; 2]) -> f64 {
    let (np, nq) = (p[0].hypot(p[1]), q[0].hypot(q[1]));
    let ns = (p[0] + q[0]).hypot(p[1] + q[1]);
    let dot = p[0] * q[0] + p[1] * q[1];
    if dot > 0.0 {
        let cross = p[0] * q[1] - p[1] * q[0];
        let den = (np * nq + dot) * (np + nq + ns);
        if den > 0.0 {
            return cross * cross / den;
        }
        return 0.0;
    }
    (np + nq - ns) / 2.0
}

/// Cone potential of `node` for the given class.
///
/// First class: `V` is bounded by the normals of the directions `(1, s^+)`
/// and `(1, s_-)` and opens downwards; the second class mirrors it upwards.
pub fn cone_potential(node: &SlopeStats, class: NodeClass, mode: PsiMode) -> Result<ConePotential> {
    if !node.in_class(class) {
        return precondition(format!("node {:?} has zero angle for class {class:?}", node.a));
    }
    let (hi, lo) = node.class_slopes(class);
    let (th_hi, th_lo) = (hi.to_f64_lossy().atan(), lo.to_f64_lossy().atan());
    let beta = (th_hi - th_lo) / 2.0;
    let one = Rational::one();
    let (rays, normals, theta_e) = match class {
        NodeClass::First => (
            [Point::new(hi.clone(), -one.clone()), Point::new(lo.clone(), -one.clone())],
            [Point::new(one.clone(), hi.clone()), Point::new(-one.clone(), -lo.clone())],
            (th_hi + th_lo) / 2.0 - FRAC_PI_2,
        ),
        NodeClass::Second => (
            [Point::new(-lo.clone(), one.clone()), Point::new(-hi.clone(), one.clone())],
            [Point::new(one.clone(), lo.clone()), Point::new(-one.clone(), -hi.clone())],
            (th_hi + th_lo) / 2.0 + FRAC_PI_2,
        ),
    };
    let lipschitz = match mode {
        PsiMode::Global => 1.0 + 1.0 / beta.cos(),
        PsiMode::Clamped => beta.tan(),
    };
    Ok(ConePotential {
        vertex: node.a.clone(),
        class,
        rays,
        normals,
        beta,
        bisector: [theta_e.cos(), theta_e.sin()],
        mode,
        lipschitz,
        v: node.a.to_f64(),
    })
}

impl ConePotential {
    /// Angle measure `2β`.
    pub fn measure(&self) -> f64 {
        2.0 * self.beta
    }

    /// Exact membership in `V` by the inner-product definition.
    pub fn contains_exact(&self, z: &P) -> bool {
        let d = z.clone() - self.vertex.clone();
        self.normals.iter().all(|m| !d.dot(m).is_positive())
    }

    /// Bisector-frame coordinates of `z − v`.
    fn local(&self, z: [f64; 2]) -> (f64, f64) {
        let (dx, dy) = (z[0] - self.v[0], z[1] - self.v[1]);
        let e = self.bisector;
        (dx * e[0] + dy * e[1], -dx * e[1] + dy * e[0])
    }

    /// The affine part `S(z) = ⟨z − v, e⟩ / cos β`.
    pub fn affine(&self, z: [f64; 2]) -> f64 {
        self.local(z).0 / self.beta.cos()
    }

    fn region(&self, x: f64, y: f64) -> Region {
        if y.abs() <= x * self.beta.tan() {
            Region::Inside
        } else if x * self.beta.cos() + y.abs() * self.beta.sin() <= 0.0 {
            Region::Vertex
        } else {
            Region::Side(y > 0.0)
        }
    }

    pub fn eval(&self, z: [f64; 2]) -> f64 {
        let (x, y) = self.local(z);
        let inside = x / self.beta.cos() - x.hypot(y);
        match self.mode {
            PsiMode::Global => inside,
            PsiMode::Clamped => match self.region(x, y) {
                Region::Inside => inside,
                Region::Vertex => -self.beta.tan() * x.hypot(y),
                Region::Side(_) => -self.beta.tan() * (y.abs() * self.beta.cos() - x * self.beta.sin()),
            },
        }
    }

    /// Clamped value by direct maximisation of `S(w) − |w − v| − tan β·|z − w|` over `w ∈ V`.
    ///
    /// Nested ternary search in bisector coordinates `w = (s, t)`, `|t| ≤ s·tan β`,
    /// `0 ≤ s ≤ 4(|z − v| + 1)`; the objective is jointly concave.
    pub fn eval_by_search(&self, z: [f64; 2]) -> f64 {
        let (x, y) = self.local(z);
        let (tb, cb) = (self.beta.tan(), self.beta.cos());
        let objective = |s: f64, t: f64| s / cb - s.hypot(t) - tb * (x - s).hypot(y - t);
        let inner = |s: f64| {
            let (mut lo, mut hi) = (-s * tb, s * tb);
            for _ in 0..120 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if objective(s, m1) < objective(s, m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            objective(s, (lo + hi) / 2.0)
        };
        let (mut lo, mut hi) = (0.0, 4.0 * (x.hypot(y) + 1.0));
        for _ in 0..120 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if inner(m1) < inner(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        inner((lo + hi) / 2.0)
    }

    /// `ψ((x + y)/2) − (ψ(x) + ψ(y))/2`, evaluated without cancellation where
    /// all three points share a region.
    pub fn midpoint_defect(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let (ax, ay) = self.local(a);
        let (bx, by) = self.local(b);
        let radial = norm_defect([ax, ay], [bx, by]);
        match self.mode {
            PsiMode::Global => radial,
            PsiMode::Clamped => {
                let (mx, my) = ((ax + bx) / 2.0, (ay + by) / 2.0);
                let ra = self.region(ax, ay);
                if ra == self.region(bx, by) && ra == self.region(mx, my) {
                    match ra {
                        Region::Inside => radial,
                        Region::Vertex => self.beta.tan() * radial,
                        Region::Side(_) => 0.0,
                    }
                } else {
                    let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                    self.eval(m) - (self.eval(a) + self.eval(b)) / 2.0
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ψ_n and its budget

/// Second-difference budget of the node slopes against the envelope control.
#[derive(Clone, Debug, Serialize)]
pub struct Budget {
    pub n: usize,
    /// Number of envelopes `k`.
    pub k: usize,
    /// Lipschitz constant `L` of the mixed control on `[−r/n, r + r/n]`.
    #[serde(with = "scalar_string")]
    pub lipschitz: Rational,
    /// `Σ |s^+ − s_-|` over all nodes.
    #[serde(with = "scalar_string")]
    pub gap_sum_first: Rational,
    /// `Σ |s^- − s_+|` over all nodes.
    #[serde(with = "scalar_string")]
    pub gap_sum_second: Rational,
    /// `k` times the change of the control's end difference quotients.
    #[serde(with = "scalar_string")]
    pub telescoped: Rational,
    /// `C = 2Lk`.
    #[serde(with = "scalar_string")]
    pub c: Rational,
    /// `D = 2CL / (√2 arctan L)`, zero when `L = 0`.
    pub d: f64,
    /// Both gap sums are at most the telescoped value, which is at most `C`.
    pub within_bound: bool,
}

fn budget(sset: &SSetPresentation, grid: &GridApprox) -> Result<Budget> {
    if sset.envelopes.is_empty() {
        return precondition("budget needs at least one envelope");
    }
    let (lo, hi) = (-grid.step.clone(), &sset.r + &grid.step);
    let extended = sset.envelopes.iter().map(|e| e.extend_constant(&lo, &hi)).collect::<Result<Vec<_>>>()?;
    let phi = mix_control(&extended)?;
    let l = phi.lipschitz();
    let k = Rational::from_integer((sset.envelopes.len() as i64).into());
    let dq = |a: &Rational, b: &Rational| -> Result<Rational> { Ok((phi.eval(b)? - phi.eval(a)?) / (b - a)) };
    let telescoped = &k * (dq(&sset.r, &hi)? - dq(&lo, &Rational::zero())?);
    let c = q(2, 1) * &l * &k;
    let gap_sum_first = grid.nodes.iter().fold(Rational::zero(), |acc, s| acc + s.gap(NodeClass::First).abs());
    let gap_sum_second = grid.nodes.iter().fold(Rational::zero(), |acc, s| acc + s.gap(NodeClass::Second).abs());
    let lf = l.to_f64_lossy();
    let d = if lf > 0.0 { 2.0 * c.to_f64_lossy() * lf / (2f64.sqrt() * lf.atan()) } else { 0.0 };
    let within_bound = gap_sum_first <= telescoped && gap_sum_second <= telescoped && telescoped <= c;
    Ok(Budget { n: grid.n, k: sset.envelopes.len(), lipschitz: l, gap_sum_first, gap_sum_second, telescoped, c, d, within_bound })
}

/// `Ψ_n`: the sum of the cone potentials over both node classes.
#[derive(Clone, Debug, Serialize)]
pub struct PsiField {
    pub grid: GridApprox,
    pub mode: PsiMode,
    pub potentials: Vec<ConePotential>,
    pub budget: Budget,
}

pub fn build_psi(sset: &SSetPresentation, n: usize, mode: PsiMode) -> Result<PsiField> {
    let grid = grid_approx(sset, n)?;
    let mut potentials = Vec::new();
    for node in &grid.nodes {
        for class in [NodeClass::First, NodeClass::Second] {
            if node.in_class(class) {
                potentials.push(cone_potential(node, class, mode)?);
            }
        }
    }
    let budget = budget(sset, &grid)?;
    Ok(PsiField { grid, mode, potentials, budget })
}

impl PsiField {
    pub fn eval(&self, z: [f64; 2]) -> f64 {
        self.potentials.iter().map(|p| p.eval(z)).sum()
    }

    /// Sum of the per-potential Lipschitz constants.
    pub fn lipschitz_bound(&self) -> f64 {
        self.potentials.iter().map(|p| p.lipschitz).sum()
    }

    /// The same field with every potential removed.
    pub fn ablated(&self) -> Self {
        Self { potentials: Vec::new(), ..self.clone() }
    }

    /// Largest difference quotient of `Ψ_n` over random pairs near `M_n`.
    pub fn sampled_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let (lo, hi) = probe_box(&self.grid.features(), self.grid.r.to_f64_lossy());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let mut best: f64 = 0.0;
        for i in 0..pairs {
            let a = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
            // alternate long pairs with short ones around a random point
            let b = if i % 2 == 0 {
                [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])]
            } else {
                let len = scale * 10f64.powf(rng.gen_range(-4.0..-1.0));
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [a[0] + len * t.cos(), a[1] + len * t.sin()]
            };
            let dist = (a[0] - b[0]).hypot(a[1] - b[1]);
            if dist > 0.0 {
                best = best.max((self.eval(a) - self.eval(b)).abs() / dist);
            }
        }
        best
    }

    fn defect(&self, features: &Features, a: [f64; 2], b: [f64; 2]) -> f64 {
        let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let dd = features.dist(m) - (features.dist(a) + features.dist(b)) / 2.0;
        dd + self.potentials.iter().map(|p| p.midpoint_defect(a, b)).sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// Probe-ball concavity

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub balls: usize,
    /// Random segments per ball.
    pub triples: usize,
    pub seed: u64,
    /// Allowed defect, relative to the ball radius.
    pub tolerance: f64,
    /// Explicit centres; when absent, a jittered grid is used.
    pub centers: Option<Vec<[f64; 2]>>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { balls: 200, triples: 64, seed: 0, tolerance: 1e-9, centers: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallResult {
    pub center: [f64; 2],
    pub radius: f64,
    pub worst_defect: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub balls: Vec<BallResult>,
    pub skipped: Vec<([f64; 2], String)>,
    /// Smallest `defect / radius` seen.
    pub worst_scaled_defect: f64,
    pub failed: usize,
    pub passed: bool,
}

/// Bounding box of the finite part of `M_n`, grown by half its larger side on every side.
fn probe_box(features: &Features, fallback: f64) -> ([f64; 2], [f64; 2]) {
    let (lo, hi) = features.bbox().unwrap_or(([0.0, 0.0], [fallback, fallback]));
    let margin = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let margin = if margin > 1e-300 { margin } else { 0.5 * fallback };
    ([lo[0] - margin, lo[1] - margin], [hi[0] + margin, hi[1] + margin])
}

fn jittered_centers(lo: [f64; 2], hi: [f64; 2], count: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let g = ((4 * count.max(1)) as f64).sqrt().ceil() as usize;
    let (wx, wy) = ((hi[0] - lo[0]) / g as f64, (hi[1] - lo[1]) / g as f64);
    let mut out = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            out.push([lo[0] + (i as f64 + rng.gen::<f64>()) * wx, lo[1] + (j as f64 + rng.gen::<f64>()) * wy]);
        }
    }
    out.shuffle(rng);
    out
}

fn disk_sample(rng: &mut ChaCha8Rng) -> [f64; 2] {
    loop {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p[0] * p[0] + p[1] * p[1] <= 1.0 {
            return p;
        }
    }
}

/// Midpoint concavity of `d_{M_n} + Ψ_n` inside balls `B(c, ρ)` with `ρ < d_{M_n}(c)`.
///
/// Radii are half the distance to `M_n`, capped at `r/4`; balls smaller than
/// `1e-6·r` are skipped. A ball passes when every sampled defect is at least
/// `−tolerance·ρ`.
pub fn verify_local_concavity(psi: &PsiField, cfg: &ProbeConfig) -> ConcavityReport {
    let features = psi.grid.features();
    let r = psi.grid.r.to_f64_lossy();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (explicit, centers) = match &cfg.centers {
        Some(c) => (true, c.clone()),
        None => {
            let (lo, hi) = probe_box(&features, r);
            (false, jittered_centers(lo, hi, cfg.balls, &mut rng))
        }
    };
    let mut balls = Vec::new();
    let mut skipped = Vec::new();
    for c in centers {
        if balls.len() == cfg.balls {
            break;
        }
        let d = features.dist(c);
        let radius = (d / 2.0).min(r / 4.0);
        if !(radius >= 1e-6 * r) {
            if explicit {
                let why = if d > 0.0 { "ball radius below 1e-6·r" } else { "centre lies on M_n" };
                skipped.push((c, why.to_string()));
            }
            continue;
        }
        let mut worst = f64::INFINITY;
        for _ in 0..cfg.triples {
            let (u, v) = (disk_sample(&mut rng), disk_sample(&mut rng));
            let a = [c[0] + radius * u[0], c[1] + radius * u[1]];
            let b = [c[0] + radius * v[0], c[1] + radius * v[1]];
            worst = worst.min(psi.defect(&features, a, b));
        }
        let passed = worst >= -cfg.tolerance * radius;
        balls.push(BallResult { center: c, radius, worst_defect: worst, passed });
    }
    let worst_scaled_defect = balls.iter().map(|b| b.worst_defect / b.radius).fold(f64::INFINITY, f64::min);
    let failed = balls.iter().filter(|b| !b.passed).count();
    let passed = !balls.is_empty() && failed == 0;
    ConcavityReport { balls, skipped, worst_scaled_defect, failed, passed }
}

// ---------------------------------------------------------------------------
// Cones and exact projections

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessSide {
    /// `z_n + A`: the cone opens towards `+x`.
    Forward,
    /// `z_n − A`: the cone opens towards `−x`.
    Backward,
}

impl WitnessSide {
    fn sign(self) -> i64 {
        match self {
            WitnessSide::Forward => 1,
            WitnessSide::Backward => -1,
        }
    }
}

/// Cone-local coordinates `(t, dy)` with `t = σ(x − z_x)`.
fn to_cone(z: &P, p: &P, sigma: i64) -> P {
    let t = &p.x - &z.x;
    Point::new(if sigma > 0 { t } else { -t }, &p.y - &z.y)
}

/// Clip a segment (cone-local coordinates) to `{|dy| ≤ w·t, t ≤ len}`.
fn clip_to_cone(a: &P, b: &P, w: &Rational, len: Option<&Rational>) -> Option<(P, P)> {
    let mut lo = Rational::zero();
    let mut hi = Rational::one();
    let mut constraints: Vec<Box<dyn Fn(&P) -> Rational>> =
        vec![Box::new(|p: &P| w * &p.x - &p.y), Box::new(|p: &P| w * &p.x + &p.y), Box::new(|p: &P| p.x.clone())];
    if let Some(len) = len {
        constraints.push(Box::new(move |p: &P| len - &p.x));
    }
    for g in constraints {
        let (g0, g1) = (g(a), g(b));
        if g0.is_negative() && g1.is_negative() {
            return None;
        }
        if g0.is_negative() || g1.is_negative() {
            let lam = &g0 / (&g0 - &g1);
            if g0.is_negative() {
                lo = lo.max(lam);
            } else {
                hi = hi.min(lam);
            }
        }
    }
    if lo > hi {
        return None;
    }
    let at = |l: &Rational| Point::new(&a.x + (&b.x - &a.x) * l, &a.y + (&b.y - &a.y) * l);
    Some((at(&lo), at(&hi)))
}

fn in_cone(p: &P, w: &Rational, len: Option<&Rational>) -> bool {
    !p.x.is_negative() && p.y.abs() <= w * &p.x && len.map_or(true, |l| &p.x <= l)
}

/// Boundary edges of `M`: skeleton edges not filled on both sides.
fn boundary_edges(m: &RealizedSet) -> Vec<(P, P)> {
    let arr = &m.arrangement;
    m.edge_sides()
        .into_iter()
        .zip(&arr.edges)
        .filter(|((l, r), _)| !(*l && *r))
        .map(|(_, e)| (arr.vertices[e.a].clone(), arr.vertices[e.b].clone()))
        .collect()
}

/// Exact `π_1(M ∩ (z ± A_len^w)) − z_x`, as sorted disjoint closed intervals in `t`.
pub fn cone_projection(m: &RealizedSet, z: &P, w: &Rational, len: &Rational, side: WitnessSide) -> Vec<(Rational, Rational)> {
    let sigma = side.sign();
    let arr = &m.arrangement;
    let mut pieces: Vec<(Rational, Rational)> = Vec::new();
    let mut critical: Vec<Rational> = vec![Rational::zero(), len.clone()];
    for e in &arr.edges {
        let (a, b) = (to_cone(z, &arr.vertices[e.a], sigma), to_cone(z, &arr.vertices[e.b], sigma));
        if let Some((c0, c1)) = clip_to_cone(&a, &b, w, Some(len)) {
            let (t0, t1) = if c0.x <= c1.x { (c0.x, c1.x) } else { (c1.x, c0.x) };
            critical.push(t0.clone());
            critical.push(t1.clone());
            pieces.push((t0, t1));
        }
    }
    for p in &m.points {
        let l = to_cone(z, p, sigma);
        if in_cone(&l, w, Some(len)) {
            critical.push(l.x.clone());
            pieces.push((l.x.clone(), l.x));
        }
    }
    pieces.push((Rational::zero(), Rational::zero()));
    if !m.fill_signatures.is_empty() {
        critical.sort();
        critical.dedup();
        let covered = |t: &Rational, pieces: &[(Rational, Rational)]| pieces.iter().any(|(a, b)| a <= t && t <= b);
        let filled = |t: &Rational| {
            let x = if sigma > 0 { &z.x + t } else { &z.x - t };
            m.in_fill(&Point::new(x, z.y.clone()))
        };
        let mut extra = Vec::new();
        for pair in critical.windows(2) {
            let mid = (&pair[0] + &pair[1]) / q(2, 1);
            if !covered(&mid, &pieces) && filled(&mid) {
                extra.push((pair[0].clone(), pair[1].clone()));
            }
        }
        for t in &critical {
            if t.is_positive() && !covered(t, &pieces) && filled(t) {
                extra.push((t.clone(), t.clone()));
            }
        }
        pieces.extend(extra);
    }
    merge_intervals(pieces)
}

pub(crate) fn merge_intervals(mut v: Vec<(Rational, Rational)>) -> Vec<(Rational, Rational)> {
    v.sort();
    let mut out: Vec<(Rational, Rational)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => {
                if b > last.1 {
                    last.1 = b;
                }
            }
            _ => out.push((a, b)),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "clause", rename_all = "kebab-case")]
pub enum ProjectionClause {
    IsolatedInCone {
        #[serde(with = "scalar_string")]
        r: Rational,
    },
    FullProjection {
        #[serde(with = "scalar_string")]
        r: Rational,
    },
    /// No tested radius realises a clause; `components` is the projection at the smallest radius.
    Violation {
        #[serde(with = "scalar_string")]
        r: Rational,
        components: Vec<[String; 2]>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionReport {
    /// `∂M ∩ (z + A_s^{3u}) ⊆ z + A_s^u`.
    pub hypothesis_holds: bool,
    pub clause: ProjectionClause,
    pub radii_tested: usize,
}

/// Classify `M` near `z` by the projection of `M ∩ (z + A_r^{3u})` for `r = s/2^j`, `j ≤ 20`.
pub fn cone_projection_classify(m: &RealizedSet, z: &P, u: &Rational, s: &Rational) -> Result<ProjectionReport> {
    if !u.is_positive() || !s.is_positive() {
        return precondition("u and s must be positive");
    }
    if !m.contains(z) {
        return precondition(format!("{z:?} is not a point of M"));
    }
    let w = q(3, 1) * u;
    let mut hypothesis_holds = true;
    for (a, b) in boundary_edges(m) {
        if let Some((c0, c1)) = clip_to_cone(&to_cone(z, &a, 1), &to_cone(z, &b, 1), &w, Some(s)) {
            hypothesis_holds &= in_cone(&c0, u, Some(s)) && in_cone(&c1, u, Some(s));
        }
    }
    for p in m.presentation.isolated_points() {
        let l = to_cone(z, &p, 1);
        if in_cone(&l, &w, Some(s)) {
            hypothesis_holds &= in_cone(&l, u, Some(s));
        }
    }
    let mut r = s.clone();
    let mut last = Vec::new();
    for j in 0..=20 {
        let proj = cone_projection(m, z, &w, &r, WitnessSide::Forward);
        if proj.len() == 1 && proj[0].1.is_zero() {
            return Ok(ProjectionReport { hypothesis_holds, clause: ProjectionClause::IsolatedInCone { r }, radii_tested: j + 1 });
        }
        if proj.len() == 1 && proj[0].0.is_zero() && proj[0].1 == r {
            return Ok(ProjectionReport { hypothesis_holds, clause: ProjectionClause::FullProjection { r }, radii_tested: j + 1 });
        }
        last = proj;
        if j < 20 {
            r /= q(2, 1);
        }
    }
    let components = last.iter().map(|(a, b)| [(&z.x + a).repr(), (&z.x + b).repr()]).collect();
    Ok(ProjectionReport { hypothesis_holds, clause: ProjectionClause::Violation { r, components }, radii_tested: 21 })
}

/// Largest `t` such that `M ∩ (p ± A_t^w) = {p}`: `None` if the infinite cone meets `M` only at `p`.
pub fn cone_gap(m: &RealizedSet, p: &P, w: &Rational, side: WitnessSide) -> Option<Rational> {
    let sigma = side.sign();
    let arr = &m.arrangement;
    let mut best: Option<Rational> = None;
    let offer = |t: Rational, best: &mut Option<Rational>| {
        if best.as_ref().map_or(true, |b| &t < b) {
            *best = Some(t);
        }
    };
    for e in &arr.edges {
        let (a, b) = (to_cone(p, &arr.vertices[e.a], sigma), to_cone(p, &arr.vertices[e.b], sigma));
        if let Some((c0, c1)) = clip_to_cone(&a, &b, w, None) {
            match (c0.is_zero(), c1.is_zero()) {
                (true, true) => continue,
                (true, false) | (false, true) => return Some(Rational::zero()),
                _ => offer(c0.x.clone().min(c1.x), &mut best),
            }
        }
    }
    for other in &m.points {
        let l = to_cone(p, other, sigma);
        if !l.is_zero() && in_cone(&l, w, None) {
            offer(l.x, &mut best);
        }
    }
    if !m.fill_signatures.is_empty() {
        let t = best.clone().map_or(Rational::one(), |b| b / q(2, 1));
        let x = if sigma > 0 { &p.x + &t } else { &p.x - &t };
        if m.in_fill(&Point::new(x, p.y.clone())) {
            return Some(Rational::zero());
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Witness search

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub point: P,
    /// `a_n = |x_n − z_x|`.
    #[serde(with = "scalar_string")]
    pub abscissa: Rational,
    /// `b_n = y_n − z_y`.
    #[serde(with = "scalar_string")]
    pub ordinate: Rational,
    #[serde(with = "scalar_string")]
    pub rho: Rational,
    pub side: WitnessSide,
    #[serde(with = "opt_scalar_string")]
    pub gap_forward: Option<Rational>,
    #[serde(with = "opt_scalar_string")]
    pub gap_backward: Option<Rational>,
}

/// Points of `M` accumulating at `z` inside `z + S^u`, each with an empty `3u`-cone.
#[derive(Clone, Debug, Serialize)]
pub struct NonDcWitness {
    pub z: P,
    #[serde(with = "scalar_string")]
    pub u: Rational,
    /// `+1` when the witnesses lie right of `z`, `−1` when left.
    pub orientation: i64,
    pub witnesses: Vec<Witness>,
    /// PL spine `g` on `[0, a_1]` (offsets from `z`) with `g(a_n) = b_n` and `g(0) = 0`.
    pub spine: PlFunction,
    #[serde(with = "scalar_string")]
    pub spine_variation: Rational,
    #[serde(with = "scalar_string")]
    pub spine_bound: Rational,
    /// Every spine slope is at most `2u` in absolute value.
    pub slope_bound_holds: bool,
}

/// Search for a witness sequence `(z_n, ρ_n)` at `z`.
///
/// Candidates are presentation points and arrangement vertices in
/// `(z + S^u) \ {z}`. Those with an exactly empty `3u`-cone on some side are
/// kept, then thinned greedily so that `a_{n+1} ≤ a_n/3`. `ρ_n` is half the
/// smaller positive cone gap, capped at `a_n`. The first witness prefers the
/// cone pointing towards `z`, later ones the cone pointing away, so that the
/// spine's sample points stay inside `(0, a_1]`.
pub fn detect_non_dc(m: &RealizedSet, z: &P, u: &Rational) -> Result<Option<NonDcWitness>> {
    if !u.is_positive() {
        return precondition("u must be positive");
    }
    if !m.contains(z) {
        return precondition(format!("{z:?} is not a point of M"));
    }
    let w = q(3, 1) * u;
    let mut candidates: Vec<P> = m.points.clone();
    candidates.extend(m.arrangement.vertices.iter().cloned());
    candidates.sort_by(|a, b| a.lex_cmp(b));
    candidates.dedup();
    let mut best: Option<NonDcWitness> = None;
    for orientation in [1i64, -1] {
        let mut side: Vec<(Rational, P)> = candidates
            .iter()
            .filter_map(|p| {
                let t = if orientation > 0 { &p.x - &z.x } else { &z.x - &p.x };
                let dy = &p.y - &z.y;
                (t.is_positive() && dy.abs() <= u * &t).then(|| (t, p.clone()))
            })
            .collect();
        side.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.lex_cmp(&b.1)));
        let mut witnesses: Vec<Witness> = Vec::new();
        for (a, p) in side {
            if let Some(prev) = witnesses.last() {
                if a.clone() * q(3, 1) > prev.abscissa {
                    continue;
                }
            }
            let gap_forward = cone_gap(m, &p, &w, WitnessSide::Forward);
            let gap_backward = cone_gap(m, &p, &w, WitnessSide::Backward);
            let ok = |g: &Option<Rational>| g.as_ref().map_or(true, |g| g.is_positive());
            let (fwd_ok, bwd_ok) = (ok(&gap_forward), ok(&gap_backward));
            if !fwd_ok && !bwd_ok {
                continue;
            }
            let positive: Vec<&Rational> = [(&gap_forward, fwd_ok), (&gap_backward, bwd_ok)]
                .into_iter()
                .filter_map(|(g, ok)| if ok { g.as_ref() } else { None })
                .collect();
            let half_gap = positive.into_iter().min().map(|g| g / q(2, 1));
            let rho = match half_gap {
                Some(h) if h < a => h,
                _ => a.clone(),
            };
            // towards z is Backward when the witnesses lie right of z
            let (toward, away) = if orientation > 0 {
                (WitnessSide::Backward, WitnessSide::Forward)
            } else {
                (WitnessSide::Forward, WitnessSide::Backward)
            };
            let valid = |s: WitnessSide| if s == WitnessSide::Forward { fwd_ok } else { bwd_ok };
            let preferred = if witnesses.is_empty() { toward } else { away };
            let chosen = if valid(preferred) { preferred } else if preferred == toward { away } else { toward };
            witnesses.push(Witness {
                point: p.clone(),
                abscissa: a,
                ordinate: &p.y - &z.y,
                rho,
                side: chosen,
                gap_forward,
                gap_backward,
            });
        }
        if witnesses.len() >= 3 && best.as_ref().map_or(true, |b| witnesses.len() > b.witnesses.len()) {
            let a: Vec<Rational> = witnesses.iter().map(|w| w.abscissa.clone()).collect();
            let b: Vec<Rational> = witnesses.iter().map(|w| w.ordinate.clone()).collect();
            let seq = sequence_to_function(&a, &b, a.len() - 1)?;
            let two_u = q(2, 1) * u;
            let slope_bound_holds = seq.slopes.iter().all(|s| s.abs() <= two_u);
            best = Some(NonDcWitness {
                z: z.clone(),
                u: u.clone(),
                orientation,
                witnesses,
                spine: seq.function,
                spine_variation: seq.derivative_variation,
                spine_bound: seq.bound,
                slope_bound_holds,
            });
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Convexity blow-up

#[derive(Clone, Debug, Serialize)]
pub struct BlowupRow {
    /// Number of witnesses used.
    pub n: usize,
    /// Partition convexity of the sampled `F(x) = d_M(x, g(x))` on `[0, a_1]`.
    pub khat: f64,
    /// Growth of `khat` per added witness since the previous row.
    pub increment: Option<f64>,
    /// Sign changes of consecutive difference quotients.
    pub oscillations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupTable {
    pub alpha: f64,
    pub rows: Vec<BlowupRow>,
    pub strictly_increasing: bool,
    /// Every increment is at least `α(u) − 1e-6`.
    pub increments_meet_alpha: bool,
}

/// Sampled `F` along the spine through the first `count` witnesses.
fn spine_samples(field: &Field, w: &NonDcWitness, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let ws = &w.witnesses[..count];
    let a: Vec<Rational> = ws.iter().map(|x| x.abscissa.clone()).collect();
    let b: Vec<Rational> = ws.iter().map(|x| x.ordinate.clone()).collect();
    let g = sequence_to_function(&a, &b, count - 1)?.function;
    let a1 = a[0].clone();
    let mut xs: Vec<Rational> = vec![Rational::zero()];
    for wit in ws {
        xs.push(wit.abscissa.clone());
        // away from z is +t in spine coordinates
        let away = (wit.side == WitnessSide::Forward) == (w.orientation > 0);
        let half = &wit.rho / q(2, 1);
        let x = if away { &wit.abscissa + &half } else { &wit.abscissa - &half };
        if x.is_positive() && x <= a1 {
            xs.push(x);
        }
    }
    xs.sort();
    xs.dedup();
    let mut fs = Vec::with_capacity(xs.len());
    for x in &xs {
        let y = g.eval(x)?;
        let gx = if w.orientation > 0 { &w.z.x + x } else { &w.z.x - x };
        fs.push(field.dist(Point::new(gx, &w.z.y + y).to_f64()));
    }
    Ok((xs.iter().map(|x| x.to_f64_lossy()).collect(), fs))
}

/// `K̂` of `F(x) = d_M(x, g(x))` for spines through the first `N` witnesses, `N ∈ ns`.
pub fn convexity_blowup(m: &RealizedSet, w: &NonDcWitness, ns: &[usize]) -> Result<BlowupTable> {
    if w.witnesses.len() < 3 {
        return precondition("convexity blow-up needs at least 3 witnesses");
    }
    if let Some(bad) = ns.iter().find(|&&n| n < 2 || n > w.witnesses.len()) {
        return precondition(format!("N = {bad} outside 2..={}", w.witnesses.len()));
    }
    let alpha = alpha_lower_bound(&w.u)?;
    let field = Field::new(m);
    let mut rows: Vec<BlowupRow> = Vec::new();
    for &n in ns {
        let (xs, fs) = spine_samples(&field, w, n)?;
        let khat = partition_convexity_of_samples(&xs, &fs);
        let dq: Vec<f64> = (0..xs.len() - 1).map(|i| (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])).collect();
        let oscillations = dq.windows(2).filter(|p| p[0] * p[1] < 0.0).count();
        let increment = rows.last().map(|r| (khat - r.khat) / (n as f64 - r.n as f64));
        rows.push(BlowupRow { n, khat, increment, oscillations });
    }
    let strictly_increasing = rows.windows(2).all(|r| r[1].khat > r[0].khat);
    let increments_meet_alpha = rows.iter().filter_map(|r| r.increment).all(|inc| inc >= alpha - 1e-6);
    Ok(BlowupTable { alpha, rows, strictly_increasing, increments_meet_alpha })
}

/// `α(u) = u / (2√(1 + 9u²))`: the distance, relative to `ρ`, from a probe at
/// offset `ρ/2` inside the `2u`-cone to the boundary of the `3u`-cone.
pub fn alpha_lower_bound(u: &Rational) -> Result<f64> {
    if !u.is_positive() {
        return precondition("u must be positive");
    }
    let u = u.to_f64_lossy();
    Ok(u / (2.0 * (1.0 + 9.0 * u * u).sqrt()))
}

// ---------------------------------------------------------------------------
// Lipschitz selections

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum SelectionOutcome {
    Extended {
        selection: PlFunction,
        /// Largest absolute slope among the presented graphs.
        #[serde(with = "scalar_string")]
        u: Rational,
    },
    Blocked {
        #[serde(with = "scalar_string")]
        abscissa: Rational,
        /// The part traced before the block.
        partial: Vec<P>,
    },
}

/// Graphs of `M` over the x-axis, as functions of the global abscissa.
fn axis_graphs(pres: &PlanarSetPresentation) -> Result<Vec<PlFunction>> {
    let mut out = Vec::new();
    for piece in &pres.skeleton {
        let graphs = match piece {
            Piece::Graph(g) => vec![g.clone()],
            Piece::Sset(s) => s.selection_pieces(),
        };
        for g in graphs {
            if !g.rotation.is_identity() {
                return invalid("lipschitz_selection needs graphs over the x-axis (identity rotation)");
            }
            let one = Rational::one();
            out.push(g.profile.affine_reparam(&one, &g.offset.x, &one, &g.offset.y)?);
        }
    }
    Ok(out)
}

/// One greedy step from `(x, y)`: the lowest continuation in direction `dir` (+1 right, −1 left).
fn next_event(graphs: &[PlFunction], x: &Rational, y: &Rational, dir: i64) -> Option<(usize, Rational)> {
    let continues = |g: &PlFunction| {
        let beyond = if dir > 0 { x < g.end() } else { x > g.start() };
        g.contains(x) && beyond && g.eval(x).ok().as_ref() == Some(y)
    };
    let side = if dir > 0 { Side::Right } else { Side::Left };
    // lowest continuation: smallest right slope, or largest left slope
    let chosen = graphs
        .iter()
        .enumerate()
        .filter(|(_, g)| continues(g))
        .map(|(i, g)| (i, g.one_sided_slope(x, side).expect("interior point")))
        .min_by(|a, b| if dir > 0 { a.1.cmp(&b.1) } else { b.1.cmp(&a.1) }.then(a.0.cmp(&b.0)))?;
    let (ci, slope) = chosen;
    let ahead = |v: &Rational| if dir > 0 { v > x } else { v < x };
    let mut stop: Option<Rational> = None;
    let mut offer = |v: Rational| {
        let closer = stop.as_ref().map_or(true, |s| if dir > 0 { &v < s } else { &v > s });
        if ahead(&v) && closer {
            stop = Some(v);
        }
    };
    for g in graphs {
        for b in g.breakpoints() {
            offer(b.clone());
        }
    }
    let stop_at = stop.expect("the chosen graph ends ahead");
    // crossings with other graphs before the next breakpoint
    let mut best = stop_at.clone();
    for (j, g) in graphs.iter().enumerate() {
        if j == ci {
            continue;
        }
        let (lo, hi) = if dir > 0 { (x, &best) } else { (&best, x) };
        if !(g.contains(lo) && g.contains(hi)) {
            continue;
        }
        let d0 = g.eval(x).expect("contained") - y;
        let d1 = g.eval(&best).expect("contained") - (y + &slope * (&best - x));
        if !d0.is_zero() && (d0.is_positive() != d1.is_positive() || d1.is_zero()) {
            let cross = x + (&best - x) * &d0 / (&d0 - &d1);
            if ahead(&cross) {
                best = cross;
            }
        }
    }
    Some((ci, best))
}

fn trace(graphs: &[PlFunction], z: &P, end: &Rational, dir: i64) -> (Vec<P>, Option<Rational>) {
    let mut pts = vec![z.clone()];
    let (mut x, mut y) = (z.x.clone(), z.y.clone());
    while &x != end {
        match next_event(graphs, &x, &y, dir) {
            Some((ci, nx)) => {
                y = graphs[ci].eval(&nx).expect("within the chosen graph");
                x = nx;
                pts.push(Point::new(x.clone(), y.clone()));
            }
            None => return (pts, Some(x)),
        }
    }
    (pts, None)
}

/// Greedy continuous selection of `M` through `z` over the full extent of its graphs.
///
/// From `z` the trace follows, in each direction, the lowest graph that
/// continues the current point, re-deciding at every breakpoint and crossing.
pub fn lipschitz_selection(pres: &PlanarSetPresentation, z: &P) -> Result<SelectionOutcome> {
    let graphs = axis_graphs(pres)?;
    if graphs.is_empty() {
        return precondition("no graphs presented");
    }
    if !graphs.iter().any(|g| g.contains(&z.x) && g.eval(&z.x).ok().as_ref() == Some(&z.y)) {
        return precondition(format!("{z:?} is not on a presented graph"));
    }
    let lo = graphs.iter().map(|g| g.start().clone()).min().expect("nonempty");
    let hi = graphs.iter().map(|g| g.end().clone()).max().expect("nonempty");
    let (right, right_block) = trace(&graphs, z, &hi, 1);
    let (left, left_block) = trace(&graphs, z, &lo, -1);
    let mut pts: Vec<P> = left.into_iter().rev().collect();
    pts.extend(right.into_iter().skip(1));
    if let Some(abscissa) = right_block.or(left_block) {
        return Ok(SelectionOutcome::Blocked { abscissa, partial: pts });
    }
    let selection = if pts.len() == 1 {
        PiecewiseLinear::point(z.x.clone(), z.y.clone())
    } else {
        PiecewiseLinear::from_points(pts.into_iter().map(|p| (p.x, p.y)))?.simplify()
    };
    let u = graphs.iter().map(|g| g.lipschitz()).max().expect("nonempty");
    debug_assert!(selection.lipschitz() <= u);
    Ok(SelectionOutcome::Extended { selection, u })
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Falsified,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub n: usize,
    pub mode: PsiMode,
    pub potentials: usize,
    pub budget: Budget,
    pub lipschitz_bound: f64,
    pub sampled_lipschitz: f64,
    pub balls: usize,
    pub failed_balls: usize,
    pub worst_scaled_defect: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    #[serde(rename = "n-sweep")]
    pub n_sweep: Vec<SweepEntry>,
    pub budget: Option<Budget>,
    pub witnesses: Vec<NonDcWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupTable>,
    pub notes: Vec<String>,
}

/// One sweep entry: build `Ψ_n`, check the budget, sample its Lipschitz constant
/// and run the probe balls.
pub fn certify_at(sset: &SSetPresentation, n: usize, mode: PsiMode, cfg: &ProbeConfig) -> Result<SweepEntry> {
    let psi = build_psi(sset, n, mode)?;
    let report = verify_local_concavity(&psi, cfg);
    let sampled = psi.sampled_lipschitz(2000, cfg.seed);
    let lipschitz_ok = mode == PsiMode::Global || sampled <= psi.budget.d + 1e-8;
    Ok(SweepEntry {
        n,
        mode,
        potentials: psi.potentials.len(),
        lipschitz_bound: psi.lipschitz_bound(),
        sampled_lipschitz: sampled,
        balls: report.balls.len(),
        failed_balls: report.failed,
        worst_scaled_defect: report.worst_scaled_defect,
        passed: report.passed && psi.budget.within_bound && lipschitz_ok,
        budget: psi.budget,
    })
}

/// Run the `Ψ_n` pipeline over `ns`. The verdict is `consistent` only when
/// every entry passes; a failing entry makes it `inconclusive`, never `falsified`.
pub fn certify_sset(sset: &SSetPresentation, ns: &[usize], mode: PsiMode, cfg: &ProbeConfig) -> Result<Certificate> {
    let mut n_sweep = Vec::new();
    for &n in ns {
        n_sweep.push(certify_at(sset, n, mode, cfg)?);
    }
    let all = !n_sweep.is_empty() && n_sweep.iter().all(|e| e.passed);
    let budget = n_sweep.last().map(|e| e.budget.clone());
    let mut notes = vec![format!("evidence at n in {ns:?} only; no claim beyond the tested grids")];
    if !all {
        notes.push("some grid failed a check; see n-sweep".into());
    }
    Ok(Certificate {
        verdict: if all { Verdict::Consistent } else { Verdict::Inconclusive },
        n_sweep,
        budget,
        witnesses: Vec::new(),
        blowup: None,
        notes,
    })
}

/// Try every point of `at` as an accumulation point; the first witness
/// sequence found falsifies membership.
pub fn falsify(m: &RealizedSet, at: &[P], u: &Rational) -> Result<Certificate> {
    let mut notes = Vec::new();
    for z in at {
        if !m.contains(z) {
            notes.push(format!("skipped {z:?}: not a point of the set"));
            continue;
        }
        if let Some(w) = detect_non_dc(m, z, u)? {
            let top = w.witnesses.len().min(8);
            let ns: Vec<usize> = (3..=top).collect();
            let blowup = convexity_blowup(m, &w, &ns)?;
            notes.push(format!("{} cone-emptiness witnesses accumulate at {z:?}", w.witnesses.len()));
            return Ok(Certificate {
                verdict: Verdict::Falsified,
                n_sweep: Vec::new(),
                budget: None,
                witnesses: vec![w],
                blowup: Some(blowup),
                notes,
            });
        }
        notes.push(format!("no witness sequence at {z:?}"));
    }
    if at.is_empty() {
        notes.push("no candidate accumulation points".into());
    }
    Ok(Certificate { verdict: Verdict::Inconclusive, n_sweep: Vec::new(), budget: None, witnesses: Vec::new(), blowup: None, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qpow;
    use crate::scenes;
    use crate::sets::DcGraphPiece;

    fn pt(x: Rational, y: Rational) -> P {
        Point::new(x, y)
    }

    fn corner_node() -> SlopeStats {
        let grid = grid_approx(&scenes::corner_sset(), 2).unwrap();
        grid.nodes.into_iter().find(|s| s.a == pt(q(1, 2), q(0, 1))).unwrap()
    }

    fn random_points(n: usize, seed: u64, scale: f64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)]).collect()
    }

    #[test]
    fn corner_grid_node() {
        let s = corner_node();
        assert_eq!(s.s_minus_min, q(0, 1));
        assert_eq!(s.s_plus_max, q(1, 1));
        assert!(s.in_class(NodeClass::First));
        assert!(!s.in_class(NodeClass::Second));
        let [pp, _, _, pm] = s.p_points(&q(1, 2));
        assert_eq!(pp, pt(q(1, 1), q(1, 2)));
        assert_eq!(pm, pt(q(0, 1), q(0, 1)));
    }

    #[test]
    fn flat_and_tent_grids() {
        let zero = PiecewiseLinear::constant(q(0, 1), q(1, 1), q(0, 1)).unwrap();
        let flat = SSetPresentation { r: q(1, 1), envelopes: vec![zero.clone()], selections: vec![zero] };
        let g = grid_approx(&flat, 8).unwrap();
        assert!(g.nodes.iter().all(|s| !s.in_class(NodeClass::First) && !s.in_class(NodeClass::Second)));
        let psi = build_psi(&flat, 8, PsiMode::Global).unwrap();
        assert!(psi.potentials.is_empty());
        assert_eq!(psi.budget.gap_sum_first, q(0, 1));
        assert!(psi.budget.within_bound);

        let g = grid_approx(&scenes::tent_sset(), 8).unwrap();
        let s = g.nodes.iter().find(|s| s.a == pt(q(1, 8), q(0, 1))).unwrap();
        assert_eq!((s.s_plus_max.clone(), s.s_plus_min.clone()), (q(1, 1), q(0, 1)));
        assert!(s.in_class(NodeClass::First));
        assert!(grid_approx(&flat, 1).is_err());
        let empty = SSetPresentation { selections: vec![], ..flat };
        assert!(grid_approx(&empty, 4).is_err());
    }

    #[test]
    fn corner_cone_measure_and_membership() {
        let node = corner_node();
        let c = cone_potential(&node, NodeClass::First, PsiMode::Global).unwrap();
        assert!((c.measure() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(cone_potential(&node, NodeClass::Second, PsiMode::Global).is_err());
        // V opens downwards between straight down and down-right
        let v = |x: i64, y: i64| pt(q(1, 2) + q(x, 10), q(y, 10));
        assert!(c.contains_exact(&v(0, -1)));
        assert!(c.contains_exact(&v(1, -1)));
        assert!(c.contains_exact(&v(1, -2)));
        assert!(!c.contains_exact(&v(2, -1)));
        assert!(!c.contains_exact(&v(-1, -5)));
        assert!(!c.contains_exact(&v(0, 1)));
        let [pp, _, _, pm] = node.p_points(&q(1, 2));
        let a = node.a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let z = pt(q(rng.gen_range(-100..100), 37), q(rng.gen_range(-100..100), 41));
            let d = z.clone() - a.clone();
            let by_definition = !d.dot(&(pp.clone() - a.clone())).is_positive() && !d.dot(&(pm.clone() - a.clone())).is_positive();
            assert_eq!(c.contains_exact(&z), by_definition);
        }
    }

    #[test]
    fn global_identity_and_concavity() {
        let c = cone_potential(&corner_node(), NodeClass::First, PsiMode::Global).unwrap();
        let v = c.vertex.to_f64();
        for z in random_points(1000, 1, 3.0) {
            let r = (z[0] - v[0]).hypot(z[1] - v[1]);
            assert!((r + c.eval(z) - c.affine(z)).abs() <= 1e-12);
        }
        let pts = random_points(20000, 2, 3.0);
        for p in pts.chunks(2) {
            let m = [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0];
            assert!(c.eval(m) - (c.eval(p[0]) + c.eval(p[1])) / 2.0 >= -1e-10);
            assert!(c.midpoint_defect(p[0], p[1]) >= -1e-10);
        }
    }

    #[test]
    fn clamped_matches_search_and_lipschitz() {
        let c = cone_potential(&corner_node(), NodeClass::First, PsiMode::Clamped).unwrap();
        let v = c.vertex.to_f64();
        let tb = c.beta.tan();
        assert!((tb - (std::f64::consts::PI / 8.0).tan()).abs() < 1e-15);
        for z in random_points(300, 4, 2.0) {
            let r = (z[0] - v[0]).hypot(z[1] - v[1]);
            let closed = c.eval(z);
            assert!((closed - c.eval_by_search(z)).abs() <= 1e-8 * (1.0 + r), "{z:?}");
            if c.contains_exact(&crate::field::exact_point(z)) {
                assert!((closed - (c.affine(z) - r)).abs() <= 1e-8);
            }
        }
        let pts = random_points(20000, 5, 2.0);
        let mut worst: f64 = 0.0;
        for p in pts.chunks(2) {
            let d = (p[0][0] - p[1][0]).hypot(p[0][1] - p[1][1]);
            worst = worst.max((c.eval(p[0]) - c.eval(p[1])).abs() / d);
            let m = [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0];
            assert!(c.eval(m) - (c.eval(p[0]) + c.eval(p[1])) / 2.0 >= -1e-10);
        }
        assert!(worst <= tb + 1e-8);
        assert!(worst > 0.9 * tb);
    }

    #[test]
    fn tent_budgets_bounded() {
        let mut prev = None;
        for n in [8, 16, 32] {
            let psi = build_psi(&scenes::tent_sset(), n, PsiMode::Clamped).unwrap();
            let b = &psi.budget;
            assert!(b.within_bound, "{b:?}");
            assert_eq!(b.k, 2);
            if let Some(p) = prev {
                assert!(b.gap_sum_first <= q(2, 1) * p);
            }
            prev = Some(b.gap_sum_first.clone());
            assert!(psi.sampled_lipschitz(500, 1) <= b.d + 1e-8);
        }
    }

    #[test]
    fn corner_concavity_and_ablation() {
        let psi = build_psi(&scenes::corner_sset(), 8, PsiMode::Global).unwrap();
        let wedge: Vec<[f64; 2]> = (1..=6).map(|i| [0.5 + 0.02 * i as f64, -0.05 - 0.04 * i as f64]).collect();
        let cfg = ProbeConfig { centers: Some(wedge), ..Default::default() };
        let rep = verify_local_concavity(&psi, &cfg);
        assert!(rep.passed, "{:?}", rep.worst_scaled_defect);
        assert_eq!(rep.balls.len(), 6);
        let ablated = verify_local_concavity(&psi.ablated(), &cfg);
        assert!(!ablated.passed);
        assert!(ablated.failed > 0);
        // random balls, both modes
        for mode in [PsiMode::Global, PsiMode::Clamped] {
            let psi = build_psi(&scenes::corner_sset(), 16, mode).unwrap();
            let rep = verify_local_concavity(&psi, &ProbeConfig::default());
            assert_eq!(rep.balls.len(), 200);
            assert!(rep.passed, "{mode:?} {}", rep.worst_scaled_defect);
        }
    }

    #[test]
    fn straight_line_balls_pass_without_potentials() {
        let zero = PiecewiseLinear::constant(q(0, 1), q(1, 1), q(0, 1)).unwrap();
        let flat = SSetPresentation { r: q(1, 1), envelopes: vec![zero.clone()], selections: vec![zero] };
        let psi = build_psi(&flat, 4, PsiMode::Global).unwrap();
        let centers = vec![[0.3, 0.5], [0.7, 0.2], [0.5, 0.0]];
        let rep = verify_local_concavity(&psi, &ProbeConfig { centers: Some(centers), ..Default::default() });
        assert_eq!(rep.balls.len(), 2);
        assert_eq!(rep.skipped.len(), 1);
        assert!(rep.balls.iter().all(|b| b.worst_defect.abs() < 1e-15));
    }

    fn points_set(pts: Vec<P>) -> RealizedSet {
        PlanarSetPresentation { isolated: pts, ..Default::default() }.realize().unwrap()
    }

    fn geometric(count: i32) -> RealizedSet {
        let mut pts = vec![P::origin()];
        pts.extend((0..count).map(|n| pt(qpow(3, -n), q(0, 1))));
        points_set(pts)
    }

    #[test]
    fn projection_clauses() {
        let line = PlanarSetPresentation::from_pieces(vec![DcGraphPiece::segment(pt(q(-1, 1), q(0, 1)), pt(q(1, 1), q(0, 1))).unwrap()])
            .realize()
            .unwrap();
        let o = P::origin();
        let rep = cone_projection_classify(&line, &o, &q(1, 1), &q(1, 2)).unwrap();
        assert!(rep.hypothesis_holds);
        assert_eq!(rep.clause, ProjectionClause::FullProjection { r: q(1, 2) });
        let single = points_set(vec![o.clone()]);
        let rep = cone_projection_classify(&single, &o, &q(1, 1), &q(1, 2)).unwrap();
        assert_eq!(rep.clause, ProjectionClause::IsolatedInCone { r: q(1, 2) });
        let rep = cone_projection_classify(&geometric(21), &o, &q(1, 1), &q(1, 1)).unwrap();
        match rep.clause {
            ProjectionClause::Violation { components, .. } => assert!(components.len() > 3),
            other => panic!("{other:?}"),
        }
        assert!(cone_projection_classify(&single, &pt(q(1, 1), q(0, 1)), &q(1, 1), &q(1, 1)).is_err());
    }

    #[test]
    fn projection_through_fill() {
        let m = scenes::square().set.realize().unwrap();
        let proj = cone_projection(&m, &pt(q(0, 1), q(1, 2)), &q(3, 1), &q(2, 1), WitnessSide::Forward);
        assert_eq!(proj, vec![(q(0, 1), q(1, 1))]);
        let rep = cone_projection_classify(&m, &pt(q(0, 1), q(1, 2)), &q(1, 1), &q(1, 4)).unwrap();
        assert_eq!(rep.clause, ProjectionClause::FullProjection { r: q(1, 4) });
        // corner of the square: the boundary leaves at slope 0 and the fill lies above
        assert_eq!(cone_gap(&m, &P::origin(), &q(3, 1), WitnessSide::Forward), Some(q(0, 1)));
        assert_eq!(cone_gap(&m, &P::origin(), &q(3, 1), WitnessSide::Backward), None);
    }

    #[test]
    fn geometric_points_witnesses() {
        let m = geometric(9);
        let w = detect_non_dc(&m, &P::origin(), &q(1, 1)).unwrap().expect("witnesses");
        assert_eq!(w.witnesses.len(), 9);
        assert_eq!(w.orientation, 1);
        for (n, wit) in w.witnesses.iter().enumerate() {
            let n = n as i32;
            assert_eq!(wit.abscissa, qpow(3, -n));
            // the last point's backward gap reaches the origin
            let rho = if n < 8 { qpow(3, -n - 1) } else { qpow(3, -n) / q(2, 1) };
            assert_eq!(wit.rho, rho);
            let gap = if n < 8 { q(2, 1) * qpow(3, -n - 1) } else { qpow(3, -n) };
            assert_eq!(wit.gap_backward, Some(gap));
            let empty = cone_projection(&m, &wit.point, &q(3, 1), &wit.rho, wit.side);
            assert_eq!(empty, vec![(q(0, 1), q(0, 1))]);
        }
        assert_eq!(w.witnesses[0].side, WitnessSide::Backward);
        assert_eq!(w.witnesses[1].side, WitnessSide::Forward);
        assert!(w.slope_bound_holds);
        let line = PlanarSetPresentation::from_pieces(vec![DcGraphPiece::segment(pt(q(-1, 1), q(0, 1)), pt(q(1, 1), q(0, 1))).unwrap()])
            .realize()
            .unwrap();
        assert!(detect_non_dc(&line, &P::origin(), &q(1, 1)).unwrap().is_none());
    }

    #[test]
    fn staircase_blowup() {
        let m = scenes::staircase_isolated().set.realize().unwrap();
        let w = detect_non_dc(&m, &P::origin(), &q(1, 1)).unwrap().expect("witnesses");
        assert!(w.witnesses.len() >= 5);
        assert!(w.witnesses.iter().all(|x| x.ordinate.abs() <= x.abscissa));
        assert!(w.slope_bound_holds);
        let ns: Vec<usize> = (3..=8).collect();
        let t = convexity_blowup(&m, &w, &ns).unwrap();
        assert!(t.strictly_increasing, "{t:?}");
        assert!(t.increments_meet_alpha, "{t:?}");
        let t2 = convexity_blowup(&m, &w, &[4, 8]).unwrap();
        let (o4, o8) = (t2.rows[0].oscillations, t2.rows[1].oscillations);
        assert!(o8 >= 2 * o4 && o8 <= 2 * o4 + 3, "{o4} {o8}");
        assert!(convexity_blowup(&m, &w, &[1]).is_err());
    }

    #[test]
    fn alpha_formula() {
        assert!((alpha_lower_bound(&q(1, 1)).unwrap() - 1.0 / (2.0 * 10f64.sqrt())).abs() < 1e-15);
        let big = alpha_lower_bound(&q(1000, 1)).unwrap();
        assert!(big < 1.0 / 6.0 && 1.0 / 6.0 - big < 1e-6);
        assert!(alpha_lower_bound(&q(0, 1)).is_err());
    }

    fn graphs_scene(profiles: Vec<PlFunction>) -> PlanarSetPresentation {
        PlanarSetPresentation::from_pieces(profiles.into_iter().map(DcGraphPiece::graph).collect())
    }

    #[test]
    fn selections_follow_the_tent() {
        let zero = PiecewiseLinear::constant(q(0, 1), q(1, 1), q(0, 1)).unwrap();
        let pres = graphs_scene(vec![zero.clone(), scenes::tent()]);
        match lipschitz_selection(&pres, &pt(q(1, 4), q(1, 8))).unwrap() {
            SelectionOutcome::Extended { selection, u } => {
                assert_eq!(selection, scenes::tent());
                assert_eq!(u, q(1, 1));
            }
            other => panic!("{other:?}"),
        }
        let single = graphs_scene(vec![scenes::tent()]);
        match lipschitz_selection(&single, &pt(q(1, 2), q(0, 1))).unwrap() {
            SelectionOutcome::Extended { selection, .. } => assert_eq!(selection, scenes::tent()),
            other => panic!("{other:?}"),
        }
        let left = PiecewiseLinear::constant(q(0, 1), q(1, 3), q(0, 1)).unwrap();
        let right = PiecewiseLinear::constant(q(2, 3), q(1, 1), q(0, 1)).unwrap();
        match lipschitz_selection(&graphs_scene(vec![left, right]), &pt(q(1, 6), q(0, 1))).unwrap() {
            SelectionOutcome::Blocked { abscissa, .. } => assert_eq!(abscissa, q(1, 3)),
            other => panic!("{other:?}"),
        }
        assert!(lipschitz_selection(&pres, &pt(q(1, 4), q(1, 2))).is_err());
    }

    #[test]
    fn crossing_selection_takes_lower_branch() {
        let up = PiecewiseLinear::from_points([(q(0, 1), q(0, 1)), (q(1, 1), q(1, 1))]).unwrap();
        let down = PiecewiseLinear::from_points([(q(0, 1), q(1, 1)), (q(1, 1), q(0, 1))]).unwrap();
        match lipschitz_selection(&graphs_scene(vec![up, down]), &pt(q(0, 1), q(0, 1))).unwrap() {
            SelectionOutcome::Extended { selection, .. } => {
                assert_eq!(selection.breakpoints(), &[q(0, 1), q(1, 2), q(1, 1)]);
                assert_eq!(selection.values(), &[q(0, 1), q(1, 2), q(0, 1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn falsify_and_certify_verdicts() {
        let m = scenes::staircase_isolated().set.realize().unwrap();
        let cert = falsify(&m, &[P::origin()], &q(1, 1)).unwrap();
        assert_eq!(cert.verdict, Verdict::Falsified);
        let json = serde_json::to_value(&cert).unwrap();
        assert!(json.get("n-sweep").is_some());
        let cert = certify_sset(&scenes::tent_sset(), &[8], PsiMode::Global, &ProbeConfig::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Consistent, "{:?}", cert.n_sweep);
    }
}
