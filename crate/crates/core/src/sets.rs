//! Finite presentations of closed planar sets.
//!
//! A presentation is a skeleton of DC graph pieces and placed (s)-sets, a
//! list of isolated points, and fill seeds choosing components of the
//! complement of the skeleton. All geometry is exact.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arrangement::Arrangement;
use crate::error::{precondition, Error, Result};
use crate::plcalc::{compose, convexity, invert, PiecewiseLinear};
use crate::planar::{canonical_direction, scalar_string, Point, Rotation, Similarity};
use crate::scalar::{cmp, q, Scalar};
use crate::{PlFunction, Rational};

type P = Point<Rational>;

/// `offset + rotation(graph profile)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcGraphPiece {
    pub rotation: Rotation<Rational>,
    pub offset: P,
    pub profile: PlFunction,
}

impl DcGraphPiece {
    pub fn new(rotation: Rotation<Rational>, offset: P, profile: PlFunction) -> Self {
        Self { rotation, offset, profile }
    }

    /// Graph of `profile` placed without rotation or offset.
    pub fn graph(profile: PlFunction) -> Self {
        Self::new(Rotation::identity(), P::origin(), profile)
    }

    /// The segment `a`–`b` as a graph piece (exact when `|b − a|` is rational).
    pub fn segment(a: P, b: P) -> Result<Self> {
        let d = b.clone() - a.clone();
        let len2 = d.norm2();
        let len = rational_sqrt(&len2)
            .ok_or_else(|| Error::Precondition("segment length is not rational".into()))?;
        if len.is_zero() {
            return Ok(Self::new(Rotation::identity(), a, PiecewiseLinear::point(Rational::zero(), Rational::zero())));
        }
        let rot = Rotation::new(d.x.clone() / len.clone(), d.y.clone() / len.clone())?;
        let profile = PiecewiseLinear::new(vec![Rational::zero(), len], vec![Rational::zero(); 2])?;
        Ok(Self::new(rot, a, profile))
    }

    pub fn place(&self, local: &P) -> P {
        self.rotation.apply(local) + self.offset.clone()
    }

    pub fn polyline(&self) -> Vec<P> {
        self.profile.vertices().map(|(x, y)| self.place(&Point::new(x.clone(), y.clone()))).collect()
    }
}

/// Exact square root when the rational is a perfect square.
pub fn rational_sqrt(v: &Rational) -> Option<Rational> {
    if v.is_negative() {
        return None;
    }
    let n = v.numer().sqrt();
    let d = v.denom().sqrt();
    (&n * &n == *v.numer() && &d * &d == *v.denom()).then(|| Rational::new(n, d))
}

/// Envelopes `f_1 … f_k` on `[0, r]` and a finite selection family `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SSetPresentation {
    #[serde(with = "scalar_string")]
    pub r: Rational,
    pub envelopes: Vec<PlFunction>,
    pub selections: Vec<PlFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedSSet {
    pub rotation: Rotation<Rational>,
    pub offset: P,
    pub sset: SSetPresentation,
}

impl PlacedSSet {
    pub fn at_origin(sset: SSetPresentation) -> Self {
        Self { rotation: Rotation::identity(), offset: P::origin(), sset }
    }

    pub fn place(&self, local: &P) -> P {
        self.rotation.apply(local) + self.offset.clone()
    }

    pub fn selection_pieces(&self) -> Vec<DcGraphPiece> {
        self.sset
            .selections
            .iter()
            .map(|h| DcGraphPiece::new(self.rotation.clone(), self.offset.clone(), h.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Piece {
    Graph(DcGraphPiece),
    Sset(PlacedSSet),
}

impl Piece {
    /// Graph pieces realizing this piece (one per selection for an (s)-set).
    pub fn graph_pieces(&self) -> Vec<DcGraphPiece> {
        match self {
            Piece::Graph(g) => vec![g.clone()],
            Piece::Sset(s) => s.selection_pieces(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarSetPresentation {
    #[serde(default)]
    pub skeleton: Vec<Piece>,
    #[serde(default)]
    pub isolated: Vec<P>,
    #[serde(default)]
    pub fills: Vec<P>,
}

impl PlanarSetPresentation {
    pub fn from_pieces(pieces: Vec<DcGraphPiece>) -> Self {
        Self { skeleton: pieces.into_iter().map(Piece::Graph).collect(), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.skeleton.is_empty() && self.isolated.is_empty() && self.fills.is_empty()
    }

    /// Polylines of all graph pieces with the index of their skeleton entry.
    pub fn polylines(&self) -> Vec<(Vec<P>, usize)> {
        self.skeleton
            .iter()
            .enumerate()
            .flat_map(|(i, piece)| piece.graph_pieces().into_iter().map(move |g| (g.polyline(), i)))
            .collect()
    }

    pub fn tagged_segments(&self) -> Vec<(P, P, usize)> {
        let mut out = Vec::new();
        for (line, tag) in self.polylines() {
            for w in line.windows(2) {
                if w[0] != w[1] {
                    out.push((w[0].clone(), w[1].clone(), tag));
                }
            }
        }
        out
    }

    pub fn segments(&self) -> Vec<(P, P)> {
        self.tagged_segments().into_iter().map(|(a, b, _)| (a, b)).collect()
    }

    /// Degenerate pieces (single points) and declared isolated points.
    pub fn point_features(&self) -> Vec<P> {
        let mut pts: Vec<P> =
            self.polylines().into_iter().filter(|(l, _)| l.len() == 1).map(|(l, _)| l[0].clone()).collect();
        pts.extend(self.isolated.iter().cloned());
        pts.sort_by(|a, b| a.lex_cmp(b));
        pts.dedup();
        pts
    }

    pub fn isolated_points(&self) -> Vec<P> {
        self.point_features()
    }

    pub fn realize(&self) -> Result<RealizedSet> {
        RealizedSet::new(self.clone())
    }

    pub fn in_filled_interior(&self, z: &P) -> Result<bool> {
        if self.fills.is_empty() {
            return Ok(false);
        }
        let r = self.realize()?;
        Ok(!r.arrangement.on_graph(z) && r.in_fill(z))
    }

    /// All abscissae/ordinates of the presentation, for bounding boxes.
    pub fn all_points(&self) -> Vec<P> {
        let mut pts: Vec<P> = self.polylines().into_iter().flat_map(|(l, _)| l).collect();
        pts.extend(self.isolated.iter().cloned());
        pts.extend(self.fills.iter().cloned());
        pts
    }
}

/// A presentation with its arrangement and resolved fills.
#[derive(Clone, Debug)]
pub struct RealizedSet {
    pub presentation: PlanarSetPresentation,
    pub arrangement: Arrangement,
    pub fill_signatures: Vec<Vec<usize>>,
    pub points: Vec<P>,
}

impl RealizedSet {
    pub fn new(presentation: PlanarSetPresentation) -> Result<Self> {
        let arrangement = Arrangement::build(&presentation.tagged_segments());
        let mut fill_signatures = Vec::new();
        for (i, seed) in presentation.fills.iter().enumerate() {
            if arrangement.on_graph(seed) {
                return precondition(format!("fill seed {i} at {seed:?} lies on the skeleton"));
            }
            fill_signatures.push(arrangement.signature(seed));
        }
        fill_signatures.sort();
        fill_signatures.dedup();
        let points = presentation.point_features();
        Ok(Self { presentation, arrangement, fill_signatures, points })
    }

    pub fn is_filled_signature(&self, sig: &[usize]) -> bool {
        self.fill_signatures.binary_search_by(|s| s.as_slice().cmp(sig)).is_ok()
    }

    /// `z` off the skeleton lies in a selected component.
    pub fn in_fill(&self, z: &P) -> bool {
        !self.fill_signatures.is_empty() && self.is_filled_signature(&self.arrangement.signature(z))
    }

    pub fn contains(&self, z: &P) -> bool {
        self.points.iter().any(|p| p == z) || self.arrangement.on_graph(z) || self.in_fill(z)
    }

    /// Whether each side of every edge is filled: `(left, right)` per edge.
    pub fn edge_sides(&self) -> Vec<(bool, bool)> {
        (0..self.arrangement.edges.len())
            .map(|e| {
                if self.fill_signatures.is_empty() {
                    return (false, false);
                }
                let l = self.is_filled_signature(&self.arrangement.side_signature(2 * e));
                let r = self.is_filled_signature(&self.arrangement.side_signature(2 * e + 1));
                (l, r)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Clause {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SSetReport {
    pub valid: bool,
    pub clauses: Vec<Clause>,
    /// Shared Lipschitz constant: the largest envelope Lipschitz constant.
    pub lipschitz: String,
    /// Convexity `K_0^r h` of each selection.
    pub selection_convexity: Vec<String>,
    pub note: String,
}

fn refinement(sset: &SSetPresentation, h: &PlFunction) -> Vec<Rational> {
    let mut xs: Vec<Rational> = h.breakpoints().to_vec();
    for f in &sset.envelopes {
        xs.extend(f.breakpoints().iter().cloned());
    }
    for (i, f) in sset.envelopes.iter().enumerate() {
        for g in &sset.envelopes[i + 1..] {
            if let Ok(m) = f.max(g) {
                xs.extend(m.breakpoints().iter().cloned());
            }
        }
    }
    xs.retain(|x| h.contains(x));
    xs.sort_by(cmp);
    xs.dedup();
    xs
}

/// First abscissa where `h` leaves the envelope graphs, if any.
///
/// On each refinement interval every function involved is affine, so `h`
/// stays inside the envelopes there iff it agrees with one envelope at
/// both endpoints.
pub fn selection_violation(sset: &SSetPresentation, h: &PlFunction) -> Option<Rational> {
    let xs = refinement(sset, h);
    let matches = |x: &Rational| -> Vec<bool> {
        let hx = h.eval_in(x);
        sset.envelopes.iter().map(|f| f.contains(x) && f.eval_in(x) == hx).collect()
    };
    let mut prev = matches(&xs[0]);
    if !prev.iter().any(|&b| b) {
        return Some(xs[0].clone());
    }
    for w in xs.windows(2) {
        let cur = matches(&w[1]);
        if !cur.iter().any(|&b| b) {
            return Some(w[1].clone());
        }
        if !prev.iter().zip(&cur).any(|(a, b)| *a && *b) {
            let half = q(1, 2);
            return Some((w[0].clone() + w[1].clone()) * half);
        }
        prev = cur;
    }
    None
}

/// Check every clause of the (s)-set definition on a finite presentation.
pub fn validate_sset(pres: &SSetPresentation) -> SSetReport {
    let mut clauses = Vec::new();
    let zero = Rational::zero();
    let r = &pres.r;

    let bad_domain: Vec<String> = pres
        .envelopes
        .iter()
        .map(|f| ("envelope", f))
        .chain(pres.selections.iter().map(|h| ("selection", h)))
        .enumerate()
        .filter(|(_, (_, f))| f.start() != &zero || f.end() != r)
        .map(|(i, (kind, _))| format!("{kind} #{i}"))
        .collect();
    let domain_ok = r.is_positive() && bad_domain.is_empty() && !pres.envelopes.is_empty();
    clauses.push(Clause::new(
        "domain",
        domain_ok,
        if domain_ok {
            format!("all functions live on [0, {}]", r.repr())
        } else if pres.envelopes.is_empty() {
            "no envelopes".to_string()
        } else {
            format!("r = {}; off-domain: {}", r.repr(), bad_domain.join(", "))
        },
    ));

    let mut gate_fail = Vec::new();
    for (i, f) in pres.envelopes.iter().enumerate() {
        let value_ok = f.contains(&zero) && f.eval_in(&zero).is_zero();
        let slope_ok = f.contains(&zero)
            && f.end() > &zero
            && f.one_sided_slope(&zero, crate::plcalc::Side::Right).map(|s| s.is_zero()).unwrap_or(false);
        if !value_ok || !slope_ok {
            gate_fail.push(format!("f_{} (value {}, right slope {})", i + 1, value_ok, slope_ok));
        }
    }
    clauses.push(Clause::new(
        "envelope-gate",
        gate_fail.is_empty(),
        if gate_fail.is_empty() { "f_i(0) = 0 and (f_i)'+(0) = 0 for all i".into() } else { gate_fail.join("; ") },
    ));

    clauses.push(Clause::new(
        "nonempty",
        !pres.selections.is_empty(),
        format!("{} selections", pres.selections.len()),
    ));

    let mut member_fail = Vec::new();
    if domain_ok {
        for (j, h) in pres.selections.iter().enumerate() {
            if let Some(x) = selection_violation(pres, h) {
                member_fail.push(format!("h_{} leaves the envelopes at x = {}", j + 1, x.repr()));
            }
        }
    }
    clauses.push(Clause::new(
        "selection-membership",
        domain_ok && member_fail.is_empty(),
        if !domain_ok {
            "not checked: domain clause failed".into()
        } else if member_fail.is_empty() {
            "h(x) ∈ {f_1(x), …, f_k(x)} on the refinement".into()
        } else {
            member_fail.join("; ")
        },
    ));
    clauses.push(Clause::new(
        "coverage",
        domain_ok && member_fail.is_empty() && !pres.selections.is_empty(),
        "S = ∪ graph h ⊆ ∪ graph f_i, S nonempty",
    ));

    let k = pres.envelopes.iter().map(|f| f.lipschitz()).fold(zero.clone(), crate::scalar::max_of);
    let mut conv = Vec::new();
    let mut lip_ok = domain_ok;
    for h in &pres.selections {
        if h.lipschitz() > k {
            lip_ok = false;
        }
        conv.push(convexity(h, h.start(), h.end()).map(|c| c.repr()).unwrap_or_else(|e| e.to_string()));
    }
    clauses.push(Clause::new(
        "lipschitz-dcr",
        lip_ok,
        format!("every selection is {}-Lipschitz with finite convexity", k.repr()),
    ));

    SSetReport {
        valid: clauses.iter().all(|c| c.passed),
        clauses,
        lipschitz: k.repr(),
        selection_convexity: conv,
        note: "the selection family is finite".into(),
    }
}

/// Scale a profile by `λ`: `x ↦ λ f(x/λ)` on `λ·domain`.
fn scale_profile(f: &PlFunction, lambda: &Rational) -> Result<PlFunction> {
    f.affine_reparam(lambda, &Rational::zero(), lambda, &Rational::zero())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reshape {
    Truncate(Rational),
    Similarity(Similarity<Rational>),
}

pub fn truncate_sset(s: &SSetPresentation, rho: &Rational) -> Result<SSetPresentation> {
    if !rho.is_positive() || rho >= &s.r {
        return precondition(format!("truncation radius {} must lie in (0, {})", rho.repr(), s.r.repr()));
    }
    let zero = Rational::zero();
    Ok(SSetPresentation {
        r: rho.clone(),
        envelopes: s.envelopes.iter().map(|f| f.restrict(&zero, rho)).collect::<Result<_>>()?,
        selections: s.selections.iter().map(|f| f.restrict(&zero, rho)).collect::<Result<_>>()?,
    })
}

fn scale_sset(s: &SSetPresentation, lambda: &Rational) -> Result<SSetPresentation> {
    Ok(SSetPresentation {
        r: s.r.clone() * lambda.clone(),
        envelopes: s.envelopes.iter().map(|f| scale_profile(f, lambda)).collect::<Result<_>>()?,
        selections: s.selections.iter().map(|f| scale_profile(f, lambda)).collect::<Result<_>>()?,
    })
}

fn map_piece(piece: &Piece, sigma: &Similarity<Rational>) -> Result<Piece> {
    Ok(match piece {
        Piece::Graph(g) => Piece::Graph(DcGraphPiece {
            rotation: sigma.rotation.compose(&g.rotation),
            offset: sigma.apply(&g.offset),
            profile: scale_profile(&g.profile, &sigma.scale)?,
        }),
        Piece::Sset(s) => Piece::Sset(PlacedSSet {
            rotation: sigma.rotation.compose(&s.rotation),
            offset: sigma.apply(&s.offset),
            sset: scale_sset(&s.sset, &sigma.scale)?,
        }),
    })
}

/// Apply a similarity to an (s)-set placed at the origin.
pub fn reshape_sset(s: &SSetPresentation, action: &Reshape) -> Result<PlacedSSet> {
    match action {
        Reshape::Truncate(rho) => Ok(PlacedSSet::at_origin(truncate_sset(s, rho)?)),
        Reshape::Similarity(sigma) => match map_piece(&Piece::Sset(PlacedSSet::at_origin(s.clone())), sigma)? {
            Piece::Sset(p) => Ok(p),
            Piece::Graph(_) => unreachable!(),
        },
    }
}

pub fn reshape(pres: &PlanarSetPresentation, action: &Reshape) -> Result<PlanarSetPresentation> {
    match action {
        Reshape::Truncate(rho) => {
            let skeleton = pres
                .skeleton
                .iter()
                .map(|p| match p {
                    Piece::Sset(s) => {
                        Ok(Piece::Sset(PlacedSSet { sset: truncate_sset(&s.sset, rho)?, ..s.clone() }))
                    }
                    other => Ok(other.clone()),
                })
                .collect::<Result<_>>()?;
            Ok(PlanarSetPresentation { skeleton, ..pres.clone() })
        }
        Reshape::Similarity(sigma) => {
            if !sigma.scale.is_positive() {
                return precondition("similarity ratio must be positive");
            }
            Ok(PlanarSetPresentation {
                skeleton: pres.skeleton.iter().map(|p| map_piece(p, sigma)).collect::<Result<_>>()?,
                isolated: pres.isolated.iter().map(|p| sigma.apply(p)).collect(),
                fills: pres.fills.iter().map(|p| sigma.apply(p)).collect(),
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FillReport {
    pub seed: P,
    pub bounded: bool,
    /// Number of skeleton edges on the boundary of the selected component.
    pub boundary_edges: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssemblyReport {
    pub passed: bool,
    pub fills: Vec<FillReport>,
    pub skeleton_edges: usize,
    pub skeleton_vertices: usize,
    /// Edges of `∂M`: filled on at most one side.
    pub boundary_edges: Vec<(P, P)>,
    /// Every boundary edge lies on an input skeleton segment.
    pub boundary_in_skeleton: bool,
    /// The skeleton is a finite union of segments, hence closed and nowhere dense.
    pub skeleton_nowhere_dense: bool,
    /// Isolated points that fall inside a fill (interior points of `M`).
    pub absorbed_points: Vec<P>,
}

fn on_segment_exact(p: &P, a: &P, b: &P) -> bool {
    let ab = b.clone() - a.clone();
    let ap = p.clone() - a.clone();
    ab.cross(&ap).is_zero() && !ap.dot(&ab).is_negative() && ap.dot(&ab) <= ab.norm2()
}

/// Segments bucketed by their x-extent for point-on-segment queries.
struct SegmentIndex<'a> {
    segs: &'a [(P, P)],
    lo: f64,
    width: f64,
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> SegmentIndex<'a> {
    fn new(segs: &'a [(P, P)]) -> Self {
        let xs = |s: &(P, P)| {
            let (a, b) = (s.0.x.to_f64_lossy(), s.1.x.to_f64_lossy());
            (a.min(b), a.max(b))
        };
        let lo = segs.iter().map(|s| xs(s).0).fold(f64::INFINITY, f64::min);
        let hi = segs.iter().map(|s| xs(s).1).fold(f64::NEG_INFINITY, f64::max);
        let n = segs.len().clamp(1, 4096);
        let width = if hi > lo { (hi - lo) / n as f64 } else { 1.0 };
        let mut index = Self { segs, lo, width, n, buckets: vec![Vec::new(); n] };
        for (i, s) in segs.iter().enumerate() {
            let (a, b) = xs(s);
            for k in index.bucket(a - 1e-9 * (1.0 + a.abs()))..=index.bucket(b + 1e-9 * (1.0 + b.abs())) {
                index.buckets[k].push(i);
            }
        }
        index
    }

    fn bucket(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.width).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.n - 1)
        }
    }

    fn contains(&self, p: &P) -> bool {
        if self.segs.is_empty() {
            return false;
        }
        let x = p.x.to_f64_lossy();
        let (a, b) = (self.bucket(x - 1e-9 * (1.0 + x.abs())), self.bucket(x + 1e-9 * (1.0 + x.abs())));
        (a..=b).any(|k| self.buckets[k].iter().any(|&i| on_segment_exact(p, &self.segs[i].0, &self.segs[i].1)))
    }
}

/// Resolve fills and certify `∂M ⊆ K ⊆ M` for the skeleton `K`.
pub fn assemble_and_check(pres: &PlanarSetPresentation) -> Result<AssemblyReport> {
    let realized = pres.realize()?;
    let arr = &realized.arrangement;
    let sides = realized.edge_sides();
    let input = pres.segments();
    let index = SegmentIndex::new(&input);
    let mut boundary_edges = Vec::new();
    for (e, &(l, r)) in sides.iter().enumerate() {
        if !(l && r) {
            let edge = &arr.edges[e];
            boundary_edges.push((arr.vertices[edge.a].clone(), arr.vertices[edge.b].clone()));
        }
    }
    let boundary_in_skeleton = (0..arr.edges.len())
        .filter(|&e| !(sides[e].0 && sides[e].1))
        .all(|e| index.contains(&arr.edge_midpoint(e)));
    let mut fills = Vec::new();
    for seed in &pres.fills {
        let sig = arr.signature(seed);
        let mut count = 0;
        for h in 0..arr.num_half_edges() {
            if !realized.fill_signatures.is_empty() && arr.side_signature(h) == sig {
                count += 1;
            }
        }
        fills.push(FillReport { seed: seed.clone(), bounded: !sig.is_empty(), boundary_edges: count });
    }
    let absorbed_points: Vec<P> = realized
        .points
        .iter()
        .filter(|p| !arr.on_graph(p) && realized.in_fill(p))
        .cloned()
        .collect();
    Ok(AssemblyReport {
        passed: boundary_in_skeleton,
        fills,
        skeleton_edges: arr.edges.len(),
        skeleton_vertices: arr.vertices.len(),
        boundary_edges,
        boundary_in_skeleton,
        skeleton_nowhere_dense: true,
        absorbed_points,
    })
}

/// One step of a supported planar DC map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapStep {
    Similarity(Similarity<Rational>),
    /// `(x, y) ↦ (x, y + w(x))`, `w` extended by constants.
    ShearY { w: PlFunction },
    /// `(x, y) ↦ (x + v(y), y)`, `v` extended by constants.
    ShearX { v: PlFunction },
}

impl MapStep {
    pub fn apply(&self, p: &P) -> P {
        match self {
            MapStep::Similarity(s) => s.apply(p),
            MapStep::ShearY { w } => Point::new(p.x.clone(), p.y.clone() + w.eval_extended(&p.x)),
            MapStep::ShearX { v } => Point::new(p.x.clone() + v.eval_extended(&p.y), p.y.clone()),
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            MapStep::Similarity(s) => MapStep::Similarity(s.inverse()),
            MapStep::ShearY { w } => MapStep::ShearY { w: w.scale(&-Rational::one()) },
            MapStep::ShearX { v } => MapStep::ShearX { v: v.scale(&-Rational::one()) },
        }
    }

    /// Parameters in `(0, 1)` where the segment `a`–`b` crosses a breakpoint line.
    fn split_params(&self, a: &P, b: &P) -> Vec<Rational> {
        let (coord_a, coord_b, f) = match self {
            MapStep::Similarity(_) => return Vec::new(),
            MapStep::ShearY { w } => (&a.x, &b.x, w),
            MapStep::ShearX { v } => (&a.y, &b.y, v),
        };
        if coord_a == coord_b {
            return Vec::new();
        }
        let mut ts: Vec<Rational> = f
            .breakpoints()
            .iter()
            .map(|c| (c.clone() - coord_a.clone()) / (coord_b.clone() - coord_a.clone()))
            .filter(|t| t.is_positive() && t < &Rational::one())
            .collect();
        ts.sort_by(cmp);
        ts.dedup();
        ts
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DcMap {
    pub steps: Vec<MapStep>,
}

impl DcMap {
    pub fn new(steps: Vec<MapStep>) -> Self {
        Self { steps }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply(&self, p: &P) -> P {
        self.steps.iter().fold(p.clone(), |acc, s| s.apply(&acc))
    }

    pub fn inverse(&self) -> Self {
        Self { steps: self.steps.iter().rev().map(MapStep::inverse).collect() }
    }

    pub fn check_bilipschitz(&self) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            if let MapStep::Similarity(sim) = s {
                if !sim.scale.is_positive() {
                    return precondition(format!("step {i}: similarity ratio must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Image of a parametrised polyline; each vertex carries its parameter.
    fn map_polyline(&self, line: &[(Rational, P)]) -> Vec<(Rational, P)> {
        let mut cur: Vec<(Rational, P)> = line.to_vec();
        for step in &self.steps {
            let mut next = Vec::with_capacity(cur.len());
            for (i, (t, p)) in cur.iter().enumerate() {
                if i > 0 {
                    let (t0, p0) = &cur[i - 1];
                    for s in step.split_params(p0, p) {
                        let tp = t0.clone() + (t.clone() - t0.clone()) * s.clone();
                        let pp = p0.clone() + (p.clone() - p0.clone()) * s;
                        next.push((tp, step.apply(&pp)));
                    }
                }
                next.push((t.clone(), step.apply(p)));
            }
            cur = next;
        }
        cur
    }
}

/// Express a parametrised image polyline as graph pieces in the frame `rotation`.
///
/// Runs on which the first coordinate is strictly increasing in one of the
/// frames `rotation ∘ quarter(k)` become one piece each; the profile is
/// `φ₂ ∘ φ₁⁻¹` for the coordinate functions `φ₁, φ₂` of the run.
fn regraph(line: &[(Rational, P)], rotation: &Rotation<Rational>) -> Result<Vec<DcGraphPiece>> {
    if line.len() == 1 {
        let zero = Rational::zero();
        return Ok(vec![DcGraphPiece::new(rotation.clone(), line[0].1.clone(), PiecewiseLinear::point(zero.clone(), zero))]);
    }
    let frames: Vec<Rotation<Rational>> = (0..4).map(|k| rotation.compose(&Rotation::quarter(k))).collect();
    let local = |k: usize, p: &P| frames[k].inverse().apply(p);
    let increasing = |k: usize, i: usize| local(k, &line[i].1).x < local(k, &line[i + 1].1).x;
    let mut pieces = Vec::new();
    let mut i = 0;
    while i + 1 < line.len() {
        let k = (0..4).find(|&k| increasing(k, i)).expect("some quarter turn increases a nonzero step");
        let mut j = i + 1;
        while j + 1 < line.len() && increasing(k, j) {
            j += 1;
        }
        let run = &line[i..=j];
        let origin = run[0].1.clone();
        let ts: Vec<Rational> = run.iter().map(|(t, _)| t.clone()).collect();
        let coords: Vec<P> = run.iter().map(|(_, p)| local(k, &(p.clone() - origin.clone()))).collect();
        let phi1 = PiecewiseLinear::new(ts.clone(), coords.iter().map(|c| c.x.clone()).collect())?;
        let phi2 = PiecewiseLinear::new(ts, coords.iter().map(|c| c.y.clone()).collect())?;
        let profile = compose(&phi2, &invert(&phi1)?)?.simplify();
        pieces.push(DcGraphPiece::new(frames[k].clone(), origin, profile));
        i = j;
    }
    Ok(pieces)
}

fn parametrised(g: &DcGraphPiece) -> Vec<(Rational, P)> {
    g.profile.breakpoints().iter().cloned().zip(g.polyline()).collect()
}

fn image_graph(g: &DcGraphPiece, map: &DcMap) -> Result<Vec<DcGraphPiece>> {
    regraph(&map.map_polyline(&parametrised(g)), &g.rotation)
}

/// Image of a placed (s)-set when every envelope stays a graph over the
/// original frame with a common domain; `None` otherwise.
fn image_sset(s: &PlacedSSet, map: &DcMap) -> Result<Option<PlacedSSet>> {
    let offset = map.apply(&s.offset);
    let mut out = Vec::new();
    for f in s.sset.envelopes.iter().chain(&s.sset.selections) {
        let g = DcGraphPiece::new(s.rotation.clone(), s.offset.clone(), f.clone());
        let pieces = regraph(&map.map_polyline(&parametrised(&g)), &s.rotation)?;
        if pieces.len() != 1 || pieces[0].rotation != s.rotation || pieces[0].offset != offset {
            return Ok(None);
        }
        out.push(pieces.into_iter().next().expect("one piece").profile);
    }
    let r = out[0].end().clone();
    if out.iter().any(|f| f.end() != &r) {
        return Ok(None);
    }
    let selections = out.split_off(s.sset.envelopes.len());
    let sset = SSetPresentation { r, envelopes: out, selections };
    if !validate_sset(&sset).valid {
        return Ok(None);
    }
    Ok(Some(PlacedSSet { rotation: s.rotation.clone(), offset, sset }))
}

/// Image of a presentation under a supported bilipschitz DC map.
///
/// Graph pieces are reparametrised through `pl_compose_invert`; placed
/// (s)-sets stay (s)-sets when their image re-validates and otherwise fall
/// back to one graph piece per selection run.
pub fn image_under_dc_map(pres: &PlanarSetPresentation, map: &DcMap) -> Result<PlanarSetPresentation> {
    map.check_bilipschitz()?;
    let mut skeleton = Vec::new();
    for piece in &pres.skeleton {
        match piece {
            Piece::Graph(g) => skeleton.extend(image_graph(g, map)?.into_iter().map(Piece::Graph)),
            Piece::Sset(s) => match image_sset(s, map)? {
                Some(img) => skeleton.push(Piece::Sset(img)),
                None => {
                    for g in s.selection_pieces() {
                        skeleton.extend(image_graph(&g, map)?.into_iter().map(Piece::Graph));
                    }
                }
            },
        }
    }
    Ok(PlanarSetPresentation {
        skeleton,
        isolated: pres.isolated.iter().map(|p| map.apply(p)).collect(),
        fills: pres.fills.iter().map(|p| map.apply(p)).collect(),
    })
}

/// Skeleton as maximal collinear segments plus loose points, sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalSkeleton {
    pub segments: Vec<(P, P)>,
    pub points: Vec<P>,
}

pub fn canonical_skeleton(pres: &PlanarSetPresentation) -> CanonicalSkeleton {
    // key: canonical direction with positive leading component, offset cross(d, a)
    let mut lines: Vec<(P, Rational, Rational, Rational)> = Vec::new();
    for (a, b) in pres.segments() {
        let mut d = canonical_direction(&(b.clone() - a.clone()));
        if d.x.is_negative() || (d.x.is_zero() && d.y.is_negative()) {
            d = -d;
        }
        let c = d.cross(&a);
        let (ta, tb) = (d.dot(&a), d.dot(&b));
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        lines.push((d, c, lo, hi));
    }
    lines.sort_by(|l, m| l.0.lex_cmp(&m.0).then_with(|| cmp(&l.1, &m.1)).then_with(|| cmp(&l.2, &m.2)));
    let mut merged: Vec<(P, Rational, Rational, Rational)> = Vec::new();
    for l in lines {
        match merged.last_mut() {
            Some(m) if m.0 == l.0 && m.1 == l.1 && l.2 <= m.3 => {
                if l.3 > m.3 {
                    m.3 = l.3;
                }
            }
            _ => merged.push(l),
        }
    }
    // point on the line with d·p = t: p = (t d + c d⊥) / |d|², d⊥ = (−d_y, d_x)
    let to_point = |d: &P, c: &Rational, t: &Rational| {
        let n2 = d.norm2();
        let perp = Point::new(-d.y.clone(), d.x.clone());
        (d.scale(t) + perp.scale(c)).scale(&(Rational::one() / n2))
    };
    let mut segments: Vec<(P, P)> =
        merged.iter().map(|(d, c, lo, hi)| (to_point(d, c, lo), to_point(d, c, hi))).collect();
    segments.sort_by(|a, b| a.0.lex_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1)));
    let all = pres.segments();
    let index = SegmentIndex::new(&all);
    let points: Vec<P> = pres.point_features().into_iter().filter(|p| !index.contains(p)).collect();
    CanonicalSkeleton { segments, points }
}

/// Exact equality of the realized sets of two presentations.
pub fn realized_equal(a: &PlanarSetPresentation, b: &PlanarSetPresentation) -> Result<bool> {
    let (ca, cb) = (canonical_skeleton(a), canonical_skeleton(b));
    if ca != cb {
        return Ok(false);
    }
    let ra = a.realize()?;
    let rb = RealizedSet::new(PlanarSetPresentation { skeleton: a.skeleton.clone(), isolated: vec![], fills: b.fills.clone() })?;
    if ra.fill_signatures != rb.fill_signatures {
        return Ok(false);
    }
    // isolated points inside fills are absorbed; compare the remainder
    let loose = |r: &RealizedSet, pts: &[P]| -> Vec<P> {
        let mut v: Vec<P> = pts.iter().filter(|p| !r.in_fill(p)).cloned().collect();
        v.sort_by(|x, y| x.lex_cmp(y));
        v
    };
    Ok(loose(&ra, &ca.points) == loose(&ra, &cb.points))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    #[serde(with = "scalar_string")]
    pub xmin: Rational,
    #[serde(with = "scalar_string")]
    pub xmax: Rational,
    #[serde(with = "scalar_string")]
    pub ymin: Rational,
    #[serde(with = "scalar_string")]
    pub ymax: Rational,
}

impl Window {
    pub fn contains(&self, p: &P) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn diameter(&self) -> f64 {
        let w = (self.xmax.clone() - self.xmin.clone()).to_f64_lossy();
        let h = (self.ymax.clone() - self.ymin.clone()).to_f64_lossy();
        w.hypot(h)
    }

    /// Smallest window holding all points, padded by `pad` on every side.
    pub fn around(points: &[P], pad: &Rational) -> Self {
        let mut w = Window {
            xmin: points[0].x.clone(),
            xmax: points[0].x.clone(),
            ymin: points[0].y.clone(),
            ymax: points[0].y.clone(),
        };
        for p in points {
            if p.x < w.xmin {
                w.xmin = p.x.clone();
            }
            if p.x > w.xmax {
                w.xmax = p.x.clone();
            }
            if p.y < w.ymin {
                w.ymin = p.y.clone();
            }
            if p.y > w.ymax {
                w.ymax = p.y.clone();
            }
        }
        w.xmin -= pad.clone();
        w.ymin -= pad.clone();
        w.xmax += pad.clone();
        w.ymax += pad.clone();
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredAccumulation {
    pub point: P,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Scene document consumed by the command-line front end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub version: u32,
    pub window: Window,
    pub set: PlanarSetPresentation,
    #[serde(rename = "declared-accumulations", default)]
    pub declared_accumulations: Vec<DeclaredAccumulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<P>>,
}

impl Scene {
    pub fn new(window: Window, set: PlanarSetPresentation) -> Self {
        Self { version: 1, window, set, declared_accumulations: Vec::new(), probes: None }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Structural checks beyond the schema: version and window bounds.
    pub fn check(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Invalid(format!("unsupported scene version {}", self.version)));
        }
        if self.window.xmin >= self.window.xmax || self.window.ymin >= self.window.ymax {
            return Err(Error::Invalid("window has empty interior".into()));
        }
        if let Some(p) = self.set.all_points().into_iter().find(|p| !self.window.contains(p)) {
            return Err(Error::Invalid(format!("point {p:?} lies outside the window")));
        }
        for (i, piece) in self.set.skeleton.iter().enumerate() {
            if let Piece::Sset(s) = piece {
                if s.sset.envelopes.is_empty() {
                    return Err(Error::Invalid(format!("skeleton piece {i}: (s)-set without envelopes")));
                }
            }
        }
        Ok(())
    }
}
