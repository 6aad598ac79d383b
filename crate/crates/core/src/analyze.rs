//! Structural analysis of presented sets.
//!
//! Connectivity, adjacency and decompositions are exact. Discreteness is
//! decided at desk scale: a family is flagged when two members come closer
//! than [`RESOLUTION`] times the window diameter, or when the scene declares
//! an accumulation point. Finite data cannot show that a family does not
//! accumulate beyond the tested scale, so a "discrete" verdict is evidence,
//! not proof.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arrangement::{find_root, segment_intersections, union};
use crate::certify::merge_intervals;
use crate::error::{invalid, precondition, Result};
use crate::plcalc::PiecewiseLinear;
use crate::planar::{canonical_direction, scalar_string, tangent_fan, Point, Rotation};
use crate::scalar::Scalar;
use crate::sets::{
    realized_equal, DcGraphPiece, DeclaredAccumulation, Piece, PlanarSetPresentation, RealizedSet, Scene, Window,
};
use crate::{PlFunction, Rational};

type P = Point<Rational>;

/// Separation below which two members count as accumulating, relative to the window diameter.
pub const RESOLUTION: f64 = 1e-4;
/// Radius around a declared accumulation point, relative to the window diameter.
pub const CLUSTER_RADIUS: f64 = 1e-2;
/// Members needed near a declared point to confirm it from the data.
pub const CLUSTER_COUNT: usize = 3;

/// Window and declared accumulations against which verdicts are taken.
#[derive(Clone, Debug)]
pub struct Context {
    pub window: Window,
    pub declared: Vec<DeclaredAccumulation>,
}

impl Context {
    pub fn from_scene(scene: &Scene) -> Self {
        Self { window: scene.window.clone(), declared: scene.declared_accumulations.clone() }
    }

    /// Window around the presentation padded by 1, nothing declared.
    pub fn around(pres: &PlanarSetPresentation) -> Self {
        let pts = pres.all_points();
        let window = if pts.is_empty() {
            Window::around(&[P::origin()], &Rational::one())
        } else {
            Window::around(&pts, &Rational::one())
        };
        Self { window, declared: Vec::new() }
    }

    pub fn resolution(&self) -> f64 {
        RESOLUTION * self.window.diameter()
    }

    fn cluster_radius(&self) -> f64 {
        CLUSTER_RADIUS * self.window.diameter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval {
    #[serde(with = "scalar_string")]
    pub lo: Rational,
    #[serde(with = "scalar_string")]
    pub hi: Rational,
}

impl Interval {
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

fn intervals(v: Vec<(Rational, Rational)>) -> Vec<Interval> {
    v.into_iter().map(|(lo, hi)| Interval { lo, hi }).collect()
}

// ---------------------------------------------------------------------------
// float geometry

fn pt_seg_d2(p: [f64; 2], s: &[f64; 4]) -> f64 {
    let (dx, dy) = (s[2] - s[0], s[3] - s[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - s[0]) * dx + (p[1] - s[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (s[0] + t * dx - p[0]).powi(2) + (s[1] + t * dy - p[1]).powi(2)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn seg_seg_d2(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let (a0, a1, b0, b1) = ([a[0], a[1]], [a[2], a[3]], [b[0], b[1]], [b[2], b[3]]);
    let (o1, o2) = (orient(a0, a1, b0), orient(a0, a1, b1));
    let (o3, o4) = (orient(b0, b1, a0), orient(b0, b1, a1));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return 0.0;
    }
    pt_seg_d2(a0, b).min(pt_seg_d2(a1, b)).min(pt_seg_d2(b0, a)).min(pt_seg_d2(b1, a))
}

/// Float copy of one component.
#[derive(Clone, Debug, Default)]
struct Shape {
    segments: Vec<[f64; 4]>,
    points: Vec<[f64; 2]>,
}

impl Shape {
    fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.points.is_empty()
    }

    fn dist_to_point(&self, p: [f64; 2]) -> f64 {
        let s = self.segments.iter().map(|s| pt_seg_d2(p, s)).fold(f64::INFINITY, f64::min);
        let q = self.points.iter().map(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).fold(s, f64::min);
        q.sqrt()
    }

    fn dist(&self, o: &Shape) -> f64 {
        let mut best = f64::INFINITY;
        for s in &self.segments {
            for t in &o.segments {
                best = best.min(seg_seg_d2(s, t));
            }
            for &q in &o.points {
                best = best.min(pt_seg_d2(q, s));
            }
        }
        for &p in &self.points {
            for t in &o.segments {
                best = best.min(pt_seg_d2(p, t));
            }
            for q in &o.points {
                best = best.min((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2));
            }
        }
        best.sqrt()
    }
}

fn dist_f64(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closest pair and the member of it lying deeper inside the cluster.
///
/// Of the two, the one whose next nearest neighbour is farther is reported:
/// for `{0} ∪ {3^{-n}}` this is the limit point `0`.
fn closest_pair(points: &[[f64; 2]]) -> Option<(f64, usize)> {
    if points.len() < 2 {
        return None;
    }
    let mut best = (f64::INFINITY, 0, 1);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = dist_f64(points[i], points[j]);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    let (d, i, j) = best;
    let other = |k: usize, skip: usize| {
        (0..points.len()).filter(|&l| l != k && l != skip).map(|l| dist_f64(points[k], points[l])).fold(f64::INFINITY, f64::min)
    };
    Some((d, if other(i, j) >= other(j, i) { i } else { j }))
}

#[derive(Clone, Debug, Serialize)]
pub struct DeclaredCheck {
    pub point: P,
    /// Members within the cluster radius, not containing the point.
    pub nearby: usize,
    /// At least [`CLUSTER_COUNT`] members nearby.
    pub confirmed: bool,
}

fn declared_checks(ctx: &Context, dist: impl Fn([f64; 2]) -> Vec<f64>) -> Vec<DeclaredCheck> {
    let radius = ctx.cluster_radius();
    ctx.declared
        .iter()
        .map(|d| {
            let nearby = dist(d.point.to_f64()).into_iter().filter(|&r| r > 0.0 && r <= radius).count();
            DeclaredCheck { point: d.point.clone(), nearby, confirmed: nearby >= CLUSTER_COUNT }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// connectivity

fn on_segment(p: &P, a: &P, b: &P) -> bool {
    let ab = b.clone() - a.clone();
    let ap = p.clone() - a.clone();
    if !ab.cross(&ap).is_zero() {
        return false;
    }
    let t = ap.dot(&ab);
    !t.is_negative() && t <= ab.norm2()
}

/// Where a point of the plane sits relative to a realized set.
#[derive(Clone, Debug, PartialEq)]
enum Located {
    Vertex(usize),
    OnEdge(usize),
    Point(usize),
    /// Interior of the fill with this signature index.
    Fill(usize),
    Outside,
}

fn locate(m: &RealizedSet, z: &P) -> Located {
    let arr = &m.arrangement;
    if let Ok(i) = arr.vertices.binary_search_by(|v| v.lex_cmp(z)) {
        return Located::Vertex(i);
    }
    if let Some(e) = arr.edges.iter().position(|e| on_segment(z, &arr.vertices[e.a], &arr.vertices[e.b])) {
        return Located::OnEdge(e);
    }
    if let Some(i) = m.points.iter().position(|p| p == z) {
        if !m.in_fill(z) {
            return Located::Point(i);
        }
    }
    if !m.fill_signatures.is_empty() {
        let sig = arr.signature(z);
        if let Ok(f) = m.fill_signatures.binary_search(&sig) {
            return Located::Fill(f);
        }
    }
    Located::Outside
}

/// Components of a realized set as unions of graph components, points and fills.
struct Connectivity {
    of_graph: Vec<usize>,
    of_point: Vec<usize>,
    of_fill: Vec<usize>,
    count: usize,
    /// Fill index on each side of every half-edge.
    side_fill: Vec<Option<usize>>,
}

fn connectivity(m: &RealizedSet) -> Connectivity {
    let arr = &m.arrangement;
    let (g, np, nf) = (arr.num_components, m.points.len(), m.fill_signatures.len());
    let mut parent: Vec<usize> = (0..g + np + nf).collect();
    let side_fill: Vec<Option<usize>> = if nf == 0 {
        vec![None; arr.num_half_edges()]
    } else {
        (0..arr.num_half_edges()).map(|h| m.fill_signatures.binary_search(&arr.side_signature(h)).ok()).collect()
    };
    for (h, f) in side_fill.iter().enumerate() {
        if let Some(f) = f {
            union(&mut parent, arr.edge_component(h / 2), g + np + f);
        }
    }
    for (i, p) in m.points.iter().enumerate() {
        match locate(m, p) {
            Located::Vertex(v) => union(&mut parent, arr.vertex_component[v], g + i),
            Located::OnEdge(e) => union(&mut parent, arr.edge_component(e), g + i),
            Located::Fill(f) => union(&mut parent, g + np + f, g + i),
            Located::Point(_) | Located::Outside => {}
        }
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut label = |parent: &mut Vec<usize>, node: usize| {
        let r = find_root(parent, node);
        let next = ids.len();
        *ids.entry(r).or_insert(next)
    };
    let of_graph = (0..g).map(|c| label(&mut parent, c)).collect();
    let of_point = (0..np).map(|i| label(&mut parent, g + i)).collect();
    let of_fill = (0..nf).map(|f| label(&mut parent, g + np + f)).collect();
    let count = ids.len();
    Connectivity { of_graph, of_point, of_fill, count, side_fill }
}

impl Connectivity {
    fn of(&self, m: &RealizedSet, at: &Located) -> Option<usize> {
        let arr = &m.arrangement;
        match *at {
            Located::Vertex(v) => Some(self.of_graph[arr.vertex_component[v]]),
            Located::OnEdge(e) => Some(self.of_graph[arr.edge_component(e)]),
            Located::Point(i) => Some(self.of_point[i]),
            Located::Fill(f) => Some(self.of_fill[f]),
            Located::Outside => None,
        }
    }
}

// ---------------------------------------------------------------------------
// components

#[derive(Clone, Debug, Serialize)]
pub struct ComponentInfo {
    /// Skeleton indices.
    pub pieces: Vec<usize>,
    pub points: Vec<P>,
    /// Fill seed indices.
    pub fills: Vec<usize>,
    pub edges: usize,
}

/// Two skeleton pieces meeting at an exact point.
#[derive(Clone, Debug, Serialize)]
pub struct Adjacency {
    pub pieces: [usize; 2],
    pub point: P,
}

#[derive(Clone, Debug, Serialize)]
pub struct Separation {
    pub components: [usize; 2],
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub components: Vec<ComponentInfo>,
    pub adjacency: Vec<Adjacency>,
    pub separations: Vec<Separation>,
    pub min_separation: Option<f64>,
    pub resolution: f64,
    pub declared: Vec<DeclaredCheck>,
    pub discrete: bool,
    pub verdict: String,
    /// x-projection of the boundary edges off the window frame, merged.
    pub boundary_projection: Vec<Interval>,
    pub boundary_projection_components: usize,
}

fn skeleton_frame(pres: &PlanarSetPresentation, i: usize) -> (Rotation<Rational>, P) {
    match &pres.skeleton[i] {
        Piece::Graph(g) => (g.rotation.clone(), g.offset.clone()),
        Piece::Sset(s) => (s.rotation.clone(), s.offset.clone()),
    }
}

fn on_window_frame(w: &Window, a: &P, b: &P) -> bool {
    (a.x == w.xmin && b.x == w.xmin)
        || (a.x == w.xmax && b.x == w.xmax)
        || (a.y == w.ymin && b.y == w.ymin)
        || (a.y == w.ymax && b.y == w.ymax)
}

/// Components of `M`, their adjacency and the discreteness verdict.
pub fn components_report(m: &RealizedSet, ctx: &Context) -> ComponentReport {
    let arr = &m.arrangement;
    let pres = &m.presentation;
    let conn = connectivity(m);
    let mut comps: Vec<ComponentInfo> =
        (0..conn.count).map(|_| ComponentInfo { pieces: vec![], points: vec![], fills: vec![], edges: 0 }).collect();
    let mut shapes: Vec<Shape> = vec![Shape::default(); conn.count];
    let mut piece_comp: BTreeMap<usize, usize> = BTreeMap::new();
    for (e, edge) in arr.edges.iter().enumerate() {
        let c = conn.of_graph[arr.edge_component(e)];
        comps[c].edges += 1;
        let [ax, ay] = arr.vertices[edge.a].to_f64();
        let [bx, by] = arr.vertices[edge.b].to_f64();
        shapes[c].segments.push([ax, ay, bx, by]);
        for &s in &edge.sources {
            piece_comp.insert(s, c);
        }
    }
    for (i, p) in m.points.iter().enumerate() {
        let c = conn.of_point[i];
        comps[c].points.push(p.clone());
        shapes[c].points.push(p.to_f64());
    }
    // degenerate skeleton pieces are single points
    for (i, piece) in pres.skeleton.iter().enumerate() {
        if piece_comp.contains_key(&i) {
            continue;
        }
        if let Some(p) = piece.graph_pieces().first().and_then(|g| g.polyline().first().cloned()) {
            if let Some(c) = conn.of(m, &locate(m, &p)) {
                piece_comp.insert(i, c);
            }
        }
    }
    for (i, c) in piece_comp {
        comps[c].pieces.push(i);
    }
    for (i, seed) in pres.fills.iter().enumerate() {
        if let Ok(f) = m.fill_signatures.binary_search(&arr.signature(seed)) {
            comps[conn.of_fill[f]].fills.push(i);
        }
    }

    let mut incident: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); arr.vertices.len()];
    for e in &arr.edges {
        incident[e.a].extend(e.sources.iter().copied());
        incident[e.b].extend(e.sources.iter().copied());
    }
    let mut seen = BTreeSet::new();
    let mut adjacency = Vec::new();
    for (v, tags) in incident.iter().enumerate() {
        let tags: Vec<usize> = tags.iter().copied().collect();
        for i in 0..tags.len() {
            for j in i + 1..tags.len() {
                if seen.insert((tags[i], tags[j])) {
                    adjacency.push(Adjacency { pieces: [tags[i], tags[j]], point: arr.vertices[v].clone() });
                }
            }
        }
    }

    let mut separations = Vec::new();
    for i in 0..shapes.len() {
        for j in i + 1..shapes.len() {
            if !shapes[i].is_empty() && !shapes[j].is_empty() {
                separations.push(Separation { components: [i, j], distance: shapes[i].dist(&shapes[j]) });
            }
        }
    }
    let min_separation = separations.iter().map(|s| s.distance).reduce(f64::min);
    let resolution = ctx.resolution();
    let declared = declared_checks(ctx, |p| shapes.iter().filter(|s| !s.is_empty()).map(|s| s.dist_to_point(p)).collect());
    let discrete = min_separation.map_or(true, |d| d >= resolution) && declared.is_empty();

    let mut proj = Vec::new();
    for (e, edge) in arr.edges.iter().enumerate() {
        let interior = conn.side_fill[2 * e].is_some() && conn.side_fill[2 * e + 1].is_some();
        let (a, b) = (&arr.vertices[edge.a], &arr.vertices[edge.b]);
        if interior || on_window_frame(&ctx.window, a, b) {
            continue;
        }
        let (lo, hi) = if a.x <= b.x { (a.x.clone(), b.x.clone()) } else { (b.x.clone(), a.x.clone()) };
        proj.push((lo, hi));
    }
    for p in &m.points {
        if locate(m, p) == Located::Point(m.points.iter().position(|q| q == p).expect("listed")) {
            proj.push((p.x.clone(), p.x.clone()));
        }
    }
    let boundary_projection = intervals(merge_intervals(proj));
    ComponentReport {
        boundary_projection_components: boundary_projection.len(),
        boundary_projection,
        components: comps,
        adjacency,
        separations,
        min_separation,
        resolution,
        declared,
        discrete,
        verdict: if discrete { "discrete" } else { "not D_2-compatible" }.to_string(),
    }
}

impl ComponentReport {
    /// Adjacency as an undirected DOT graph clustered by component.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph components {\n");
        for (c, comp) in self.components.iter().enumerate() {
            out.push_str(&format!("  subgraph cluster_{c} {{\n    label=\"component {c}\";\n"));
            for p in &comp.pieces {
                out.push_str(&format!("    p{p} [label=\"piece {p}\"];\n"));
            }
            for f in &comp.fills {
                out.push_str(&format!("    f{f} [label=\"fill {f}\", shape=box];\n"));
            }
            for (k, p) in comp.points.iter().enumerate() {
                out.push_str(&format!("    c{c}_q{k} [label=\"{p:?}\", shape=point];\n"));
            }
            out.push_str("  }\n");
            if let Some(p) = comp.pieces.first() {
                for f in &comp.fills {
                    out.push_str(&format!("  p{p} -- f{f} [style=dashed];\n"));
                }
            }
        }
        for a in &self.adjacency {
            out.push_str(&format!("  p{} -- p{} [label=\"{:?}\"];\n", a.pieces[0], a.pieces[1], a.point));
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// isolated points and singular tangent points

#[derive(Clone, Debug, Serialize)]
pub struct IsolatedReport {
    pub points: Vec<P>,
    pub min_separation: Option<f64>,
    pub resolution: f64,
    pub declared: Vec<DeclaredCheck>,
    pub discrete: bool,
    /// Member of the closest cluster, reported when the family accumulates.
    pub accumulation: Option<P>,
    pub verdict: String,
}

fn point_family_verdict(points: Vec<P>, ctx: &Context) -> IsolatedReport {
    let f: Vec<[f64; 2]> = points.iter().map(|p| p.to_f64()).collect();
    let pair = closest_pair(&f);
    let resolution = ctx.resolution();
    let declared = declared_checks(ctx, |q| f.iter().map(|&p| dist_f64(p, q)).collect());
    let close = pair.is_some_and(|(d, _)| d < resolution);
    let discrete = !close && declared.is_empty();
    let accumulation = if discrete {
        None
    } else if let Some(d) = declared.iter().find(|d| d.confirmed).or(declared.first()) {
        Some(d.point.clone())
    } else {
        pair.map(|(_, k)| points[k].clone())
    };
    IsolatedReport {
        min_separation: pair.map(|(d, _)| d),
        resolution,
        declared,
        discrete,
        accumulation,
        verdict: if discrete { "discrete" } else { "accumulating" }.to_string(),
        points,
    }
}

/// Isolated points of `M`: point features off the skeleton and outside every fill.
pub fn isolated_points_report(m: &RealizedSet, ctx: &Context) -> IsolatedReport {
    let points: Vec<P> = m
        .points
        .iter()
        .enumerate()
        .filter(|(i, p)| locate(m, p) == Located::Point(*i))
        .map(|(_, p)| p.clone())
        .collect();
    point_family_verdict(points, ctx)
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularReport {
    pub candidates: usize,
    /// `E_M`: candidates whose tangent fan is a single direction.
    pub points: Vec<P>,
    pub directions: Vec<P>,
    pub family: IsolatedReport,
}

/// Points of `M` with exactly one tangent direction.
///
/// Candidates default to the arrangement vertices and point features; along
/// the open edges every point has two opposite directions.
pub fn singular_tangent_points(m: &RealizedSet, candidates: Option<&[P]>, ctx: &Context) -> Result<SingularReport> {
    let arr = &m.arrangement;
    let mut found: Vec<(P, P)> = Vec::new();
    let count;
    match candidates {
        Some(list) => {
            count = list.len();
            for z in list {
                let fan = tangent_fan(&m.presentation, z)?;
                if fan.exact.len() == 1 {
                    found.push((z.clone(), fan.exact[0].clone()));
                }
            }
        }
        None => {
            count = arr.vertices.len() + m.points.len();
            let mut dirs: Vec<Vec<P>> = vec![Vec::new(); arr.vertices.len()];
            for e in &arr.edges {
                let (a, b) = (&arr.vertices[e.a], &arr.vertices[e.b]);
                dirs[e.a].push(canonical_direction(&(b.clone() - a.clone())));
                dirs[e.b].push(canonical_direction(&(a.clone() - b.clone())));
            }
            for (v, mut d) in dirs.into_iter().enumerate() {
                d.sort_by(|a, b| a.lex_cmp(b));
                d.dedup();
                if d.len() == 1 {
                    found.push((arr.vertices[v].clone(), d.pop().expect("one")));
                }
            }
        }
    }
    let (points, directions): (Vec<P>, Vec<P>) = found.into_iter().unzip();
    let family = point_family_verdict(points.clone(), ctx);
    Ok(SingularReport { candidates: count, points, directions, family })
}

// ---------------------------------------------------------------------------
// decomposition into DC graphs

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub pieces: Vec<DcGraphPiece>,
    /// Skeleton index of each piece; `None` for isolated points.
    pub sources: Vec<Option<usize>>,
    /// The union of the pieces realizes the input set exactly.
    pub exact_cover: bool,
}

/// Finite list of DC graphs whose union is `M`.
///
/// Graph pieces are kept whole; an (s)-set contributes its distinct
/// selections; isolated points become degenerate graphs.
pub fn dc_graph_decomposition(pres: &PlanarSetPresentation) -> Result<Decomposition> {
    if !pres.fills.is_empty() {
        return precondition("the presentation has fills; its set is not nowhere dense");
    }
    let mut pieces: Vec<DcGraphPiece> = Vec::new();
    let mut sources = Vec::new();
    for (i, piece) in pres.skeleton.iter().enumerate() {
        for g in piece.graph_pieces() {
            if !pieces.contains(&g) {
                pieces.push(g);
                sources.push(Some(i));
            }
        }
    }
    for p in &pres.isolated {
        pieces.push(DcGraphPiece::new(
            Rotation::identity(),
            p.clone(),
            PiecewiseLinear::point(Rational::zero(), Rational::zero()),
        ));
        sources.push(None);
    }
    let rebuilt = PlanarSetPresentation::from_pieces(pieces.clone());
    let exact_cover = realized_equal(pres, &rebuilt)?;
    Ok(Decomposition { pieces, sources, exact_cover })
}

// ---------------------------------------------------------------------------
// chains

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChainPiece {
    /// Sub-arc of a skeleton piece, monotone in that piece's frame.
    Graph { source: usize, points: Vec<P>, length: f64 },
    /// Straight segment contained in `M`.
    Segment { from: P, to: P, length: f64 },
}

impl ChainPiece {
    pub fn length(&self) -> f64 {
        match self {
            ChainPiece::Graph { length, .. } | ChainPiece::Segment { length, .. } => *length,
        }
    }

    pub fn points(&self) -> Vec<P> {
        match self {
            ChainPiece::Graph { points, .. } => points.clone(),
            ChainPiece::Segment { from, to, .. } => vec![from.clone(), to.clone()],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Chain {
    pub pieces: Vec<ChainPiece>,
    /// Visited points in order, without repetition.
    pub vertices: Vec<P>,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum PathOutcome {
    Chain(Chain),
    Disconnected { components: [usize; 2] },
}

fn seg_len(a: &P, b: &P) -> f64 {
    a.dist2(b).to_f64_lossy().sqrt()
}

/// Whether the closed segment `p`–`q` lies in `M`.
pub fn segment_in_set(m: &RealizedSet, p: &P, q: &P) -> bool {
    if p == q {
        return m.contains(p);
    }
    let arr = &m.arrangement;
    let d = q.clone() - p.clone();
    let n2 = d.norm2();
    let mut ts = vec![Rational::zero(), Rational::one()];
    for e in &arr.edges {
        for x in segment_intersections(p, q, &arr.vertices[e.a], &arr.vertices[e.b]) {
            ts.push((x - p.clone()).dot(&d) / n2.clone());
        }
    }
    ts.sort();
    ts.dedup();
    let half = Rational::new(1.into(), 2.into());
    if !(m.contains(p) && m.contains(q)) {
        return false;
    }
    ts.windows(2).all(|w| {
        let mid = p.clone() + d.scale(&((w[0].clone() + w[1].clone()) * half.clone()));
        arr.on_graph(&mid) || m.in_fill(&mid)
    })
}

/// Injective chain of DC graphs inside `M` from `x` to `y`.
///
/// Breadth-first search runs over the arrangement graph, extended by
/// straight segments inside fills: from a query point in a fill to one
/// visible vertex of each boundary component of its face, and between the
/// boundary components of every filled face. A direct segment `x`–`y`
/// inside `M` is preferred.
pub fn path_between(m: &RealizedSet, x: &P, y: &P) -> Result<PathOutcome> {
    let (lx, ly) = (locate(m, x), locate(m, y));
    if lx == Located::Outside || ly == Located::Outside {
        return precondition("both endpoints must lie in the set");
    }
    if x == y {
        return Ok(PathOutcome::Chain(Chain { pieces: vec![], vertices: vec![x.clone()], length: 0.0 }));
    }
    let conn = connectivity(m);
    let (cx, cy) = (conn.of(m, &lx).expect("located"), conn.of(m, &ly).expect("located"));
    if cx != cy {
        return Ok(PathOutcome::Disconnected { components: [cx, cy] });
    }
    if segment_in_set(m, x, y) {
        let piece = ChainPiece::Segment { from: x.clone(), to: y.clone(), length: seg_len(x, y) };
        let length = piece.length();
        return Ok(PathOutcome::Chain(Chain { pieces: vec![piece], vertices: vec![x.clone(), y.clone()], length }));
    }

    let arr = &m.arrangement;
    let nv = arr.vertices.len();
    let mut nodes: Vec<P> = arr.vertices.clone();
    // (neighbour, source tag or None for a straight fill segment)
    let mut adj: Vec<Vec<(usize, Option<usize>)>> = vec![Vec::new(); nv];
    let link = |adj: &mut Vec<Vec<(usize, Option<usize>)>>, a: usize, b: usize, s: Option<usize>| {
        adj[a].push((b, s));
        adj[b].push((a, s));
    };
    for e in &arr.edges {
        link(&mut adj, e.a, e.b, e.sources.iter().min().copied());
    }
    let mut face_vertices: BTreeMap<usize, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    for (h, f) in conn.side_fill.iter().enumerate() {
        if let Some(f) = f {
            let v = arr.origin(h);
            face_vertices.entry(*f).or_default().entry(arr.vertex_component[v]).or_default().push(v);
        }
    }
    for groups in face_vertices.values_mut() {
        for vs in groups.values_mut() {
            vs.sort_unstable();
            vs.dedup();
        }
    }
    // islands of a filled face are joined to its first boundary component
    for groups in face_vertices.values() {
        let comps: Vec<&Vec<usize>> = groups.values().collect();
        for other in comps.iter().skip(1) {
            let mut pairs: Vec<(usize, usize)> =
                comps[0].iter().flat_map(|&a| other.iter().map(move |&b| (a, b))).collect();
            pairs.sort_by(|&(a, b), &(c, d)| arr.vertices[a].dist2(&arr.vertices[b]).cmp(&arr.vertices[c].dist2(&arr.vertices[d])));
            if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| segment_in_set(m, &arr.vertices[a], &arr.vertices[b])) {
                link(&mut adj, a, b, None);
            }
        }
    }
    let endpoint = |z: &P, at: &Located, nodes: &mut Vec<P>, adj: &mut Vec<Vec<(usize, Option<usize>)>>| -> usize {
        if let Located::Vertex(v) = at {
            return *v;
        }
        let id = nodes.len();
        nodes.push(z.clone());
        adj.push(Vec::new());
        match at {
            Located::OnEdge(e) => {
                let edge = &arr.edges[*e];
                let s = edge.sources.iter().min().copied();
                link(adj, id, edge.a, s);
                link(adj, id, edge.b, s);
            }
            Located::Fill(f) => {
                for vs in face_vertices.get(f).map(|g| g.values().collect::<Vec<_>>()).unwrap_or_default() {
                    let mut order = vs.clone();
                    order.sort_by(|&a, &b| z.dist2(&arr.vertices[a]).cmp(&z.dist2(&arr.vertices[b])));
                    if let Some(&v) = order.iter().find(|&&v| segment_in_set(m, z, &arr.vertices[v])) {
                        link(adj, id, v, None);
                    }
                }
            }
            _ => {}
        }
        id
    };
    let sx = endpoint(x, &lx, &mut nodes, &mut adj);
    let sy = endpoint(y, &ly, &mut nodes, &mut adj);

    let mut prev: Vec<Option<(usize, Option<usize>)>> = vec![None; nodes.len()];
    let mut seen = vec![false; nodes.len()];
    let mut queue = VecDeque::from([sx]);
    seen[sx] = true;
    while let Some(u) = queue.pop_front() {
        if u == sy {
            break;
        }
        for &(w, s) in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some((u, s));
                queue.push_back(w);
            }
        }
    }
    if !seen[sy] {
        return invalid(format!("no chain found inside component {cx}"));
    }
    let mut steps: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut cur = sy;
    while let Some((u, s)) = prev[cur] {
        steps.push((u, cur, s));
        cur = u;
    }
    steps.reverse();
    Ok(PathOutcome::Chain(assemble_chain(&m.presentation, &nodes, &steps)))
}

/// Group path steps into pieces: one per maximal run along a skeleton piece
/// that stays monotone in the piece's own frame.
fn assemble_chain(pres: &PlanarSetPresentation, nodes: &[P], steps: &[(usize, usize, Option<usize>)]) -> Chain {
    let mut pieces: Vec<ChainPiece> = Vec::new();
    let mut run: Option<(usize, Vec<usize>, i8)> = None;
    let local_x = |s: usize, p: &P| {
        let (rot, off) = skeleton_frame(pres, s);
        (p.clone() - off).dot(&Point::new(rot.cos().clone(), rot.sin().clone()))
    };
    let close = |run: &mut Option<(usize, Vec<usize>, i8)>, pieces: &mut Vec<ChainPiece>| {
        if let Some((s, idx, _)) = run.take() {
            let points: Vec<P> = idx.iter().map(|&i| nodes[i].clone()).collect();
            let length = points.windows(2).map(|w| seg_len(&w[0], &w[1])).sum();
            pieces.push(ChainPiece::Graph { source: s, points, length });
        }
    };
    for &(a, b, s) in steps {
        match s {
            None => {
                close(&mut run, &mut pieces);
                pieces.push(ChainPiece::Segment { from: nodes[a].clone(), to: nodes[b].clone(), length: seg_len(&nodes[a], &nodes[b]) });
            }
            Some(s) => {
                let dir = match local_x(s, &nodes[b]).cmp(&local_x(s, &nodes[a])) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => -1,
                    std::cmp::Ordering::Equal => 0,
                };
                let extend = matches!(&run, Some((t, _, d)) if *t == s && (*d == dir || *d == 0 || dir == 0));
                if extend {
                    let r = run.as_mut().expect("open run");
                    r.1.push(b);
                    if r.2 == 0 {
                        r.2 = dir;
                    }
                } else {
                    close(&mut run, &mut pieces);
                    run = Some((s, vec![a, b], dir));
                }
            }
        }
    }
    close(&mut run, &mut pieces);
    let mut vertices = vec![nodes[steps[0].0].clone()];
    vertices.extend(steps.iter().map(|&(_, b, _)| nodes[b].clone()));
    let length = pieces.iter().map(ChainPiece::length).sum();
    Chain { pieces, vertices, length }
}

// ---------------------------------------------------------------------------
// one-dimensional criterion and images

#[derive(Clone, Debug, Serialize)]
pub struct D1Report {
    /// Merged components meeting the window.
    pub components: Vec<Interval>,
    pub min_gap: Option<f64>,
    pub resolution: f64,
    pub in_d1: bool,
    pub accumulation: Option<f64>,
}

/// Local finiteness of the components of a finite union of closed intervals and points.
///
/// `declared` lists accumulation points announced by the caller.
pub fn d1_check(parts: &[(Rational, Rational)], window: (&Rational, &Rational), declared: &[Rational]) -> Result<D1Report> {
    let (wa, wb) = window;
    if wa >= wb {
        return invalid("window has empty interior");
    }
    if let Some((a, b)) = parts.iter().find(|(a, b)| a > b) {
        return invalid(format!("interval [{}, {}] has lo > hi", a.repr(), b.repr()));
    }
    let merged: Vec<(Rational, Rational)> =
        merge_intervals(parts.to_vec()).into_iter().filter(|(a, b)| b >= wa && a <= wb).collect();
    let resolution = RESOLUTION * (wb.clone() - wa.clone()).to_f64_lossy();
    let gaps: Vec<f64> = merged.windows(2).map(|w| (w[1].0.clone() - w[0].1.clone()).to_f64_lossy()).collect();
    let min_gap = gaps.iter().copied().reduce(f64::min);
    let close = min_gap.is_some_and(|g| g < resolution);
    let in_d1 = !close && declared.is_empty();
    let accumulation = if let Some(d) = declared.first() {
        Some(d.to_f64_lossy())
    } else if close {
        let k = gaps.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).expect("gaps");
        let left_other = if k > 0 { gaps[k - 1] } else { f64::INFINITY };
        let right_other = gaps.get(k + 1).copied().unwrap_or(f64::INFINITY);
        Some(if left_other >= right_other { merged[k].1.to_f64_lossy() } else { merged[k + 1].0.to_f64_lossy() })
    } else {
        None
    };
    Ok(D1Report { components: intervals(merged), min_gap, resolution, in_d1, accumulation })
}

#[derive(Clone, Debug, Serialize)]
pub struct ImageReport {
    /// Components of `P`.
    pub domain_components: Vec<Interval>,
    /// `g(P)` as merged closed intervals.
    pub image: Vec<Interval>,
    pub nowhere_dense: bool,
    /// Largest nondegenerate interval inside `g(P)`, if any.
    pub interior_witness: Option<Interval>,
}

/// Largest nondegenerate component of a finite union of closed intervals.
pub fn interior_witness(parts: &[Interval]) -> Option<Interval> {
    let merged = merge_intervals(parts.iter().map(|i| (i.lo.clone(), i.hi.clone())).collect());
    merged
        .into_iter()
        .filter(|(a, b)| a < b)
        .max_by(|(a, b), (c, d)| (b.clone() - a.clone()).cmp(&(d.clone() - c.clone())))
        .map(|(lo, hi)| Interval { lo, hi })
}

/// Exact image of `P = [a, b] \ ∪ (c_i, d_i)` under a PL function on `[a, b]`.
///
/// `P` must be nowhere dense, which for finitely many removed intervals means
/// the removed intervals leave only points.
pub fn nowhere_dense_image(g: &PlFunction, removed: &[(Rational, Rational)]) -> Result<ImageReport> {
    let (a, b) = (g.start().clone(), g.end().clone());
    if let Some((c, d)) = removed.iter().find(|(c, d)| c >= d || c < &a || d > &b) {
        return invalid(format!("removed interval ({}, {}) is empty or leaves [{}, {}]", c.repr(), d.repr(), a.repr(), b.repr()));
    }
    let mut holes = removed.to_vec();
    holes.sort();
    let mut comps: Vec<(Rational, Rational)> = Vec::new();
    let mut cursor = a.clone();
    for (c, d) in &holes {
        if c >= &cursor {
            comps.push((cursor.clone(), c.clone()));
        }
        if d > &cursor {
            cursor = d.clone();
        }
    }
    if cursor <= b {
        comps.push((cursor, b.clone()));
    }
    if let Some((s, t)) = comps.iter().find(|(s, t)| s < t) {
        return precondition(format!("P contains the interval [{}, {}]; it is not nowhere dense", s.repr(), t.repr()));
    }
    let image: Vec<(Rational, Rational)> = comps
        .iter()
        .map(|(s, t)| {
            let mut vals = vec![g.eval(s)?, g.eval(t)?];
            for x in g.breakpoints().iter().filter(|x| *x > s && *x < t) {
                vals.push(g.eval(x)?);
            }
            let lo = vals.iter().min().expect("nonempty").clone();
            let hi = vals.iter().max().expect("nonempty").clone();
            Ok((lo, hi))
        })
        .collect::<Result<_>>()?;
    let image = intervals(merge_intervals(image));
    let witness = interior_witness(&image);
    Ok(ImageReport { domain_components: intervals(comps), nowhere_dense: witness.is_none(), interior_witness: witness, image })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SceneAnalysis {
    pub components: ComponentReport,
    pub isolated: IsolatedReport,
    pub singular: SingularReport,
    /// Absent when the scene has fills.
    pub decomposition: Option<Decomposition>,
}

pub fn analyze_scene(scene: &Scene) -> Result<SceneAnalysis> {
    let m = scene.set.realize()?;
    let ctx = Context::from_scene(scene);
    let decomposition = if scene.set.fills.is_empty() { Some(dc_graph_decomposition(&scene.set)?) } else { None };
    Ok(SceneAnalysis {
        components: components_report(&m, &ctx),
        isolated: isolated_points_report(&m, &ctx),
        singular: singular_tangent_points(&m, None, &ctx)?,
        decomposition,
    })
}
