//! Exact arrangement of finitely many segments.
//!
//! Segments are split at every crossing, touching point and collinear
//! overlap; the resulting plane graph is traced into boundary cycles. A
//! point off the graph is located by its *signature*: the sorted list of
//! positively oriented cycles winding around it. Two such points lie in the
//! same face of the complement exactly when their signatures agree.

use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};

use crate::planar::{angle_cmp, Point};
use crate::Rational;

type P = Point<Rational>;

#[derive(Clone, Debug)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Tags of the input segments covering this edge.
    pub sources: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Cycle {
    pub half_edges: Vec<usize>,
    /// Twice the signed area enclosed by the walk.
    pub area2: Rational,
    pub component: usize,
    bbox: (P, P),
}

impl Cycle {
    pub fn is_bounded_face(&self) -> bool {
        self.area2.is_positive()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Arrangement {
    pub vertices: Vec<P>,
    pub edges: Vec<Edge>,
    /// Half-edge `2e` runs `a → b`, `2e + 1` runs `b → a`.
    next: Vec<usize>,
    half_cycle: Vec<usize>,
    pub cycles: Vec<Cycle>,
    /// Component id of every vertex.
    pub vertex_component: Vec<usize>,
    pub num_components: usize,
}

fn on_segment(p: &P, a: &P, b: &P) -> bool {
    let ab = b.clone() - a.clone();
    let ap = p.clone() - a.clone();
    if !ab.cross(&ap).is_zero() {
        return false;
    }
    let t = ap.dot(&ab);
    !t.is_negative() && t <= ab.norm2()
}

/// Intersection points of two segments (0, 1 or 2 points for overlaps).
pub fn segment_intersections(a1: &P, b1: &P, a2: &P, b2: &P) -> Vec<P> {
    let d1 = b1.clone() - a1.clone();
    let d2 = b2.clone() - a2.clone();
    let den = d1.cross(&d2);
    let w = a2.clone() - a1.clone();
    if !den.is_zero() {
        let t = w.cross(&d2) / den.clone();
        let s = w.cross(&d1) / den;
        let unit = Rational::one();
        if !t.is_negative() && t <= unit && !s.is_negative() && s <= unit {
            return vec![a1.clone() + d1 * t];
        }
        return Vec::new();
    }
    if !w.cross(&d1).is_zero() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for p in [a1, b1] {
        if on_segment(p, a2, b2) {
            out.push(p.clone());
        }
    }
    for p in [a2, b2] {
        if on_segment(p, a1, b1) {
            out.push(p.clone());
        }
    }
    out.sort_by(|p, q| p.lex_cmp(q));
    out.dedup();
    out
}

fn bbox_of<'a, I: IntoIterator<Item = &'a P>>(pts: I) -> (P, P) {
    let mut it = pts.into_iter();
    let first = it.next().expect("nonempty").clone();
    let (mut lo, mut hi) = (first.clone(), first);
    for p in it {
        if p.x < lo.x {
            lo.x = p.x.clone();
        }
        if p.y < lo.y {
            lo.y = p.y.clone();
        }
        if p.x > hi.x {
            hi.x = p.x.clone();
        }
        if p.y > hi.y {
            hi.y = p.y.clone();
        }
    }
    (lo, hi)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

pub(crate) fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

pub(crate) fn find_root(parent: &mut [usize], i: usize) -> usize {
    find(parent, i)
}

impl Arrangement {
    /// Build from tagged segments; zero-length segments are ignored.
    pub fn build(segments: &[(P, P, usize)]) -> Self {
        let segs: Vec<(P, P, usize)> = segments
            .iter()
            .filter(|(a, b, _)| a != b)
            .map(|(a, b, t)| if a.lex_cmp(b) == Ordering::Greater { (b.clone(), a.clone(), *t) } else { (a.clone(), b.clone(), *t) })
            .collect();
        let mut splits: Vec<Vec<P>> = segs.iter().map(|(a, b, _)| vec![a.clone(), b.clone()]).collect();

        // sweep over x-extents (a.x ≤ b.x after normalisation)
        let mut order: Vec<usize> = (0..segs.len()).collect();
        order.sort_by(|&i, &j| segs[i].0.x.cmp(&segs[j].0.x));
        let ylo = |i: usize| if segs[i].0.y < segs[i].1.y { &segs[i].0.y } else { &segs[i].1.y };
        let yhi = |i: usize| if segs[i].0.y < segs[i].1.y { &segs[i].1.y } else { &segs[i].0.y };
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if segs[j].0.x > segs[i].1.x {
                    break;
                }
                if ylo(j) > yhi(i) || ylo(i) > yhi(j) {
                    continue;
                }
                let pts = segment_intersections(&segs[i].0, &segs[i].1, &segs[j].0, &segs[j].1);
                for p in pts {
                    splits[i].push(p.clone());
                    splits[j].push(p);
                }
            }
        }

        let mut vertices: Vec<P> = splits.iter().flatten().cloned().collect();
        vertices.sort_by(|p, q| p.lex_cmp(q));
        vertices.dedup();
        let index = |p: &P| vertices.binary_search_by(|v| v.lex_cmp(p)).expect("vertex present");

        let mut raw_edges: Vec<(usize, usize, usize)> = Vec::new();
        for (s, pts) in splits.iter_mut().enumerate() {
            pts.sort_by(|p, q| p.lex_cmp(q));
            pts.dedup();
            for w in pts.windows(2) {
                let (u, v) = (index(&w[0]), index(&w[1]));
                raw_edges.push((u.min(v), u.max(v), segs[s].2));
            }
        }
        raw_edges.sort();
        let mut edges: Vec<Edge> = Vec::new();
        for (a, b, t) in raw_edges {
            match edges.last_mut() {
                Some(e) if e.a == a && e.b == b => {
                    if !e.sources.contains(&t) {
                        e.sources.push(t);
                    }
                }
                _ => edges.push(Edge { a, b, sources: vec![t] }),
            }
        }

        let mut arr = Arrangement { vertices, edges, ..Default::default() };
        arr.trace();
        arr
    }

    pub fn origin(&self, h: usize) -> usize {
        let e = &self.edges[h / 2];
        if h % 2 == 0 {
            e.a
        } else {
            e.b
        }
    }

    pub fn target(&self, h: usize) -> usize {
        self.origin(h ^ 1)
    }

    pub fn cycle_of(&self, h: usize) -> usize {
        self.half_cycle[h]
    }

    pub fn edge_component(&self, e: usize) -> usize {
        self.vertex_component[self.edges[e].a]
    }

    pub fn edge_midpoint(&self, e: usize) -> P {
        let half = Rational::new(1.into(), 2.into());
        (self.vertices[self.edges[e].a].clone() + self.vertices[self.edges[e].b].clone()) * half
    }

    fn trace(&mut self) {
        let nv = self.vertices.len();
        let nh = 2 * self.edges.len();
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for h in 0..nh {
            outgoing[self.origin(h)].push(h);
        }
        let dir = |arr: &Self, h: usize| arr.vertices[arr.target(h)].clone() - arr.vertices[arr.origin(h)].clone();
        let mut pos = vec![0usize; nh];
        for list in outgoing.iter_mut() {
            list.sort_by(|&g, &h| angle_cmp(&dir(self, g), &dir(self, h)));
            for (i, &h) in list.iter().enumerate() {
                pos[h] = i;
            }
        }
        self.next = vec![0; nh];
        for h in 0..nh {
            let t = h ^ 1;
            let list = &outgoing[self.origin(t)];
            let i = pos[t];
            self.next[h] = list[(i + list.len() - 1) % list.len()];
        }

        let mut parent: Vec<usize> = (0..nv).collect();
        for e in &self.edges {
            union(&mut parent, e.a, e.b);
        }
        let mut comp_id = vec![usize::MAX; nv];
        let mut count = 0;
        self.vertex_component = (0..nv)
            .map(|v| {
                let r = find(&mut parent, v);
                if comp_id[r] == usize::MAX {
                    comp_id[r] = count;
                    count += 1;
                }
                comp_id[r]
            })
            .collect();
        self.num_components = count;

        self.half_cycle = vec![usize::MAX; nh];
        for start in 0..nh {
            if self.half_cycle[start] != usize::MAX {
                continue;
            }
            let id = self.cycles.len();
            let mut hs = Vec::new();
            let mut h = start;
            let mut area2 = Rational::zero();
            loop {
                self.half_cycle[h] = id;
                hs.push(h);
                area2 += self.vertices[self.origin(h)].cross(&self.vertices[self.target(h)]);
                h = self.next[h];
                if h == start {
                    break;
                }
            }
            let bbox = bbox_of(hs.iter().map(|&h| &self.vertices[self.origin(h)]));
            let component = self.vertex_component[self.origin(start)];
            self.cycles.push(Cycle { half_edges: hs, area2, component, bbox });
        }
    }

    /// Whether `p` lies on some edge or vertex.
    pub fn on_graph(&self, p: &P) -> bool {
        self.edges.iter().any(|e| on_segment(p, &self.vertices[e.a], &self.vertices[e.b]))
    }

    /// Winding number of cycle `c` around `p` (which must be off the cycle).
    pub fn winding(&self, c: usize, p: &P) -> i64 {
        let cyc = &self.cycles[c];
        let (lo, hi) = &cyc.bbox;
        if p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y {
            return 0;
        }
        let mut w = 0;
        for &h in &cyc.half_edges {
            let a = &self.vertices[self.origin(h)];
            let b = &self.vertices[self.target(h)];
            let side = || (b.clone() - a.clone()).cross(&(p.clone() - a.clone()));
            if a.y <= p.y {
                if b.y > p.y && side().is_positive() {
                    w += 1;
                }
            } else if b.y <= p.y && side().is_negative() {
                w -= 1;
            }
        }
        w
    }

    /// Sorted ids of bounded-face cycles around `p`, skipping `skip_component`.
    fn signature_except(&self, p: &P, skip_component: Option<usize>) -> Vec<usize> {
        (0..self.cycles.len())
            .filter(|&c| {
                let cyc = &self.cycles[c];
                cyc.is_bounded_face() && Some(cyc.component) != skip_component && self.winding(c, p) != 0
            })
            .collect()
    }

    /// Face signature of a point off the graph.
    pub fn signature(&self, p: &P) -> Vec<usize> {
        self.signature_except(p, None)
    }

    /// Signature of the face on the left of half-edge `h`.
    pub fn side_signature(&self, h: usize) -> Vec<usize> {
        let c = self.cycle_of(h);
        let comp = self.cycles[c].component;
        let mut sig = if self.num_components > 1 {
            self.signature_except(&self.edge_midpoint(h / 2), Some(comp))
        } else {
            Vec::new()
        };
        if self.cycles[c].is_bounded_face() {
            sig.push(c);
            sig.sort_unstable();
        }
        sig
    }

    pub fn num_half_edges(&self) -> usize {
        2 * self.edges.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    fn p(x: i64, y: i64) -> P {
        Point::new(q(x, 1), q(y, 1))
    }

    fn square(x0: i64, y0: i64, s: i64, tag: usize) -> Vec<(P, P, usize)> {
        let c = [p(x0, y0), p(x0 + s, y0), p(x0 + s, y0 + s), p(x0, y0 + s)];
        (0..4).map(|i| (c[i].clone(), c[(i + 1) % 4].clone(), tag)).collect()
    }

    #[test]
    fn crossing_segments_split() {
        let a = Arrangement::build(&[(p(0, 0), p(2, 2), 0), (p(0, 2), p(2, 0), 1)]);
        assert_eq!(a.vertices.len(), 5);
        assert_eq!(a.edges.len(), 4);
        assert_eq!(a.num_components, 1);
        assert!(a.cycles.iter().all(|c| !c.is_bounded_face()));
    }

    #[test]
    fn collinear_overlap_split() {
        let a = Arrangement::build(&[(p(0, 0), p(3, 0), 0), (p(1, 0), p(5, 0), 1)]);
        assert_eq!(a.edges.len(), 3);
        let shared = a.edges.iter().find(|e| e.sources.len() == 2).unwrap();
        assert_eq!((a.vertices[shared.a].clone(), a.vertices[shared.b].clone()), (p(1, 0), p(3, 0)));
    }

    #[test]
    fn nested_squares_locate() {
        let mut segs = square(0, 0, 10, 0);
        segs.extend(square(3, 3, 4, 1));
        let a = Arrangement::build(&segs);
        assert_eq!(a.num_components, 2);
        let inner = a.signature(&p(5, 5));
        let ring = a.signature(&p(1, 1));
        let ring2 = a.signature(&p(8, 9));
        let outside = a.signature(&p(20, 0));
        assert_eq!(inner.len(), 2);
        assert_eq!(ring.len(), 1);
        assert_eq!(ring, ring2);
        assert!(outside.is_empty());
        assert!(a.on_graph(&p(3, 5)));
    }

    #[test]
    fn side_signatures_match_points() {
        let mut segs = square(0, 0, 10, 0);
        segs.extend(square(3, 3, 4, 1));
        let a = Arrangement::build(&segs);
        let ring = a.signature(&p(1, 1));
        for h in 0..a.num_half_edges() {
            let mid = a.edge_midpoint(h / 2);
            let sig = a.side_signature(h);
            // inner square edges: one side is the ring, the other the inner face
            if mid.x > q(2, 1) && mid.x < q(8, 1) && mid.y > q(2, 1) && mid.y < q(8, 1) {
                assert!(sig == ring || sig == a.signature(&p(5, 5)));
            }
        }
    }
}
