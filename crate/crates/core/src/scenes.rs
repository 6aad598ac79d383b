//! Built-in example scenes.

use num_traits::{One, Zero};

use crate::error::{invalid, Result};
use crate::plcalc::PiecewiseLinear;
use crate::planar::Point;
use crate::scalar::{q, qpow};
use crate::sets::{
    DcGraphPiece, DcMap, DeclaredAccumulation, MapStep, Piece, PlacedSSet, PlanarSetPresentation, SSetPresentation,
    Scene, Window,
};
use crate::{PlFunction, Rational};

type P = Point<Rational>;

pub const NAMES: &[&str] = &["cantor-d<k>", "tent-sset", "three-envelope-sset", "staircase-isolated", "corner", "square"];

fn pl(points: &[(Rational, Rational)]) -> PlFunction {
    PiecewiseLinear::from_points(points.iter().cloned()).expect("static data")
}

fn window(xmin: Rational, xmax: Rational, ymin: Rational, ymax: Rational) -> Window {
    Window { xmin, xmax, ymin, ymax }
}

/// Tent bump: 0 on `[0, 1/8]`, up to `(1/4, 1/8)`, down to `(3/8, 0)`, 0 on `[3/8, 1]`.
pub fn tent() -> PlFunction {
    pl(&[(q(0, 1), q(0, 1)), (q(1, 8), q(0, 1)), (q(1, 4), q(1, 8)), (q(3, 8), q(0, 1)), (q(1, 1), q(0, 1))])
}

pub fn tent_sset() -> SSetPresentation {
    let zero = PiecewiseLinear::constant(q(0, 1), q(1, 1), q(0, 1)).expect("static");
    SSetPresentation { r: q(1, 1), envelopes: vec![zero.clone(), tent()], selections: vec![zero, tent()] }
}

fn sset_scene(s: SSetPresentation) -> Scene {
    Scene::new(
        window(q(-1, 2), q(3, 2), q(-1, 2), q(1, 2)),
        PlanarSetPresentation { skeleton: vec![Piece::Sset(PlacedSSet::at_origin(s))], ..Default::default() },
    )
}

pub fn tent_scene() -> Scene {
    sset_scene(tent_sset())
}

/// Vertical shear by the tent bump.
pub fn tent_shear() -> DcMap {
    DcMap::new(vec![MapStep::ShearY { w: tent() }])
}

/// Three envelopes (zero, the tent, and a dip-and-rise) with five selections.
pub fn three_envelope_sset() -> SSetPresentation {
    let zero = PiecewiseLinear::constant(q(0, 1), q(1, 1), q(0, 1)).expect("static");
    let dip = pl(&[(q(0, 1), q(0, 1)), (q(1, 4), q(0, 1)), (q(1, 2), q(-1, 8)), (q(3, 4), q(1, 8)), (q(1, 1), q(1, 8))]);
    let upper = zero.max(&dip).expect("common domain");
    let lower = tent().min(&dip).expect("common domain");
    SSetPresentation {
        r: q(1, 1),
        envelopes: vec![zero.clone(), tent(), dip.clone()],
        selections: vec![zero, tent(), dip, upper, lower],
    }
}

pub fn three_envelope_scene() -> Scene {
    sset_scene(three_envelope_sset())
}

/// Single envelope `max(0, x − 1/2)` on `[0, 1]`.
pub fn corner_sset() -> SSetPresentation {
    let f = pl(&[(q(0, 1), q(0, 1)), (q(1, 2), q(0, 1)), (q(1, 1), q(1, 2))]);
    SSetPresentation { r: q(1, 1), envelopes: vec![f.clone()], selections: vec![f] }
}

pub fn corner() -> Scene {
    sset_scene(corner_sset())
}

/// Closed unit square: four boundary segments and the interior filled.
pub fn square() -> Scene {
    let c = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(x, y)| Point::new(q(x, 1), q(y, 1)));
    let skeleton = (0..4)
        .map(|i| Piece::Graph(DcGraphPiece::segment(c[i].clone(), c[(i + 1) % 4].clone()).expect("axis segment")))
        .collect();
    Scene::new(
        window(q(-1, 2), q(3, 2), q(-1, 2), q(3, 2)),
        PlanarSetPresentation { skeleton, isolated: vec![], fills: vec![Point::new(q(1, 2), q(1, 2))] },
    )
}

/// Number of staircase points besides the origin.
pub const STAIRCASE_LEN: i32 = 17;

/// Points `(3^{-n}, (−1)^n 3^{-n}/10)`, `n = 0..16`, and the origin where they accumulate.
pub fn staircase_isolated() -> Scene {
    let mut pts = vec![P::origin()];
    for n in 0..STAIRCASE_LEN {
        let a = qpow(3, -n);
        let sign = if n % 2 == 0 { q(1, 10) } else { q(-1, 10) };
        pts.push(Point::new(a.clone(), a * sign));
    }
    let mut scene = Scene::new(
        window(q(-1, 2), q(3, 2), q(-1, 2), q(1, 2)),
        PlanarSetPresentation { skeleton: vec![], isolated: pts, fills: vec![] },
    );
    scene.declared_accumulations =
        vec![DeclaredAccumulation { point: P::origin(), note: Some("staircase points accumulate at the origin".into()) }];
    scene
}

/// The intervals `[u_n, v_n]` (middle thirds of the removed gaps) up to depth `d`, sorted.
pub fn cantor_chosen_intervals(depth: u32) -> Vec<(Rational, Rational)> {
    let mut out = Vec::new();
    let mut remaining = vec![(Rational::zero(), Rational::one())];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(2 * remaining.len());
        for (a, b) in remaining {
            let len = b.clone() - a.clone();
            let third = len.clone() / q(3, 1);
            out.push((a.clone() + len.clone() * q(4, 9), a.clone() + len * q(5, 9)));
            next.push((a.clone(), a.clone() + third.clone()));
            next.push((b.clone() - third, b));
        }
        remaining = next;
    }
    out.sort();
    out
}

/// Sampled `(d_F)²` on `[0, 1]` with 8 subintervals on each bump region.
pub fn cantor_profile(depth: u32) -> PlFunction {
    let chosen = cantor_chosen_intervals(depth);
    let mut pts: Vec<(Rational, Rational)> = Vec::new();
    let push = |x: Rational, y: Rational, pts: &mut Vec<(Rational, Rational)>| {
        if pts.last().map(|(lx, _)| lx < &x).unwrap_or(true) {
            pts.push((x, y));
        }
    };
    let sq = |v: Rational| v.clone() * v;
    let first = chosen[0].0.clone();
    for i in 0..=8 {
        let x = first.clone() * q(i, 8);
        push(x.clone(), sq(first.clone() - x), &mut pts);
    }
    for w in chosen.windows(2) {
        let (v, u) = (w[0].1.clone(), w[1].0.clone());
        for i in 0..=8 {
            let x = v.clone() + (u.clone() - v.clone()) * q(i, 8);
            let d = if x.clone() - v.clone() <= u.clone() - x.clone() { x.clone() - v.clone() } else { u.clone() - x.clone() };
            push(x, sq(d), &mut pts);
        }
    }
    let last = chosen.last().expect("depth ≥ 1").1.clone();
    for i in 0..=8 {
        let x = last.clone() + (Rational::one() - last.clone()) * q(i, 8);
        push(x.clone(), sq(x - last.clone()), &mut pts);
    }
    PiecewiseLinear::from_points(pts).expect("increasing samples").simplify()
}

/// `M = {y ≥ f} ∪ {y ≤ −f}` inside `[0, 1] × [−1, 1]` for the sampled Cantor profile.
pub fn cantor(depth: u32) -> Result<Scene> {
    if depth == 0 || depth > 10 {
        return invalid(format!("cantor depth must be in 1..=10, got {depth}"));
    }
    let f = cantor_profile(depth);
    let neg = f.scale(&-Rational::one());
    let (f0, f1) = (f.values()[0].clone(), f.values().last().expect("nonempty").clone());
    let p = |x: i64, y: Rational| Point::new(q(x, 1), y);
    let seg = |a: P, b: P| Piece::Graph(DcGraphPiece::segment(a, b).expect("axis-parallel"));
    let skeleton = vec![
        Piece::Graph(DcGraphPiece::graph(f)),
        Piece::Graph(DcGraphPiece::graph(neg)),
        seg(p(0, f0.clone()), p(0, q(1, 1))),
        seg(p(0, q(1, 1)), p(1, q(1, 1))),
        seg(p(1, q(1, 1)), p(1, f1.clone())),
        seg(p(0, -f0), p(0, q(-1, 1))),
        seg(p(0, q(-1, 1)), p(1, q(-1, 1))),
        seg(p(1, q(-1, 1)), p(1, -f1)),
    ];
    let fills = vec![Point::new(q(1, 2), q(99, 100)), Point::new(q(1, 2), q(-99, 100))];
    Ok(Scene::new(
        window(q(0, 1), q(1, 1), q(-1, 1), q(1, 1)),
        PlanarSetPresentation { skeleton, isolated: vec![], fills },
    ))
}

/// Scene by generator name.
pub fn by_name(name: &str) -> Result<Scene> {
    match name {
        "tent-sset" => Ok(tent_scene()),
        "three-envelope-sset" => Ok(three_envelope_scene()),
        "staircase-isolated" => Ok(staircase_isolated()),
        "corner" => Ok(corner()),
        "square" => Ok(square()),
        _ => match name.strip_prefix("cantor-d").and_then(|d| d.parse::<u32>().ok()) {
            Some(d) => cantor(d),
            None => invalid(format!("unknown example {name:?}; known: {}", NAMES.join(", "))),
        },
    }
}
