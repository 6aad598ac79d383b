use dcset::analyze::{dc_graph_decomposition, path_between, segment_in_set, PathOutcome};
use dcset::plcalc::{compose, convexity, dc_split, invert, is_control, PiecewiseLinear};
use dcset::scalar::q;
use dcset::sets::{image_under_dc_map, realized_equal, DcGraphPiece, DcMap, MapStep, PlanarSetPresentation};
use dcset::{PlFunction, Point};
use num_traits::{Signed, Zero};
use proptest::prelude::*;

/// PL function on `[0, 1]` with breakpoints on the 1/32 grid and values on the 1/8 grid.
fn pl() -> impl Strategy<Value = PlFunction> {
    (prop::collection::btree_set(1i64..32, 0..6), prop::collection::vec(-16i64..=16, 8)).prop_map(|(inner, vals)| {
        let mut xs = vec![0];
        xs.extend(inner);
        xs.push(32);
        let ys = xs.iter().enumerate().map(|(i, _)| q(vals[i % vals.len()], 8)).collect();
        PiecewiseLinear::new(xs.iter().map(|&x| q(x, 32)).collect(), ys).unwrap()
    })
}

/// Strictly increasing PL bijection of `[0, 1]`.
fn increasing() -> impl Strategy<Value = PlFunction> {
    prop::collection::vec(1i64..8, 1..5).prop_map(|steps| {
        let total: i64 = steps.iter().sum();
        let n = steps.len() as i64;
        let mut xs = vec![q(0, 1)];
        let mut ys = vec![q(0, 1)];
        let mut acc = 0;
        for (i, s) in steps.iter().enumerate() {
            acc += s;
            xs.push(q(i as i64 + 1, n));
            ys.push(q(acc, total));
        }
        PiecewiseLinear::new(xs, ys).unwrap()
    })
}

fn same_values(f: &PlFunction, g: &PlFunction) -> bool {
    f.breakpoints().iter().chain(g.breakpoints()).all(|x| f.eval(x).unwrap() == g.eval(x).unwrap())
}

const DIRS: [(i64, i64, i64); 6] = [(1, 0, 1), (0, 1, 1), (3, 4, 5), (4, -3, 5), (-1, 0, 1), (5, 12, 13)];

/// Segment with a Pythagorean direction so its length is rational.
fn segment() -> impl Strategy<Value = DcGraphPiece> {
    (-4i64..4, -4i64..4, 0usize..DIRS.len(), 1i64..4).prop_map(|(x, y, d, t)| {
        let (dx, dy, _) = DIRS[d];
        let a = Point::new(q(x, 1), q(y, 1));
        let b = Point::new(q(x + t * dx, 1), q(y + t * dy, 1));
        DcGraphPiece::segment(a, b).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn max_plus_min_is_sum(f in pl(), g in pl()) {
        let lhs = f.max(&g).unwrap().add(&f.min(&g).unwrap()).unwrap();
        prop_assert!(same_values(&lhs, &f.add(&g).unwrap()));
    }

    #[test]
    fn abs_is_max_of_f_and_minus_f(f in pl()) {
        let neg = f.scale(&q(-1, 1));
        prop_assert!(same_values(&f.abs(), &f.max(&neg).unwrap()));
    }

    #[test]
    fn convexity_splits_at_interior_points(f in pl(), c in 1i64..32) {
        let (a, b, c) = (q(0, 1), q(1, 1), q(c, 32));
        let jump = f.one_sided_slope(&c, dcset::plcalc::Side::Right).unwrap()
            - f.one_sided_slope(&c, dcset::plcalc::Side::Left).unwrap();
        let whole = convexity(&f, &a, &b).unwrap();
        let parts = convexity(&f, &a, &c).unwrap() + convexity(&f, &c, &b).unwrap() + jump.abs();
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn dc_split_is_a_convex_decomposition(f in pl()) {
        let s = dc_split(&f);
        prop_assert!(s.p.is_convex() && s.q.is_convex());
        prop_assert!(same_values(&s.p.sub(&s.q).unwrap(), &f));
        prop_assert!(is_control(&s.control, &f).unwrap());
    }

    #[test]
    fn convexity_vanishes_exactly_on_affine(f in pl()) {
        let k = convexity(&f, &q(0, 1), &q(1, 1)).unwrap();
        let affine = f.slopes().windows(2).all(|w| w[0] == w[1]);
        prop_assert_eq!(k.is_zero(), affine);
    }

    #[test]
    fn composition_with_inverse_is_identity(f in pl(), phi in increasing()) {
        let back = compose(&compose(&f, &phi).unwrap(), &invert(&phi).unwrap()).unwrap();
        prop_assert!(same_values(&back, &f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_covers_the_set(segs in prop::collection::vec(segment(), 1..6), pts in prop::collection::vec((-6i64..6, -6i64..6), 0..3)) {
        let mut pres = PlanarSetPresentation::from_pieces(segs);
        pres.isolated = pts.into_iter().map(|(x, y)| Point::new(q(x, 1), q(y, 1))).collect();
        let d = dc_graph_decomposition(&pres).unwrap();
        prop_assert!(d.exact_cover);
    }

    #[test]
    fn shear_round_trip_is_exact(segs in prop::collection::vec(segment(), 1..5), h in 1i64..4) {
        let pres = PlanarSetPresentation::from_pieces(segs);
        let w = PiecewiseLinear::from_points([(q(-2, 1), q(0, 1)), (q(0, 1), q(h, 2)), (q(2, 1), q(0, 1))]).unwrap();
        let map = DcMap::new(vec![MapStep::ShearY { w }]);
        let image = image_under_dc_map(&pres, &map).unwrap();
        let back = image_under_dc_map(&image, &map.inverse()).unwrap();
        prop_assert!(realized_equal(&pres, &back).unwrap());
    }

    #[test]
    fn chains_stay_in_the_set(segs in prop::collection::vec(segment(), 1..5), i in 0usize..16, j in 0usize..16) {
        let pres = PlanarSetPresentation::from_pieces(segs);
        let m = pres.realize().unwrap();
        let verts = &m.arrangement.vertices;
        let (x, y) = (&verts[i % verts.len()], &verts[j % verts.len()]);
        match path_between(&m, x, y).unwrap() {
            PathOutcome::Chain(c) => {
                prop_assert_eq!(c.vertices.first(), Some(x));
                prop_assert_eq!(c.vertices.last(), Some(y));
                for piece in &c.pieces {
                    for w in piece.points().windows(2) {
                        prop_assert!(segment_in_set(&m, &w[0], &w[1]));
                    }
                }
                let mut seen = c.vertices.clone();
                seen.sort_by(|a, b| a.lex_cmp(b));
                seen.dedup();
                prop_assert_eq!(seen.len(), c.vertices.len());
            }
            PathOutcome::Disconnected { components } => prop_assert_ne!(components[0], components[1]),
        }
    }

    #[test]
    fn segments_of_the_set_are_in_the_set(segs in prop::collection::vec(segment(), 1..5)) {
        let pres = PlanarSetPresentation::from_pieces(segs);
        let m = pres.realize().unwrap();
        for (a, b) in pres.segments() {
            prop_assert!(segment_in_set(&m, &a, &b));
        }
        prop_assert!(!m.contains(&Point::new(q(100, 1), q(1, 1))));
    }
}
