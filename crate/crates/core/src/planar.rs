//! Planar primitives: points, rotations about the origin, similarities,
//! the cones `A_r^u` / `S_r^u`, and tangent fans of presented sets.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use num_traits::{Signed, Zero};

use crate::error::{invalid, precondition, Result};
use crate::scalar::{cmp, Scalar};
use crate::sets::PlanarSetPresentation;
use crate::Rational;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> fmt::Debug for Point<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x.repr(), self.y.repr())
    }
}

impl<S: Scalar> Point<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(S::zero(), S::zero())
    }

    pub fn dot(&self, o: &Self) -> S {
        self.x.clone() * o.x.clone() + self.y.clone() * o.y.clone()
    }

    /// z-component of the cross product.
    pub fn cross(&self, o: &Self) -> S {
        self.x.clone() * o.y.clone() - self.y.clone() * o.x.clone()
    }

    pub fn norm2(&self) -> S {
        self.dot(self)
    }

    pub fn dist2(&self, o: &Self) -> S {
        (self.clone() - o.clone()).norm2()
    }

    pub fn norm_f64(&self) -> f64 {
        self.norm2().to_f64_lossy().sqrt()
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [self.x.to_f64_lossy(), self.y.to_f64_lossy()]
    }

    pub fn convert<T: Scalar>(&self) -> Point<T> {
        Point::new(T::convert(&self.x), T::convert(&self.y))
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(self.x.clone() * c.clone(), self.y.clone() * c.clone())
    }

    /// Lexicographic order, x first.
    pub fn lex_cmp(&self, o: &Self) -> Ordering {
        cmp(&self.x, &o.x).then_with(|| cmp(&self.y, &o.y))
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }
}

impl Point<f64> {
    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl<S: Scalar> Add for Point<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> Sub for Point<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> Neg for Point<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<S: Scalar> Mul<S> for Point<S> {
    type Output = Self;
    fn mul(self, c: S) -> Self {
        Self::new(self.x * c.clone(), self.y * c)
    }
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    x: String,
    y: String,
}

impl<S: Scalar> Serialize for Point<S> {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        RawPoint { x: self.x.repr(), y: self.y.repr() }.serialize(s)
    }
}

fn parse_field<S: Scalar, E: serde::de::Error>(v: &str) -> std::result::Result<S, E> {
    S::parse_repr(v).ok_or_else(|| E::custom(format!("bad number {v:?}")))
}

impl<'de, S: Scalar> Deserialize<'de> for Point<S> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPoint::deserialize(d)?;
        Ok(Point::new(parse_field::<S, D::Error>(&raw.x)?, parse_field::<S, D::Error>(&raw.y)?))
    }
}

/// Rotation about the origin by the unit vector `(c, s)`.
#[derive(Clone, PartialEq)]
pub struct Rotation<S> {
    c: S,
    s: S,
}

impl<S: Scalar> fmt::Debug for Rotation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation({}, {})", self.c.repr(), self.s.repr())
    }
}

impl<S: Scalar> Rotation<S> {
    pub fn new(c: S, s: S) -> Result<Self> {
        let norm = c.clone() * c.clone() + s.clone() * s.clone();
        let ok = if S::EXACT { norm.is_one() } else { (norm.to_f64_lossy() - 1.0).abs() <= 1e-12 };
        if !ok {
            return invalid(format!("rotation ({}, {}) is not a unit vector", c.repr(), s.repr()));
        }
        Ok(Self { c, s })
    }

    pub fn identity() -> Self {
        Self { c: S::one(), s: S::zero() }
    }

    /// Rotation by `k` quarter turns counterclockwise.
    pub fn quarter(k: i32) -> Self {
        let (c, s) = match k.rem_euclid(4) {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        };
        Self { c: S::from_int(c), s: S::from_int(s) }
    }

    /// Exact rotation from a Pythagorean triple `a² + b² = h²`.
    pub fn from_triple(a: i64, b: i64, h: i64) -> Result<Self> {
        if a * a + b * b != h * h || h == 0 {
            return invalid(format!("({a}, {b}, {h}) is not a Pythagorean triple"));
        }
        Self::new(S::frac(a, h), S::frac(b, h))
    }

    /// General angle; only available for floating scalars.
    pub fn from_angle(theta: f64) -> Result<Self> {
        if S::EXACT {
            return precondition("a general angle has no exact rational rotation");
        }
        Self::new(S::convert(&theta.cos()), S::convert(&theta.sin()))
    }

    pub fn cos(&self) -> &S {
        &self.c
    }

    pub fn sin(&self) -> &S {
        &self.s
    }

    pub fn apply(&self, p: &Point<S>) -> Point<S> {
        Point::new(
            self.c.clone() * p.x.clone() - self.s.clone() * p.y.clone(),
            self.s.clone() * p.x.clone() + self.c.clone() * p.y.clone(),
        )
    }

    pub fn inverse(&self) -> Self {
        Self { c: self.c.clone(), s: -self.s.clone() }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            c: self.c.clone() * other.c.clone() - self.s.clone() * other.s.clone(),
            s: self.s.clone() * other.c.clone() + self.c.clone() * other.s.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.c.is_one() && self.s.is_zero()
    }

    pub fn convert<T: Scalar>(&self) -> Rotation<T> {
        Rotation { c: T::convert(&self.c), s: T::convert(&self.s) }
    }
}

#[derive(Serialize, Deserialize)]
struct RawRotation {
    c: String,
    s: String,
}

impl<S: Scalar> Serialize for Rotation<S> {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        RawRotation { c: self.c.repr(), s: self.s.repr() }.serialize(s)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for Rotation<S> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawRotation::deserialize(d)?;
        Rotation::new(parse_field::<S, D::Error>(&raw.c)?, parse_field::<S, D::Error>(&raw.s)?)
            .map_err(serde::de::Error::custom)
    }
}

/// `p ↦ scale · R p + translation` with `scale > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Similarity<S: Scalar> {
    pub rotation: Rotation<S>,
    #[serde(with = "scalar_string")]
    pub scale: S,
    pub translation: Point<S>,
}

impl<S: Scalar> Similarity<S> {
    pub fn new(rotation: Rotation<S>, scale: S, translation: Point<S>) -> Result<Self> {
        if !scale.is_positive() {
            return precondition("similarity ratio must be positive");
        }
        Ok(Self { rotation, scale, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(), scale: S::one(), translation: Point::origin() }
    }

    pub fn scaling(c: S) -> Result<Self> {
        Self::new(Rotation::identity(), c, Point::origin())
    }

    pub fn translation(t: Point<S>) -> Self {
        Self { rotation: Rotation::identity(), scale: S::one(), translation: t }
    }

    pub fn apply(&self, p: &Point<S>) -> Point<S> {
        self.rotation.apply(p).scale(&self.scale) + self.translation.clone()
    }

    /// Linear part only (for directions).
    pub fn apply_vector(&self, v: &Point<S>) -> Point<S> {
        self.rotation.apply(v).scale(&self.scale)
    }

    pub fn inverse(&self) -> Self {
        let rot = self.rotation.inverse();
        let scale = S::one() / self.scale.clone();
        let translation = -rot.apply(&self.translation).scale(&scale);
        Self { rotation: rot, scale, translation }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation.compose(&other.rotation),
            scale: self.scale.clone() * other.scale.clone(),
            translation: self.apply(&other.translation),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation.is_identity() && self.scale.is_one() && self.translation.is_zero()
    }
}

pub(crate) mod scalar_string {
    use crate::scalar::Scalar;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Scalar, Ser: Serializer>(v: &S, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&v.repr())
    }

    pub fn deserialize<'de, S: Scalar, D: Deserializer<'de>>(d: D) -> Result<S, D::Error> {
        let raw = String::deserialize(d)?;
        S::parse_repr(&raw).ok_or_else(|| serde::de::Error::custom(format!("bad number {raw:?}")))
    }
}

pub(crate) mod opt_scalar_string {
    use crate::scalar::Scalar;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Scalar, Ser: Serializer>(v: &Option<S>, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        match v {
            Some(v) => s.serialize_str(&v.repr()),
            None => s.serialize_str("inf"),
        }
    }

    pub fn deserialize<'de, S: Scalar, D: Deserializer<'de>>(d: D) -> Result<Option<S>, D::Error> {
        let raw = String::deserialize(d)?;
        if raw == "inf" {
            return Ok(None);
        }
        S::parse_repr(&raw).map(Some).ok_or_else(|| serde::de::Error::custom(format!("bad number {raw:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeShape {
    Forward,
    Backward,
    Symmetric,
}

/// `z + γ(A_r^u)`, its mirror, or `z + γ(S_r^u)`; `r = None` means unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Cone<S: Scalar> {
    pub vertex: Point<S>,
    pub frame: Rotation<S>,
    #[serde(with = "scalar_string")]
    pub u: S,
    #[serde(with = "opt_scalar_string")]
    pub r: Option<S>,
    pub shape: ConeShape,
}

impl<S: Scalar> Cone<S> {
    pub fn new(vertex: Point<S>, frame: Rotation<S>, u: S, r: Option<S>, shape: ConeShape) -> Result<Self> {
        if !u.is_positive() {
            return precondition("cone slope u must be positive");
        }
        if r.as_ref().is_some_and(|r| !r.is_positive()) {
            return precondition("cone length r must be positive");
        }
        Ok(Self { vertex, frame, u, r, shape })
    }

    pub fn axis_aligned(vertex: Point<S>, u: S, r: Option<S>, shape: ConeShape) -> Result<Self> {
        Self::new(vertex, Rotation::identity(), u, r, shape)
    }

    /// Coordinates of `p` in the cone frame, vertex at the origin.
    pub fn local(&self, p: &Point<S>) -> Point<S> {
        self.frame.inverse().apply(&(p.clone() - self.vertex.clone()))
    }

    pub fn contains(&self, p: &Point<S>) -> bool {
        let Point { x, y } = self.local(p);
        let x = match self.shape {
            ConeShape::Forward => x,
            ConeShape::Backward => -x,
            ConeShape::Symmetric => x.abs(),
        };
        if x.is_negative() {
            return false;
        }
        if let Some(r) = &self.r {
            if &x > r {
                return false;
            }
        }
        y.abs() <= self.u.clone() * x
    }
}

/// Unit directions of `Tan(M, z) ∩ S¹` at a base point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentFan {
    pub base: Point<Rational>,
    /// Canonical exact representatives scaled to `max(|x|, |y|) = 1`.
    pub exact: Vec<Point<Rational>>,
    pub directions: Vec<[f64; 2]>,
}

impl TangentFan {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Exact canonical representative of the ray direction of `v ≠ 0`.
pub fn canonical_direction(v: &Point<Rational>) -> Point<Rational> {
    let m = if v.x.abs() >= v.y.abs() { v.x.abs() } else { v.y.abs() };
    Point::new(v.x.clone() / m.clone(), v.y.clone() / m)
}

/// Tangent fan of a presented set at `z`, read off the skeleton pieces.
///
/// Fills are not consulted: a point on a fill's edge reports the directions
/// of the skeleton edges through it.
pub fn tangent_fan(set: &PlanarSetPresentation, z: &Point<Rational>) -> Result<TangentFan> {
    let mut dirs: Vec<Point<Rational>> = Vec::new();
    let mut on_set = false;
    for (a, b) in set.segments() {
        let ab = b.clone() - a.clone();
        let az = z.clone() - a.clone();
        if !ab.cross(&az).is_zero() {
            continue;
        }
        let t = az.dot(&ab);
        if t.is_negative() || t > ab.norm2() {
            continue;
        }
        on_set = true;
        if z != &b {
            dirs.push(canonical_direction(&(b.clone() - z.clone())));
        }
        if z != &a {
            dirs.push(canonical_direction(&(a.clone() - z.clone())));
        }
    }
    if !on_set {
        on_set = set.isolated_points().iter().any(|p| p == z);
    }
    if !on_set {
        if set.in_filled_interior(z)? {
            return precondition("point lies in the interior of a filled component; its tangent cone is the whole plane");
        }
        return precondition(format!("point {z:?} is not in the set"));
    }
    dirs.sort_by(|a, b| angle_cmp(a, b));
    dirs.dedup();
    let directions = dirs
        .iter()
        .map(|d| {
            let [x, y] = d.to_f64();
            let n = x.hypot(y);
            [x / n, y / n]
        })
        .collect();
    Ok(TangentFan { base: z.clone(), exact: dirs, directions })
}

/// Order nonzero vectors by polar angle in `[0, 2π)`, exactly.
pub fn angle_cmp<S: Scalar>(a: &Point<S>, b: &Point<S>) -> Ordering {
    let half = |p: &Point<S>| -> u8 {
        if p.y.is_positive() || (p.y.is_zero() && p.x.is_positive()) {
            0
        } else {
            1
        }
    };
    half(a).cmp(&half(b)).then_with(|| {
        let c = a.cross(b);
        if c.is_positive() {
            Ordering::Less
        } else if c.is_negative() {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    fn p(x: i64, y: i64) -> Point<Rational> {
        Point::new(q(x, 1), q(y, 1))
    }

    #[test]
    fn rotation_round_trip_exact() {
        let r = Rotation::<Rational>::from_triple(3, 4, 5).unwrap();
        let a = Point::new(q(7, 3), q(-2, 9));
        assert_eq!(r.inverse().apply(&r.apply(&a)), a);
        assert_eq!(r.compose(&r.inverse()), Rotation::identity());
        assert!(Rotation::<Rational>::from_triple(1, 1, 2).is_err());
        assert!(Rotation::<Rational>::new(q(1, 2), q(1, 2)).is_err());
        assert!(Rotation::<Rational>::from_angle(0.3).is_err());
    }

    #[test]
    fn rotation_round_trip_float() {
        let r = Rotation::<f64>::from_angle(0.7).unwrap();
        let a = Point::new(0.3, -1.7);
        let b = r.inverse().apply(&r.apply(&a));
        assert!((b.x - a.x).abs() <= 1e-12 && (b.y - a.y).abs() <= 1e-12);
    }

    #[test]
    fn similarity_inverse() {
        let s = Similarity::new(Rotation::<Rational>::quarter(1), q(2, 1), p(1, -3)).unwrap();
        let a = Point::new(q(5, 7), q(1, 3));
        assert_eq!(s.inverse().apply(&s.apply(&a)), a);
        assert!(s.compose(&s.inverse()).is_identity());
        assert!(Similarity::new(Rotation::<Rational>::identity(), q(0, 1), p(0, 0)).is_err());
    }

    #[test]
    fn cone_membership() {
        let c = Cone::axis_aligned(p(0, 0), q(1, 1), Some(q(1, 1)), ConeShape::Forward).unwrap();
        assert!(c.contains(&Point::new(q(1, 2), q(1, 2))));
        assert!(c.contains(&p(0, 0)));
        assert!(!c.contains(&Point::new(q(1, 2), q(3, 5))));
        assert!(!c.contains(&Point::new(q(-1, 2), q(0, 1))));
        assert!(!c.contains(&Point::new(q(3, 2), q(0, 1))));
        let b = Cone { shape: ConeShape::Backward, ..c.clone() };
        assert!(b.contains(&Point::new(q(-1, 2), q(1, 4))));
        let s = Cone { shape: ConeShape::Symmetric, r: None, ..c.clone() };
        assert!(s.contains(&p(-5, 4)) && s.contains(&p(9, -9)));
        let rotated = Cone::new(p(1, 1), Rotation::quarter(1), q(1, 2), None, ConeShape::Forward).unwrap();
        assert!(rotated.contains(&p(1, 3)));
        assert!(!rotated.contains(&p(3, 1)));
    }

    #[test]
    fn cone_json() {
        let c = Cone::axis_aligned(p(0, 0), q(3, 1), None, ConeShape::Backward).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains(r#""r":"inf""#) && s.contains(r#""shape":"backward""#), "{s}");
        let back: Cone<Rational> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn angle_order() {
        let mut v = vec![p(0, -1), p(-1, 0), p(1, 1), p(1, 0), p(0, 1), p(1, -1)];
        v.sort_by(angle_cmp);
        assert_eq!(v, vec![p(1, 0), p(1, 1), p(0, 1), p(-1, 0), p(0, -1), p(1, -1)]);
    }
}
