//! Planar vectors, exact angle accumulation and canonical directions.
//!
//! Angles are never computed numerically. A rotation is carried as an
//! integer count of half-turns plus a residual rotation represented by an
//! integer vector `(re, im)` with argument in `[0, π)`; products of residuals
//! detect each crossing of the real axis exactly, which is how cone angles
//! and side angles at singularities are compared with multiples of `π`.

use crate::rational::{primitive_int_pair, primitive_pair, Int, Rational};
use num_traits::{Signed, Zero};
use std::cmp::Ordering;
use std::ops::{Add, Neg, Sub};

/// A point or vector of the euclidean plane with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vec2 {
    pub x: Rational,
    pub y: Rational,
}

impl std::fmt::Debug for Vec2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Vec2 {
    pub fn new(x: Rational, y: Rational) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 { x: Rational::zero(), y: Rational::zero() }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Vec2 { x: Rational::from_integer(x.into()), y: Rational::from_integer(y.into()) }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    /// `self.x * other.y - self.y * other.x`, the signed parallelogram area.
    pub fn cross(&self, other: &Vec2) -> Rational {
        &self.x * &other.y - &self.y * &other.x
    }

    pub fn dot(&self, other: &Vec2) -> Rational {
        &self.x * &other.x + &self.y * &other.y
    }

    pub fn norm_sq(&self) -> Rational {
        self.dot(self)
    }

    pub fn scaled(&self, t: &Rational) -> Vec2 {
        Vec2 { x: &self.x * t, y: &self.y * t }
    }

    /// Primitive integer vector positively parallel to `self`.
    pub fn primitive(&self) -> IVec {
        let (a, b) = primitive_pair(&self.x, &self.y);
        IVec { x: a, y: b }
    }
}

impl Add for &Vec2 {
    type Output = Vec2;
    fn add(self, rhs: &Vec2) -> Vec2 {
        Vec2 { x: &self.x + &rhs.x, y: &self.y + &rhs.y }
    }
}

impl Sub for &Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: &Vec2) -> Vec2 {
        Vec2 { x: &self.x - &rhs.x, y: &self.y - &rhs.y }
    }
}

impl Neg for &Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2 { x: -&self.x, y: -&self.y }
    }
}

/// Primitive integer vector; the exact carrier for germ and flow directions.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IVec {
    pub x: Int,
    pub y: Int,
}

impl std::fmt::Debug for IVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl IVec {
    pub fn new(x: i64, y: i64) -> Self {
        IVec { x: x.into(), y: y.into() }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn to_vec2(&self) -> Vec2 {
        Vec2 {
            x: Rational::from_integer(self.x.clone()),
            y: Rational::from_integer(self.y.clone()),
        }
    }

    pub fn neg(&self) -> IVec {
        IVec { x: -&self.x, y: -&self.y }
    }

    pub fn cross(&self, other: &IVec) -> Int {
        &self.x * &other.y - &self.y * &other.x
    }

    pub fn dot(&self, other: &IVec) -> Int {
        &self.x * &other.x + &self.y * &other.y
    }

    pub fn cross_v(&self, other: &Vec2) -> Rational {
        Rational::from_integer(self.x.clone()) * &other.y
            - Rational::from_integer(self.y.clone()) * &other.x
    }

    pub fn dot_v(&self, other: &Vec2) -> Rational {
        Rational::from_integer(self.x.clone()) * &other.x
            + Rational::from_integer(self.y.clone()) * &other.y
    }

    /// True when `other` is a positive multiple of `self`.
    pub fn same_ray(&self, other: &IVec) -> bool {
        self.cross(other).is_zero() && self.dot(other).is_positive()
    }
}

/// A direction of the surface, i.e. a line field element: a primitive integer
/// vector identified with its negative (the holonomy group is `{±Id}`), with
/// the sign canonicalized so the first nonzero coordinate is positive.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Direction(IVec);

impl Direction {
    /// Canonicalizes a nonzero vector; returns `None` for the zero vector.
    pub fn from_vec2(v: &Vec2) -> Option<Direction> {
        if v.is_zero() {
            return None;
        }
        Some(Self::from_ivec(v.primitive()))
    }

    pub fn from_ivec(v: IVec) -> Direction {
        let (x, y) = primitive_int_pair(v.x, v.y);
        let flip = x.is_negative() || (x.is_zero() && y.is_negative());
        if flip {
            Direction(IVec { x: -x, y: -y })
        } else {
            Direction(IVec { x, y })
        }
    }

    pub fn vector(&self) -> &IVec {
        &self.0
    }

    /// True when `v` is parallel (either sign) to this direction.
    pub fn is_parallel(&self, v: &IVec) -> bool {
        self.0.cross(v).is_zero()
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.0.x, self.0.y)
    }
}

/// Exact angle in `[0, ∞)`: `half_turns · π + arg(re + i·im)` with the
/// residual argument in `[0, π)`.
///
/// Residuals are stored as primitive integer vectors with `im ≥ 0` and
/// `im = 0 ⟹ re > 0`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Angle {
    pub half_turns: u32,
    re: Int,
    im: Int,
}

impl Angle {
    pub fn zero() -> Angle {
        Angle { half_turns: 0, re: Int::from(1), im: Int::zero() }
    }

    pub fn pi() -> Angle {
        Angle { half_turns: 1, re: Int::from(1), im: Int::zero() }
    }

    pub fn multiple_of_pi(n: u32) -> Angle {
        Angle { half_turns: n, re: Int::from(1), im: Int::zero() }
    }

    fn from_residual(re: Int, im: Int, half_turns: u32) -> Angle {
        let (re, im) = primitive_int_pair(re, im);
        debug_assert!(im.is_positive() || (im.is_zero() && re.is_positive()));
        Angle { half_turns, re, im }
    }

    /// Counterclockwise angle from `u` to `v`, in `[0, 2π)`. Both must be
    /// nonzero. The angle is `0` exactly when `v` is a positive multiple of
    /// `u`.
    pub fn ccw_between(u: &IVec, v: &IVec) -> Angle {
        debug_assert!(!u.is_zero() && !v.is_zero());
        // conj(u)·v = dot + i·cross has the argument of the rotation u → v.
        let dot = u.dot(v);
        let cross = u.cross(v);
        match cross.cmp(&Int::zero()) {
            Ordering::Greater => Angle::from_residual(dot, cross, 0),
            Ordering::Less => Angle::from_residual(-dot, -cross, 1),
            Ordering::Equal => {
                if dot.is_positive() {
                    Angle::zero()
                } else {
                    Angle::pi()
                }
            }
        }
    }

    /// Residual rotation as an integer vector `(re, im)`.
    pub fn residual(&self) -> (&Int, &Int) {
        (&self.re, &self.im)
    }

    /// Whether the angle is an exact integer multiple of π.
    pub fn is_multiple_of_pi(&self) -> bool {
        self.im.is_zero()
    }

    pub fn add(&self, other: &Angle) -> Angle {
        // Complex product of the residuals; each has argument < π so the sum
        // crosses π at most once, detected by the sign of the imaginary part.
        let re = &self.re * &other.re - &self.im * &other.im;
        let im = &self.re * &other.im + &self.im * &other.re;
        let half = self.half_turns + other.half_turns;
        if im.is_negative() || (im.is_zero() && re.is_negative()) {
            Angle::from_residual(-re, -im, half + 1)
        } else {
            Angle::from_residual(re, im, half)
        }
    }

    fn residual_cmp(&self, other: &Angle) -> Ordering {
        // Both residuals lie in the closed upper half plane with arg < π, so
        // the cross product sign orders their arguments.
        let cross = &self.re * &other.im - &self.im * &other.re;
        if cross.is_positive() {
            Ordering::Less
        } else if cross.is_negative() {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> Ordering {
        self.half_turns
            .cmp(&other.half_turns)
            .then_with(|| self.residual_cmp(other))
    }
}

/// Sign of orientation of the triangle `(a, b, c)`: positive for
/// counterclockwise.
pub fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> Ordering {
    let d1 = b - a;
    let d2 = c - a;
    d1.cross(&d2).cmp(&Rational::zero())
}

/// Twice the signed area of a polygon (shoelace); positive for
/// counterclockwise boundaries.
pub fn polygon_area_doubled(vertices: &[Vec2]) -> Rational {
    let mut acc = Rational::zero();
    let n = vertices.len();
    for i in 0..n {
        acc += vertices[i].cross(&vertices[(i + 1) % n]);
    }
    acc
}

/// Whether `p` lies in the closed triangle `(a, b, c)` (counterclockwise).
pub fn point_in_closed_triangle(p: &Vec2, a: &Vec2, b: &Vec2, c: &Vec2) -> bool {
    orient(a, b, p) != Ordering::Less
        && orient(b, c, p) != Ordering::Less
        && orient(c, a, p) != Ordering::Less
}

/// Whether point `p` lies on the closed segment `[a, b]`.
pub fn on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> bool {
    let ap = p - a;
    let ab = b - a;
    if !ap.cross(&ab).is_zero() {
        return false;
    }
    let t = ap.dot(&ab);
    !t.is_negative() && t <= ab.norm_sq()
}

/// Whether the closed segments `[a1, b1]` and `[a2, b2]` intersect.
pub fn segments_intersect(a1: &Vec2, b1: &Vec2, a2: &Vec2, b2: &Vec2) -> bool {
    let o1 = orient(a1, b1, a2);
    let o2 = orient(a1, b1, b2);
    let o3 = orient(a2, b2, a1);
    let o4 = orient(a2, b2, b1);
    let eq = Ordering::Equal;
    if o1 != o2 && o3 != o4 && o1 != eq && o2 != eq && o3 != eq && o4 != eq {
        return true;
    }
    (o1 == eq && on_segment(a2, a1, b1))
        || (o2 == eq && on_segment(b2, a1, b1))
        || (o3 == eq && on_segment(a1, a2, b2))
        || (o4 == eq && on_segment(b1, a2, b2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(x: i64, y: i64) -> IVec {
        IVec::new(x, y)
    }

    #[test]
    fn ccw_angles() {
        assert_eq!(Angle::ccw_between(&iv(1, 0), &iv(0, 1)), Angle::from_residual(0.into(), 1.into(), 0));
        assert_eq!(Angle::ccw_between(&iv(1, 0), &iv(-1, 0)), Angle::pi());
        assert_eq!(Angle::ccw_between(&iv(1, 0), &iv(3, 0)), Angle::zero());
        // Clockwise quarter turn measured counterclockwise is 3π/2.
        let a = Angle::ccw_between(&iv(1, 0), &iv(0, -1));
        assert_eq!(a.half_turns, 1);
        assert!(!a.is_multiple_of_pi());
    }

    #[test]
    fn quarter_turns_accumulate_to_full_circle() {
        let quarter = Angle::ccw_between(&iv(1, 0), &iv(0, 1));
        let mut acc = Angle::zero();
        for _ in 0..4 {
            acc = acc.add(&quarter);
        }
        assert_eq!(acc, Angle::multiple_of_pi(2));
    }

    #[test]
    fn angle_ordering() {
        let a = Angle::ccw_between(&iv(1, 0), &iv(2, 1));
        let b = Angle::ccw_between(&iv(1, 0), &iv(1, 1));
        let c = Angle::ccw_between(&iv(1, 0), &iv(1, 2));
        assert!(a < b && b < c && c < Angle::pi());
        assert!(Angle::pi() < Angle::ccw_between(&iv(1, 0), &iv(-1, -1)));
    }

    #[test]
    fn direction_canonicalization() {
        let d1 = Direction::from_vec2(&Vec2::from_ints(2, -4)).unwrap();
        let d2 = Direction::from_vec2(&Vec2::from_ints(-1, 2)).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.vector(), &iv(1, -2));
        let v = Direction::from_vec2(&Vec2::from_ints(0, -3)).unwrap();
        assert_eq!(v.vector(), &iv(0, 1));
        assert!(Direction::from_vec2(&Vec2::zero()).is_none());
    }

    #[test]
    fn segment_predicates() {
        let o = Vec2::from_ints(0, 0);
        let e = Vec2::from_ints(4, 0);
        assert!(on_segment(&Vec2::from_ints(2, 0), &o, &e));
        assert!(!on_segment(&Vec2::from_ints(5, 0), &o, &e));
        assert!(segments_intersect(
            &Vec2::from_ints(0, 0),
            &Vec2::from_ints(2, 2),
            &Vec2::from_ints(0, 2),
            &Vec2::from_ints(2, 0)
        ));
        assert!(!segments_intersect(
            &Vec2::from_ints(0, 0),
            &Vec2::from_ints(1, 0),
            &Vec2::from_ints(0, 1),
            &Vec2::from_ints(1, 1)
        ));
    }
}
