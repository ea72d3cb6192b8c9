//! Independent square-walking oracle for saddle connections on the
//! L-shaped surface, checked against the library's unfolding enumeration.
//!
//! The oracle knows nothing of the library's tracer: it walks straight
//! lines across the three unit squares using only the hardcoded square
//! adjacency of the L and exact rational arithmetic.

use flatlam_core::rational::Rational;
use flatlam_core::samples;
use flatlam_core::tracer::saddle_connections;
use num_traits::Zero;
use std::collections::BTreeMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Sq {
    A,
    B,
    C,
}

fn right(s: Sq) -> Sq {
    match s {
        Sq::A => Sq::B,
        Sq::B => Sq::A,
        Sq::C => Sq::C,
    }
}
fn left(s: Sq) -> Sq {
    match s {
        Sq::A => Sq::B,
        Sq::B => Sq::A,
        Sq::C => Sq::C,
    }
}
fn up(s: Sq) -> Sq {
    match s {
        Sq::A => Sq::C,
        Sq::B => Sq::B,
        Sq::C => Sq::A,
    }
}
fn down(s: Sq) -> Sq {
    match s {
        Sq::A => Sq::C,
        Sq::B => Sq::B,
        Sq::C => Sq::A,
    }
}

fn rq(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Walks the line from a lattice corner of `start` in direction `(p, q)`;
/// returns the holonomy when it reaches another lattice corner within the
/// squared-length budget.
fn walk(start: Sq, corner: (i64, i64), p: i64, q: i64, budget_sq: &Rational) -> Option<(Rational, Rational)> {
    let mut s = start;
    let mut x = rq(corner.0, 1);
    let mut y = rq(corner.1, 1);
    let mut t_total = Rational::zero();
    let dir_sq = rq(p * p + q * q, 1);
    loop {
        // Time to each wall ahead.
        let tx = if p > 0 {
            Some((rq(1, 1) - &x) / rq(p, 1))
        } else if p < 0 {
            Some((rq(0, 1) - &x) / rq(p, 1))
        } else {
            None
        };
        let ty = if q > 0 {
            Some((rq(1, 1) - &y) / rq(q, 1))
        } else if q < 0 {
            Some((rq(0, 1) - &y) / rq(q, 1))
        } else {
            None
        };
        let t = match (&tx, &ty) {
            (Some(a), Some(b)) => a.min(b).clone(),
            (Some(a), None) => a.clone(),
            (None, Some(b)) => b.clone(),
            (None, None) => return None,
        };
        x += rq(p, 1) * &t;
        y += rq(q, 1) * &t;
        t_total += &t;
        if &(&t_total * &t_total * &dir_sq) > budget_sq {
            return None;
        }
        let xi = x == rq(0, 1) || x == rq(1, 1);
        let yi = y == rq(0, 1) || y == rq(1, 1);
        if xi && yi {
            // Lattice corner (start corners excluded: t_total > 0 always).
            let hol = (rq(p, 1) * &t_total, rq(q, 1) * &t_total);
            return Some(hol);
        }
        // Transfer to the neighboring square.
        if tx.as_ref() == Some(&t) {
            if p > 0 {
                s = right(s);
                x = rq(0, 1);
            } else {
                s = left(s);
                x = rq(1, 1);
            }
        } else {
            if q > 0 {
                s = up(s);
                y = rq(0, 1);
            } else {
                s = down(s);
                y = rq(1, 1);
            }
        }
    }
}

/// Holonomy canonicalized up to sign, as strings for easy map keys.
fn canon(hx: &Rational, hy: &Rational) -> (String, String) {
    let flip = hx < &Rational::zero() || (hx.is_zero() && hy < &Rational::zero());
    if flip {
        ((-hx).to_string(), (-hy).to_string())
    } else {
        (hx.to_string(), hy.to_string())
    }
}

/// The oracle: multiset of saddle-connection holonomies (up to sign) on the
/// L surface with squared length at most `budget_sq`.
pub fn oracle_l_holonomies(budget_sq: &Rational) -> BTreeMap<(String, String), usize> {
    // Primitive directions with p² + q² within budget (integer holonomies
    // make larger primitive vectors useless as directions only if they fit).
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut lim = 1i64;
    while rq(lim * lim, 1) <= *budget_sq {
        lim += 1;
    }
    for s in [Sq::A, Sq::B, Sq::C] {
        for corner in [(0, 0), (1, 0), (1, 1), (0, 1)] {
            for p in -lim..=lim {
                for q in -lim..=lim {
                    if (p, q) == (0, 0) || gcd(p.abs(), q.abs()) != 1 {
                        continue;
                    }
                    // Quadrant wedge of this corner, half-open [a, b).
                    let ok = match corner {
                        (0, 0) => p > 0 && q >= 0,
                        (1, 0) => p <= 0 && q > 0,
                        (1, 1) => p < 0 && q <= 0,
                        (0, 1) => p >= 0 && q < 0,
                        _ => unreachable!(),
                    };
                    if !ok {
                        continue;
                    }
                    if let Some((hx, hy)) = walk(s, corner, p, q, budget_sq) {
                        *counts.entry(canon(&hx, &hy)).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    // Each connection is seen once from each of its two end germs.
    for v in counts.values_mut() {
        assert!(*v % 2 == 0, "each connection must be found from both ends");
        *v /= 2;
    }
    counts
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn implementation_multiset(budget_sq: &Rational) -> BTreeMap<(String, String), usize> {
    let s = samples::l_surface().seal().unwrap();
    let conns = saddle_connections(&s, budget_sq);
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for c in &conns {
        *counts.entry(canon(&c.holonomy.x, &c.holonomy.y)).or_insert(0) += 1;
    }
    counts
}

#[test]
fn oracle_counts_unit_budget() {
    let counts = oracle_l_holonomies(&rq(1, 1));
    let total: usize = counts.values().sum();
    assert_eq!(total, 6, "{counts:?}");
    assert_eq!(counts.get(&("1".into(), "0".into())), Some(&3));
    assert_eq!(counts.get(&("0".into(), "1".into())), Some(&3));
}

#[test]
fn enumeration_matches_oracle_up_to_sq8() {
    let budget = rq(8, 1);
    let oracle = oracle_l_holonomies(&budget);
    let implem = implementation_multiset(&budget);
    assert_eq!(oracle, implem);
}

#[test]
fn enumeration_matches_oracle_small_budgets() {
    for b in [1i64, 2, 4, 5] {
        let budget = rq(b, 1);
        assert_eq!(oracle_l_holonomies(&budget), implementation_multiset(&budget), "budget {b}");
    }
}
