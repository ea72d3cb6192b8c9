//! Built-in example surfaces used by tests and documentation.

use crate::surface::{EdgeRef, Gluing, GluingKind, Polygon, Surface};
use crate::Vec2;

fn square(id: &str, x0: i64, y0: i64) -> Polygon {
    Polygon {
        id: id.to_string(),
        vertices: vec![
            Vec2::from_ints(x0, y0),
            Vec2::from_ints(x0 + 1, y0),
            Vec2::from_ints(x0 + 1, y0 + 1),
            Vec2::from_ints(x0, y0 + 1),
        ],
    }
}

fn tr(a: (usize, usize), b: (usize, usize)) -> Gluing {
    Gluing {
        a: EdgeRef::new(a.0, a.1),
        b: EdgeRef::new(b.0, b.1),
        kind: GluingKind::Translation,
    }
}

/// Unit square with opposite sides identified by translations: the flat
/// torus. One regular vertex class, no singularities, `χ = 0`.
pub fn square_torus() -> Surface {
    Surface::new(vec![square("sq", 0, 0)], vec![tr((0, 0), (0, 2)), tr((0, 1), (0, 3))])
}

/// The L-shaped union of three unit squares with opposite-side gluings: the
/// standard genus-2 translation surface with one cone point of angle `6π`.
///
/// Squares: `a = [0,1]²`, `b = [1,2]×[0,1]`, `c = [0,1]×[1,2]`. Edge `i` of a
/// square runs counterclockwise from vertex `i` (bottom 0, right 1, top 2,
/// left 3).
pub fn l_surface() -> Surface {
    let a = square("a", 0, 0);
    let b = square("b", 1, 0);
    let c = square("c", 0, 1);
    Surface::new(
        vec![a, b, c],
        vec![
            tr((0, 1), (1, 3)), // shared edge a|b
            tr((0, 2), (2, 0)), // shared edge a|c
            tr((0, 0), (2, 2)), // bottom of column 0 to top of column 0
            tr((1, 0), (1, 2)), // bottom of column 1 to top of column 1
            tr((0, 3), (1, 1)), // left of row 0 to right of row 0
            tr((2, 3), (2, 1)), // left of row 1 to right of row 1
        ],
    )
}

fn fl(a: (usize, usize), b: (usize, usize)) -> Gluing {
    Gluing { a: EdgeRef::new(a.0, a.1), b: EdgeRef::new(b.0, b.1), kind: GluingKind::Flip }
}

/// A genuinely half-translation closed surface: three unit squares in a row
/// with two flip gluings (left sides of squares 0 and 1, right sides of
/// squares 1 and 2). Single cone point of angle `6π`, genus 2.
pub fn flipped_row_surface() -> Surface {
    let polys = vec![square("s0", 0, 0), square("s1", 1, 0), square("s2", 2, 0)];
    Surface::new(
        polys,
        vec![
            tr((0, 0), (2, 2)),
            tr((0, 1), (2, 3)),
            tr((0, 2), (2, 0)),
            fl((0, 3), (1, 3)),
            tr((1, 0), (1, 2)),
            fl((1, 1), (2, 1)),
        ],
    )
}

/// Flat torus presented by two unit squares whose four edge pairs are all
/// identified by flips. Every chart transition negates directions, which
/// exercises the `−Id` holonomy paths.
pub fn flip_torus() -> Surface {
    let polys = vec![square("s0", 0, 0), square("s1", 1, 0)];
    Surface::new(
        polys,
        vec![fl((0, 0), (1, 0)), fl((0, 1), (1, 1)), fl((0, 2), (1, 2)), fl((0, 3), (1, 3))],
    )
}

/// Flat cylinder of circumference `w` and height 1: a `w×1` rectangle with
/// the vertical sides identified. Two boundary components.
pub fn open_cylinder(w: i64) -> Surface {
    let p = Polygon {
        id: "cyl".to_string(),
        vertices: vec![
            Vec2::from_ints(0, 0),
            Vec2::from_ints(w, 0),
            Vec2::from_ints(w, 1),
            Vec2::from_ints(0, 1),
        ],
    };
    Surface::new(vec![p], vec![tr((0, 1), (0, 3))])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::validate_surface;

    #[test]
    fn fixtures_are_valid() {
        for s in [square_torus(), l_surface(), open_cylinder(3)] {
            assert!(validate_surface(&s).is_empty());
        }
    }

    #[test]
    fn flipped_row_has_one_6pi_cone() {
        let s = flipped_row_surface();
        assert!(validate_surface(&s).is_empty(), "{}", validate_surface(&s));
        let s = s.seal().unwrap();
        assert_eq!(s.boundary_count(), 0);
        assert_eq!(s.singularities().len(), 1);
        assert_eq!(s.singularities()[0].k, 6);
        assert_eq!(s.euler_characteristic(), -2);
        assert_eq!(
            crate::surface::angle_defect_sum(&s),
            -2 * s.euler_characteristic()
        );
    }

    #[test]
    fn flip_torus_is_regular() {
        let s = flip_torus().seal().unwrap();
        assert_eq!(s.euler_characteristic(), 0);
        assert_eq!(s.singularities().len(), 0);
        assert_eq!(s.class_count(), 2);
    }

    #[test]
    fn open_cylinder_has_two_constant_direction_boundaries() {
        let s = open_cylinder(2).seal().unwrap();
        assert_eq!(s.boundary_count(), 2);
        assert_eq!(s.euler_characteristic(), 0);
        assert_eq!(s.singularities().len(), 0);
    }
}
