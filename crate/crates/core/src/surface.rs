//! Half-translation surfaces as polygon complexes with exact coordinates.
//!
//! A surface is described by euclidean polygons with counterclockwise
//! rational vertices and pairwise edge gluings of two kinds: `Translation`
//! (`z ↦ z + c`) and `Flip` (`z ↦ −z + c`), realizing holonomy `{±Id}`.
//! Validation checks every structural and metric invariant and reports all
//! of them; a clean report seals the surface into
//! [`HalfTranslationSurface`], which carries the derived data used by the
//! rest of the crate: an internal triangulation, edge transport maps, vertex
//! classes with their exact cone angles, and the corner fans that germs of
//! geodesic rays live in.

use crate::geom::{
    orient, point_in_closed_triangle, polygon_area_doubled, segments_intersect, Angle, Direction,
    IVec, Vec2,
};
use crate::rational::Rational;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polygon {
    pub id: String,
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Vector of edge `i`, from vertex `i` to vertex `i+1 (mod n)`.
    pub fn edge_vector(&self, i: usize) -> Vec2 {
        let n = self.vertices.len();
        &self.vertices[(i + 1) % n] - &self.vertices[i]
    }
}

/// Reference to edge `index` of a polygon (by position in the polygon list).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    pub polygon: usize,
    pub index: usize,
}

impl EdgeRef {
    pub fn new(polygon: usize, index: usize) -> Self {
        EdgeRef { polygon, index }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GluingKind {
    /// `z ↦ z + c`; the identified edges have opposite boundary vectors.
    Translation,
    /// `z ↦ −z + c`; the identified edges have equal boundary vectors.
    Flip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gluing {
    pub a: EdgeRef,
    pub b: EdgeRef,
    pub kind: GluingKind,
}

/// Raw surface data before validation.
#[derive(Clone, Debug)]
pub struct Surface {
    pub polygons: Vec<Polygon>,
    pub gluings: Vec<Gluing>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    PolygonTooSmall { polygon: usize },
    RepeatedVertex { polygon: usize, vertex: usize },
    NotCounterclockwise { polygon: usize },
    NotSimple { polygon: usize },
    SpikeCorner { polygon: usize, vertex: usize },
    DanglingEdgeRef { gluing: usize },
    SelfGluedEdge { gluing: usize },
    EdgeGluedTwice { edge: EdgeRef },
    GluingVectorMismatch { gluing: usize },
    Disconnected,
    AngleNotMultipleOfPi { polygon: usize, vertex: usize },
    InteriorAngleTooSmall { polygon: usize, vertex: usize },
    BoundaryDirectionNotConstant { component: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PolygonTooSmall { polygon } => {
                write!(f, "polygon {polygon} has fewer than 3 vertices")
            }
            Violation::RepeatedVertex { polygon, vertex } => {
                write!(f, "polygon {polygon} repeats vertex {vertex}")
            }
            Violation::NotCounterclockwise { polygon } => {
                write!(f, "polygon {polygon} is not counterclockwise")
            }
            Violation::NotSimple { polygon } => {
                write!(f, "polygon {polygon} is not simple")
            }
            Violation::SpikeCorner { polygon, vertex } => {
                write!(f, "polygon {polygon} folds back at vertex {vertex}")
            }
            Violation::DanglingEdgeRef { gluing } => {
                write!(f, "gluing {gluing} references a nonexistent edge")
            }
            Violation::SelfGluedEdge { gluing } => {
                write!(f, "gluing {gluing} identifies an edge with itself")
            }
            Violation::EdgeGluedTwice { edge } => {
                write!(f, "edge ({}, {}) appears in more than one gluing", edge.polygon, edge.index)
            }
            Violation::GluingVectorMismatch { gluing } => {
                write!(f, "gluing {gluing} identifies edges with incompatible vectors")
            }
            Violation::Disconnected => write!(f, "polygon complex is disconnected"),
            Violation::AngleNotMultipleOfPi { polygon, vertex } => {
                write!(f, "vertex class at ({polygon}, {vertex}) has angle not a multiple of pi")
            }
            Violation::InteriorAngleTooSmall { polygon, vertex } => {
                write!(f, "interior vertex class at ({polygon}, {vertex}) has angle below 2*pi")
            }
            Violation::BoundaryDirectionNotConstant { component } => {
                write!(f, "boundary component {component} is not of constant direction")
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Checks every invariant of the raw data and reports all violations.
pub fn validate_surface(s: &Surface) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut structural_ok = true;

    for (pi, poly) in s.polygons.iter().enumerate() {
        if poly.len() < 3 {
            report.violations.push(Violation::PolygonTooSmall { polygon: pi });
            structural_ok = false;
            continue;
        }
        let n = poly.len();
        let mut degenerate = false;
        for i in 0..n {
            if poly.vertices[i] == poly.vertices[(i + 1) % n] {
                report.violations.push(Violation::RepeatedVertex { polygon: pi, vertex: i });
                degenerate = true;
            }
        }
        if degenerate {
            structural_ok = false;
            continue;
        }
        if !polygon_area_doubled(&poly.vertices).is_positive() {
            report.violations.push(Violation::NotCounterclockwise { polygon: pi });
            structural_ok = false;
        }
        let mut simple = true;
        for i in 0..n {
            // Adjacent edges may only share the common vertex.
            let j = (i + 1) % n;
            let vi = poly.edge_vector(i);
            let vj = poly.edge_vector(j);
            if vi.cross(&vj).is_zero() && vi.dot(&vj).is_negative() {
                report.violations.push(Violation::SpikeCorner { polygon: pi, vertex: j });
                simple = false;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, b1) = (&poly.vertices[i], &poly.vertices[(i + 1) % n]);
                let (a2, b2) = (&poly.vertices[j], &poly.vertices[(j + 1) % n]);
                if segments_intersect(a1, b1, a2, b2) {
                    report.violations.push(Violation::NotSimple { polygon: pi });
                    simple = false;
                }
            }
        }
        if !simple {
            structural_ok = false;
        }
    }

    // Gluing combinatorics.
    let mut seen: BTreeMap<EdgeRef, usize> = BTreeMap::new();
    let mut gluing_ok = true;
    for (gi, g) in s.gluings.iter().enumerate() {
        let in_range = |e: &EdgeRef| {
            e.polygon < s.polygons.len() && e.index < s.polygons[e.polygon].len()
        };
        if !in_range(&g.a) || !in_range(&g.b) {
            report.violations.push(Violation::DanglingEdgeRef { gluing: gi });
            gluing_ok = false;
            continue;
        }
        if g.a == g.b {
            report.violations.push(Violation::SelfGluedEdge { gluing: gi });
            gluing_ok = false;
            continue;
        }
        for e in [g.a, g.b] {
            if seen.insert(e, gi).is_some() {
                report.violations.push(Violation::EdgeGluedTwice { edge: e });
                gluing_ok = false;
            }
        }
        if structural_ok {
            let va = s.polygons[g.a.polygon].edge_vector(g.a.index);
            let vb = s.polygons[g.b.polygon].edge_vector(g.b.index);
            let ok = match g.kind {
                GluingKind::Translation => vb == -&va,
                GluingKind::Flip => vb == va,
            };
            if !ok {
                report.violations.push(Violation::GluingVectorMismatch { gluing: gi });
                gluing_ok = false;
            }
        }
    }

    if !structural_ok || !gluing_ok {
        return report;
    }

    // Connectivity of the polygon adjacency graph.
    if !s.polygons.is_empty() {
        let mut reached = vec![false; s.polygons.len()];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(p) = stack.pop() {
            for g in &s.gluings {
                for (x, y) in [(g.a, g.b), (g.b, g.a)] {
                    if x.polygon == p && !reached[y.polygon] {
                        reached[y.polygon] = true;
                        stack.push(y.polygon);
                    }
                }
            }
        }
        if reached.iter().any(|r| !r) {
            report.violations.push(Violation::Disconnected);
            return report;
        }
    }

    // Vertex class angles and boundary direction constancy.
    let walker = SrcWalker::new(s);
    for class in walker.classes() {
        let repr = class.corners[0];
        match class.k {
            None => report
                .violations
                .push(Violation::AngleNotMultipleOfPi { polygon: repr.0, vertex: repr.1 }),
            Some(k) => {
                if !class.on_boundary && k < 2 {
                    report
                        .violations
                        .push(Violation::InteriorAngleTooSmall { polygon: repr.0, vertex: repr.1 });
                }
            }
        }
    }

    for (ci, comp) in walker.boundary_components().iter().enumerate() {
        let mut dirs: BTreeSet<Direction> = BTreeSet::new();
        for &(p, e) in comp {
            if let Some(d) = Direction::from_vec2(&s.polygons[p].edge_vector(e)) {
                dirs.insert(d);
            }
        }
        if dirs.len() > 1 {
            report.violations.push(Violation::BoundaryDirectionNotConstant { component: ci });
        }
    }

    report
}

/// Corner-walk machinery over the raw source complex.
struct SrcWalker<'a> {
    s: &'a Surface,
    partner: HashMap<(usize, usize), (usize, usize)>,
}

struct SrcClass {
    corners: Vec<(usize, usize)>,
    k: Option<u32>,
    on_boundary: bool,
}

impl<'a> SrcWalker<'a> {
    fn new(s: &'a Surface) -> Self {
        let mut partner = HashMap::new();
        for g in &s.gluings {
            partner.insert((g.a.polygon, g.a.index), (g.b.polygon, g.b.index));
            partner.insert((g.b.polygon, g.b.index), (g.a.polygon, g.a.index));
        }
        SrcWalker { s, partner }
    }

    fn nv(&self, p: usize) -> usize {
        self.s.polygons[p].len()
    }

    fn next_ccw(&self, (p, i): (usize, usize)) -> Option<(usize, usize)> {
        let n = self.nv(p);
        let incoming = (p, (i + n - 1) % n);
        self.partner.get(&incoming).copied()
    }

    fn prev_cw(&self, (p, i): (usize, usize)) -> Option<(usize, usize)> {
        let outgoing = (p, i);
        let (q, f) = self.partner.get(&outgoing).copied()?;
        let nq = self.nv(q);
        Some((q, (f + 1) % nq))
    }

    fn corner_rays(&self, (p, i): (usize, usize)) -> (IVec, IVec) {
        let poly = &self.s.polygons[p];
        let n = poly.len();
        let a = (&poly.vertices[(i + 1) % n] - &poly.vertices[i]).primitive();
        let b = (&poly.vertices[(i + n - 1) % n] - &poly.vertices[i]).primitive();
        (a, b)
    }

    fn classes(&self) -> Vec<SrcClass> {
        let mut assigned: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut out = Vec::new();
        for p in 0..self.s.polygons.len() {
            for i in 0..self.nv(p) {
                if assigned.contains(&(p, i)) {
                    continue;
                }
                let (fan, on_boundary) = walk_fan((p, i), |c| self.next_ccw(c), |c| self.prev_cw(c));
                let mut total = Angle::zero();
                for &c in &fan {
                    let (a, b) = self.corner_rays(c);
                    total = total.add(&Angle::ccw_between(&a, &b));
                    assigned.insert(c);
                }
                let k = if total.is_multiple_of_pi() { Some(total.half_turns) } else { None };
                out.push(SrcClass { corners: fan, k, on_boundary });
            }
        }
        out
    }

    /// Boundary components as cyclic chains of unglued edges, each traversed
    /// in the boundary orientation of its polygon.
    fn boundary_components(&self) -> Vec<Vec<(usize, usize)>> {
        let mut boundary_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for p in 0..self.s.polygons.len() {
            for e in 0..self.nv(p) {
                if !self.partner.contains_key(&(p, e)) {
                    boundary_edges.insert((p, e));
                }
            }
        }
        let mut comps = Vec::new();
        let mut visited: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &start in &boundary_edges {
            if visited.contains(&start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut cur = start;
            loop {
                visited.insert(cur);
                comp.push(cur);
                // Head vertex of the current edge; walk clockwise inside the
                // fan until the outgoing boundary edge is found.
                let (p, e) = cur;
                let n = self.nv(p);
                let mut corner = (p, (e + 1) % n);
                while let Some(prev) = self.prev_cw(corner) {
                    corner = prev;
                }
                cur = corner;
                if cur == start {
                    break;
                }
            }
            comps.push(comp);
        }
        comps
    }
}

/// Walks a corner fan: clockwise to the seed of the fan, then counter-
/// clockwise collecting all corners. Returns the fan in counterclockwise
/// order and whether it is a boundary (linear) fan.
fn walk_fan<F, G>(seed: (usize, usize), next_ccw: F, prev_cw: G) -> (Vec<(usize, usize)>, bool)
where
    F: Fn((usize, usize)) -> Option<(usize, usize)>,
    G: Fn((usize, usize)) -> Option<(usize, usize)>,
{
    // Walk clockwise first; if we return to the seed the fan is cyclic.
    let mut start = seed;
    let mut on_boundary = false;
    loop {
        match prev_cw(start) {
            Some(c) => {
                if c == seed {
                    break;
                }
                start = c;
            }
            None => {
                on_boundary = true;
                break;
            }
        }
    }
    let mut fan = vec![start];
    let mut cur = start;
    while let Some(c) = next_ccw(cur) {
        if c == start {
            break;
        }
        fan.push(c);
        cur = c;
    }
    if !on_boundary {
        // Canonical rotation: root the cyclic fan at its minimal corner.
        let min_pos = fan
            .iter()
            .enumerate()
            .min_by_key(|(_, c)| **c)
            .map(|(i, _)| i)
            .unwrap_or(0);
        fan.rotate_left(min_pos);
    }
    (fan, on_boundary)
}

/// One corner sector of a cone point: the wedge of a polygon at a vertex,
/// bounded by the rays toward the adjacent vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    /// `(polygon, vertex)` of the corner.
    pub corner: (usize, usize),
    /// Ray along the outgoing edge (counterclockwise start of the wedge).
    pub a: IVec,
    /// Ray along the incoming edge (counterclockwise end of the wedge).
    pub b: IVec,
}

/// A vertex equivalence class of total angle `kπ` together with its cyclic
/// fan of corner sectors.
#[derive(Clone, Debug)]
pub struct ConePoint {
    /// Index of the underlying vertex class.
    pub class: usize,
    /// Total angle is `k·π`.
    pub k: u32,
    pub on_boundary: bool,
    /// Corners `(polygon, vertex)` of the class, in counterclockwise fan
    /// order (cyclic when interior, linear when on the boundary).
    pub corners: Vec<(usize, usize)>,
    /// Sectors matching `corners`.
    pub sectors: Vec<Sector>,
}

#[derive(Clone, Debug)]
pub(crate) struct Tri {
    pub poly: usize,
    pub v: [Vec2; 3],
    /// Source vertex indices of the three corners.
    pub src_v: [usize; 3],
    /// For each edge `i` (from corner `i` to `i+1`): the source edge it lies
    /// on, or `None` for an internal diagonal.
    pub src_edge: [Option<usize>; 3],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Neighbor {
    Glued {
        tri: usize,
        edge: usize,
        /// −1 across a flip gluing, +1 otherwise.
        sign: i8,
        /// Affine offset: `x ↦ sign·x + tau`.
        tau: Vec2,
        /// True when this is an internal triangulation diagonal.
        diagonal: bool,
    },
    Boundary,
}

/// A vertex class of the triangulated complex.
#[derive(Clone, Debug)]
pub(crate) struct VertexClass {
    /// Fine fan: corners `(tri, vtx)` in counterclockwise order.
    pub fine: Vec<(usize, usize)>,
    /// Coarse fan: corners `(polygon, vertex)` in counterclockwise order.
    pub coarse: Vec<(usize, usize)>,
    /// For each fine fan position, the index of its coarse sector.
    pub fine_to_coarse: Vec<usize>,
    /// Angle is `k·π`.
    pub k: u32,
    pub on_boundary: bool,
    pub singular: bool,
}

/// A validated, immutable half-translation surface with derived caches.
///
/// All operations in the crate are pure queries over this structure; it is
/// safe to share across threads.
pub struct HalfTranslationSurface {
    src: Surface,
    pub(crate) tris: Vec<Tri>,
    pub(crate) nbr: Vec<[Neighbor; 3]>,
    pub(crate) classes: Vec<VertexClass>,
    /// `(tri, vtx) → class`.
    pub(crate) corner_class: Vec<[usize; 3]>,
    /// `(polygon, vertex) → class`.
    src_corner_class: HashMap<(usize, usize), usize>,
    cone_points: Vec<ConePoint>,
    chi: i64,
    boundary: Vec<Vec<(usize, usize)>>,
    area: Rational,
    poly_index: HashMap<String, usize>,
}

impl Surface {
    pub fn new(polygons: Vec<Polygon>, gluings: Vec<Gluing>) -> Self {
        Surface { polygons, gluings }
    }

    /// Validates and seals the surface, computing the derived caches.
    pub fn seal(self) -> Result<HalfTranslationSurface, ValidationReport> {
        let report = validate_surface(&self);
        if !report.is_empty() {
            return Err(report);
        }
        Ok(HalfTranslationSurface::build(self))
    }
}

impl HalfTranslationSurface {
    fn build(src: Surface) -> Self {
        let mut tris = Vec::new();
        for (pi, poly) in src.polygons.iter().enumerate() {
            for [i, j, k] in triangulate(&poly.vertices) {
                let src_edge = |u: usize, w: usize| -> Option<usize> {
                    if (u + 1) % poly.len() == w {
                        Some(u)
                    } else {
                        None
                    }
                };
                tris.push(Tri {
                    poly: pi,
                    v: [
                        poly.vertices[i].clone(),
                        poly.vertices[j].clone(),
                        poly.vertices[k].clone(),
                    ],
                    src_v: [i, j, k],
                    src_edge: [src_edge(i, j), src_edge(j, k), src_edge(k, i)],
                });
            }
        }

        // Locate triangle edges by source edge and by diagonal endpoints.
        let mut by_src_edge: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut by_diag: HashMap<(usize, usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for e in 0..3 {
                match t.src_edge[e] {
                    Some(se) => {
                        by_src_edge.insert((t.poly, se), (ti, e));
                    }
                    None => {
                        let u = t.src_v[e];
                        let w = t.src_v[(e + 1) % 3];
                        let key = (t.poly, u.min(w), u.max(w));
                        by_diag.entry(key).or_default().push((ti, e));
                    }
                }
            }
        }

        let transport = |tris: &[Tri], a: (usize, usize), b: (usize, usize), flip: bool| {
            let u = tris[a.0].v[a.1].clone();
            let w_prime = tris[b.0].v[(b.1 + 1) % 3].clone();
            if flip {
                (-1i8, &w_prime + &u)
            } else {
                (1i8, &w_prime - &u)
            }
        };

        let mut nbr: Vec<[Neighbor; 3]> =
            vec![[Neighbor::Boundary, Neighbor::Boundary, Neighbor::Boundary]; tris.len()];
        for g in &src.gluings {
            let ea = by_src_edge[&(g.a.polygon, g.a.index)];
            let eb = by_src_edge[&(g.b.polygon, g.b.index)];
            let flip = g.kind == GluingKind::Flip;
            let (sa, ta) = transport(&tris, ea, eb, flip);
            let (sb, tb) = transport(&tris, eb, ea, flip);
            nbr[ea.0][ea.1] =
                Neighbor::Glued { tri: eb.0, edge: eb.1, sign: sa, tau: ta, diagonal: false };
            nbr[eb.0][eb.1] =
                Neighbor::Glued { tri: ea.0, edge: ea.1, sign: sb, tau: tb, diagonal: false };
        }
        for sides in by_diag.values() {
            debug_assert_eq!(sides.len(), 2, "each diagonal bounds exactly two triangles");
            let (a, b) = (sides[0], sides[1]);
            // Same chart on both sides: identity transport.
            nbr[a.0][a.1] =
                Neighbor::Glued { tri: b.0, edge: b.1, sign: 1, tau: Vec2::zero(), diagonal: true };
            nbr[b.0][b.1] =
                Neighbor::Glued { tri: a.0, edge: a.1, sign: 1, tau: Vec2::zero(), diagonal: true };
        }

        // Fine vertex classes over the triangulated complex.
        let next_ccw = |c: (usize, usize)| -> Option<(usize, usize)> {
            let incoming = (c.0, (c.1 + 2) % 3);
            match &nbr[incoming.0][incoming.1] {
                Neighbor::Glued { tri, edge, .. } => Some((*tri, *edge)),
                Neighbor::Boundary => None,
            }
        };
        let prev_cw = |c: (usize, usize)| -> Option<(usize, usize)> {
            match &nbr[c.0][c.1] {
                Neighbor::Glued { tri, edge, .. } => Some((*tri, (*edge + 1) % 3)),
                Neighbor::Boundary => None,
            }
        };

        let mut classes: Vec<VertexClass> = Vec::new();
        let mut corner_class = vec![[usize::MAX; 3]; tris.len()];
        for ti in 0..tris.len() {
            for vi in 0..3 {
                if corner_class[ti][vi] != usize::MAX {
                    continue;
                }
                let (fine, on_boundary) = walk_fan((ti, vi), next_ccw, prev_cw);
                let mut total = Angle::zero();
                for &(t, i) in &fine {
                    let a = (&tris[t].v[(i + 1) % 3] - &tris[t].v[i]).primitive();
                    let b = (&tris[t].v[(i + 2) % 3] - &tris[t].v[i]).primitive();
                    total = total.add(&Angle::ccw_between(&a, &b));
                }
                debug_assert!(total.is_multiple_of_pi());
                let k = total.half_turns;
                let idx = classes.len();
                for &(t, i) in &fine {
                    corner_class[t][i] = idx;
                }
                // Coarse fan: group consecutive fine corners by source corner.
                let mut coarse: Vec<(usize, usize)> = Vec::new();
                for &(t, i) in &fine {
                    let sc = (tris[t].poly, tris[t].src_v[i]);
                    if coarse.last() != Some(&sc) {
                        coarse.push(sc);
                    }
                }
                if !on_boundary && coarse.len() > 1 && coarse.first() == coarse.last() {
                    coarse.pop();
                }
                if !on_boundary {
                    // Keep the coarse fan rooted at its minimal corner and
                    // re-root the fine fan to match.
                    let min_pos = coarse
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, c)| **c)
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    coarse.rotate_left(min_pos);
                }
                let singular = if on_boundary { k >= 2 } else { k >= 3 };
                classes.push(VertexClass {
                    fine,
                    coarse,
                    fine_to_coarse: Vec::new(),
                    k,
                    on_boundary,
                    singular,
                });
            }
        }

        // Re-root interior fine fans at the start of the contiguous block of
        // fine corners belonging to the first coarse corner.
        for class in &mut classes {
            if class.on_boundary {
                continue;
            }
            let first = class.coarse[0];
            let len = class.fine.len();
            let src_of = |&(t, i): &(usize, usize)| (tris[t].poly, tris[t].src_v[i]);
            let pos = (0..len)
                .find(|&p| {
                    src_of(&class.fine[p]) == first
                        && (len == 1 || src_of(&class.fine[(p + len - 1) % len]) != first)
                })
                .unwrap_or(0);
            class.fine.rotate_left(pos);
        }

        for class in &mut classes {
            let src_of = |&(t, i): &(usize, usize)| (tris[t].poly, tris[t].src_v[i]);
            class.fine_to_coarse = class
                .fine
                .iter()
                .map(|fc| {
                    let sc = src_of(fc);
                    class.coarse.iter().position(|&c| c == sc).expect("coarse sector exists")
                })
                .collect();
        }

        let mut src_corner_class = HashMap::new();
        for (ci, class) in classes.iter().enumerate() {
            for &(t, i) in &class.fine {
                src_corner_class.insert((tris[t].poly, tris[t].src_v[i]), ci);
            }
        }

        // Euler characteristic of the source complex.
        let walker = SrcWalker::new(&src);
        let v = classes.len() as i64;
        let mut glued: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut e = 0i64;
        for g in &src.gluings {
            glued.insert((g.a.polygon, g.a.index));
            glued.insert((g.b.polygon, g.b.index));
            e += 1;
        }
        for p in 0..src.polygons.len() {
            for i in 0..src.polygons[p].len() {
                if !glued.contains(&(p, i)) {
                    e += 1;
                }
            }
        }
        let f = src.polygons.len() as i64;
        let chi = v - e + f;
        let boundary = walker.boundary_components();

        let mut area = Rational::zero();
        for poly in &src.polygons {
            area += polygon_area_doubled(&poly.vertices);
        }
        area /= Rational::from_integer(2.into());

        let cone_points = classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.singular)
            .map(|(ci, c)| {
                let sectors = c
                    .coarse
                    .iter()
                    .map(|&(p, i)| {
                        let poly = &src.polygons[p];
                        let n = poly.len();
                        Sector {
                            corner: (p, i),
                            a: (&poly.vertices[(i + 1) % n] - &poly.vertices[i]).primitive(),
                            b: (&poly.vertices[(i + n - 1) % n] - &poly.vertices[i]).primitive(),
                        }
                    })
                    .collect();
                ConePoint {
                    class: ci,
                    k: c.k,
                    on_boundary: c.on_boundary,
                    corners: c.coarse.clone(),
                    sectors,
                }
            })
            .collect();

        let poly_index =
            src.polygons.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();

        HalfTranslationSurface {
            src,
            tris,
            nbr,
            classes,
            corner_class,
            src_corner_class,
            cone_points,
            chi,
            boundary,
            area,
            poly_index,
        }
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.src.polygons
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.src.gluings
    }

    pub fn raw(&self) -> &Surface {
        &self.src
    }

    pub fn polygon_index(&self, id: &str) -> Option<usize> {
        self.poly_index.get(id).copied()
    }

    /// The cone points: interior classes with `k ≥ 3` and boundary classes
    /// with `k ≥ 2`. Regular classes (`k = 2` interior, `k = 1` boundary) are
    /// not singularities.
    pub fn singularities(&self) -> &[ConePoint] {
        &self.cone_points
    }

    pub fn cone_point(&self, class: usize) -> Option<&ConePoint> {
        self.cone_points.iter().find(|c| c.class == class)
    }

    pub fn class_angle(&self, class: usize) -> u32 {
        self.classes[class].k
    }

    pub fn class_on_boundary(&self, class: usize) -> bool {
        self.classes[class].on_boundary
    }

    pub fn class_is_singular(&self, class: usize) -> bool {
        self.classes[class].singular
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// The class of a source corner `(polygon, vertex)`.
    pub fn class_of_corner(&self, polygon: usize, vertex: usize) -> Option<usize> {
        self.src_corner_class.get(&(polygon, vertex)).copied()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.chi
    }

    /// Boundary components as chains of `(polygon, edge)` in boundary order.
    pub fn boundary_components(&self) -> &[Vec<(usize, usize)>] {
        &self.boundary
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len()
    }

    /// Genus from `χ = 2 − 2g − b`.
    pub fn genus(&self) -> i64 {
        let g2 = 2 - self.chi - self.boundary.len() as i64;
        debug_assert!(g2 % 2 == 0 && g2 >= 0);
        g2 / 2
    }

    pub fn total_area(&self) -> &Rational {
        &self.area
    }

    pub(crate) fn tri_count(&self) -> usize {
        self.tris.len()
    }

    pub(crate) fn tri(&self, t: usize) -> &Tri {
        &self.tris[t]
    }

    pub(crate) fn neighbor(&self, t: usize, e: usize) -> &Neighbor {
        &self.nbr[t][e]
    }

    pub(crate) fn fine_corner_rays(&self, t: usize, i: usize) -> (IVec, IVec) {
        let tri = &self.tris[t];
        let a = (&tri.v[(i + 1) % 3] - &tri.v[i]).primitive();
        let b = (&tri.v[(i + 2) % 3] - &tri.v[i]).primitive();
        (a, b)
    }

    pub(crate) fn class_of_fine_corner(&self, t: usize, i: usize) -> usize {
        self.corner_class[t][i]
    }

    /// Fine fan of a class, as `(tri, vtx)` corners in ccw order.
    pub(crate) fn fine_fan(&self, class: usize) -> &[(usize, usize)] {
        &self.classes[class].fine
    }

    /// Coarse sector index of each fine fan position.
    pub(crate) fn fine_to_coarse(&self, class: usize) -> &[usize] {
        &self.classes[class].fine_to_coarse
    }

    pub(crate) fn coarse_fan(&self, class: usize) -> &[(usize, usize)] {
        &self.classes[class].coarse
    }

    /// Source-corner rays of a coarse sector.
    pub(crate) fn coarse_corner_rays(&self, p: usize, i: usize) -> (IVec, IVec) {
        let poly = &self.src.polygons[p];
        let n = poly.len();
        let a = (&poly.vertices[(i + 1) % n] - &poly.vertices[i]).primitive();
        let b = (&poly.vertices[(i + n - 1) % n] - &poly.vertices[i]).primitive();
        (a, b)
    }

    /// Coordinates of the class vertex inside the chart of fine corner `fc`.
    pub(crate) fn fine_corner_point(&self, fc: (usize, usize)) -> &Vec2 {
        &self.tris[fc.0].v[fc.1]
    }
}

/// Sum over all vertex classes of `(k_z − 2)`; on a closed surface this
/// equals `−2χ` (Gauss–Bonnet).
pub fn angle_defect_sum(s: &HalfTranslationSurface) -> i64 {
    (0..s.class_count()).map(|c| s.class_angle(c) as i64 - 2).sum()
}

/// Ear-clipping triangulation of a simple ccw polygon, by vertex indices.
fn triangulate(vertices: &[Vec2]) -> Vec<[usize; 3]> {
    let n = vertices.len();
    if n == 3 {
        return vec![[0, 1, 2]];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for pos in 0..m {
            let ip = idx[(pos + m - 1) % m];
            let ic = idx[pos];
            let inx = idx[(pos + 1) % m];
            let (p, c, x) = (&vertices[ip], &vertices[ic], &vertices[inx]);
            if orient(p, c, x) != Ordering::Greater {
                continue;
            }
            let mut ear = true;
            for &other in &idx {
                if other == ip || other == ic || other == inx {
                    continue;
                }
                if point_in_closed_triangle(&vertices[other], p, c, x) {
                    ear = false;
                    break;
                }
            }
            if ear {
                out.push([ip, ic, inx]);
                idx.remove(pos);
                clipped = true;
                break;
            }
        }
        assert!(clipped, "ear clipping failed on a simple polygon");
    }
    out.push([idx[0], idx[1], idx[2]]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn square_torus_is_valid_and_regular() {
        let s = samples::square_torus();
        assert!(validate_surface(&s).is_empty());
        let s = s.seal().unwrap();
        assert_eq!(s.singularities().len(), 0);
        assert_eq!(s.class_count(), 1);
        assert_eq!(s.class_angle(0), 2);
        assert_eq!(s.euler_characteristic(), 0);
        assert_eq!(s.boundary_count(), 0);
        assert_eq!(s.genus(), 1);
        assert_eq!(s.total_area(), &Rational::from_integer(1.into()));
    }

    #[test]
    fn mismatched_gluing_is_reported() {
        let mut s = samples::square_torus();
        // Lengthen the bottom edge only: bottom/top and right/left pairings
        // both stop matching.
        s.polygons[0].vertices[1] = Vec2::from_ints(2, 0);
        let report = validate_surface(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::GluingVectorMismatch { .. })));
    }

    #[test]
    fn l_surface_has_single_6pi_cone() {
        let s = samples::l_surface().seal().unwrap();
        assert_eq!(s.euler_characteristic(), -2);
        assert_eq!(s.genus(), 2);
        let cones = s.singularities();
        assert_eq!(cones.len(), 1);
        assert_eq!(cones[0].k, 6);
        assert!(!cones[0].on_boundary);
        assert_eq!(cones[0].sectors.len(), 12);
        assert_eq!(s.total_area(), &Rational::from_integer(3.into()));
        assert_eq!(angle_defect_sum(&s), -2 * s.euler_characteristic());
    }

    #[test]
    fn clockwise_polygon_rejected() {
        let mut s = samples::square_torus();
        s.polygons[0].vertices.reverse();
        let report = validate_surface(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotCounterclockwise { .. })));
    }

    #[test]
    fn disconnected_complex_rejected() {
        let mut s = samples::square_torus();
        let far = Polygon {
            id: "far".into(),
            vertices: vec![
                Vec2::from_ints(10, 10),
                Vec2::from_ints(11, 10),
                Vec2::from_ints(10, 11),
            ],
        };
        s.polygons.push(far);
        let report = validate_surface(&s);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Disconnected)));
    }

    #[test]
    fn ear_clipping_handles_l_hexagon() {
        let verts = vec![
            Vec2::from_ints(0, 0),
            Vec2::from_ints(2, 0),
            Vec2::from_ints(2, 1),
            Vec2::from_ints(1, 1),
            Vec2::from_ints(1, 2),
            Vec2::from_ints(0, 2),
        ];
        let tris = triangulate(&verts);
        assert_eq!(tris.len(), 4);
        let doubled: Rational = tris
            .iter()
            .map(|t| {
                polygon_area_doubled(&[
                    verts[t[0]].clone(),
                    verts[t[1]].clone(),
                    verts[t[2]].clone(),
                ])
            })
            .sum();
        assert_eq!(doubled, Rational::from_integer(6.into()));
    }

    #[test]
    fn ear_clipping_handles_collinear_chains() {
        // 2×1 rectangle with a subdivided bottom edge (straight vertex).
        let verts = vec![
            Vec2::from_ints(0, 0),
            Vec2::from_ints(1, 0),
            Vec2::from_ints(2, 0),
            Vec2::from_ints(2, 1),
            Vec2::from_ints(0, 1),
        ];
        let tris = triangulate(&verts);
        assert_eq!(tris.len(), 3);
    }
}
