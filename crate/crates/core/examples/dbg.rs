use flatlam_core::surface::{EdgeRef, Gluing, GluingKind, Polygon, Surface};
use flatlam_core::Vec2;

// Scratch search: find valid flip-glued square complexes.
fn main() {
    // n squares in a row, coordinates [i,i+1]x[0,1]; edges bottom 0 right 1 top 2 left 3.
    for n in 2..=4usize {
        let polys: Vec<Polygon> = (0..n)
            .map(|i| {
                let (x0, y0) = if i < 3 { (i as i64, 0) } else { (1, 1) }; // L-ish for n=4
                Polygon {
                    id: format!("s{i}"),
                    vertices: vec![
                        Vec2::from_ints(x0, y0),
                        Vec2::from_ints(x0 + 1, y0),
                        Vec2::from_ints(x0 + 1, y0 + 1),
                        Vec2::from_ints(x0, y0 + 1),
                    ],
                }
            })
            .collect();
        // Edge pool: all (poly, edge) with vectors.
        let mut edges = vec![];
        for p in 0..n {
            for e in 0..4 {
                edges.push((p, e));
            }
        }
        // enumerate perfect matchings with kinds; brute force small
        let mut found = 0;
        let mut stack: Vec<(Vec<Gluing>, Vec<(usize, usize)>)> = vec![(vec![], edges)];
        while let Some((glues, rest)) = stack.pop() {
            if rest.is_empty() {
                let s = Surface::new(polys.clone(), glues.clone());
                let has_flip = glues.iter().any(|g| g.kind == GluingKind::Flip);
                if has_flip && flatlam_core::surface::validate_surface(&s).is_empty() {
                    let chk = Surface::new(polys.clone(), glues.clone()).seal().unwrap();
                    if (0..chk.class_count()).all(|c| chk.class_angle(c) < 3) { continue; }
                    let sealed = Surface::new(polys.clone(), glues.clone()).seal().unwrap();
                    let ks: Vec<u32> = (0..sealed.class_count())
                        .map(|c| sealed.class_angle(c))
                        .collect();
                    println!("n={n} ks={ks:?} gluings:");
                    for g in &glues {
                        println!(
                            "  ({},{}) ({},{}) {:?}",
                            g.a.polygon, g.a.index, g.b.polygon, g.b.index, g.kind
                        );
                    }
                    found += 1;
                    if found >= 3 {
                        break;
                    }
                }
                continue;
            }
            let mut rest = rest;
            let first = rest.remove(0);
            let va = vec_of(&polys, first);
            for j in 0..rest.len() {
                let other = rest[j];
                let vb = vec_of(&polys, other);
                let mut kinds = vec![];
                if vb == -&va {
                    kinds.push(GluingKind::Translation);
                }
                if vb == va {
                    kinds.push(GluingKind::Flip);
                }
                for kind in kinds {
                    let mut g2 = glues.clone();
                    g2.push(Gluing {
                        a: EdgeRef::new(first.0, first.1),
                        b: EdgeRef::new(other.0, other.1),
                        kind,
                    });
                    let mut r2 = rest.clone();
                    r2.remove(j);
                    stack.push((g2, r2));
                }
            }
        }
        if found > 0 {
            break;
        }
    }
}

fn vec_of(polys: &[Polygon], (p, e): (usize, usize)) -> Vec2 {
    polys[p].edge_vector(e)
}
