//! Facets of the convex hull of a point cloud in `R³`.
//!
//! Incremental construction with points inserted by decreasing distance from
//! an interior point. Coplanar triangles are merged into one facet by their
//! outer normal. Planar clouds yield the polygon twice, once per side.

use std::collections::HashSet;

use crate::error::{Error, Result};

type P3 = [f64; 3];

/// Outer unit normal and area of a hull facet.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: P3,
    pub area: f64,
}

fn sub(a: &P3, b: &P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &P3, b: &P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn len3(a: &P3) -> f64 {
    dot3(a, a).sqrt()
}

fn scale3(a: &P3, t: f64) -> P3 {
    [a[0] * t, a[1] * t, a[2] * t]
}

struct Face {
    v: [usize; 3],
    normal: P3,
    offset: f64,
    alive: bool,
}

impl Face {
    fn new(pts: &[P3], v: [usize; 3]) -> Face {
        let n = cross(&sub(&pts[v[1]], &pts[v[0]]), &sub(&pts[v[2]], &pts[v[0]]));
        let l = len3(&n);
        let normal = if l > 0.0 { scale3(&n, 1.0 / l) } else { n };
        Face {
            v,
            normal,
            offset: dot3(&normal, &pts[v[0]]),
            alive: true,
        }
    }

    fn distance(&self, p: &P3) -> f64 {
        dot3(&self.normal, p) - self.offset
    }
}

/// Facets of `conv(points)`. Lower-dimensional hulls: a polygon gives two
/// opposite facets of equal area, segments and points give none.
pub fn hull_facets(points: &[P3]) -> Result<Vec<Facet>> {
    if points.is_empty() {
        return Err(Error::HullFailure("no points".into()));
    }
    if points.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::HullFailure("non-finite coordinate".into()));
    }
    let count = points.len() as f64;
    let centroid = points.iter().fold([0.0; 3], |acc, p| {
        [acc[0] + p[0] / count, acc[1] + p[1] / count, acc[2] + p[2] / count]
    });
    let extent = points.iter().map(|p| len3(&sub(p, &centroid))).fold(0.0, f64::max);
    let eps = 1e-10 * extent.max(f64::MIN_POSITIVE);

    let farthest = |score: &dyn Fn(&P3) -> f64| -> (usize, f64) {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, score(p)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    };
    let (i0, _) = farthest(&|p| len3(&sub(p, &centroid)));
    let (i1, d1) = farthest(&|p| len3(&sub(p, &points[i0])));
    if d1 <= eps {
        return Ok(Vec::new());
    }
    let axis = scale3(&sub(&points[i1], &points[i0]), 1.0 / d1);
    let (i2, d2) = farthest(&|p| {
        let w = sub(p, &points[i0]);
        len3(&sub(&w, &scale3(&axis, dot3(&w, &axis))))
    });
    if d2 <= eps {
        return Ok(Vec::new());
    }
    let plane = cross(&sub(&points[i1], &points[i0]), &sub(&points[i2], &points[i0]));
    let plane = scale3(&plane, 1.0 / len3(&plane));
    let (i3, d3) = farthest(&|p| dot3(&sub(p, &points[i0]), &plane).abs());
    if d3 <= eps {
        return Ok(planar_facets(points, &points[i0], &axis, &plane));
    }

    let mut faces: Vec<Face> = Vec::new();
    let simplex = [i0, i1, i2, i3];
    let interior = simplex.iter().fold([0.0; 3], |acc, &i| {
        let p = &points[i];
        [acc[0] + p[0] / 4.0, acc[1] + p[1] / 4.0, acc[2] + p[2] / 4.0]
    });
    for skip in 0..4 {
        let mut v: Vec<usize> = simplex.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &i)| i).collect();
        let mut face = Face::new(points, [v[0], v[1], v[2]]);
        if face.distance(&interior) > 0.0 {
            v.swap(1, 2);
            face = Face::new(points, [v[0], v[1], v[2]]);
        }
        faces.push(face);
    }

    let mut order: Vec<usize> = (0..points.len()).filter(|i| !simplex.contains(i)).collect();
    order.sort_by(|&a, &b| {
        len3(&sub(&points[b], &interior)).total_cmp(&len3(&sub(&points[a], &interior)))
    });

    for &pi in &order {
        let p = &points[pi];
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| faces[f].alive && faces[f].distance(p) > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges = HashSet::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]));
            }
        }
        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                if !edges.contains(&(b, a)) {
                    horizon.push((a, b));
                }
            }
            faces[f].alive = false;
        }
        for (a, b) in horizon {
            faces.push(Face::new(points, [a, b, pi]));
        }
        if faces.len() > 4 * points.len() + 16 {
            faces.retain(|f| f.alive);
        }
    }

    let triangles: Vec<Facet> = faces
        .iter()
        .filter(|f| f.alive)
        .map(|f| {
            let v = f.v;
            let n = cross(&sub(&points[v[1]], &points[v[0]]), &sub(&points[v[2]], &points[v[0]]));
            Facet {
                normal: f.normal,
                area: 0.5 * len3(&n),
            }
        })
        .collect();
    let facets = merge_coplanar(triangles);
    check_closed(&facets, extent)?;
    Ok(facets)
}

fn planar_facets(points: &[P3], origin: &P3, e1: &P3, normal: &P3) -> Vec<Facet> {
    let e2 = cross(normal, e1);
    let mut flat: Vec<[f64; 2]> = points
        .iter()
        .map(|p| {
            let w = sub(p, origin);
            [dot3(&w, e1), dot3(&w, &e2)]
        })
        .collect();
    let area = polygon_hull_area(&mut flat);
    if area <= 0.0 {
        return Vec::new();
    }
    vec![
        Facet {
            normal: *normal,
            area,
        },
        Facet {
            normal: scale3(normal, -1.0),
            area,
        },
    ]
}

/// Area of the convex hull of planar points (monotone chain).
fn polygon_hull_area(pts: &mut [[f64; 2]]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let turn = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    let m = hull.len();
    (0..m)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % m]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

fn merge_coplanar(triangles: Vec<Facet>) -> Vec<Facet> {
    const NORMAL_TOL: f64 = 1e-9;
    let mut merged: Vec<(P3, f64)> = Vec::new();
    for t in triangles {
        if t.area == 0.0 {
            continue;
        }
        let weighted = scale3(&t.normal, t.area);
        match merged.iter_mut().find(|(s, a)| len3(&sub(&scale3(s, 1.0 / a), &t.normal)) < NORMAL_TOL) {
            Some((s, a)) => {
                *s = [s[0] + weighted[0], s[1] + weighted[1], s[2] + weighted[2]];
                *a += t.area;
            }
            None => merged.push((weighted, t.area)),
        }
    }
    merged
        .into_iter()
        .map(|(s, area)| Facet {
            normal: scale3(&s, 1.0 / len3(&s)),
            area,
        })
        .collect()
}

/// Minkowski's relation `Σ A_i n_i = 0` as a consistency check.
fn check_closed(facets: &[Facet], extent: f64) -> Result<()> {
    let total: f64 = facets.iter().map(|f| f.area).sum();
    let resultant = facets.iter().fold([0.0; 3], |acc, f| {
        [
            acc[0] + f.area * f.normal[0],
            acc[1] + f.area * f.normal[1],
            acc[2] + f.area * f.normal[2],
        ]
    });
    if facets.len() < 4 || len3(&resultant) > 1e-8 * total.max(extent * extent) {
        return Err(Error::HullFailure(format!(
            "inconsistent facets (count {}, resultant {:.3e})",
            facets.len(),
            len3(&resultant)
        )));
    }
    Ok(())
}
