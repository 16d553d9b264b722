//! Exact convex-hull membership in dimensions 1-3.
//!
//! Everything here is direct geometry (interval test, monotone chain,
//! supporting-plane enumeration), deliberately a different route from the
//! LP-feasibility oracle the tests compare against.

use crate::error::{Error, Result};

/// Points-per-set cap for the cubic 3-D enumeration.
const MAX_POINTS_3D: usize = 128;

pub fn hull_contains(points: &[Vec<f64>], query: &[f64]) -> Result<bool> {
    let dim = query.len();
    if points.is_empty() {
        return Ok(false);
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::ShapeMismatch {
            context: "hull points",
            expected: dim.to_string(),
            got: "mixed".into(),
        });
    }
    match dim {
        1 => Ok(contains_1d(points, query[0])),
        2 => Ok(contains_2d(
            &points.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>(),
            [query[0], query[1]],
        )),
        3 => {
            if points.len() > MAX_POINTS_3D {
                return Err(Error::InvalidArgument(format!(
                    "3-d hull membership enumerates all planes and is capped at {MAX_POINTS_3D} points, got {}",
                    points.len()
                )));
            }
            Ok(contains_3d(
                &points.iter().map(|p| [p[0], p[1], p[2]]).collect::<Vec<_>>(),
                [query[0], query[1], query[2]],
            ))
        }
        other => Err(Error::UnsupportedDimension(other)),
    }
}

fn scale_of<const D: usize>(points: &[[f64; D]], q: [f64; D]) -> f64 {
    let mut m = 1.0f64;
    for p in points.iter().chain(std::iter::once(&q)) {
        for &v in p {
            m = m.max(v.abs());
        }
    }
    m
}

fn contains_1d(points: &[Vec<f64>], q: f64) -> bool {
    let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    q >= lo && q <= hi
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns the hull in counterclockwise order.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub fn contains_2d(points: &[[f64; 2]], q: [f64; 2]) -> bool {
    let tol = 1e-9 * scale_of(points, q);
    let hull = convex_hull_2d(points);
    match hull.len() {
        0 => false,
        1 => (q[0] - hull[0][0]).abs() <= tol && (q[1] - hull[0][1]).abs() <= tol,
        2 => point_on_segment(hull[0], hull[1], q, tol),
        _ => hull.iter().enumerate().all(|(i, &a)| {
            let b = hull[(i + 1) % hull.len()];
            cross(a, b, q) >= -tol
        }),
    }
}

fn point_on_segment(a: [f64; 2], b: [f64; 2], q: [f64; 2], tol: f64) -> bool {
    let cr = cross(a, b, q);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if len == 0.0 {
        return (q[0] - a[0]).abs() <= tol && (q[1] - a[1]).abs() <= tol;
    }
    if cr.abs() / len > tol {
        return false;
    }
    let t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / (len * len);
    (-tol..=1.0 + tol).contains(&t)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Enumerate candidate facet planes through point triples. The query is
/// inside iff it is on the inner side of every supporting plane. Degenerate
/// sets (coplanar, collinear) fall back to lower-dimensional tests.
fn contains_3d(points: &[[f64; 3]], q: [f64; 3]) -> bool {
    let tol = 1e-9 * scale_of(points, q);
    let n = points.len();

    let mut any_plane = false;
    let mut coplanar_all = true;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let normal = cross3(sub(points[j], points[i]), sub(points[k], points[i]));
                let nn = norm3(normal);
                if nn <= tol {
                    continue;
                }
                any_plane = true;
                let unit = [normal[0] / nn, normal[1] / nn, normal[2] / nn];
                let mut s_min = f64::INFINITY;
                let mut s_max = f64::NEG_INFINITY;
                for p in points {
                    let s = dot3(unit, sub(*p, points[i]));
                    s_min = s_min.min(s);
                    s_max = s_max.max(s);
                }
                if s_min < -tol || s_max > tol {
                    coplanar_all = false;
                }
                let sq = dot3(unit, sub(q, points[i]));
                // supporting plane: all points on one side; the query must
                // not be strictly beyond it
                if s_min >= -tol && sq < -tol {
                    return false;
                }
                if s_max <= tol && sq > tol {
                    return false;
                }
                if coplanar_all && s_min >= -tol && s_max <= tol {
                    // every point shares this plane; the problem is planar
                    return coplanar_membership(points, q, points[i], unit, tol);
                }
            }
        }
    }
    if any_plane {
        return true;
    }
    // all points collinear (or identical): check the spanned segment
    collinear_membership(points, q, tol)
}

fn coplanar_membership(points: &[[f64; 3]], q: [f64; 3], origin: [f64; 3], unit_n: [f64; 3], tol: f64) -> bool {
    if dot3(unit_n, sub(q, origin)).abs() > tol {
        return false;
    }
    // basis in the plane
    let mut u = [0.0; 3];
    for p in points {
        let d = sub(*p, origin);
        if norm3(d) > tol {
            let nn = norm3(d);
            u = [d[0] / nn, d[1] / nn, d[2] / nn];
            break;
        }
    }
    let v = cross3(unit_n, u);
    let project = |p: [f64; 3]| -> [f64; 2] { [dot3(sub(p, origin), u), dot3(sub(p, origin), v)] };
    let pts2: Vec<[f64; 2]> = points.iter().map(|&p| project(p)).collect();
    contains_2d(&pts2, project(q))
}

fn collinear_membership(points: &[[f64; 3]], q: [f64; 3], tol: f64) -> bool {
    let origin = points[0];
    let mut dir = [0.0; 3];
    let mut len = 0.0;
    for p in points {
        let d = sub(*p, origin);
        let nd = norm3(d);
        if nd > len {
            len = nd;
            dir = d;
        }
    }
    if len <= tol {
        return norm3(sub(q, origin)) <= tol;
    }
    let unit = [dir[0] / len, dir[1] / len, dir[2] / len];
    let t_q = dot3(unit, sub(q, origin));
    // perpendicular residual must vanish
    let proj = [
        origin[0] + t_q * unit[0],
        origin[1] + t_q * unit[1],
        origin[2] + t_q * unit[2],
    ];
    if norm3(sub(q, proj)) > tol {
        return false;
    }
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for p in points {
        let t = dot3(unit, sub(*p, origin));
        t_min = t_min.min(t);
        t_max = t_max.max(t);
    }
    t_q >= t_min - tol && t_q <= t_max + tol
}
