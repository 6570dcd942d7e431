//! Bowyer–Watson Delaunay triangulation with barycentric interpolation.

use serde::{Deserialize, Serialize};

use super::{MdsError, Point};

/// Coincident points are moved apart by this fraction of the bounding-box
/// diagonal (times their duplicate count) before triangulating.
pub const DUPLICATE_NUDGE: f64 = 1e-9;

/// Area-to-diagonal² ratio below which every point is taken as collinear.
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    /// Vertices after duplicate nudging.
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    /// Counter-clockwise index triples.
    pub triangles: Vec<[usize; 3]>,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Positive when `d` lies strictly inside the circumcircle of CCW `a b c`.
fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (ax, ay) = (a[0] - d[0], a[1] - d[1]);
    let (bx, by) = (b[0] - d[0], b[1] - d[1]);
    let (cx, cy) = (c[0] - d[0], c[1] - d[1]);
    (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay)
}

fn nudge_duplicates(points: &[Point], diag: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        let dupes = out.iter().filter(|q| (q[0] - p[0]).abs() <= 1e-15 * diag && (q[1] - p[1]).abs() <= 1e-15 * diag).count();
        if dupes == 0 {
            out.push(p);
        } else {
            let r = DUPLICATE_NUDGE * diag * dupes as f64;
            let a = dupes as f64 * 2.399_963;
            out.push([p[0] + r * a.cos(), p[1] + r * a.sin()]);
        }
    }
    out
}

/// Delaunay triangulation of `points` carrying one scalar per vertex.
pub fn triangulated_backdrop(points: &[Point], values: &[f64]) -> Result<Triangulation, MdsError> {
    if points.len() != values.len() {
        return Err(MdsError::LengthMismatch { expected: points.len(), found: values.len() });
    }
    if points.len() < 3 {
        return Err(MdsError::Degenerate(format!("{} points", points.len())));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MdsError::Degenerate("non-finite coordinate".into()));
    }
    let (lo, hi) = points.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let diag = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    if diag == 0.0 {
        return Err(MdsError::Degenerate("all points coincide".into()));
    }
    let far = (0..points.len()).max_by(|&a, &b| {
        let da = (points[a][0] - points[0][0]).hypot(points[a][1] - points[0][1]);
        let db = (points[b][0] - points[0][0]).hypot(points[b][1] - points[0][1]);
        da.total_cmp(&db)
    });
    let far = points[far.unwrap()];
    let spread = points.iter().map(|&p| cross(points[0], far, p).abs()).fold(0.0, f64::max);
    if spread <= COLLINEAR_TOL * diag * diag {
        return Err(MdsError::Degenerate("all points are collinear".into()));
    }

    let pts = nudge_duplicates(points, diag);
    // unit-scale copy for the predicates
    let unit: Vec<Point> = pts.iter().map(|p| [(p[0] - lo[0]) / diag, (p[1] - lo[1]) / diag]).collect();
    let n = unit.len();
    let m = 1e4;
    let mut verts = unit.clone();
    verts.extend([[-m, -m], [3.0 * m, -m], [-m, 3.0 * m]]);
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for (k, &p) in unit.iter().enumerate() {
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
            tris.into_iter().partition(|t| in_circle(verts[t[0]], verts[t[1]], verts[t[2]], p) > 0.0);
        let edges: Vec<(usize, usize)> = bad.iter().flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]).collect();
        tris = keep;
        for &(a, b) in &edges {
            if !edges.contains(&(b, a)) {
                tris.push([a, b, k]);
            }
        }
    }
    tris.retain(|t| t.iter().all(|&v| v < n));
    fill_hull(&unit, &mut tris);
    tris.sort();
    Ok(Triangulation { points: pts, values: values.to_vec(), triangles: tris })
}

/// Closes concave notches left along the boundary when a hull triangle's
/// circumcircle reached a bounding vertex.
fn fill_hull(p: &[Point], tris: &mut Vec<[usize; 3]>) {
    loop {
        let edges: Vec<(usize, usize)> = tris.iter().flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]).collect();
        let boundary: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, b)| !edges.contains(&(b, a))).collect();
        let notch = boundary.iter().find_map(|&(a, b)| {
            let &(_, c) = boundary.iter().find(|e| e.0 == b)?;
            (cross(p[a], p[b], p[c]) < -COLLINEAR_TOL).then_some([a, c, b])
        });
        match notch {
            Some(t) => tris.push(t),
            None => return,
        }
    }
}

impl Triangulation {
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(self.points[a], self.points[b], self.points[c])
    }

    /// Barycentric weights of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.points[i]);
        let total = cross(a, b, c);
        let la = cross(p, b, c) / total;
        let lb = cross(a, p, c) / total;
        [la, lb, 1.0 - la - lb]
    }

    /// First triangle containing `p` (boundary included, up to rounding).
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        (0..self.triangles.len())
            .map(|t| (t, self.barycentric(t, p)))
            .find(|(_, w)| w.iter().all(|&x| x >= -1e-12))
    }

    /// Linear interpolation of the vertex values; `None` outside the hull.
    pub fn interpolate(&self, p: Point) -> Option<f64> {
        let (t, w) = self.locate(p)?;
        Some(self.triangles[t].iter().zip(w).map(|(&i, wi)| wi * self.values[i]).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        let sq = |p: Point| p[0] * p[0] + p[1] * p[1];
        let ux = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
        let uy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
        ([ux, uy], (a[0] - ux).hypot(a[1] - uy))
    }

    fn empty_circles(tri: &Triangulation) -> bool {
        tri.triangles.iter().all(|t| {
            let (c, r) = circumcircle(tri.points[t[0]], tri.points[t[1]], tri.points[t[2]]);
            tri.points
                .iter()
                .enumerate()
                .filter(|(i, _)| !t.contains(i))
                .all(|(_, p)| (p[0] - c[0]).hypot(p[1] - c[1]) >= r * (1.0 - 1e-9))
        })
    }

    /// Monotone-chain hull area.
    fn hull_area(points: &[Point]) -> f64 {
        let mut p = points.to_vec();
        p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut hull: Vec<Point> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
            for &q in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                    hull.pop();
                }
                hull.push(q);
            }
            hull.pop();
        }
        (0..hull.len()).map(|i| cross([0.0, 0.0], hull[i], hull[(i + 1) % hull.len()])).sum::<f64>() / 2.0
    }

    #[test]
    fn three_points_one_triangle() {
        let tri = triangulated_backdrop(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(tri.triangles.len(), 1);
        assert!(tri.area(0) > 0.0);
    }

    #[test]
    fn convex_quad_two_delaunay_triangles() {
        let pts = [[0.0, 0.0], [2.0, 0.1], [2.2, 1.9], [-0.1, 1.5]];
        let tri = triangulated_backdrop(&pts, &[0.0; 4]).unwrap();
        assert_eq!(tri.triangles.len(), 2);
        assert!(empty_circles(&tri));
    }

    #[test]
    fn vertex_values_are_reproduced() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8], [1.2, 1.1], [0.5, 0.4]];
        let vals = [0.1, 0.5, 0.9, 0.3, 0.7];
        let tri = triangulated_backdrop(&pts, &vals).unwrap();
        for (p, v) in pts.iter().zip(vals) {
            assert!((tri.interpolate(*p).unwrap() - v).abs() < 1e-12);
        }
        assert!(tri.interpolate([5.0, 5.0]).is_none());
    }

    #[test]
    fn collinear_is_degenerate() {
        let err = triangulated_backdrop(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]], &[0.0; 4]).unwrap_err();
        assert!(err.to_string().contains("degenerate configuration"));
        assert!(triangulated_backdrop(&[[0.0, 0.0], [1.0, 1.0]], &[0.0; 2]).is_err());
        assert!(triangulated_backdrop(&[[1.0, 1.0]; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn duplicates_are_nudged() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let tri = triangulated_backdrop(&pts, &[0.0; 4]).unwrap();
        assert_ne!(tri.points[1], tri.points[3]);
        assert!((tri.points[3][0] - 1.0).hypot(tri.points[3][1]) < 1e-8);
        assert!((0..tri.triangles.len()).all(|t| tri.area(t) > 0.0));
    }

    #[test]
    fn random_sets_are_delaunay_and_cover_the_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.random_range(3..60);
            let pts: Vec<Point> = (0..n).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)]).collect();
            let tri = triangulated_backdrop(&pts, &vec![0.5; n]).unwrap();
            assert!((0..tri.triangles.len()).all(|t| tri.area(t) > 0.0));
            let total: f64 = (0..tri.triangles.len()).map(|t| tri.area(t)).sum();
            assert!((total - hull_area(&pts)).abs() < 1e-9 * hull_area(&pts));
            assert!(empty_circles(&tri));
        }
    }

    #[test]
    fn grid_points_cover_the_hull() {
        // cocircular quadruples everywhere
        let pts: Vec<Point> = (0..25).map(|k| [(k % 5) as f64, (k / 5) as f64]).collect();
        let tri = triangulated_backdrop(&pts, &[0.0; 25]).unwrap();
        let total: f64 = (0..tri.triangles.len()).map(|t| tri.area(t)).sum();
        assert!((total - 16.0).abs() < 1e-9);
        assert_eq!(tri.triangles.len(), 32);
    }
}
