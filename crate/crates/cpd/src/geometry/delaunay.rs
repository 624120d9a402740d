//! Incremental Bowyer-Watson Delaunay triangulation.
//!
//! Works on plain `f64` coordinates with scaled epsilon filters instead of
//! exact predicates; points that are cocircular or on an edge within the
//! filter tolerance are absorbed into the insertion cavity, which keeps the
//! surgery valid for jittered-grid inputs where exact ties are rare.

use crate::vec2::Vec2;

use super::GeometryError;

const EPS_REL: f64 = 1e-12;

/// Signed doubled area of (a, b, c); positive when CCW.
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn orient_bound(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x).abs() * (c.y - a.y).abs() + (b.y - a.y).abs() * (c.x - a.x).abs()
}

/// In-circumcircle determinant for CCW triangle (a, b, c) against p.
/// Positive when p is strictly inside; returns (det, magnitude bound).
fn incircle(a: Vec2, b: Vec2, c: Vec2, p: Vec2) -> (f64, f64) {
    let ax = a.x - p.x;
    let ay = a.y - p.y;
    let bx = b.x - p.x;
    let by = b.y - p.y;
    let cx = c.x - p.x;
    let cy = c.y - p.y;
    let az = ax * ax + ay * ay;
    let bz = bx * bx + by * by;
    let cz = cx * cx + cy * cy;

    let det = ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx);
    let bound = ax.abs() * (by * cz).abs()
        + ax.abs() * (bz * cy).abs()
        + ay.abs() * (bx * cz).abs()
        + ay.abs() * (bz * cx).abs()
        + az.abs() * (bx * cy).abs()
        + az.abs() * (by * cx).abs();
    (det, bound)
}

#[derive(Clone)]
struct DTri {
    v: [u32; 3],
    /// adj[i] = triangle index across edge (v[i], v[i+1]), -1 if none.
    adj: [i32; 3],
    alive: bool,
}

struct Mesh {
    pts: Vec<Vec2>,
    tris: Vec<DTri>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl Mesh {
    fn point(&self, i: u32) -> Vec2 {
        self.pts[i as usize]
    }

    fn edge_slot(&self, tri: usize, from: u32, to: u32) -> Option<usize> {
        let v = self.tris[tri].v;
        (0..3).find(|&i| v[i] == from && v[(i + 1) % 3] == to)
    }

    /// Walk from `start` toward the triangle containing p.
    fn locate(&self, start: usize, p: Vec2) -> Result<usize, GeometryError> {
        let mut t = start;
        let mut steps = 0usize;
        let max_steps = 4 * self.tris.len() + 64;
        'walk: loop {
            steps += 1;
            if steps > max_steps {
                break;
            }
            let v = self.tris[t].v;
            for i in 0..3 {
                let a = self.point(v[i]);
                let b = self.point(v[(i + 1) % 3]);
                let det = orient(a, b, p);
                let eps = EPS_REL * orient_bound(a, b, p);
                if det < -eps {
                    let n = self.tris[t].adj[i];
                    if n < 0 {
                        break 'walk;
                    }
                    t = n as usize;
                    continue 'walk;
                }
            }
            return Ok(t);
        }
        // Walk failed (degenerate geometry); scan everything.
        for (i, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            let inside = (0..3).all(|j| {
                let a = self.point(tri.v[j]);
                let b = self.point(tri.v[(j + 1) % 3]);
                orient(a, b, p) >= -EPS_REL * orient_bound(a, b, p)
            });
            if inside {
                return Ok(i);
            }
        }
        Err(GeometryError::Triangulation(
            "point location failed; input may be degenerate".into(),
        ))
    }

    fn in_cavity(&self, tri: usize, p: Vec2, permissive: bool) -> bool {
        let v = self.tris[tri].v;
        let (det, bound) = incircle(self.point(v[0]), self.point(v[1]), self.point(v[2]), p);
        let eps = EPS_REL * bound;
        if permissive {
            det > -eps
        } else {
            det > eps
        }
    }

    /// Grow the cavity of circumcircle-violating triangles around `t0`.
    fn cavity(&mut self, t0: usize, p: Vec2, permissive: bool) -> Vec<usize> {
        self.epoch += 1;
        let epoch = self.epoch;
        let mut cav = vec![t0];
        self.stamp[t0] = epoch;
        let mut head = 0;
        while head < cav.len() {
            let t = cav[head];
            head += 1;
            for i in 0..3 {
                let n = self.tris[t].adj[i];
                if n < 0 {
                    continue;
                }
                let n = n as usize;
                if self.stamp[n] == epoch {
                    continue;
                }
                if self.in_cavity(n, p, permissive) {
                    self.stamp[n] = epoch;
                    cav.push(n);
                }
            }
        }
        cav
    }

    /// Boundary edges of the cavity, directed so the cavity lies on the left,
    /// chained into a closed loop. Returns None when the loop does not close.
    fn boundary_loop(&self, cav: &[usize]) -> Option<Vec<(u32, u32, i32)>> {
        let epoch = self.epoch;
        let mut edges: Vec<(u32, u32, i32)> = Vec::with_capacity(cav.len() + 2);
        for &t in cav {
            let tri = &self.tris[t];
            for i in 0..3 {
                let n = tri.adj[i];
                let outside = n < 0 || self.stamp[n as usize] != epoch;
                if outside {
                    edges.push((tri.v[i], tri.v[(i + 1) % 3], n));
                }
            }
        }
        if edges.is_empty() {
            return None;
        }
        // Chain a -> b -> ... back to the start.
        let mut loop_edges = Vec::with_capacity(edges.len());
        let mut used = vec![false; edges.len()];
        let mut cur = edges[0].0;
        for _ in 0..edges.len() {
            let next = (0..edges.len()).find(|&j| !used[j] && edges[j].0 == cur)?;
            used[next] = true;
            loop_edges.push(edges[next]);
            cur = edges[next].1;
        }
        if cur != loop_edges[0].0 || loop_edges.len() != edges.len() {
            return None;
        }
        Some(loop_edges)
    }

    fn insert(&mut self, idx: u32, last: usize) -> Result<usize, GeometryError> {
        let p = self.point(idx);
        let t0 = self.locate(last, p)?;
        let mut built = self.try_insert(idx, t0, true);
        if built.is_none() {
            built = self.try_insert(idx, t0, false);
        }
        built.ok_or_else(|| {
            GeometryError::Triangulation(format!("cavity retriangulation failed at point {idx}"))
        })
    }

    fn try_insert(&mut self, idx: u32, t0: usize, permissive: bool) -> Option<usize> {
        let p = self.point(idx);
        let cav = self.cavity(t0, p, permissive);
        let boundary = self.boundary_loop(&cav)?;

        // New fan triangles must all be properly oriented before we commit.
        for &(a, b, _) in &boundary {
            let pa = self.point(a);
            let pb = self.point(b);
            if orient(pa, pb, p) <= EPS_REL * orient_bound(pa, pb, p) {
                return None;
            }
        }

        for &t in &cav {
            self.tris[t].alive = false;
        }
        let base = self.tris.len();
        let k = boundary.len();
        for (j, &(a, b, outer)) in boundary.iter().enumerate() {
            let next = base + (j + 1) % k;
            let prev = base + (j + k - 1) % k;
            self.tris.push(DTri {
                v: [a, b, idx],
                adj: [outer, next as i32, prev as i32],
                alive: true,
            });
            self.stamp.push(0);
            if outer >= 0 {
                let slot = self.edge_slot(outer as usize, b, a).expect("mirror edge");
                self.tris[outer as usize].adj[slot] = (base + j) as i32;
            }
        }
        Some(base)
    }
}

fn all_collinear(points: &[Vec2]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let a = points[0];
    let b = points
        .iter()
        .copied()
        .find(|&q| q.dist_sq(a) > 0.0)
        .unwrap_or(a);
    if a == b {
        return true;
    }
    points
        .iter()
        .all(|&c| orient(a, b, c).abs() <= EPS_REL * orient_bound(a, b, c).max(1e-300))
}

/// Delaunay triangulation of a point set; triangles come out CCW and sorted
/// canonically by vertex triple.
pub fn triangulate_points(points: &[Vec2]) -> Result<Vec<[u32; 3]>, GeometryError> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::Triangulation(format!(
            "need at least 3 points, got {n}"
        )));
    }
    if all_collinear(points) {
        return Err(GeometryError::Triangulation(
            "point set is collinear".into(),
        ));
    }

    let (mut lo, mut hi) = (points[0], points[0]);
    for &p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let c = (lo + hi) * 0.5;
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
    let m = 1e5 * span;

    let mut pts = points.to_vec();
    pts.push(Vec2::new(c.x - 3.0 * m, c.y - m));
    pts.push(Vec2::new(c.x + 3.0 * m, c.y - m));
    pts.push(Vec2::new(c.x, c.y + 3.0 * m));
    let sup = [n as u32, n as u32 + 1, n as u32 + 2];

    let mut mesh = Mesh {
        pts,
        tris: vec![DTri {
            v: sup,
            adj: [-1, -1, -1],
            alive: true,
        }],
        stamp: vec![0],
        epoch: 0,
    };

    let mut last = 0usize;
    for i in 0..n as u32 {
        last = mesh.insert(i, last)?;
    }

    let mut out: Vec<[u32; 3]> = mesh
        .tris
        .iter()
        .filter(|t| t.alive && t.v.iter().all(|&v| v < n as u32))
        .map(|t| {
            let mut v = t.v;
            // canonical rotation: smallest index first, orientation preserved
            while v[0] != *v.iter().min().unwrap() {
                v.rotate_left(1);
            }
            v
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Circumcenter of a non-degenerate triangle.
pub fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let d = 2.0 * ((b - a).cross(c - a));
    let asq = a.norm_sq();
    let bsq = b.norm_sq();
    let csq = c.norm_sq();
    Vec2::new(
        (asq * (b.y - c.y) + bsq * (c.y - a.y) + csq * (a.y - b.y)) / d,
        (asq * (c.x - b.x) + bsq * (a.x - c.x) + csq * (b.x - a.x)) / d,
    )
}
