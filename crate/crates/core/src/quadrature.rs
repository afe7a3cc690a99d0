//! Domain and boundary quadrature: ear-clipping triangulation, longest-edge
//! refinement around kernel supports, triangle and Gauss–Legendre rules.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{cross, BoundaryFrame, PolygonalShape};
use crate::Vec2;

/// Symmetric triangle rule in barycentric coordinates; weights sum to one and
/// are scaled by the triangle area.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

impl TriangleRule {
    pub fn centroid() -> Self {
        Self { nodes: vec![[1.0 / 3.0; 3]], weights: vec![1.0], degree: 1 }
    }

    pub fn degree2() -> Self {
        let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
        Self { nodes: vec![[b, a, a], [a, b, a], [a, a, b]], weights: vec![1.0 / 3.0; 3], degree: 2 }
    }

    /// Six-point rule exact for degree 4.
    pub fn degree4() -> Self {
        let a1 = 0.445_948_490_915_964_886_32;
        let w1 = 0.223_381_589_678_011_465_70;
        let a2 = 0.091_576_213_509_770_743_46;
        let w2 = 0.109_951_743_655_321_867_64;
        let (b1, b2) = (1.0 - 2.0 * a1, 1.0 - 2.0 * a2);
        Self {
            nodes: vec![[b1, a1, a1], [a1, b1, a1], [a1, a1, b1], [b2, a2, a2], [a2, b2, a2], [a2, a2, b2]],
            weights: vec![w1, w1, w1, w2, w2, w2],
            degree: 4,
        }
    }

    /// Seven-point Radon rule exact for degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let (b1, b2) = (1.0 - 2.0 * a1, 1.0 - 2.0 * a2);
        Self {
            nodes: vec![[1.0 / 3.0; 3], [b1, a1, a1], [a1, b1, a1], [a1, a1, b1], [b2, a2, a2], [a2, b2, a2], [a2, a2, b2]],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
            degree: 5,
        }
    }

    /// Integrates over the triangle `tri`.
    pub fn apply(&self, tri: &[Vec2; 3], mut integrand: impl FnMut(Vec2) -> f64) -> f64 {
        let area = triangle_area(tri).abs();
        let mut sum = 0.0;
        for (l, w) in self.nodes.iter().zip(&self.weights) {
            let p = tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2];
            sum += w * integrand(p);
        }
        sum * area
    }
}

impl Default for TriangleRule {
    fn default() -> Self {
        Self::degree4()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, `1 ≤ n ≤ 6`; exact for degree `2n − 1`.
    pub fn new(n: usize) -> Result<Self> {
        let (nodes, weights): (Vec<f64>, Vec<f64>) = match n {
            1 => (vec![0.0], vec![2.0]),
            2 => {
                let x = 1.0 / 3f64.sqrt();
                (vec![-x, x], vec![1.0, 1.0])
            }
            3 => {
                let x = (3.0f64 / 5.0).sqrt();
                (vec![-x, 0.0, x], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            4 => {
                let r = 2.0 * (6.0f64 / 5.0).sqrt();
                let x1 = ((3.0 - r) / 7.0).sqrt();
                let x2 = ((3.0 + r) / 7.0).sqrt();
                let w1 = (18.0 + 30f64.sqrt()) / 36.0;
                let w2 = (18.0 - 30f64.sqrt()) / 36.0;
                (vec![-x2, -x1, x1, x2], vec![w2, w1, w1, w2])
            }
            5 => {
                let r = 2.0 * (10.0f64 / 7.0).sqrt();
                let x1 = (5.0 - r).sqrt() / 3.0;
                let x2 = (5.0 + r).sqrt() / 3.0;
                let w0 = 128.0 / 225.0;
                let w1 = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
                let w2 = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
                (vec![-x2, -x1, 0.0, x1, x2], vec![w2, w1, w0, w1, w2])
            }
            6 => {
                let x = [0.238_619_186_083_196_9, 0.661_209_386_466_264_5, 0.932_469_514_203_152_0];
                let w = [0.467_913_934_572_691_0, 0.360_761_573_048_138_6, 0.171_324_492_379_170_3];
                (vec![-x[2], -x[1], -x[0], x[0], x[1], x[2]], vec![w[2], w[1], w[0], w[0], w[1], w[2]])
            }
            _ => return Err(Error::InvalidArgument(format!("Gauss-Legendre rule with {n} nodes not available"))),
        };
        Ok(Self { nodes, weights })
    }

    /// Integrates over `[a, b]`.
    pub fn apply(&self, a: f64, b: f64, mut integrand: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * integrand(mid + half * x);
        }
        sum * half
    }
}

pub fn triangle_area(tri: &[Vec2; 3]) -> f64 {
    0.5 * cross(tri[1] - tri[0], tri[2] - tri[0])
}

fn diameter(tri: &[Vec2; 3]) -> f64 {
    (tri[1] - tri[0]).norm().max((tri[2] - tri[1]).norm()).max((tri[0] - tri[2]).norm())
}

/// Splits at the midpoint of the longest edge; both halves keep the
/// orientation of the parent.
fn bisect(tri: &[Vec2; 3]) -> ([Vec2; 3], [Vec2; 3]) {
    let lens = [(tri[1] - tri[0]).norm(), (tri[2] - tri[1]).norm(), (tri[0] - tri[2]).norm()];
    let e = if lens[0] >= lens[1] && lens[0] >= lens[2] {
        0
    } else if lens[1] >= lens[2] {
        1
    } else {
        2
    };
    let (a, b, c) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
    let m = (a + b) * 0.5;
    ([a, m, c], [m, b, c])
}

/// Distance from `p` to the closed triangle.
fn point_triangle_distance(p: Vec2, tri: &[Vec2; 3]) -> f64 {
    let inside = {
        let d0 = cross(tri[1] - tri[0], p - tri[0]);
        let d1 = cross(tri[2] - tri[1], p - tri[1]);
        let d2 = cross(tri[0] - tri[2], p - tri[2]);
        (d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0 && d2 <= 0.0)
    };
    if inside {
        return 0.0;
    }
    (0..3).map(|i| point_segment_distance(p, tri[i], tri[(i + 1) % 3])).fold(f64::INFINITY, f64::min)
}

pub(crate) fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

fn intersects_any(tri: &[Vec2; 3], disks: &[(Vec2, f64)]) -> bool {
    disks.iter().any(|&(c, r)| point_triangle_distance(c, tri) < r)
}

/// Triangulation of a polygon plus per-triangle refinement level.
#[derive(Debug, Clone)]
pub struct TriangulatedDomain {
    pub points: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub level: Vec<u8>,
}

impl TriangulatedDomain {
    pub fn corners(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| triangle_area(&self.corners(t))).sum()
    }

    /// Plain-text dump: point count, points, triangle count, index triples.
    pub fn write_mesh<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.points.len())?;
        for p in &self.points {
            writeln!(out, "{:.17e} {:.17e}", p.x, p.y)?;
        }
        writeln!(out, "{}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Ear clipping. After each clipped ear the search skips ahead one vertex,
/// which removes every other vertex per sweep and avoids long fans around a
/// single vertex.
pub fn triangulate(shape: &PolygonalShape) -> Result<TriangulatedDomain> {
    let points: Vec<Vec2> = shape.vertices().to_vec();
    let n = points.len();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut triangles = Vec::with_capacity(n - 2);
    let mut cursor = 0usize;
    let mut misses = 0usize;
    while remaining.len() > 3 {
        let m = remaining.len();
        let i = cursor % m;
        let (ip, ic, inx) = (remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]);
        if is_ear(&points, &remaining, ip, ic, inx) {
            triangles.push([ip, ic, inx]);
            remaining.remove(i);
            // i now addresses the former next vertex; step past it
            cursor = i + 1;
            misses = 0;
        } else {
            cursor = i + 1;
            misses += 1;
            if misses > m {
                return Err(Error::Triangulation { remaining: m });
            }
        }
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    let level = vec![0; triangles.len()];
    Ok(TriangulatedDomain { points, triangles, level })
}

fn is_ear(points: &[Vec2], remaining: &[usize], ip: usize, ic: usize, inx: usize) -> bool {
    let (a, b, c) = (points[ip], points[ic], points[inx]);
    let area2 = cross(b - a, c - a);
    if area2 <= 0.0 {
        return false;
    }
    for &j in remaining {
        if j == ip || j == ic || j == inx {
            continue;
        }
        let p = points[j];
        // only reflex vertices can lie inside an ear; testing all keeps this simple
        let d0 = cross(b - a, p - a);
        let d1 = cross(c - b, p - b);
        let d2 = cross(a - c, p - c);
        if d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0 {
            return false;
        }
    }
    true
}

/// Bisects every triangle that meets one of the disks `(anchor, radius)`
/// until its diameter is at most `radius / 4` or `max_level` is reached.
pub fn refine_near_supports(dom: &TriangulatedDomain, anchors: &[Vec2], radius: f64, max_level: u8) -> TriangulatedDomain {
    let disks: Vec<(Vec2, f64)> = anchors.iter().map(|&a| (a, radius)).collect();
    let target = radius / 4.0;
    let mut points = dom.points.clone();
    let mut triangles = Vec::with_capacity(dom.triangles.len());
    let mut level = Vec::with_capacity(dom.triangles.len());
    let mut stack: Vec<([usize; 3], u8)> = Vec::new();
    for (t, &lvl) in dom.triangles.iter().zip(&dom.level) {
        stack.push((*t, lvl));
        while let Some((tri, lvl)) = stack.pop() {
            let corners = [points[tri[0]], points[tri[1]], points[tri[2]]];
            if lvl >= max_level || diameter(&corners) <= target || !intersects_any(&corners, &disks) {
                triangles.push(tri);
                level.push(lvl);
                continue;
            }
            let lens = [
                (corners[1] - corners[0]).norm(),
                (corners[2] - corners[1]).norm(),
                (corners[0] - corners[2]).norm(),
            ];
            let e = if lens[0] >= lens[1] && lens[0] >= lens[2] {
                0
            } else if lens[1] >= lens[2] {
                1
            } else {
                2
            };
            let (a, b, c) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
            points.push((points[a] + points[b]) * 0.5);
            let m = points.len() - 1;
            stack.push(([m, b, c], lvl + 1));
            stack.push(([a, m, c], lvl + 1));
        }
    }
    TriangulatedDomain { points, triangles, level }
}

pub fn integrate_domain(dom: &TriangulatedDomain, integrand: impl Fn(Vec2) -> f64, rule: &TriangleRule) -> f64 {
    (0..dom.triangles.len()).map(|t| rule.apply(&dom.corners(t), &integrand)).sum()
}

/// A point on the polygon boundary handed to boundary integrands.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub pos: Vec2,
    pub edge: usize,
    /// Position along the edge, 0 at its start vertex and 1 at its end.
    pub t: f64,
    pub normal: Vec2,
    pub tangent: Vec2,
}

/// Per-edge Gauss–Legendre with the piecewise-constant edge normal.
pub fn integrate_boundary(
    shape: &PolygonalShape,
    frame: &BoundaryFrame,
    integrand: impl Fn(&BoundaryPoint) -> f64,
    nodes_per_edge: usize,
) -> Result<f64> {
    let rule = GaussLegendre::new(nodes_per_edge)?;
    let mut sum = 0.0;
    for (e, (a, b)) in shape.edges().enumerate() {
        let len = frame.edge_lengths[e];
        let normal = frame.edge_normals[e];
        let tangent = frame.edge_tangents[e];
        sum += len
            * rule.apply(0.0, 1.0, |t| {
                integrand(&BoundaryPoint { pos: a + (b - a) * t, edge: e, t, normal, tangent })
            });
    }
    Ok(sum)
}

/// Resolution of local quadrature around kernel supports.
#[derive(Debug, Clone)]
pub struct LocalQuadrature {
    pub rule: TriangleRule,
    pub line_rule: GaussLegendre,
    /// Triangles meeting a support are refined to diameter ≤ `h_factor · σ`.
    pub h_factor: f64,
    /// Kernels are only C² at their centre; pieces closer to a centre than
    /// their own diameter are refined further, down to `center_h_factor · σ`.
    pub center_h_factor: f64,
    pub max_level: u8,
}

impl Default for LocalQuadrature {
    fn default() -> Self {
        Self {
            rule: TriangleRule::degree4(),
            line_rule: GaussLegendre::new(4).unwrap(),
            h_factor: 0.125,
            center_h_factor: 1.0 / 64.0,
            max_level: 40,
        }
    }
}

/// Triangles covering `Ω ∩ (∪ disks)`, cut out of a domain triangulation and
/// refined. Pieces that miss every disk are dropped, so integrands must
/// vanish outside the disks.
#[derive(Debug, Clone)]
pub struct Patch {
    pub triangles: Vec<[Vec2; 3]>,
}

impl Patch {
    pub fn covering(dom: &TriangulatedDomain, disks: &[(Vec2, f64)], quad: &LocalQuadrature) -> Self {
        let centers: Vec<Vec2> = disks.iter().map(|d| d.0).collect();
        Self::covering_with_kinks(dom, disks, &centers, quad)
    }

    /// Like [`Self::covering`], grading the refinement towards `kinks`
    /// instead of the disk centres.
    pub fn covering_with_kinks(dom: &TriangulatedDomain, disks: &[(Vec2, f64)], kinks: &[Vec2], quad: &LocalQuadrature) -> Self {
        if disks.is_empty() {
            return Self { triangles: Vec::new() };
        }
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        let mut rmin = f64::INFINITY;
        for &(c, r) in disks {
            lo = lo.inf(&(c - Vec2::repeat(r)));
            hi = hi.sup(&(c + Vec2::repeat(r)));
            rmin = rmin.min(r);
        }
        let target = quad.h_factor * rmin;
        let center_target = quad.center_h_factor * rmin;
        let mut triangles = Vec::new();
        // each piece carries the disks and kinks that may still touch it,
        // a subset of its parent's
        let all_disks: Vec<u32> = (0..disks.len() as u32).collect();
        let all_kinks: Vec<u32> = (0..kinks.len() as u32).collect();
        let mut stack: Vec<([Vec2; 3], u8, Vec<u32>, Vec<u32>)> = Vec::new();
        for t in 0..dom.triangles.len() {
            let tri = dom.corners(t);
            let tlo = tri[0].inf(&tri[1]).inf(&tri[2]);
            let thi = tri[0].sup(&tri[1]).sup(&tri[2]);
            if thi.x <= lo.x || thi.y <= lo.y || tlo.x >= hi.x || tlo.y >= hi.y {
                continue;
            }
            let clipped = clip_to_box(&tri, lo, hi);
            for k in 1..clipped.len().saturating_sub(1) {
                let piece = [clipped[0], clipped[k], clipped[k + 1]];
                if triangle_area(&piece) <= 0.0 {
                    continue;
                }
                stack.push((piece, 0, all_disks.clone(), all_kinks.clone()));
            }
            while let Some((piece, lvl, near_disks, near_kinks)) = stack.pop() {
                let near_disks: Vec<u32> = near_disks
                    .into_iter()
                    .filter(|&i| {
                        let (c, r) = disks[i as usize];
                        point_triangle_distance(c, &piece) < r
                    })
                    .collect();
                if near_disks.is_empty() {
                    continue;
                }
                let diam = diameter(&piece);
                let near_kinks: Vec<u32> = if diam > center_target {
                    near_kinks.into_iter().filter(|&i| point_triangle_distance(kinks[i as usize], &piece) < diam).collect()
                } else {
                    Vec::new()
                };
                if lvl >= quad.max_level || (diam <= target && near_kinks.is_empty()) {
                    triangles.push(piece);
                    continue;
                }
                let (a, b) = bisect(&piece);
                stack.push((b, lvl + 1, near_disks.clone(), near_kinks.clone()));
                stack.push((a, lvl + 1, near_disks, near_kinks));
            }
        }
        Self { triangles }
    }

    /// Every triangle of the domain, unrefined.
    pub fn from_domain(dom: &TriangulatedDomain) -> Self {
        Self { triangles: (0..dom.triangles.len()).map(|t| dom.corners(t)).collect() }
    }

    /// Visits every quadrature node with its weight (rule weight times
    /// triangle area), triangle by triangle.
    pub fn for_each_node(&self, rule: &TriangleRule, mut visit: impl FnMut(Vec2, f64)) {
        for tri in &self.triangles {
            let area = triangle_area(tri);
            for (l, w) in rule.nodes.iter().zip(&rule.weights) {
                visit(tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2], w * area);
            }
        }
    }

    pub fn integrate(&self, rule: &TriangleRule, integrand: impl FnMut(Vec2) -> f64) -> f64 {
        let mut integrand = integrand;
        self.triangles.iter().map(|tri| rule.apply(tri, &mut integrand)).sum()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(triangle_area).sum()
    }

    /// Evaluates several integrands at once, sharing the quadrature nodes.
    pub fn integrate_many<const N: usize>(&self, rule: &TriangleRule, mut integrand: impl FnMut(Vec2) -> [f64; N]) -> [f64; N] {
        let mut total = [0.0; N];
        for tri in &self.triangles {
            let area = triangle_area(tri);
            let mut local = [0.0; N];
            for (l, w) in rule.nodes.iter().zip(&rule.weights) {
                let p = tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2];
                let v = integrand(p);
                for k in 0..N {
                    local[k] += w * v[k];
                }
            }
            for k in 0..N {
                total[k] += area * local[k];
            }
        }
        total
    }
}

/// Sutherland–Hodgman clip of a convex polygon against an axis-aligned box.
fn clip_to_box(tri: &[Vec2; 3], lo: Vec2, hi: Vec2) -> Vec<Vec2> {
    let mut poly: Vec<Vec2> = tri.to_vec();
    // (axis, bound, keep_greater)
    let planes = [(0usize, lo.x, true), (0, hi.x, false), (1, lo.y, true), (1, hi.y, false)];
    for (axis, bound, keep_greater) in planes {
        if poly.is_empty() {
            break;
        }
        let inside = |p: &Vec2| if keep_greater { p[axis] >= bound } else { p[axis] <= bound };
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let cur = poly[i];
            let next = poly[(i + 1) % poly.len()];
            let (ci, ni) = (inside(&cur), inside(&next));
            if ci {
                out.push(cur);
            }
            if ci != ni {
                let t = (bound - cur[axis]) / (next[axis] - cur[axis]);
                let mut p = cur + (next - cur) * t;
                p[axis] = bound;
                out.push(p);
            }
        }
        poly = out;
    }
    poly
}

/// Sub-segments of the boundary inside a union of disks, each no longer
/// than `h_factor · σ_min` and split at the foot points of the disk centres.
#[derive(Debug, Clone)]
pub struct BoundaryPatch {
    /// `(edge, t_start, t_end)` in edge parameters.
    pub pieces: Vec<(usize, f64, f64)>,
}

impl BoundaryPatch {
    pub fn covering(shape: &PolygonalShape, frame: &BoundaryFrame, disks: &[(Vec2, f64)], h_factor: f64) -> Self {
        let mut pieces = Vec::new();
        if disks.is_empty() {
            return Self { pieces };
        }
        let rmin = disks.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        for (e, (a, b)) in shape.edges().enumerate() {
            let len = frame.edge_lengths[e];
            let dir = (b - a) / len;
            let mut intervals: Vec<(f64, f64)> = Vec::new();
            let mut cuts: Vec<f64> = Vec::new();
            for &(c, r) in disks {
                // |a + s·dir − c|² = r², s in arc length along the edge
                let w = a - c;
                let bq = w.dot(&dir);
                let cq = w.norm_squared() - r * r;
                let disc = bq * bq - cq;
                if disc <= 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                let s0 = (-bq - sq).max(0.0);
                let s1 = (-bq + sq).min(len);
                if s1 <= s0 {
                    continue;
                }
                intervals.push((s0 / len, s1 / len));
                let foot = (-bq) / len;
                if foot > 0.0 && foot < 1.0 {
                    cuts.push(foot);
                }
            }
            if intervals.is_empty() {
                continue;
            }
            intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for iv in intervals {
                match merged.last_mut() {
                    Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
                    _ => merged.push(iv),
                }
            }
            cuts.sort_by(f64::total_cmp);
            let max_dt = h_factor * rmin / len;
            for (t0, t1) in merged {
                let mut breaks = vec![t0];
                breaks.extend(cuts.iter().copied().filter(|&c| c > t0 && c < t1));
                breaks.push(t1);
                for w in breaks.windows(2) {
                    let span = w[1] - w[0];
                    let parts = ((span / max_dt).ceil() as usize).max(1);
                    for k in 0..parts {
                        let s = w[0] + span * k as f64 / parts as f64;
                        let t = w[0] + span * (k + 1) as f64 / parts as f64;
                        pieces.push((e, s, t));
                    }
                }
            }
        }
        Self { pieces }
    }

    /// The whole boundary, every edge cut into pieces of at most `max_len`.
    pub fn whole(frame: &BoundaryFrame, max_len: f64) -> Self {
        let mut pieces = Vec::new();
        for (e, &len) in frame.edge_lengths.iter().enumerate() {
            let parts = ((len / max_len).ceil() as usize).max(1);
            for k in 0..parts {
                pieces.push((e, k as f64 / parts as f64, (k + 1) as f64 / parts as f64));
            }
        }
        Self { pieces }
    }

    /// Visits every Gauss–Legendre node with its arc-length weight.
    pub fn for_each_node(
        &self,
        shape: &PolygonalShape,
        frame: &BoundaryFrame,
        rule: &GaussLegendre,
        mut visit: impl FnMut(&BoundaryPoint, f64),
    ) {
        for &(e, t0, t1) in &self.pieces {
            let (a, b) = shape.edge(e);
            let half = 0.5 * (t1 - t0) * frame.edge_lengths[e];
            let mid = 0.5 * (t0 + t1);
            let normal = frame.edge_normals[e];
            let tangent = frame.edge_tangents[e];
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = mid + 0.5 * (t1 - t0) * x;
                visit(&BoundaryPoint { pos: a + (b - a) * t, edge: e, t, normal, tangent }, w * half);
            }
        }
    }

    pub fn integrate(
        &self,
        shape: &PolygonalShape,
        frame: &BoundaryFrame,
        rule: &GaussLegendre,
        mut integrand: impl FnMut(&BoundaryPoint) -> f64,
    ) -> f64 {
        let mut sum = 0.0;
        for &(e, t0, t1) in &self.pieces {
            let (a, b) = shape.edge(e);
            let len = frame.edge_lengths[e];
            let normal = frame.edge_normals[e];
            let tangent = frame.edge_tangents[e];
            sum += len
                * rule.apply(t0, t1, |t| integrand(&BoundaryPoint { pos: a + (b - a) * t, edge: e, t, normal, tangent }));
        }
        sum
    }
}
