//! Closed polygonal boundaries, their normal/curvature frame and arc-length
//! resampling.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

/// Relative threshold below which a vertex triple is treated as collinear.
const COLLINEAR_TOL: f64 = 1e-14;

/// A closed, counter-clockwise, simple polygon. The closing edge runs from
/// the last vertex back to the first; the first vertex is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalShape {
    vertices: Vec<Vec2>,
}

impl PolygonalShape {
    /// Validates the vertex loop. Clockwise input is reversed rather than
    /// rejected.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        validate_loop(&vertices)?;
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        check_simple(&vertices)?;
        Ok(Self { vertices })
    }

    /// Regular `n`-gon inscribed in the circle of the given radius, first
    /// vertex at angle zero.
    pub fn circle(center: Vec2, radius: f64, n: usize) -> Result<Self> {
        Self::ellipse(center, radius, radius, n)
    }

    /// `n` points of the axis-aligned ellipse, uniform in the angular
    /// parameter.
    pub fn ellipse(center: Vec2, a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!("ellipse semi-axes must be positive, got {a}, {b}")));
        }
        let vertices = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                center + Vec2::new(a * t.cos(), b * t.sin())
            })
            .collect();
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i % self.vertices.len()]
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1 (mod n)`.
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertex(i), self.vertex(i + 1))
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        (0..self.len()).map(move |i| self.edge(i))
    }

    pub fn area(&self) -> f64 {
        shoelace_area(self)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Distances between consecutive vertices, `gaps()[i] = |x_{i+1} - x_i|`.
    pub fn gaps(&self) -> Vec<f64> {
        self.edges().map(|(a, b)| (b - a).norm()).collect()
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps().into_iter().fold(0.0, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn gap_ratio(&self) -> f64 {
        self.max_gap() / self.min_gap()
    }

    /// Moves every vertex by `displacement(i, x_i)`. Unlike [`Self::new`] the
    /// orientation must survive: a deformation that turns the loop clockwise
    /// is an error.
    pub fn displaced(&self, mut displacement: impl FnMut(usize, Vec2) -> Vec2) -> Result<Self> {
        let vertices: Vec<Vec2> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &x)| x + displacement(i, x))
            .collect();
        validate_loop(&vertices)?;
        if signed_area(&vertices) <= 0.0 {
            return Err(Error::OrientationFlip);
        }
        check_simple(&vertices)?;
        Ok(Self { vertices })
    }

    /// Position on the arc-length parameterized boundary, `s` taken modulo the
    /// perimeter.
    pub fn point_at_arc(&self, s: f64) -> Vec2 {
        let frame_arc = arc_coordinates(self);
        let total = *frame_arc.last().unwrap();
        point_on_arc(self, &frame_arc, s.rem_euclid(total))
    }
}

fn validate_loop(vertices: &[Vec2]) -> Result<()> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::TooFewVertices(n));
    }
    for i in 0..n {
        let j = (i + 1) % n;
        if (vertices[j] - vertices[i]).norm() == 0.0 {
            return Err(Error::DuplicateVertex(i, j));
        }
        if !vertices[i].x.is_finite() || !vertices[i].y.is_finite() {
            return Err(Error::InvalidArgument(format!("vertex {i} is not finite")));
        }
    }
    if signed_area(vertices) == 0.0 {
        return Err(Error::ZeroArea);
    }
    Ok(())
}

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(b - a, c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub(crate) fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    if p1.x.max(p2.x) < q1.x.min(q2.x)
        || q1.x.max(q2.x) < p1.x.min(p2.x)
        || p1.y.max(p2.y) < q1.y.min(q2.y)
        || q1.y.max(q2.y) < p1.y.min(p2.y)
    {
        return false;
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// O(n²) pairwise edge test; adjacent edges share an endpoint and are skipped.
fn check_simple(vertices: &[Vec2]) -> Result<()> {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(Error::SelfIntersection(i, j));
            }
        }
    }
    Ok(())
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n])).sum::<f64>()
}

/// Shoelace area; positive because shapes are stored counter-clockwise.
pub fn shoelace_area(shape: &PolygonalShape) -> f64 {
    signed_area(&shape.vertices)
}

/// Normals, tangents, curvature and arc coordinates of a polygon.
#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    /// Outward unit normal of edge `i` (from vertex `i` to `i + 1`).
    pub edge_normals: Vec<Vec2>,
    pub edge_tangents: Vec<Vec2>,
    pub edge_lengths: Vec<f64>,
    /// Normalized sum of the two adjacent edge normals.
    pub vertex_normals: Vec<Vec2>,
    /// Signed Menger curvature, positive at convex vertices.
    pub curvature: Vec<f64>,
    /// Cumulative arc length, `n + 1` entries from 0 to the perimeter.
    pub arc: Vec<f64>,
    pub length: f64,
}

impl BoundaryFrame {
    /// Curvature at parameter `t ∈ [0, 1]` along edge `i`, linearly
    /// interpolated between the vertex values.
    pub fn edge_curvature(&self, i: usize, t: f64) -> f64 {
        let n = self.curvature.len();
        (1.0 - t) * self.curvature[i] + t * self.curvature[(i + 1) % n]
    }
}

/// Outward normal of a counter-clockwise tangent.
pub fn outward_normal(tangent: Vec2) -> Vec2 {
    Vec2::new(tangent.y, -tangent.x)
}

pub fn build_frame(shape: &PolygonalShape) -> BoundaryFrame {
    let n = shape.len();
    let mut edge_tangents = Vec::with_capacity(n);
    let mut edge_lengths = Vec::with_capacity(n);
    for (a, b) in shape.edges() {
        let d = b - a;
        let len = d.norm();
        edge_lengths.push(len);
        edge_tangents.push(d / len);
    }
    let edge_normals: Vec<Vec2> = edge_tangents.iter().map(|&t| outward_normal(t)).collect();
    let vertex_normals = (0..n)
        .map(|i| {
            let s = edge_normals[(i + n - 1) % n] + edge_normals[i];
            let norm = s.norm();
            if norm > 0.0 {
                s / norm
            } else {
                // hairpin: the two edges fold back onto each other
                outward_normal(edge_tangents[i])
            }
        })
        .collect();
    let curvature = (0..n)
        .map(|i| menger_curvature(shape.vertex(i + n - 1), shape.vertex(i), shape.vertex(i + 1)))
        .collect();
    let arc = arc_coordinates(shape);
    let length = arc[n];
    BoundaryFrame { edge_normals, edge_tangents, edge_lengths, vertex_normals, curvature, arc, length }
}

/// `4·A(p, q, r) / (|p−q||q−r||p−r|)` with the signed triangle area, zero for
/// (numerically) collinear triples.
pub fn menger_curvature(prev: Vec2, cur: Vec2, next: Vec2) -> f64 {
    let a = (cur - prev).norm();
    let b = (next - cur).norm();
    let c = (next - prev).norm();
    let area = 0.5 * orient(prev, cur, next);
    if area.abs() <= COLLINEAR_TOL * a * b || c == 0.0 {
        return 0.0;
    }
    4.0 * area / (a * b * c)
}

fn arc_coordinates(shape: &PolygonalShape) -> Vec<f64> {
    let mut arc = Vec::with_capacity(shape.len() + 1);
    let mut s = 0.0;
    arc.push(0.0);
    for (a, b) in shape.edges() {
        s += (b - a).norm();
        arc.push(s);
    }
    arc
}

fn point_on_arc(shape: &PolygonalShape, arc: &[f64], s: f64) -> Vec2 {
    let n = shape.len();
    // first edge whose end lies beyond s
    let i = arc[1..].partition_point(|&e| e <= s).min(n - 1);
    let (a, b) = shape.edge(i);
    let h = arc[i + 1] - arc[i];
    let t = ((s - arc[i]) / h).clamp(0.0, 1.0);
    a + (b - a) * t
}

/// Replaces the vertices by `N = round(L / target_spacing)` points at a uniform
/// partition of the arc-length parameter, starting at vertex 0.
pub fn resample_uniform(shape: &PolygonalShape, target_spacing: f64) -> Result<PolygonalShape> {
    let arc = arc_coordinates(shape);
    let total = arc[shape.len()];
    if !(target_spacing > 0.0 && target_spacing < total / 3.0) {
        return Err(Error::InvalidArgument(format!(
            "target spacing {target_spacing} must lie in (0, L/3) with L = {total}"
        )));
    }
    let count = ((total / target_spacing).round() as usize).max(3);
    let step = total / count as f64;
    let vertices = (0..count).map(|j| point_on_arc(shape, &arc, j as f64 * step)).collect();
    PolygonalShape::new(vertices).map_err(|e| Error::MeshCollapse(Box::new(e)))
}

/// Header line written before polyline data so plotting tools can address the
/// columns by name.
pub const POLYLINE_HEADER: &str = "xcoord ycoord";

pub fn write_polyline<W: Write>(shape: &PolygonalShape, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{POLYLINE_HEADER}")?;
    for v in shape.vertices() {
        writeln!(out, "{:.17e} {:.17e}", v.x, v.y)?;
    }
    Ok(())
}

/// Reads "x y" pairs, one per line. Blank lines, `#` comments and a leading
/// non-numeric header line are skipped.
pub fn read_polyline<R: BufRead>(input: R) -> Result<PolygonalShape> {
    let mut vertices = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => vertices.push(Vec2::new(v[0], v[1])),
            None if vertices.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Parse { line: lineno + 1, message: format!("expected two numbers, got {trimmed:?}") })
            }
        }
    }
    PolygonalShape::new(vertices)
}

/// 2x2 rotation by +90 degrees.
pub fn rotation_ccw() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}
