#![allow(dead_code)]

use nalgebra::DMatrix;
use shapenewton::geometry::{build_frame, PolygonalShape};
use shapenewton::shape_calculus::{vertex_basis, Discretization};
use shapenewton::{Vec2, WendlandKernel};

/// Circle of radius `r` with vertices at `θ = t + eps·sin t` for uniform `t`,
/// so the spacing varies smoothly.
pub fn warped_circle(r: f64, eps: f64, n: usize) -> PolygonalShape {
    let vertices = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let th = t + eps * t.sin();
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    PolygonalShape::new(vertices).unwrap()
}

/// Largest angle between the vertex normals and the exact circle normals.
pub fn circle_normal_error(r: f64, eps: f64, n: usize) -> f64 {
    let shape = warped_circle(r, eps, n);
    let frame = build_frame(&shape);
    shape
        .vertices()
        .iter()
        .zip(&frame.vertex_normals)
        .map(|(x, nu)| (x / x.norm() - nu).norm())
        .fold(0.0, f64::max)
}

/// Largest vertex curvature error on the ellipse `x²/a² + y²/b² = 1`.
pub fn ellipse_curvature_error(a: f64, b: f64, n: usize) -> f64 {
    let shape = PolygonalShape::ellipse(Vec2::zeros(), a, b, n).unwrap();
    let frame = build_frame(&shape);
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let exact = a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5);
            (frame.curvature[i] - exact).abs()
        })
        .fold(0.0, f64::max)
}

pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub fn gram(points: &[Vec2], sigma: f64) -> DMatrix<f64> {
    let k = WendlandKernel::new(sigma).unwrap();
    DMatrix::from_fn(points.len(), points.len(), |i, j| k.eval(points[i], points[j]))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Largest `|φ(|x − y|/σ)·(ν_x · τ(y))|` over boundary vertices `y` in the
/// support of each vertex basis field.
pub fn tangential_max(shape: &PolygonalShape, sigma: f64) -> f64 {
    let disc = Discretization::new(shape.clone()).unwrap();
    let basis = vertex_basis(&disc, sigma).unwrap();
    let n = shape.len();
    let mut worst: f64 = 0.0;
    for b in &basis {
        for j in 0..n {
            let y = shape.vertex(j);
            let tau = (shape.vertex(j + 1) - shape.vertex(j + n - 1)).normalize();
            worst = worst.max(b.kernel_value(y) * b.normal.dot(&tau).abs());
        }
    }
    worst
}
