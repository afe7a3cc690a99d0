//! First and second shape derivatives of `J(Ω) = ∫_Ω f`: assembly over the
//! approximate-normal basis, finite-difference oracles and step-size bounds
//! in the Micheletti metric.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BasisCombination, BasisField, ScalarField, VectorField, WendlandKernel};
use crate::geometry::{build_frame, BoundaryFrame, PolygonalShape};
use crate::quadrature::{triangulate, BoundaryPatch, LocalQuadrature, Patch, TriangulatedDomain};
use crate::{Mat2, Vec2};

/// A shape together with everything quadrature needs: its frame and an
/// ear-clipping triangulation.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub shape: PolygonalShape,
    pub frame: BoundaryFrame,
    pub domain: TriangulatedDomain,
    pub quad: LocalQuadrature,
}

impl Discretization {
    pub fn new(shape: PolygonalShape) -> Result<Self> {
        Self::with_quadrature(shape, LocalQuadrature::default())
    }

    pub fn with_quadrature(shape: PolygonalShape, quad: LocalQuadrature) -> Result<Self> {
        let frame = build_frame(&shape);
        let domain = triangulate(&shape)?;
        Ok(Self { shape, frame, domain, quad })
    }

    pub fn patch(&self, disks: &[(Vec2, f64)]) -> Patch {
        Patch::covering(&self.domain, disks, &self.quad)
    }

    pub fn boundary_patch(&self, disks: &[(Vec2, f64)]) -> BoundaryPatch {
        BoundaryPatch::covering(&self.shape, &self.frame, disks, self.quad.h_factor)
    }

    /// Domain region outside of which every field in `fields` vanishes: the
    /// support of the first compactly supported one, widened by `margin`, or
    /// the whole domain.
    fn region(&self, fields: &[&dyn VectorField], margin: f64) -> Patch {
        match fields.iter().find_map(|f| f.support()) {
            Some(disks) => {
                let widened: Vec<(Vec2, f64)> = disks.iter().map(|&(c, r)| (c, r + margin)).collect();
                let kinks: Vec<Vec2> = disks.iter().map(|d| d.0).collect();
                Patch::covering_with_kinks(&self.domain, &widened, &kinks, &self.quad)
            }
            None => Patch::from_domain(&self.domain),
        }
    }

    fn boundary_region(&self, fields: &[&dyn VectorField]) -> BoundaryPatch {
        match fields.iter().find_map(|f| f.support()) {
            Some(disks) => self.boundary_patch(&disks),
            None => BoundaryPatch::whole(&self.frame, self.frame.length / (8.0 * self.shape.len() as f64)),
        }
    }
}

/// One basis field per vertex, anchored there with the averaged vertex
/// normal.
pub fn vertex_basis(disc: &Discretization, sigma: f64) -> Result<Vec<BasisField>> {
    let kernel = WendlandKernel::new(sigma)?;
    Ok(disc
        .shape
        .vertices()
        .iter()
        .zip(&disc.frame.vertex_normals)
        .map(|(&x, &n)| BasisField::new(x, n, kernel))
        .collect())
}

/// `J(Ω) = ∫_Ω f` with the degree-4 rule on the unrefined triangulation,
/// exact for the polynomial builtin densities.
pub fn eval_j(disc: &Discretization, field: &dyn ScalarField) -> f64 {
    Patch::from_domain(&disc.domain).integrate(&disc.quad.rule, |x| field.value(x))
}

/// `L_i = ∫_Ω ∇f·v_i + div(v_i) f`.
pub fn assemble_load(disc: &Discretization, field: &dyn ScalarField, basis: &[BasisField]) -> DVector<f64> {
    let values: Vec<f64> = basis
        .par_iter()
        .map(|b| {
            let patch = disc.patch(&[(b.anchor, b.sigma())]);
            let mut sum = 0.0;
            patch.for_each_node(&disc.quad.rule, |y, w| {
                let k = b.kernel_value(y);
                if k == 0.0 {
                    return;
                }
                let g = b.kernel_grad(y);
                sum += w * (k * field.grad(y).dot(&b.normal) + b.normal.dot(&g) * field.value(y));
            });
            sum
        })
        .collect();
    DVector::from_vec(values)
}

/// The same load through the boundary form `∫_{∂Ω} f v_i·ν`.
pub fn assemble_load_boundary(disc: &Discretization, field: &dyn ScalarField, basis: &[BasisField]) -> DVector<f64> {
    let values: Vec<f64> = basis
        .par_iter()
        .map(|b| {
            let patch = disc.boundary_patch(&[(b.anchor, b.sigma())]);
            let mut sum = 0.0;
            patch.for_each_node(&disc.shape, &disc.frame, &disc.quad.line_rule, |p, w| {
                sum += w * field.value(p.pos) * b.kernel_value(p.pos) * b.normal.dot(&p.normal);
            });
            sum
        })
        .collect();
    DVector::from_vec(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianKind {
    H1,
    H2,
    MetricH1ring,
    Identity,
}

impl std::fmt::Display for HessianKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            HessianKind::H1 => "H1",
            HessianKind::H2 => "H2",
            HessianKind::MetricH1ring => "metric H1ring",
            HessianKind::Identity => "identity",
        };
        f.write_str(name)
    }
}

/// Matrix over the active basis and the load vector it is solved against.
#[derive(Debug, Clone)]
pub struct HessianSystem {
    pub matrix: DMatrix<f64>,
    pub load: DVector<f64>,
    pub kind: HessianKind,
    pub sigma: f64,
    pub anchors: Vec<Vec2>,
}

impl HessianSystem {
    /// `‖A‖₁ ‖A⁻¹‖₁`, infinite for singular matrices.
    pub fn condition_estimate(&self) -> f64 {
        condition_estimate(&self.matrix)
    }

    /// `‖M − Mᵀ‖_∞ / ‖M‖_∞` in the max-row-sum norm.
    pub fn symmetry_defect(&self) -> f64 {
        let norm = inf_norm(&self.matrix);
        if norm == 0.0 {
            return 0.0;
        }
        inf_norm(&(&self.matrix - self.matrix.transpose())) / norm
    }
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => one_norm(m) * one_norm(&inv),
        None => f64::INFINITY,
    }
}

/// Indices `j` whose support meets that of `i`, ascending.
pub fn support_neighbors(basis: &[BasisField]) -> Vec<Vec<usize>> {
    basis
        .iter()
        .map(|bi| {
            basis
                .iter()
                .enumerate()
                .filter(|(_, bj)| (bi.anchor - bj.anchor).norm() < bi.sigma() + bj.sigma())
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

fn common_sigma(basis: &[BasisField]) -> f64 {
    basis.iter().map(|b| b.sigma()).fold(0.0, f64::max)
}

/// Pointwise integrand `T₁(X):∂Y + T₀(X)·Y`, written in its symmetric form
/// `f divX divY + (∇f·X) divY + (∇f·Y) divX − f tr(∂X∂Y) + Yᵀ∇²f X`.
pub fn h1_integrand(f: f64, grad: Vec2, hess: &Mat2, x: Vec2, dx: &Mat2, y: Vec2, dy: &Mat2) -> f64 {
    let div_x = dx.trace();
    let div_y = dy.trace();
    f * div_x * div_y + grad.dot(&x) * div_y + grad.dot(&y) * div_x - f * (dx * dy).trace() + y.dot(&(hess * x))
}

/// First shape Hessian over the basis. Row `i` is integrated over the
/// support of `v_i` only, so the symmetry of the result is a genuine check
/// on the quadrature.
pub fn assemble_h1(disc: &Discretization, field: &dyn ScalarField, basis: &[BasisField]) -> HessianSystem {
    let n = basis.len();
    let neighbors = support_neighbors(basis);
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let bi = &basis[i];
            let nbrs = &neighbors[i];
            let kinks: Vec<Vec2> = nbrs.iter().map(|&j| basis[j].anchor).collect();
            let patch = Patch::covering_with_kinks(&disc.domain, &[(bi.anchor, bi.sigma())], &kinks, &disc.quad);
            let mut row = vec![0.0; nbrs.len()];
            let mut load = 0.0;
            patch.for_each_node(&disc.quad.rule, |y, w| {
                if !bi.in_support(y) {
                    return;
                }
                let (vi, ji) = bi.eval(y);
                let f = field.value(y);
                let g = field.grad(y);
                let h = field.hess(y);
                load += w * (g.dot(&vi) + ji.trace() * f);
                for (slot, &j) in row.iter_mut().zip(nbrs) {
                    let bj = &basis[j];
                    if !bj.in_support(y) {
                        continue;
                    }
                    let (vj, jj) = bj.eval(y);
                    *slot += w * h1_integrand(f, g, &h, vi, &ji, vj, &jj);
                }
            });
            let mut dense = vec![0.0; n];
            for (v, &j) in row.iter().zip(nbrs) {
                dense[j] = *v;
            }
            (dense, load)
        })
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    let mut load = DVector::zeros(n);
    for (i, (row, l)) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
        load[i] = l;
    }
    HessianSystem { matrix, load, kind: HessianKind::H1, sigma: common_sigma(basis), anchors: anchors(basis) }
}

fn anchors(basis: &[BasisField]) -> Vec<Vec2> {
    basis.iter().map(|b| b.anchor).collect()
}

/// Upper triangle integrated along the boundary part of the support of
/// `v_i`, mirrored to the lower one.
fn assemble_boundary_symmetric(
    disc: &Discretization,
    basis: &[BasisField],
    entry: impl Fn(&crate::quadrature::BoundaryPoint, &BasisField, &BasisField) -> f64 + Sync,
) -> DMatrix<f64> {
    let n = basis.len();
    let neighbors = support_neighbors(basis);
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let bi = &basis[i];
            let upper: Vec<usize> = neighbors[i].iter().copied().filter(|&j| j >= i).collect();
            let patch = disc.boundary_patch(&[(bi.anchor, bi.sigma())]);
            let mut row = vec![0.0; upper.len()];
            patch.for_each_node(&disc.shape, &disc.frame, &disc.quad.line_rule, |p, w| {
                if !bi.in_support(p.pos) {
                    return;
                }
                for (slot, &j) in row.iter_mut().zip(&upper) {
                    if basis[j].in_support(p.pos) {
                        *slot += w * entry(p, bi, &basis[j]);
                    }
                }
            });
            upper.into_iter().zip(row).collect()
        })
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row {
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    matrix
}

/// Second shape Hessian `∫_{∂Ω} (∇f·ν + κf)(v_i·ν)(v_j·ν)`, with `κ`
/// interpolated linearly along each edge from the vertex curvatures.
pub fn assemble_h2(disc: &Discretization, field: &dyn ScalarField, basis: &[BasisField]) -> HessianSystem {
    let frame = &disc.frame;
    let matrix = assemble_boundary_symmetric(disc, basis, |p, bi, bj| {
        let kappa = frame.edge_curvature(p.edge, p.t);
        let weight = field.grad(p.pos).dot(&p.normal) + kappa * field.value(p.pos);
        weight * bi.value(p.pos).dot(&p.normal) * bj.value(p.pos).dot(&p.normal)
    });
    HessianSystem {
        matrix,
        load: assemble_load(disc, field, basis),
        kind: HessianKind::H2,
        sigma: common_sigma(basis),
        anchors: anchors(basis),
    }
}

/// Scalar normal component `s = v·ν_e` and its tangential derivative along
/// an edge with constant normal.
fn normal_component(b: &BasisField, p: &crate::quadrature::BoundaryPoint) -> (f64, f64) {
    let c = b.normal.dot(&p.normal);
    (b.kernel_value(p.pos) * c, b.kernel_grad(p.pos).dot(&p.tangent) * c)
}

/// Gram matrix of the `H̊¹(∂Ω)` inner product
/// `∫_{∂Ω} ∇^τ(X·ν)·∇^τ(Y·ν) + (X·ν)(Y·ν)`; fails unless positive definite.
/// The load is left at zero.
pub fn assemble_metric_h1ring(disc: &Discretization, basis: &[BasisField]) -> Result<HessianSystem> {
    let matrix = assemble_boundary_symmetric(disc, basis, |p, bi, bj| {
        let (si, ti) = normal_component(bi, p);
        let (sj, tj) = normal_component(bj, p);
        ti * tj + si * sj
    });
    let sigma = common_sigma(basis);
    if matrix.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite { sigma });
    }
    let n = basis.len();
    Ok(HessianSystem { matrix, load: DVector::zeros(n), kind: HessianKind::MetricH1ring, sigma, anchors: anchors(basis) })
}

/// `DJ(Ω)(X) = ∫_Ω ∇f·X + f divX` for an arbitrary field.
pub fn shape_derivative(disc: &Discretization, field: &dyn ScalarField, x: &dyn VectorField) -> f64 {
    let patch = disc.region(&[x], 0.0);
    let mut sum = 0.0;
    patch.for_each_node(&disc.quad.rule, |y, w| {
        sum += w * (field.grad(y).dot(&x.value(y)) + field.value(y) * x.divergence(y));
    });
    sum
}

/// `∫_{∂Ω} f X·ν`, equal to [`shape_derivative`] by the divergence theorem.
pub fn shape_derivative_boundary(disc: &Discretization, field: &dyn ScalarField, x: &dyn VectorField) -> f64 {
    let patch = disc.boundary_region(&[x]);
    let mut sum = 0.0;
    patch.for_each_node(&disc.shape, &disc.frame, &disc.quad.line_rule, |p, w| {
        sum += w * field.value(p.pos) * x.value(p.pos).dot(&p.normal);
    });
    sum
}

/// `𝔇²J(Ω)(X)(Y)` through the volume form.
pub fn hessian_h1_form(disc: &Discretization, field: &dyn ScalarField, x: &dyn VectorField, y: &dyn VectorField) -> f64 {
    let patch = disc.region(&[x, y], 0.0);
    let mut sum = 0.0;
    patch.for_each_node(&disc.quad.rule, |p, w| {
        sum += w
            * h1_integrand(
                field.value(p),
                field.grad(p),
                &field.hess(p),
                x.value(p),
                &x.jacobian(p),
                y.value(p),
                &y.jacobian(p),
            );
    });
    sum
}

/// `∫_{∂Ω} (∇f·ν + κf)(X·ν)(Y·ν)`.
pub fn hessian_h2_form(disc: &Discretization, field: &dyn ScalarField, x: &dyn VectorField, y: &dyn VectorField) -> f64 {
    let patch = disc.boundary_region(&[x, y]);
    let mut sum = 0.0;
    patch.for_each_node(&disc.shape, &disc.frame, &disc.quad.line_rule, |p, w| {
        let kappa = disc.frame.edge_curvature(p.edge, p.t);
        let weight = field.grad(p.pos).dot(&p.normal) + kappa * field.value(p.pos);
        sum += w * weight * x.value(p.pos).dot(&p.normal) * y.value(p.pos).dot(&p.normal);
    });
    sum
}

/// How `(id + tX)(Ω)` is realized by the finite-difference oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deformation {
    /// `J((id+tX)Ω) = ∫_Ω f∘(id+tX) det(I+t∂X)` on the quadrature nodes of Ω.
    /// Exact change of variables, valid whatever the kernel width.
    Pullback,
    /// Moves the polygon vertices by `tX` and re-triangulates. Exact only
    /// when `X` is affine between neighbouring vertices.
    Vertices,
}

/// `J((id + tX)Ω) − J(Ω)` through the change of variables.
fn pulled_back_change(disc: &Discretization, patch: &Patch, field: &dyn ScalarField, z: impl Fn(Vec2) -> (Vec2, Mat2)) -> f64 {
    let mut sum = 0.0;
    patch.for_each_node(&disc.quad.rule, |y, w| {
        let (d, jac) = z(y);
        let det = (Mat2::identity() + jac).determinant();
        sum += w * (field.value(y + d) * det - field.value(y));
    });
    sum
}

/// `J((id + g)(Ω)) − J(Ω)` for the deformed domain itself (not the polygon
/// through the moved vertices), by exact change of variables. The integrand
/// is smooth enough here for a coarser, ungraded patch.
pub fn deformation_change(disc: &Discretization, field: &dyn ScalarField, g: &BasisCombination) -> f64 {
    let disks = g.support().unwrap_or_default();
    let quad = LocalQuadrature { h_factor: 2.0 * disc.quad.h_factor, ..disc.quad.clone() };
    let patch = Patch::covering_with_kinks(&disc.domain, &disks, &[], &quad);
    pulled_back_change(disc, &patch, field, |y| g.value_and_jacobian(y))
}

/// Central difference `(J((id+tX)Ω) − J((id−tX)Ω)) / 2t`.
pub fn fd_first_derivative(
    disc: &Discretization,
    field: &dyn ScalarField,
    x: &dyn VectorField,
    t: f64,
    mode: Deformation,
) -> Result<f64> {
    match mode {
        Deformation::Pullback => {
            let patch = disc.region(&[x], 0.0);
            let plus = pulled_back_change(disc, &patch, field, |y| (x.value(y) * t, x.jacobian(y) * t));
            let minus = pulled_back_change(disc, &patch, field, |y| (x.value(y) * -t, x.jacobian(y) * -t));
            Ok((plus - minus) / (2.0 * t))
        }
        Deformation::Vertices => {
            let plus = Discretization::with_quadrature(disc.shape.displaced(|_, p| x.value(p) * t)?, disc.quad.clone())?;
            let minus = Discretization::with_quadrature(disc.shape.displaced(|_, p| x.value(p) * -t)?, disc.quad.clone())?;
            Ok((eval_j(&plus, field) - eval_j(&minus, field)) / (2.0 * t))
        }
    }
}

/// Mixed central difference of `(t, s) ↦ J((id + tX + sY)Ω)` at the origin,
/// by pullback.
pub fn fd_mixed_second(disc: &Discretization, field: &dyn ScalarField, x: &dyn VectorField, y: &dyn VectorField, t: f64) -> f64 {
    let patch = disc.region(&[x, y], 0.0);
    let at = |a: f64, b: f64| {
        pulled_back_change(disc, &patch, field, |p| {
            (x.value(p) * a + y.value(p) * b, x.jacobian(p) * a + y.jacobian(p) * b)
        })
    };
    (at(t, t) - at(t, -t) - at(-t, t) + at(-t, -t)) / (4.0 * t * t)
}

/// Outcome of comparing `D²J(X)(Y)` with `𝔇²J(X)(Y) + DJ(∂X Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `lhs`: central difference in `s` of `DJ((id+sY)Ω)(X)`, pulled back to Ω.
/// `rhs`: the volume Hessian plus `DJ(∂X Y)`, with
/// `div(∂X Y) = Y·∇divX + tr(∂X ∂Y)` from exact kernel derivatives.
pub fn check_decomposition(
    disc: &Discretization,
    field: &dyn ScalarField,
    x: &dyn VectorField,
    y: &dyn VectorField,
    t: f64,
) -> DecompositionReport {
    // nodes whose image under id ± tY meets supp X must be included
    let margin = match x.support() {
        Some(disks) => {
            let sup = disks
                .iter()
                .flat_map(|&(c, r)| sample_disk(c, 2.0 * r, r / 8.0))
                .map(|p| y.value(p).norm())
                .fold(0.0, f64::max);
            2.0 * t * sup
        }
        None => 0.0,
    };
    let patch = disc.region(&[x], margin);
    let first = |s: f64| {
        let mut sum = 0.0;
        patch.for_each_node(&disc.quad.rule, |p, w| {
            let q = p + y.value(p) * s;
            let det = (Mat2::identity() + y.jacobian(p) * s).determinant();
            sum += w * det * (field.grad(q).dot(&x.value(q)) + field.value(q) * x.divergence(q));
        });
        sum
    };
    let lhs = (first(t) - first(-t)) / (2.0 * t);
    let mut rhs = 0.0;
    patch.for_each_node(&disc.quad.rule, |p, w| {
        let (f, g, h) = (field.value(p), field.grad(p), field.hess(p));
        let (xv, xj, yv, yj) = (x.value(p), x.jacobian(p), y.value(p), y.jacobian(p));
        let dxy = xj * yv;
        let div_dxy = yv.dot(&x.grad_divergence(p)) + (xj * yj).trace();
        rhs += w * (h1_integrand(f, g, &h, xv, &xj, yv, &yj) + g.dot(&dxy) + f * div_dxy);
    });
    DecompositionReport { t, lhs, rhs, residual: (lhs - rhs).abs() }
}

/// Grid points of spacing `h` inside the disk.
fn sample_disk(center: Vec2, radius: f64, h: f64) -> Vec<Vec2> {
    let m = (radius / h).ceil() as i64;
    let mut out = Vec::new();
    for iy in -m..=m {
        for ix in -m..=m {
            let d = Vec2::new(ix as f64 * h, iy as f64 * h);
            if d.norm() <= radius {
                out.push(center + d);
            }
        }
    }
    out
}

/// Sampled sup-norms of a displacement field and of its Jacobian (spectral
/// norm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NormProxies {
    pub sup: f64,
    pub jac: f64,
}

impl NormProxies {
    pub fn c1(&self) -> f64 {
        self.sup + self.jac
    }
}

fn spectral_norm(m: &Mat2) -> f64 {
    // largest singular value of a 2x2 matrix in closed form
    let a = m.norm_squared();
    let d = m.determinant();
    (0.5 * (a + (a * a - 4.0 * d * d).max(0.0).sqrt())).sqrt()
}

/// Samples `g` on a grid of spacing `r/8` over its support disks, or over
/// `fallback` for globally supported fields. Anchors are always sampled.
pub fn norm_proxies(g: &dyn VectorField, fallback: &[(Vec2, f64)]) -> NormProxies {
    let disks = g.support().unwrap_or_else(|| fallback.to_vec());
    let mut out = NormProxies::default();
    for &(c, r) in &disks {
        for p in sample_disk(c, r, r / 8.0) {
            out.sup = out.sup.max(g.value(p).norm());
            out.jac = out.jac.max(spectral_norm(&g.jacobian(p)));
        }
    }
    out
}

/// Upper bounds on the Micheletti distance `d(id, id + g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepBound {
    pub proxies: NormProxies,
    /// `‖g‖_{C¹} + ‖g‖_∞ + ‖∂g‖_∞(‖∂g‖_∞ + 1)/(1 − q)`; `None` unless
    /// `‖g‖_{C¹} < q < 1`.
    pub bound: Option<f64>,
    /// `5‖g‖_{C¹}`, reported when `‖g‖_{C¹} < 1/2`.
    pub simplified: Option<f64>,
}

/// With `q = None` the bound is evaluated in the limit `q → ‖g‖_{C¹}`.
pub fn metric_step_bound(g: &dyn VectorField, fallback: &[(Vec2, f64)], q: Option<f64>) -> StepBound {
    let proxies = norm_proxies(g, fallback);
    step_bound_from(proxies, q)
}

pub fn step_bound_from(proxies: NormProxies, q: Option<f64>) -> StepBound {
    let c1 = proxies.c1();
    let q_eff = q.unwrap_or(c1);
    let valid = q_eff < 1.0 && (c1 < q_eff || (q.is_none() && c1 < 1.0));
    let bound = valid.then(|| c1 + proxies.sup + proxies.jac * (proxies.jac + 1.0) / (1.0 - q_eff));
    let simplified = (c1 < 0.5).then_some(5.0 * c1);
    StepBound { proxies, bound, simplified }
}

/// Running metric-distance diagnostics of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MetricDiagnostics {
    pub per_step_bound: Option<f64>,
    pub cumulative_bound: Option<f64>,
    /// `5 q^k / (1 − q)` with `q` the C¹ proxy of the first step.
    pub apriori_bound: Option<f64>,
    pub q: Option<f64>,
}

/// Accumulates [`MetricDiagnostics`] step by step. The cumulative bound is
/// lost for good once a step has no bound.
#[derive(Debug, Clone, Default)]
pub struct MetricTracker {
    q0: Option<f64>,
    cumulative: Option<f64>,
    broken: bool,
    steps: u32,
}

impl MetricTracker {
    pub fn push(&mut self, step: &StepBound) -> MetricDiagnostics {
        if self.steps == 0 {
            self.q0 = Some(step.proxies.c1());
        }
        let k = self.steps;
        self.steps += 1;
        match (step.bound, self.broken) {
            (Some(b), false) => self.cumulative = Some(self.cumulative.unwrap_or(0.0) + b),
            _ => {
                self.broken = true;
                self.cumulative = None;
            }
        }
        let apriori = self.q0.filter(|&q| q < 1.0).map(|q| 5.0 * q.powi(k as i32) / (1.0 - q));
        MetricDiagnostics { per_step_bound: step.bound, cumulative_bound: self.cumulative, apriori_bound: apriori, q: self.q0 }
    }
}

/// One line of a diagnostic report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub operation: String,
    pub parameters: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}
