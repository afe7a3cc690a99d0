//! Densities, the Wendland kernel and the approximate-normal basis fields
//! built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

/// A C² scalar density with analytic derivatives.
pub trait ScalarField: Sync {
    fn value(&self, x: Vec2) -> f64;
    fn grad(&self, x: Vec2) -> Vec2;
    fn hess(&self, x: Vec2) -> Mat2;
}

/// Densities used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityField {
    /// `b1·x² + b2·y² − r1`
    Quadric { b1: f64, b2: f64, r1: f64 },
    /// Quadric times `(x − a1)² + (y − a2)² − r2`.
    QuadricTimesCircle { b1: f64, b2: f64, r1: f64, a1: f64, a2: f64, r2: f64 },
    Constant { value: f64 },
}

/// Names accepted by [`builtin_field`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinField {
    Test1,
    Test2,
    Constant(f64),
}

pub fn builtin_field(name: BuiltinField) -> DensityField {
    match name {
        BuiltinField::Test1 => DensityField::Quadric { b1: 1.0, b2: 15.0, r1: 1.0 },
        BuiltinField::Test2 => DensityField::QuadricTimesCircle { b1: 1.0, b2: 15.0, r1: 1.0, a1: 0.0, a2: 0.55, r2: 0.1 },
        BuiltinField::Constant(value) => DensityField::Constant { value },
    }
}

impl ScalarField for DensityField {
    fn value(&self, x: Vec2) -> f64 {
        match *self {
            DensityField::Quadric { b1, b2, r1 } => b1 * x.x * x.x + b2 * x.y * x.y - r1,
            DensityField::QuadricTimesCircle { b1, b2, r1, a1, a2, r2 } => {
                let f = b1 * x.x * x.x + b2 * x.y * x.y - r1;
                let g = (x.x - a1).powi(2) + (x.y - a2).powi(2) - r2;
                f * g
            }
            DensityField::Constant { value } => value,
        }
    }

    fn grad(&self, x: Vec2) -> Vec2 {
        match *self {
            DensityField::Quadric { b1, b2, .. } => Vec2::new(2.0 * b1 * x.x, 2.0 * b2 * x.y),
            DensityField::QuadricTimesCircle { b1, b2, r1, a1, a2, r2 } => {
                let f = b1 * x.x * x.x + b2 * x.y * x.y - r1;
                let g = (x.x - a1).powi(2) + (x.y - a2).powi(2) - r2;
                let df = Vec2::new(2.0 * b1 * x.x, 2.0 * b2 * x.y);
                let dg = Vec2::new(2.0 * (x.x - a1), 2.0 * (x.y - a2));
                df * g + dg * f
            }
            DensityField::Constant { .. } => Vec2::zeros(),
        }
    }

    fn hess(&self, x: Vec2) -> Mat2 {
        match *self {
            DensityField::Quadric { b1, b2, .. } => Mat2::new(2.0 * b1, 0.0, 0.0, 2.0 * b2),
            DensityField::QuadricTimesCircle { b1, b2, r1, a1, a2, r2 } => {
                let f = b1 * x.x * x.x + b2 * x.y * x.y - r1;
                let g = (x.x - a1).powi(2) + (x.y - a2).powi(2) - r2;
                let df = Vec2::new(2.0 * b1 * x.x, 2.0 * b2 * x.y);
                let dg = Vec2::new(2.0 * (x.x - a1), 2.0 * (x.y - a2));
                let hf = Mat2::new(2.0 * b1, 0.0, 0.0, 2.0 * b2);
                hf * g + df * dg.transpose() + dg * df.transpose() + Mat2::identity() * (2.0 * f)
            }
            DensityField::Constant { .. } => Mat2::zeros(),
        }
    }
}

/// Scaled Wendland kernel `k(x, y) = φ(|x − y| / σ)` with
/// `φ(r) = (1 − r)₊⁴ (4r + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WendlandKernel {
    sigma: f64,
}

impl WendlandKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel support radius must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn profile(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r;
        let s2 = s * s;
        s2 * s2 * (4.0 * r + 1.0)
    }

    /// `φ'(r) = −20 r (1 − r)³` on `[0, 1]`.
    pub fn profile_derivative(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r;
        -20.0 * r * s * s * s
    }

    pub fn eval(&self, x: Vec2, y: Vec2) -> f64 {
        Self::profile((y - x).norm() / self.sigma)
    }

    /// Gradient with respect to the second argument. Written as
    /// `−20 (1 − r)³ (y − x) / σ²`, which is the same as `φ'(r)/σ · (y − x)/|y − x|`
    /// but has no removable singularity at `y = x`.
    pub fn grad(&self, x: Vec2, y: Vec2) -> Vec2 {
        let d = y - x;
        let r = d.norm() / self.sigma;
        if r >= 1.0 {
            return Vec2::zeros();
        }
        let s = 1.0 - r;
        d * (-20.0 * s * s * s / (self.sigma * self.sigma))
    }

    /// Hessian with respect to the second argument,
    /// `(−20 (1 − r)³ I + 60 r (1 − r)² u uᵀ) / σ²` with `u = (y − x)/|y − x|`.
    pub fn hess(&self, x: Vec2, y: Vec2) -> Mat2 {
        let d = y - x;
        let rho = d.norm();
        let r = rho / self.sigma;
        if r >= 1.0 {
            return Mat2::zeros();
        }
        let s = 1.0 - r;
        let s2 = s * s;
        let inv2 = 1.0 / (self.sigma * self.sigma);
        let mut h = Mat2::identity() * (-20.0 * s2 * s * inv2);
        if rho > 0.0 {
            let u = d / rho;
            h += u * u.transpose() * (60.0 * r * s2 * inv2);
        }
        h
    }
}

/// A C² vector field with enough derivatives for first and second shape
/// derivatives.
pub trait VectorField: Sync {
    fn value(&self, y: Vec2) -> Vec2;
    /// `(∂X)_{ij} = ∂X_i/∂y_j`.
    fn jacobian(&self, y: Vec2) -> Mat2;
    /// Hessians of the two components.
    fn second_derivatives(&self, y: Vec2) -> [Mat2; 2];
    /// Disks whose union contains the support; `None` for globally supported
    /// fields.
    fn support(&self) -> Option<Vec<(Vec2, f64)>>;

    fn divergence(&self, y: Vec2) -> f64 {
        self.jacobian(y).trace()
    }

    /// `∇(div X)`, assembled from the component Hessians.
    fn grad_divergence(&self, y: Vec2) -> Vec2 {
        let [h0, h1] = self.second_derivatives(y);
        // ∂_k div X = Σ_i ∂_k ∂_i X_i
        Vec2::new(h0[(0, 0)] + h1[(1, 0)], h0[(0, 1)] + h1[(1, 1)])
    }
}

/// Approximate normal basis field `v(y) = k(anchor, y) ν(anchor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisField {
    pub anchor: Vec2,
    pub normal: Vec2,
    pub kernel: WendlandKernel,
}

impl BasisField {
    pub fn new(anchor: Vec2, normal: Vec2, kernel: WendlandKernel) -> Self {
        Self { anchor, normal, kernel }
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma
    }

    pub fn kernel_value(&self, y: Vec2) -> f64 {
        self.kernel.eval(self.anchor, y)
    }

    pub fn kernel_grad(&self, y: Vec2) -> Vec2 {
        self.kernel.grad(self.anchor, y)
    }

    /// Value and Jacobian `ν ⊗ ∇k`.
    pub fn eval(&self, y: Vec2) -> (Vec2, Mat2) {
        let k = self.kernel_value(y);
        let g = self.kernel_grad(y);
        (self.normal * k, self.normal * g.transpose())
    }

    pub fn in_support(&self, y: Vec2) -> bool {
        (y - self.anchor).norm() < self.kernel.sigma
    }
}

impl VectorField for BasisField {
    fn value(&self, y: Vec2) -> Vec2 {
        self.normal * self.kernel_value(y)
    }

    fn jacobian(&self, y: Vec2) -> Mat2 {
        self.normal * self.kernel_grad(y).transpose()
    }

    fn second_derivatives(&self, y: Vec2) -> [Mat2; 2] {
        let h = self.kernel.hess(self.anchor, y);
        [h * self.normal.x, h * self.normal.y]
    }

    fn support(&self) -> Option<Vec<(Vec2, f64)>> {
        Some(vec![(self.anchor, self.kernel.sigma)])
    }

    fn divergence(&self, y: Vec2) -> f64 {
        self.normal.dot(&self.kernel_grad(y))
    }
}

/// Carries a basis field to the deformed boundary `(id + g)(M)`: the anchor
/// moves with `g` and the normal is mapped by the inverse transpose of
/// `I + ∂g`, renormalized and kept on the same side as before.
pub fn parallel_transport(b: &BasisField, displacement: Vec2, jacobian_at_anchor: &Mat2) -> Result<BasisField> {
    let m = Mat2::identity() + jacobian_at_anchor;
    let det = m.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::SingularDeformation { det });
    }
    // (Mᵀ)⁻¹ ν, written out for 2x2
    let inv_t = Mat2::new(m[(1, 1)], -m[(1, 0)], -m[(0, 1)], m[(0, 0)]) / det;
    let mut n = inv_t * b.normal;
    n /= n.norm();
    if n.dot(&b.normal) < 0.0 {
        n = -n;
    }
    Ok(BasisField { anchor: b.anchor + displacement, normal: n, kernel: b.kernel })
}

/// `P(X) = Σ_l X^l v^l`, the vector field spanned by a set of basis fields
/// with given coefficients. Evaluation buckets anchors on a grid of cell size
/// max σ so each query touches only nearby anchors.
#[derive(Debug, Clone)]
pub struct BasisCombination {
    fields: Vec<BasisField>,
    coeffs: Vec<f64>,
    cell: f64,
    /// Grid cells sorted by key, each with the anchors it holds.
    buckets: Vec<((i64, i64), Vec<usize>)>,
}

impl BasisCombination {
    pub fn new(fields: Vec<BasisField>, coeffs: Vec<f64>) -> Self {
        assert_eq!(fields.len(), coeffs.len(), "one coefficient per basis field");
        let cell = fields.iter().map(|f| f.sigma()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut keyed: Vec<((i64, i64), usize)> = fields.iter().enumerate().map(|(i, f)| (cell_of(f.anchor, cell), i)).collect();
        keyed.sort_unstable();
        let mut buckets: Vec<((i64, i64), Vec<usize>)> = Vec::new();
        for (key, i) in keyed {
            match buckets.last_mut() {
                Some((k, ids)) if *k == key => ids.push(i),
                _ => buckets.push((key, vec![i])),
            }
        }
        Self { fields, coeffs, cell, buckets }
    }

    pub fn fields(&self) -> &[BasisField] {
        &self.fields
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Calls `visit` for every field whose support contains `y`, cell by
    /// cell in a fixed order.
    fn for_each_near(&self, y: Vec2, mut visit: impl FnMut(&BasisField, f64)) {
        let (cx, cy) = cell_of(y, self.cell);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let key = (cx + dx, cy + dy);
                if let Ok(b) = self.buckets.binary_search_by(|(k, _)| k.cmp(&key)) {
                    for &i in &self.buckets[b].1 {
                        let f = &self.fields[i];
                        if f.in_support(y) {
                            visit(f, self.coeffs[i]);
                        }
                    }
                }
            }
        }
    }

    /// Value and Jacobian in one pass.
    pub fn value_and_jacobian(&self, y: Vec2) -> (Vec2, Mat2) {
        let mut v = Vec2::zeros();
        let mut m = Mat2::zeros();
        self.for_each_near(y, |f, c| {
            let k = f.kernel_value(y) * c;
            let g = f.kernel_grad(y) * c;
            v += f.normal * k;
            m += f.normal * g.transpose();
        });
        (v, m)
    }
}

fn cell_of(p: Vec2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

impl VectorField for BasisCombination {
    fn value(&self, y: Vec2) -> Vec2 {
        let mut v = Vec2::zeros();
        self.for_each_near(y, |f, c| v += f.value(y) * c);
        v
    }

    fn jacobian(&self, y: Vec2) -> Mat2 {
        let mut m = Mat2::zeros();
        self.for_each_near(y, |f, c| m += f.jacobian(y) * c);
        m
    }

    fn second_derivatives(&self, y: Vec2) -> [Mat2; 2] {
        let mut out = [Mat2::zeros(), Mat2::zeros()];
        self.for_each_near(y, |f, c| {
            let [a, b] = f.second_derivatives(y);
            out[0] += a * c;
            out[1] += b * c;
        });
        out
    }

    fn support(&self) -> Option<Vec<(Vec2, f64)>> {
        Some(
            self.fields
                .iter()
                .zip(&self.coeffs)
                .filter(|(_, &c)| c != 0.0)
                .map(|(f, _)| (f.anchor, f.sigma()))
                .collect(),
        )
    }
}

/// `X(y) = A y + b`; handy as a globally supported test direction.
#[derive(Debug, Clone, Copy)]
pub struct AffineField {
    pub matrix: Mat2,
    pub offset: Vec2,
}

impl AffineField {
    pub fn identity() -> Self {
        Self { matrix: Mat2::identity(), offset: Vec2::zeros() }
    }

    pub fn constant(offset: Vec2) -> Self {
        Self { matrix: Mat2::zeros(), offset }
    }
}

impl VectorField for AffineField {
    fn value(&self, y: Vec2) -> Vec2 {
        self.matrix * y + self.offset
    }

    fn jacobian(&self, _y: Vec2) -> Mat2 {
        self.matrix
    }

    fn second_derivatives(&self, _y: Vec2) -> [Mat2; 2] {
        [Mat2::zeros(), Mat2::zeros()]
    }

    fn support(&self) -> Option<Vec<(Vec2, f64)>> {
        None
    }
}

/// Zero field; supported nowhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn value(&self, _y: Vec2) -> Vec2 {
        Vec2::zeros()
    }
    fn jacobian(&self, _y: Vec2) -> Mat2 {
        Mat2::zeros()
    }
    fn second_derivatives(&self, _y: Vec2) -> [Mat2; 2] {
        [Mat2::zeros(), Mat2::zeros()]
    }
    fn support(&self) -> Option<Vec<(Vec2, f64)>> {
        Some(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(sigma: f64) -> WendlandKernel {
        WendlandKernel::new(sigma).unwrap()
    }

    #[test]
    fn kernel_closed_form_values() {
        let k = kernel(2.0);
        let x = Vec2::new(0.5, -0.25);
        assert_eq!(k.eval(x, x), 1.0);
        assert_eq!(k.eval(x, x + Vec2::new(2.0, 0.0)), 0.0);
        assert!((k.eval(x, x + Vec2::new(0.0, 1.0)) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn kernel_gradient_vanishes_at_center_and_edge() {
        let k = kernel(0.5);
        let x = Vec2::new(1.0, 2.0);
        assert_eq!(k.grad(x, x), Vec2::zeros());
        assert_eq!(k.grad(x, x + Vec2::new(0.5, 0.0)), Vec2::zeros());
    }

    #[test]
    fn kernel_hessian_at_center() {
        let k = kernel(0.5);
        let x = Vec2::new(1.0, 2.0);
        assert!((k.hess(x, x) - Mat2::identity() * (-20.0 / 0.25)).norm() < 1e-12);
    }

    #[test]
    fn kernel_rejects_nonpositive_sigma() {
        assert!(WendlandKernel::new(0.0).is_err());
        assert!(WendlandKernel::new(-1.0).is_err());
    }

    #[test]
    fn basis_field_at_anchor_and_outside() {
        let n = Vec2::new(0.6, 0.8);
        let b = BasisField::new(Vec2::new(1.0, 1.0), n, kernel(0.25));
        let (v, j) = b.eval(b.anchor);
        assert_eq!(v, n);
        assert_eq!(j, Mat2::zeros());
        let (v, j) = b.eval(b.anchor + Vec2::new(0.25, 0.0));
        assert_eq!(v, Vec2::zeros());
        assert_eq!(j, Mat2::zeros());
    }

    #[test]
    fn basis_jacobian_has_rank_one() {
        let b = BasisField::new(Vec2::zeros(), Vec2::new(0.0, 1.0), kernel(1.0));
        for y in [Vec2::new(0.1, 0.2), Vec2::new(-0.5, 0.3), Vec2::new(0.7, -0.1)] {
            let (_, j) = b.eval(y);
            assert!(j.determinant().abs() < 1e-15);
        }
    }

    #[test]
    fn builtin_fields() {
        let f1 = builtin_field(BuiltinField::Test1);
        assert_eq!(f1.value(Vec2::new(1.0, 0.0)), 0.0);
        let p = Vec2::new(0.3, -0.7);
        assert!((f1.grad(p) - Vec2::new(0.6, -21.0)).norm() < 1e-14);
        let f2 = builtin_field(BuiltinField::Test2);
        let q = Vec2::new(0.0, 0.55 + 0.1f64.sqrt());
        assert!(f2.value(q).abs() < 1e-14);
        let c = builtin_field(BuiltinField::Constant(2.5));
        assert_eq!(c.value(p), 2.5);
        assert_eq!(c.grad(p), Vec2::zeros());
    }

    #[test]
    fn transport_identity_and_translation() {
        let b = BasisField::new(Vec2::new(0.2, 0.1), Vec2::new(0.0, 1.0), kernel(0.3));
        let same = parallel_transport(&b, Vec2::zeros(), &Mat2::zeros()).unwrap();
        assert_eq!(same, b);
        let t = Vec2::new(0.05, -0.02);
        let moved = parallel_transport(&b, t, &Mat2::zeros()).unwrap();
        assert_eq!(moved.anchor, b.anchor + t);
        assert_eq!(moved.normal, b.normal);
    }

    #[test]
    fn transport_under_isotropic_scaling_keeps_normal() {
        let n = Vec2::new(0.6, -0.8);
        let b = BasisField::new(Vec2::new(0.5, 0.5), n, kernel(0.3));
        let eps = 0.1;
        let moved = parallel_transport(&b, b.anchor * eps, &(Mat2::identity() * eps)).unwrap();
        assert!((moved.normal - n).norm() < 1e-15);
        assert!((moved.anchor - b.anchor * (1.0 + eps)).norm() < 1e-15);
    }

    #[test]
    fn transport_detects_singular_jacobian() {
        let b = BasisField::new(Vec2::zeros(), Vec2::new(1.0, 0.0), kernel(0.3));
        let err = parallel_transport(&b, Vec2::zeros(), &Mat2::new(-1.0, 0.0, 0.0, 0.0));
        assert!(matches!(err, Err(Error::SingularDeformation { .. })));
    }

    #[test]
    fn transport_under_shear_is_inverse_transpose() {
        // shear y' = y + s x maps the tangent (1, 0) to (1, s), so the normal
        // (0, 1) becomes (−s, 1)/|…|
        let s = 0.3;
        let b = BasisField::new(Vec2::zeros(), Vec2::new(0.0, 1.0), kernel(0.3));
        let moved = parallel_transport(&b, Vec2::zeros(), &Mat2::new(0.0, 0.0, s, 0.0)).unwrap();
        let expected = Vec2::new(-s, 1.0).normalize();
        assert!((moved.normal - expected).norm() < 1e-14);
    }

    #[test]
    fn combination_matches_direct_sum() {
        let k = kernel(0.4);
        let fields: Vec<BasisField> = (0..7)
            .map(|i| {
                let t = i as f64 * 0.9;
                BasisField::new(Vec2::new(t.cos(), t.sin()) * (0.3 + 0.1 * i as f64), Vec2::new(t.cos(), t.sin()), k)
            })
            .collect();
        let coeffs: Vec<f64> = (0..7).map(|i| 0.5 - 0.2 * i as f64).collect();
        let combo = BasisCombination::new(fields.clone(), coeffs.clone());
        for y in [Vec2::new(0.1, 0.2), Vec2::new(-0.4, 0.3), Vec2::new(0.2, -0.6), Vec2::new(3.0, 3.0)] {
            let direct: Vec2 = fields.iter().zip(&coeffs).map(|(f, c)| f.value(y) * *c).sum();
            let djac: Mat2 = fields.iter().zip(&coeffs).map(|(f, c)| f.jacobian(y) * *c).sum();
            assert!((combo.value(y) - direct).norm() < 1e-14);
            assert!((combo.jacobian(y) - djac).norm() < 1e-12);
        }
    }
}
