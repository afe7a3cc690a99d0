//! Self-checks of the assembled derivatives against finite-difference and
//! closed-form oracles. Each check reports its residuals and a verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fields::{builtin_field, BasisCombination, BasisField, BuiltinField, ScalarField, WendlandKernel};
use crate::geometry::PolygonalShape;
use crate::shape_calculus::{
    assemble_h1, assemble_h2, assemble_load, assemble_load_boundary, check_decomposition, fd_first_derivative,
    fd_mixed_second, hessian_h1_form, vertex_basis, Deformation, DiagnosticRow, Discretization,
};
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Multiplies every kernel width used by the checks.
    pub sigma_scale: f64,
    pub seed: u64,
    /// Random basis fields in the load and H¹ checks.
    pub n_fields: usize,
    /// Random field pairs in the decomposition check.
    pub n_pairs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { sigma_scale: 1.0, seed: 7, n_fields: 20, n_pairs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub rows: Vec<DiagnosticRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn rows(&self) -> impl Iterator<Item = &DiagnosticRow> {
        self.checks.iter().flat_map(|c| c.rows.iter())
    }
}

/// Smallest convergence order `log2(e(t) / e(t/2))` accepted for central
/// differences.
pub const MIN_FD_ORDER: f64 = 1.9;
/// Agreement required between mixed differences and assembled H¹ entries.
pub const H1_FD_RTOL: f64 = 1e-2;
/// Smallest order accepted for the decomposition residual.
pub const MIN_DECOMPOSITION_ORDER: f64 = 1.0;

/// The Test1 shape used by the derivative checks: an ellipse between the
/// optimum and a circle, sampled with 80 vertices.
pub fn test_shape() -> Result<PolygonalShape> {
    PolygonalShape::ellipse(Vec2::zeros(), 1.1, 0.35, 80)
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn random_fields(disc: &Discretization, rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Result<Vec<BasisField>> {
    let m = disc.shape.len();
    (0..n)
        .map(|_| {
            let i = rng.random_range(0..m);
            let sigma = rng.random_range(0.12..0.25) * scale;
            Ok(BasisField::new(disc.shape.vertex(i), disc.frame.vertex_normals[i], WendlandKernel::new(sigma)?))
        })
        .collect()
}

fn row(operation: &str, parameters: String, lhs: f64, rhs: f64) -> DiagnosticRow {
    DiagnosticRow { operation: operation.to_string(), parameters, lhs, rhs, residual: (lhs - rhs).abs() }
}

/// Central differences of `J` against the assembled load, at `t` and `t/2`.
fn check_load_fd(disc: &Discretization, field: &dyn ScalarField, fields: &[BasisField]) -> Result<CheckOutcome> {
    let t = 2e-2;
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    for (k, b) in fields.iter().enumerate() {
        let load = assemble_load(disc, field, std::slice::from_ref(b))[0];
        let coarse = fd_first_derivative(disc, field, b, t, Deformation::Pullback)?;
        let fine = fd_first_derivative(disc, field, b, t / 2.0, Deformation::Pullback)?;
        let (ec, ef) = ((coarse - load).abs(), (fine - load).abs());
        let p = order(ec, ef);
        worst = worst.min(p);
        rows.push(row("load_fd", format!("field={k} sigma={:.4} t={t:e}", b.sigma()), coarse, load));
        rows.push(row("load_fd", format!("field={k} sigma={:.4} t={:e} order={p:.3}", b.sigma(), t / 2.0), fine, load));
    }
    Ok(CheckOutcome {
        name: "load_fd",
        passed: worst >= MIN_FD_ORDER,
        summary: format!("{} fields, worst observed order {worst:.3} (need >= {MIN_FD_ORDER})", fields.len()),
        rows,
    })
}

/// Mixed central differences against assembled H¹ entries of overlapping
/// pairs.
fn check_h1_fd(disc: &Discretization, field: &dyn ScalarField, fields: &[BasisField], rng: &mut ChaCha8Rng) -> CheckOutcome {
    let t = 1e-3;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, x) in fields.iter().enumerate() {
        // a partner whose support overlaps, possibly the field itself
        let shift = Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)) * x.sigma();
        let y = BasisField::new(x.anchor + shift, x.normal, x.kernel);
        let assembled = hessian_h1_form(disc, field, x, &y);
        let fd = fd_mixed_second(disc, field, x, &y, t);
        let rel = (fd - assembled).abs() / assembled.abs().max(1e-12);
        worst = worst.max(rel);
        rows.push(row("h1_fd", format!("field={k} sigma={:.4} t={t:e} rel={rel:.2e}", x.sigma()), fd, assembled));
    }
    CheckOutcome {
        name: "h1_fd",
        passed: worst <= H1_FD_RTOL,
        summary: format!("{} pairs, worst relative error {worst:.2e} (need <= {H1_FD_RTOL:e})", fields.len()),
        rows,
    }
}

/// Residual of `D²J(X)(Y) = 𝔇²J(X)(Y) + DJ(∂X Y)` at `t` and `t/2`.
fn check_decomposition_order(
    disc: &Discretization,
    field: &dyn ScalarField,
    rng: &mut ChaCha8Rng,
    n: usize,
    scale: f64,
) -> Result<CheckOutcome> {
    let t = 1e-2;
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    let m = disc.shape.len();
    for k in 0..n {
        // X and Y built on neighbouring vertices so that their supports overlap
        let i = rng.random_range(0..m);
        let kernel = WendlandKernel::new(rng.random_range(0.12..0.25) * scale)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in [i, (i + 1) % m] {
            let (anchor, normal) = (disc.shape.vertex(j), disc.frame.vertex_normals[j]);
            xs.push(BasisField::new(anchor, normal, kernel));
            let shift = Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)) * kernel.sigma();
            ys.push(BasisField::new(anchor + shift, normal, kernel));
        }
        let x = BasisCombination::new(xs, (0..2).map(|_| rng.random_range(0.5..1.0)).collect());
        let y = BasisCombination::new(ys, (0..2).map(|_| rng.random_range(0.5..1.0)).collect());
        let a = check_decomposition(disc, field, &x, &y, t);
        let b = check_decomposition(disc, field, &x, &y, t / 2.0);
        let p = order(a.residual, b.residual);
        worst = worst.min(p);
        rows.push(row("decomposition", format!("pair={k} t={t:e}"), a.lhs, a.rhs));
        rows.push(row("decomposition", format!("pair={k} t={:e} order={p:.3}", t / 2.0), b.lhs, b.rhs));
    }
    Ok(CheckOutcome {
        name: "decomposition",
        passed: worst >= MIN_DECOMPOSITION_ORDER,
        summary: format!("{n} pairs, worst observed order {worst:.3} (need >= {MIN_DECOMPOSITION_ORDER})"),
        rows,
    })
}

fn frobenius_gap(disc: &Discretization, field: &dyn ScalarField, sigma: f64) -> Result<(f64, f64, f64)> {
    let basis = vertex_basis(disc, sigma)?;
    let h1 = assemble_h1(disc, field, &basis).matrix;
    let h2 = assemble_h2(disc, field, &basis).matrix;
    let gap = (&h1 - &h2).norm() / h1.norm();
    let min1 = h1.symmetric_eigen().eigenvalues.min();
    let min2 = h2.symmetric_eigen().eigenvalues.min();
    Ok((gap, min1, min2))
}

/// `‖H¹ − H²‖_F / ‖H¹‖_F` at `σ` and `σ/2` on the Test1 optimum sampled
/// with 200 vertices; both matrices must be positive definite.
fn check_h1_h2(scale: f64) -> Result<CheckOutcome> {
    let field = builtin_field(BuiltinField::Test1);
    let shape = PolygonalShape::ellipse(Vec2::zeros(), 1.0, 1.0 / 15f64.sqrt(), 200)?;
    let disc = Discretization::new(shape)?;
    let sigma = 2.0 * disc.shape.max_gap() * scale;
    let (g1, a1, b1) = frobenius_gap(&disc, &field, sigma)?;
    let (g2, a2, b2) = frobenius_gap(&disc, &field, sigma / 2.0)?;
    let positive = a1 > 0.0 && b1 > 0.0 && a2 > 0.0 && b2 > 0.0;
    Ok(CheckOutcome {
        name: "h1_h2",
        passed: g2 < g1 && positive,
        summary: format!(
            "gap {g1:.3e} at sigma={sigma:.4}, {g2:.3e} at sigma/2; smallest eigenvalues H1 {:.2e}, H2 {:.2e}",
            a1.min(a2),
            b1.min(b2)
        ),
        rows: vec![
            row("h1_h2", format!("sigma={sigma:e} min_eig_h1={a1:e} min_eig_h2={b1:e}"), g1, 0.0),
            row("h1_h2", format!("sigma={:e} min_eig_h1={a2:e} min_eig_h2={b2:e}", sigma / 2.0), g2, 0.0),
        ],
    })
}

/// Largest tangential component of the basis fields on a 256-gon circle.
fn tangential_max(disc: &Discretization, sigma: f64) -> Result<f64> {
    let basis = vertex_basis(disc, sigma)?;
    let mut worst: f64 = 0.0;
    for b in &basis {
        let patch = disc.boundary_patch(&[(b.anchor, b.sigma())]);
        patch.for_each_node(&disc.shape, &disc.frame, &disc.quad.line_rule, |p, _| {
            worst = worst.max(b.kernel_value(p.pos) * b.normal.dot(&p.tangent).abs());
        });
    }
    Ok(worst)
}

fn check_tangential(scale: f64) -> Result<CheckOutcome> {
    let disc = Discretization::new(PolygonalShape::circle(Vec2::zeros(), 1.0, 256)?)?;
    let sigma = 0.2 * scale;
    let coarse = tangential_max(&disc, sigma)?;
    let fine = tangential_max(&disc, sigma / 2.0)?;
    Ok(CheckOutcome {
        name: "tangential",
        passed: fine < coarse,
        summary: format!("max |(v^x)_tau| {coarse:.3e} at sigma={sigma:.4}, {fine:.3e} at sigma/2"),
        rows: vec![
            row("tangential", format!("sigma={sigma:e}"), coarse, 0.0),
            row("tangential", format!("sigma={:e}", sigma / 2.0), fine, 0.0),
        ],
    })
}

/// With `f ≡ 1` the load is the flux `∫_{∂Ω} v_i·ν`.
fn check_divergence(disc: &Discretization, scale: f64) -> Result<CheckOutcome> {
    let one = builtin_field(BuiltinField::Constant(1.0));
    let basis = vertex_basis(disc, 0.15 * scale)?;
    let vol = assemble_load(disc, &one, &basis);
    let bnd = assemble_load_boundary(disc, &one, &basis);
    let tol = 1e-6;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for i in 0..basis.len() {
        let err = (vol[i] - bnd[i]).abs();
        worst = worst.max(err);
        rows.push(row("divergence", format!("field={i}"), vol[i], bnd[i]));
    }
    Ok(CheckOutcome {
        name: "divergence",
        passed: worst <= tol,
        summary: format!("{} fields, worst |L_i - flux_i| {worst:.2e} (need <= {tol:e})", basis.len()),
        rows,
    })
}

/// Runs every check on the Test1 density.
pub fn run_verify(options: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let field = builtin_field(BuiltinField::Test1);
    let disc = Discretization::new(test_shape()?)?;
    let fields = random_fields(&disc, &mut rng, options.n_fields, options.sigma_scale)?;
    let checks = vec![
        check_load_fd(&disc, &field, &fields)?,
        check_h1_fd(&disc, &field, &fields, &mut rng),
        check_decomposition_order(&disc, &field, &mut rng, options.n_pairs, options.sigma_scale)?,
        check_h1_h2(options.sigma_scale)?,
        check_tangential(options.sigma_scale)?,
        check_divergence(&disc, options.sigma_scale)?,
    ];
    Ok(VerifyReport { options: options.clone(), checks })
}
