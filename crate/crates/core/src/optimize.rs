//! Newton and gradient iterations on the polygon: kernel width schedule,
//! step computation, acceptance test, resampling and trace recording.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{parallel_transport, BasisCombination, BasisField, ScalarField, VectorField};
use crate::geometry::{resample_uniform, PolygonalShape};
use crate::quadrature::integrate_boundary;
use crate::shape_calculus::{
    assemble_h1, assemble_h2, assemble_load, assemble_metric_h1ring, deformation_change, eval_j, metric_step_bound, vertex_basis,
    Discretization, HessianKind, HessianSystem, MetricDiagnostics, MetricTracker,
};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "NewtonH1")]
    NewtonH1,
    #[serde(alias = "NewtonH2")]
    NewtonH2,
    #[serde(alias = "NewtonRiemann")]
    NewtonRiemann,
    #[serde(alias = "GradEuclid")]
    GradEuclid,
    #[serde(alias = "GradH1ring")]
    GradH1ring,
    #[serde(alias = "GradL2")]
    GradL2,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::NewtonH1, Method::NewtonH2, Method::NewtonRiemann, Method::GradEuclid, Method::GradH1ring, Method::GradL2];

    pub fn name(self) -> &'static str {
        match self {
            Method::NewtonH1 => "newton_h1",
            Method::NewtonH2 => "newton_h2",
            Method::NewtonRiemann => "newton_riemann",
            Method::GradEuclid => "grad_euclid",
            Method::GradH1ring => "grad_h1ring",
            Method::GradL2 => "grad_l2",
        }
    }

    pub fn is_newton(self) -> bool {
        matches!(self, Method::NewtonH1 | Method::NewtonH2 | Method::NewtonRiemann)
    }

    /// Methods that move each vertex along its own normal instead of
    /// through the kernel basis.
    pub fn is_pointwise(self) -> bool {
        matches!(self, Method::NewtonRiemann | Method::GradL2)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || format!("{m:?}") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// `γ` in `σ_k = γ d_k^e`.
    pub gamma_sigma: f64,
    /// `e` in `σ_k = γ d_k^e`.
    pub sigma_exponent: f64,
    /// Fixed step of the gradient methods.
    pub step_size: f64,
    pub max_iter: usize,
    /// Sufficient-decrease factor of the acceptance test.
    pub accept_gamma: f64,
    /// Target spacing after resampling; the initial mean spacing if unset.
    pub resample_spacing: Option<f64>,
    /// Resample once max gap / min gap exceeds this.
    pub resample_ratio: f64,
    /// Stop when `‖L‖_∞ ≤ grad_tol` (basis methods).
    pub grad_tol: f64,
    /// Stop when `‖f‖_{L∞(𝒳)} ≤ f_tol` (pointwise methods).
    pub f_tol: f64,
    /// Gradient methods stop once their gradient norm fails to drop by at
    /// least this fraction in one step.
    pub stall_tol: f64,
    /// Vertex count of generated initial shapes.
    pub n_points: usize,
    /// Matrices with a larger condition estimate are rejected.
    pub max_condition: f64,
    /// Iterations whose boundary is kept in the trace; the final one is
    /// always kept.
    pub snapshots: Vec<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::NewtonH1,
            gamma_sigma: 0.5,
            sigma_exponent: 2.0,
            step_size: 1.0,
            max_iter: 999,
            accept_gamma: 1e-15,
            resample_spacing: None,
            resample_ratio: 1.5,
            grad_tol: 1e-8,
            f_tol: 1e-14,
            stall_tol: 1e-4,
            n_points: 200,
            max_condition: 1e12,
            snapshots: vec![0, 1, 2, 3, 4, 5],
        }
    }
}

impl SolverConfig {
    pub fn for_method(method: Method) -> Self {
        let mut c = Self { method, ..Self::default() };
        match method {
            Method::NewtonH2 => c.gamma_sigma = 1.6,
            Method::GradEuclid => c.step_size = 1.8,
            Method::GradH1ring => c.step_size = 400.0,
            Method::GradL2 => c.step_size = 0.02,
            _ => {}
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.gamma_sigma > 0.0) {
            return bad(format!("gamma_sigma must be positive, got {}", self.gamma_sigma));
        }
        if !(self.sigma_exponent > 0.0) {
            return bad(format!("sigma_exponent must be positive, got {}", self.sigma_exponent));
        }
        if !self.method.is_newton() && !(self.step_size > 0.0) {
            return bad(format!("step_size must be positive, got {}", self.step_size));
        }
        if !(self.accept_gamma > 0.0) {
            return bad(format!("accept_gamma must be positive, got {}", self.accept_gamma));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if self.n_points < 3 {
            return bad(format!("n_points must be at least 3, got {}", self.n_points));
        }
        if !(self.resample_ratio > 1.0) {
            return bad(format!("resample_ratio must exceed 1, got {}", self.resample_ratio));
        }
        if let Some(c) = self.resample_spacing {
            if !(c > 0.0) {
                return bad(format!("resample_spacing must be positive, got {c}"));
            }
        }
        for (name, v) in [("grad_tol", self.grad_tol), ("f_tol", self.f_tol), ("stall_tol", self.stall_tol)] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        Ok(())
    }
}

/// A step: basis coefficients with the displacement field they span, or
/// per-vertex displacements.
#[derive(Debug, Clone)]
pub enum Step {
    Basis { coeffs: DVector<f64>, field: BasisCombination },
    Pointwise { displacements: Vec<Vec2> },
}

impl Step {
    /// `|X_k|`: Euclidean norm of the coefficients, or of the normal
    /// displacement amplitudes.
    pub fn coefficient_norm(&self) -> f64 {
        match self {
            Step::Basis { coeffs, .. } => coeffs.norm(),
            Step::Pointwise { displacements } => displacements.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt(),
        }
    }

    /// Displacement of every vertex of `shape`.
    pub fn vertex_displacements(&self, shape: &PolygonalShape) -> Vec<Vec2> {
        match self {
            Step::Basis { field, .. } => shape.vertices().iter().map(|&x| field.value(x)).collect(),
            Step::Pointwise { displacements } => displacements.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub condition: Option<f64>,
    pub kind: Option<HessianKind>,
}

fn solve_lu(system: &HessianSystem, rhs: &DVector<f64>, max_condition: f64) -> Result<DVector<f64>> {
    let cond = system.condition_estimate();
    let fail = || Error::IllConditioned { kind: system.kind.to_string(), cond, sigma: system.sigma };
    if !(cond <= max_condition) {
        return Err(fail());
    }
    system.matrix.clone().lu().solve(rhs).ok_or_else(fail)
}

/// Solves `H X = −L` with the Hessian of the configured Newton method and
/// spans `g = Σ X_l v_l`.
pub fn newton_step(
    disc: &Discretization,
    field: &dyn ScalarField,
    basis: &[BasisField],
    config: &SolverConfig,
) -> Result<(Step, StepDiagnostics)> {
    let system = match config.method {
        Method::NewtonH1 => assemble_h1(disc, field, basis),
        Method::NewtonH2 => assemble_h2(disc, field, basis),
        m => return Err(Error::InvalidArgument(format!("{m} is not a basis Newton method"))),
    };
    let coeffs = if system.load.iter().all(|&l| l == 0.0) {
        DVector::zeros(basis.len())
    } else {
        solve_lu(&system, &(-&system.load), config.max_condition)?
    };
    let cond = system.condition_estimate();
    let field = BasisCombination::new(basis.to_vec(), coeffs.iter().copied().collect());
    Ok((Step::Basis { coeffs, field }, StepDiagnostics { condition: Some(cond), kind: Some(system.kind) }))
}

/// `−f(x_i) / (∇f(x_i)·ν_i) ν_i` at every vertex.
pub fn riemann_newton_step(disc: &Discretization, field: &dyn ScalarField) -> Result<Vec<Vec2>> {
    disc.shape
        .vertices()
        .iter()
        .zip(&disc.frame.vertex_normals)
        .enumerate()
        .map(|(i, (&x, &n))| {
            let dn = field.grad(x).dot(&n);
            if dn.abs() <= 1e-12 {
                return Err(Error::DegenerateNormalDerivative { vertex: i, value: dn });
            }
            Ok(n * (-field.value(x) / dn))
        })
        .collect()
}

/// One step of the configured gradient method. `load` is `L` over `basis`.
pub fn gradient_step(
    disc: &Discretization,
    field: &dyn ScalarField,
    basis: &[BasisField],
    load: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(Step, StepDiagnostics)> {
    let s = config.step_size;
    let (coeffs, kind) = match config.method {
        Method::GradEuclid => (load * -s, HessianKind::Identity),
        Method::GradH1ring => {
            let b = assemble_metric_h1ring(disc, basis)?;
            let chol = b.matrix.clone().cholesky().ok_or(Error::NotPositiveDefinite { sigma: b.sigma })?;
            (chol.solve(&(load * -s)), HessianKind::MetricH1ring)
        }
        Method::GradL2 => {
            let displacements = disc
                .shape
                .vertices()
                .iter()
                .zip(&disc.frame.vertex_normals)
                .map(|(&x, &n)| n * (-s * field.value(x)))
                .collect();
            return Ok((Step::Pointwise { displacements }, StepDiagnostics { condition: None, kind: None }));
        }
        m => return Err(Error::InvalidArgument(format!("{m} is not a gradient method"))),
    };
    let field = BasisCombination::new(basis.to_vec(), coeffs.iter().copied().collect());
    Ok((Step::Basis { coeffs, field }, StepDiagnostics { condition: None, kind: Some(kind) }))
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The acceptance test failed.
    NoSufficientDecrease,
    /// The gradient norm stopped changing.
    Stalled,
    Failed { message: String },
}

/// State of one iterate `Ω_k` and the step taken from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    /// `|X_k|`; `None` when no step was taken from this iterate.
    pub abs_x: Option<f64>,
    /// `|X_k| / |X_{k−1}|`.
    pub ratio_abs_x: Option<f64>,
    pub linf_load: f64,
    pub l2sq_f_boundary: f64,
    pub linf_f_points: f64,
    pub n_points: usize,
    pub sigma: f64,
    pub condition: Option<f64>,
    pub metric: MetricDiagnostics,
    /// Largest angle (radians) between transported basis normals and the
    /// normals rebuilt on the next iterate; `None` after resampling.
    pub transport_discrepancy: Option<f64>,
    pub resampled: bool,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<(usize, PolygonalShape)>,
    pub final_shape: PolygonalShape,
    pub termination: Termination,
}

impl RunTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a trace has at least one record")
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.abs_x.is_some() && r.accepted).count()
    }
}

fn boundary_f_norms(disc: &Discretization, field: &dyn ScalarField) -> (f64, f64) {
    let l2sq = integrate_boundary(&disc.shape, &disc.frame, |b| field.value(b.pos).powi(2), 5).unwrap_or(f64::NAN);
    let linf = disc.shape.vertices().iter().map(|&x| field.value(x).abs()).fold(0.0, f64::max);
    (l2sq, linf)
}

fn max_angle_between(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.dot(v).clamp(-1.0, 1.0).acos()).fold(0.0, f64::max)
}

/// Iterates from `initial` until a stopping rule fires. Solver failures end
/// the run with [`Termination::Failed`] and keep the trace so far; only an
/// invalid configuration is an error.
pub fn run(config: &SolverConfig, initial: &PolygonalShape, field: &dyn ScalarField) -> Result<RunTrace> {
    config.validate()?;
    let spacing = config.resample_spacing.unwrap_or(initial.perimeter() / initial.len() as f64);
    let mut shape = initial.clone();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut snapshots = Vec::new();
    let mut tracker = MetricTracker::default();
    let mut prev_abs_x: Option<f64> = None;
    let mut prev_measure: Option<f64> = None;
    let mut first_decrease: Option<f64> = None;
    let mut resampled_into = false;
    let mut k = 0usize;
    let termination = loop {
        if config.snapshots.contains(&k) {
            snapshots.push((k, shape.clone()));
        }
        let disc = match Discretization::new(shape.clone()) {
            Ok(d) => d,
            Err(e) => break Termination::Failed { message: e.to_string() },
        };
        let sigma = config.gamma_sigma * shape.max_gap().powf(config.sigma_exponent);
        let basis = match vertex_basis(&disc, sigma) {
            Ok(b) => b,
            Err(e) => break Termination::Failed { message: e.to_string() },
        };
        let j = eval_j(&disc, field);
        let load = assemble_load(&disc, field, &basis);
        let linf_load = load.amax();
        let (l2sq, linf_f) = boundary_f_norms(&disc, field);
        let mut record = IterationRecord {
            iter: k,
            j,
            abs_x: None,
            ratio_abs_x: None,
            linf_load,
            l2sq_f_boundary: l2sq,
            linf_f_points: linf_f,
            n_points: shape.len(),
            sigma,
            condition: None,
            metric: MetricDiagnostics::default(),
            transport_discrepancy: None,
            resampled: resampled_into,
            accepted: true,
        };

        let converged =
            if config.method.is_pointwise() { linf_f <= config.f_tol } else { linf_load <= config.grad_tol };
        if converged {
            records.push(record);
            break Termination::Converged;
        }
        if !config.method.is_newton() {
            let measure = if config.method.is_pointwise() { l2sq.sqrt() } else { linf_load };
            if let Some(prev) = prev_measure {
                if measure > (1.0 - config.stall_tol) * prev {
                    records.push(record);
                    break Termination::Stalled;
                }
            }
            prev_measure = Some(measure);
        }
        if k >= config.max_iter {
            records.push(record);
            break Termination::MaxIterations;
        }

        let step = match config.method {
            Method::NewtonH1 | Method::NewtonH2 => newton_step(&disc, field, &basis, config),
            Method::NewtonRiemann => riemann_newton_step(&disc, field)
                .map(|d| (Step::Pointwise { displacements: d }, StepDiagnostics { condition: None, kind: None })),
            _ => gradient_step(&disc, field, &basis, &load, config),
        };
        let (step, diag) = match step {
            Ok(s) => s,
            Err(e) => {
                records.push(record);
                break Termination::Failed { message: e.to_string() };
            }
        };
        let abs_x = step.coefficient_norm();
        record.abs_x = Some(abs_x);
        record.ratio_abs_x = prev_abs_x.filter(|&p| p > 0.0).map(|p| abs_x / p);
        record.condition = diag.condition;
        prev_abs_x = Some(abs_x);
        if let Step::Basis { field: g, .. } = &step {
            let bound = metric_step_bound(g, &[], None);
            record.metric = tracker.push(&bound);
        }

        let moves = step.vertex_displacements(&shape);
        let next = match shape.displaced(|i, _| moves[i]) {
            Ok(s) => s,
            Err(e) => {
                records.push(record);
                break Termination::Failed { message: e.to_string() };
            }
        };
        let next_disc = match Discretization::new(next.clone()) {
            Ok(d) => d,
            Err(e) => {
                records.push(record);
                break Termination::Failed { message: e.to_string() };
            }
        };
        if let Step::Basis { field: g, .. } = &step {
            let transported: Vec<Vec2> = basis
                .iter()
                .filter_map(|b| parallel_transport(b, g.value(b.anchor), &g.jacobian(b.anchor)).ok())
                .map(|b| b.normal)
                .collect();
            if transported.len() == basis.len() {
                record.transport_discrepancy = Some(max_angle_between(&transported, &next_disc.frame.vertex_normals));
            }
        }

        // Acceptance test of the Newton algorithm: the decrease of J under the
        // deformation id + g_k against that of the first step. Pointwise
        // methods have no deformation field and are not tested.
        let accepted = match &step {
            Step::Basis { field: g, .. } => {
                let decrease = -deformation_change(&disc, field, g);
                match first_decrease {
                    None => {
                        first_decrease = Some(decrease);
                        true
                    }
                    Some(base) => decrease >= config.accept_gamma * base,
                }
            }
            Step::Pointwise { .. } => true,
        };
        record.accepted = accepted;
        records.push(record);
        if !accepted {
            break Termination::NoSufficientDecrease;
        }

        shape = next;
        resampled_into = false;
        if shape.gap_ratio() > config.resample_ratio {
            match resample_uniform(&shape, spacing) {
                Ok(s) => {
                    shape = s;
                    resampled_into = true;
                }
                Err(e) => {
                    break Termination::Failed { message: e.to_string() };
                }
            }
        }
        k += 1;
    };
    let last_iter = records.last().map(|r| r.iter).unwrap_or(0);
    if !snapshots.iter().any(|(i, _)| *i == last_iter) {
        snapshots.push((last_iter, shape.clone()));
    }
    Ok(RunTrace { method: config.method, records, snapshots, final_shape: shape, termination })
}
