//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapenewton::fields::{builtin_field, BuiltinField, ScalarField};
use shapenewton::geometry::PolygonalShape;
use shapenewton::optimize::{run, Method, RunTrace, SolverConfig};
use shapenewton::shape_calculus::{assemble_h1, assemble_h2, vertex_basis, Discretization};
use shapenewton::verify::{run_verify, test_shape, VerifyOptions, VerifyReport};
use shapenewton::Vec2;

use common::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn initial_shape() -> PolygonalShape {
    PolygonalShape::circle(Vec2::zeros(), 1.5, 200).unwrap()
}

fn solve(method: Method, test: BuiltinField) -> (RunTrace, Duration) {
    let config = SolverConfig::for_method(method);
    let start = Instant::now();
    let trace = run(&config, &initial_shape(), &builtin_field(test)).unwrap();
    (trace, start.elapsed())
}

/// `‖L‖_∞ ≤ tol` within `max_iter` steps and `limit` wall time.
fn load_envelope(method: Method, test: BuiltinField, tol: f64, max_iter: usize, limit: Duration) -> (bool, String, RunTrace) {
    let (trace, time) = solve(method, test);
    let last = trace.last();
    let passed = last.linf_load <= tol && trace.iterations() <= max_iter && time <= limit;
    let detail = format!(
        "{method}: |L|_inf {:.3e} (<= {tol:e}) after {} iterations (<= {max_iter}), {:.1} s, {:?}",
        last.linf_load,
        trace.iterations(),
        time.as_secs_f64(),
        trace.termination
    );
    (passed, detail, trace)
}

fn criterion_1() -> Outcome {
    let (p, d, _) = load_envelope(Method::NewtonH1, BuiltinField::Test1, 1e-6, 40, Duration::from_secs(60));
    outcome(p, d)
}

fn criterion_2() -> Outcome {
    let (p, d, _) = load_envelope(Method::NewtonH2, BuiltinField::Test1, 1e-8, 30, Duration::from_secs(60));
    outcome(p, d)
}

fn criterion_3() -> Outcome {
    let (trace, time) = solve(Method::NewtonRiemann, BuiltinField::Test1);
    let res: Vec<f64> = trace.records.iter().map(|r| r.linf_f_points).collect();
    // log e_{k+1} / log e_k for consecutive residuals between 1e-13 and 0.1
    let orders: Vec<f64> = res
        .windows(2)
        .filter(|w| w[0] < 0.1 && w[1] > 1e-13)
        .map(|w| w[1].ln() / w[0].ln())
        .collect();
    let quadratic = !orders.is_empty() && orders.iter().all(|&p| p >= 1.8);
    let last = *res.last().unwrap();
    let passed = last <= 1e-12 && trace.iterations() <= 12 && quadratic;
    outcome(
        passed,
        format!(
            "newton_riemann: |f|_inf {last:.3e} (<= 1e-12) after {} iterations (<= 12), contraction orders {orders:.2?} (>= 1.8), {:.1} s",
            trace.iterations(),
            time.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let (trace, time) = solve(Method::GradL2, BuiltinField::Test1);
    let last = trace.last();
    let passed = last.linf_f_points >= 1e-4 && last.l2sq_f_boundary <= 1e-5;
    outcome(
        passed,
        format!(
            "grad_l2: stopped after {} iterations ({:?}) with |f|_inf {:.3e} (>= 1e-4) and |f|^2_L2 {:.3e} (<= 1e-5), {:.1} s",
            trace.iterations(),
            trace.termination,
            last.linf_f_points,
            last.l2sq_f_boundary,
            time.as_secs_f64()
        ),
    )
}

/// Corners of `{x² + 15y² < 1} ∪ {x² + (y − 0.55)² < 0.1}`.
fn test2_kinks() -> [Vec2; 2] {
    // subtracting the two circles gives 14y² + 1.1y − 1.2025 = 0
    let y = (-1.1 + (1.1f64 * 1.1 + 4.0 * 14.0 * 1.2025).sqrt()) / 28.0;
    let x = (1.0 - 15.0 * y * y).sqrt();
    [Vec2::new(-x, y), Vec2::new(x, y)]
}

/// Distance from the kinks beyond which the boundary counts as smooth arc.
const KINK_EXCLUSION: f64 = 0.05;

fn test2_shape_check(trace: &RunTrace) -> (bool, String) {
    let field = builtin_field(BuiltinField::Test2);
    let kinks = test2_kinks();
    let simple = PolygonalShape::new(trace.final_shape.vertices().to_vec()).is_ok();
    let worst = trace
        .final_shape
        .vertices()
        .iter()
        .filter(|x| kinks.iter().all(|k| (*x - k).norm() > KINK_EXCLUSION))
        .map(|&x| field.value(x).abs())
        .fold(0.0, f64::max);
    (simple && worst <= 1e-2, format!("simple {simple}, max |f| on smooth arcs {worst:.2e} (<= 1e-2)"))
}

fn criterion_5() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for method in [Method::NewtonH1, Method::NewtonH2] {
        let (p, d, trace) = load_envelope(method, BuiltinField::Test2, 1e-6, 40, Duration::from_secs(60));
        let (ps, ds) = test2_shape_check(&trace);
        passed &= p && ps;
        parts.push(format!("{d}; {ds}"));
    }
    outcome(passed, parts.join(" | "))
}

fn verify_checks(report: &VerifyReport, names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in names {
        match report.checks.iter().find(|c| c.name == *name) {
            Some(c) => {
                passed &= c.passed;
                parts.push(format!("{name}: {}", c.summary));
            }
            None => {
                passed = false;
                parts.push(format!("{name}: missing"));
            }
        }
    }
    outcome(passed, parts.join(" | "))
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        if !ok {
            failures.push(name.to_string());
        }
        parts.push(format!("{name}: {detail}"));
    };

    let field = builtin_field(BuiltinField::Test1);
    let disc = Discretization::new(test_shape().unwrap()).unwrap();
    let sigma = 2.5 * disc.shape.max_gap();
    let basis = vertex_basis(&disc, sigma).unwrap();
    let h1 = assemble_h1(&disc, &field, &basis);
    let defect = h1.symmetry_defect();
    check("symmetry", defect <= 1e-6, format!("{defect:.2e} (<= 1e-6)"));

    let h2 = assemble_h2(&disc, &field, &basis);
    let mut stray = 0usize;
    let mut missing = 0usize;
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let d = (basis[i].anchor - basis[j].anchor).norm();
            for m in [&h1.matrix, &h2.matrix] {
                if d >= 2.0 * sigma && m[(i, j)] != 0.0 {
                    stray += 1;
                }
                if d < 1.5 * sigma && m[(i, j)] == 0.0 {
                    missing += 1;
                }
            }
        }
    }
    check(
        "sparsity",
        stray == 0 && missing == 0,
        format!("{stray} nonzeros beyond 2 sigma, {missing} zeros within 1.5 sigma"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gram_sigma = 0.3;
    let mut worst_eig = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.random_range(2..=12);
        let mut pts: Vec<Vec2> = Vec::new();
        while pts.len() < n {
            let p = Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)) * gram_sigma;
            if pts.iter().all(|q| (p - q).norm() > 0.05 * gram_sigma) {
                pts.push(p);
            }
        }
        worst_eig = worst_eig.min(min_eigenvalue(&gram(&pts, gram_sigma)));
    }
    check("gram", worst_eig > 0.0, format!("smallest eigenvalue over 50 clusters {worst_eig:.2e} (> 0)"));

    let circle = PolygonalShape::circle(Vec2::zeros(), 1.0, 256).unwrap();
    let tang: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&s| tangential_max(&circle, s)).collect();
    check("tangential", tang.windows(2).all(|w| w[1] < w[0]), format!("{tang:.3?} at sigma 0.2, 0.1, 0.05"));

    let normal_order = order(circle_normal_error(1.0, 0.3, 128), circle_normal_error(1.0, 0.3, 256));
    let curv_order = order(ellipse_curvature_error(1.0, 0.5, 128), ellipse_curvature_error(1.0, 0.5, 256));
    check(
        "frame",
        normal_order >= 1.9 && curv_order >= 1.9,
        format!("normal order {normal_order:.2}, curvature order {curv_order:.2} (>= 1.9)"),
    );

    let mut config = SolverConfig::for_method(Method::NewtonH1);
    config.max_iter = 3;
    let a = run(&config, &initial_shape(), &field).unwrap();
    let b = run(&config, &initial_shape(), &field).unwrap();
    let same = format!("{:?}", a.records) == format!("{:?}", b.records)
        && a.final_shape.vertices().iter().zip(b.final_shape.vertices()).all(|(p, q)| p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits());
    check("determinism", same, format!("two 3-step runs identical: {same}"));

    outcome(failures.is_empty(), parts.join(" | "))
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |id: usize, o: Outcome| {
        println!("criterion {id}: {} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(id);
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());

    let start = Instant::now();
    let verify = run_verify(&VerifyOptions::default()).unwrap();
    let verify_time = start.elapsed();
    let mut c6 = verify_checks(&verify, &["load_fd", "h1_fd"]);
    c6.passed &= verify_time <= Duration::from_secs(120);
    c6.detail.push_str(&format!(" | verify suite {:.1} s (<= 120 s)", verify_time.as_secs_f64()));
    report(6, c6);
    report(7, verify_checks(&verify, &["decomposition"]));
    report(8, verify_checks(&verify, &["h1_h2"]));
    report(9, criterion_9());

    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
