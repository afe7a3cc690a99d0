use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TRACE_HEADER: &str = "iter,J,absX,ratio_absX,Linf_L,L2sq_f_bnd,Linf_f_points,n_points,sigma";

fn shapenewton(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapenewton"))
        .args(args)
        .env("SHAPENEWTON_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn config(test: &str, method: &str, max_iter: usize) -> String {
    format!("[field]\nkind = \"{test}\"\n\n[solver]\nmethod = \"{method}\"\nmax_iter = {max_iter}\n")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_trace_snapshots_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h1.toml", &config("test1", "newton_h1", 40));
    let out = shapenewton(&tmp.path().join("out"), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = tmp.path().join("out/h1");

    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty() && rows.len() <= 41, "{} rows", rows.len());
    let last = rows.last().unwrap();
    let last_iter: usize = last[0].parse().unwrap();
    let linf_l: f64 = last[4].parse().unwrap();
    assert!(linf_l <= 1e-6);
    assert!(dir.join(format!("interface_{last_iter}.gp")).exists());
    for k in 0..=5 {
        assert!(dir.join(format!("interface_{k}.gp")).exists(), "snapshot {k}");
    }

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    for f in manifest["files"].as_array().unwrap() {
        assert!(dir.join(f.as_str().unwrap()).exists(), "listed file {f} missing");
    }
    assert_eq!(manifest["summary"]["method"], "newton_h1");
    assert_eq!(manifest["summary"]["Linf_L"].as_f64().unwrap(), linf_l);
    assert_eq!(manifest["config"]["solver"]["gamma_sigma"].as_f64().unwrap(), 0.5);
}

#[test]
fn rerun_gives_identical_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h2.toml", &config("test1", "newton_h2", 4));
    let read = |root: &str| {
        let out = shapenewton(&tmp.path().join(root), &["run", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        (fs::read(tmp.path().join(root).join("h2/trace.csv")).unwrap(), fs::read(tmp.path().join(root).join("h2/interface_4.gp")).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn unknown_method_is_a_config_error_naming_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &config("test1", "newton_h3", 4));
    let out = shapenewton(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("solver.method"), "{}", stderr(&out));
}

#[test]
fn invalid_value_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[field]\nkind = \"test1\"\n[solver]\nstep_size = -1.0\nmethod = \"grad_l2\"\n");
    let out = shapenewton(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("solver.step_size"), "{}", stderr(&out));
}

#[test]
fn json_config_and_output_root() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{"field": {"kind": "test1"}, "shape": {"kind": "circle", "radius": 1.2, "n": 120},
                   "solver": {"method": "newton_riemann", "max_iter": 2}, "output": {"name": "riemann"}}"#;
    let cfg = write_config(tmp.path(), "r.json", body);
    let out = shapenewton(&tmp.path().join("env_root"), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(tmp.path().join("env_root/riemann/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 3);
    assert_eq!(trace.lines().nth(1).unwrap().split(',').nth(7), Some("120"));
}

#[test]
fn solver_failure_exits_one_and_keeps_the_partial_trace() {
    // Riemann Newton from this ellipse folds the boundary in its first step
    let tmp = TempDir::new().unwrap();
    let body = "[field]\nkind = \"test2\"\n[shape]\nkind = \"ellipse\"\na = 1.2\nb = 0.6\nn = 120\n[solver]\nmethod = \"newton_riemann\"\n";
    let cfg = write_config(tmp.path(), "fold.toml", body);
    let out = shapenewton(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let trace = fs::read_to_string(tmp.path().join("fold/trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
    assert!(tmp.path().join("fold/manifest.json").exists());
}

#[test]
fn compare_marks_failed_rows() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.toml", &config("test1", "newton_h1", 3));
    let b = write_config(tmp.path(), "b.toml", &config("test1", "newton_riemann", 3));
    let c = write_config(tmp.path(), "c.toml", &config("test1", "no_such_method", 3));
    let root = tmp.path().join("out");
    let out = shapenewton(&root, &["compare", a.to_str().unwrap(), b.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let mut reader = csv::Reader::from_path(root.join("compare.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][1], "ok");
    assert_eq!(&rows[1][1], "ok");
    assert_eq!(&rows[2][1], "FAILED");
}

#[test]
fn compare_needs_two_configs() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(shapenewton(tmp.path(), &["compare"]).status.code(), Some(2));
    let a = write_config(tmp.path(), "a.toml", &config("test1", "newton_h1", 3));
    assert_eq!(shapenewton(tmp.path(), &["compare", a.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn six_method_comparison_orders_newton_before_gradients() {
    let tmp = TempDir::new().unwrap();
    let methods = ["newton_h1", "newton_h2", "newton_riemann", "grad_euclid", "grad_h1ring", "grad_l2"];
    let paths: Vec<PathBuf> =
        methods.iter().map(|m| write_config(tmp.path(), &format!("{m}.toml"), &config("test1", m, 40))).collect();
    let mut args = vec!["compare"];
    args.extend(paths.iter().map(|p| p.to_str().unwrap()));
    let root = tmp.path().join("out");
    let out = shapenewton(&root, &args);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(root.join("compare.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "Linf_L").unwrap();
    let finals: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(finals.len(), 6);
    let newton = finals[0].max(finals[1]);
    let gradients = finals[3].min(finals[4]);
    assert!(newton < gradients, "newton {newton:e} vs gradient {gradients:e}");
}

#[test]
fn verify_passes_by_default_and_with_half_sigma() {
    let tmp = TempDir::new().unwrap();
    for scale in ["1", "0.5"] {
        let csv_path = tmp.path().join(format!("verify_{scale}.csv"));
        let out = shapenewton(tmp.path(), &["verify", "--sigma-scale", scale, "--csv", csv_path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stdout(&out));
        let text = stdout(&out);
        for name in ["load_fd", "h1_fd", "decomposition", "h1_h2", "tangential", "divergence"] {
            assert!(text.contains(&format!("PASS {name}:")), "{name} missing in\n{text}");
        }
        let rows = fs::read_to_string(&csv_path).unwrap();
        assert!(rows.starts_with("operation,parameters,lhs,rhs,residual"));
    }
}
