//! Experiment configuration files (TOML, or JSON by extension).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shapenewton::fields::{builtin_field, BuiltinField, DensityField};
use shapenewton::geometry::{read_polyline, PolygonalShape};
use shapenewton::optimize::{Method, SolverConfig};
use shapenewton::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid value at `{field}`: {message}")]
    Field { path: PathBuf, field: String, message: String },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Test1,
    Test2,
    Quadric { b1: f64, b2: f64, r1: f64 },
    QuadricTimesCircle { b1: f64, b2: f64, r1: f64, a1: f64, a2: f64, r2: f64 },
    Constant { value: f64 },
}

impl FieldConfig {
    pub fn density(&self) -> DensityField {
        match *self {
            FieldConfig::Test1 => builtin_field(BuiltinField::Test1),
            FieldConfig::Test2 => builtin_field(BuiltinField::Test2),
            FieldConfig::Quadric { b1, b2, r1 } => DensityField::Quadric { b1, b2, r1 },
            FieldConfig::QuadricTimesCircle { b1, b2, r1, a1, a2, r2 } => {
                DensityField::QuadricTimesCircle { b1, b2, r1, a1, a2, r2 }
            }
            FieldConfig::Constant { value } => DensityField::Constant { value },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FieldConfig::Test1 => "test1",
            FieldConfig::Test2 => "test2",
            FieldConfig::Quadric { .. } => "quadric",
            FieldConfig::QuadricTimesCircle { .. } => "quadric_times_circle",
            FieldConfig::Constant { .. } => "constant",
        }
    }
}

/// Initial boundary. `n` falls back to `solver.n_points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Circle {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        n: Option<usize>,
    },
    Ellipse {
        #[serde(default)]
        center: [f64; 2],
        a: f64,
        b: f64,
        n: Option<usize>,
    },
    /// Polyline file, resolved relative to the config file.
    File { path: PathBuf },
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig::Circle { center: [0.0, 0.0], radius: 1.5, n: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output root; `SHAPENEWTON_OUT` takes precedence. Defaults to `out`.
    pub root: Option<PathBuf>,
    /// Run directory below the root; defaults to the config file stem.
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldConfig,
    #[serde(default)]
    pub shape: ShapeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

const SOLVER_KEYS: [&str; 11] =
    ["gamma_sigma", "sigma_exponent", "step_size", "accept_gamma", "max_iter", "n_points", "resample_ratio", "resample_spacing", "grad_tol", "f_tol", "stall_tol"];

pub const OUT_ENV: &str = "SHAPENEWTON_OUT";

/// Root for all outputs: `SHAPENEWTON_OUT`, else `fallback`, else `out`.
pub fn output_root(fallback: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => fallback.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out")),
    }
}

/// A parsed configuration together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: ExperimentConfig,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let config = parse(path, &text)?;
        let field_error = |field: &str, message: String| ConfigError::Field { path: path.into(), field: field.into(), message };
        if let Err(e) = config.solver.validate() {
            let message = match e {
                shapenewton::Error::InvalidArgument(m) => m,
                other => other.to_string(),
            };
            // validation messages lead with the offending key
            let key = message.split(' ').next().filter(|k| SOLVER_KEYS.contains(k)).unwrap_or("");
            let field = if key.is_empty() { "solver".to_string() } else { format!("solver.{key}") };
            return Err(field_error(&field, message));
        }
        if let ShapeConfig::Circle { radius, .. } = config.shape {
            if !(radius > 0.0) {
                return Err(field_error("shape.radius", format!("must be positive, got {radius}")));
            }
        }
        Ok(Self { path: path.into(), config })
    }

    pub fn run_name(&self) -> String {
        self.config.output.name.clone().unwrap_or_else(|| {
            self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
        })
    }

    pub fn run_dir(&self) -> PathBuf {
        output_root(self.config.output.root.as_deref()).join(self.run_name())
    }

    pub fn initial_shape(&self) -> Result<PolygonalShape, ConfigError> {
        let n_default = self.config.solver.n_points;
        let field_error = |message: String| ConfigError::Field { path: self.path.clone(), field: "shape".into(), message };
        match &self.config.shape {
            ShapeConfig::Circle { center, radius, n } => {
                PolygonalShape::circle(Vec2::new(center[0], center[1]), *radius, n.unwrap_or(n_default))
            }
            ShapeConfig::Ellipse { center, a, b, n } => {
                PolygonalShape::ellipse(Vec2::new(center[0], center[1]), *a, *b, n.unwrap_or(n_default))
            }
            ShapeConfig::File { path } => {
                let full = self.path.parent().unwrap_or(Path::new(".")).join(path);
                let file = std::fs::File::open(&full)
                    .map_err(|e| field_error(format!("cannot open {}: {e}", full.display())))?;
                read_polyline(std::io::BufReader::new(file))
            }
        }
        .map_err(|e| field_error(e.to_string()))
    }
}

fn parse(path: &Path, text: &str) -> Result<ExperimentConfig, ConfigError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let syntax = |message: String| ConfigError::Syntax { path: path.into(), message };
    let mut value: serde_json::Value = if is_json {
        serde_json::from_str(text).map_err(|e| syntax(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| syntax(e.to_string()))?
    };
    apply_method_defaults(&mut value);
    serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Field {
        path: path.into(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Fills unset solver keys from [`SolverConfig::for_method`], so a config
/// naming only the method gets that method's step size and kernel width.
fn apply_method_defaults(value: &mut serde_json::Value) {
    let Some(solver) = value.get_mut("solver").and_then(|s| s.as_object_mut()) else {
        return;
    };
    let Some(method) = solver.get("method").and_then(|m| m.as_str()).and_then(|m| m.parse::<Method>().ok()) else {
        return;
    };
    let defaults = serde_json::to_value(SolverConfig::for_method(method)).expect("solver config serializes");
    if let serde_json::Value::Object(defaults) = defaults {
        for (key, v) in defaults {
            solver.entry(key).or_insert(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_toml(text: &str) -> Result<ExperimentConfig, ConfigError> {
        parse(Path::new("x.toml"), text)
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_toml("[field]\nkind = \"test1\"\n").unwrap();
        assert_eq!(c.shape, ShapeConfig::default());
        assert_eq!(c.solver, SolverConfig::default());
    }

    #[test]
    fn unknown_method_names_the_field() {
        let err = parse_toml("[field]\nkind = \"test1\"\n[solver]\nmethod = \"newton_h3\"\n").unwrap_err();
        match err {
            ConfigError::Field { field, .. } => assert_eq!(field, "solver.method"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn json_is_accepted() {
        let c = parse(Path::new("x.json"), r#"{"field": {"kind": "test2"}, "solver": {"method": "newton_h2"}}"#).unwrap();
        assert_eq!(c.field, FieldConfig::Test2);
        assert_eq!(c.solver.method, shapenewton::optimize::Method::NewtonH2);
        assert_eq!(c.solver.gamma_sigma, 1.6);
    }

    #[test]
    fn explicit_keys_override_method_defaults() {
        let c = parse_toml("[field]\nkind = \"test1\"\n[solver]\nmethod = \"grad_l2\"\nmax_iter = 5\n").unwrap();
        assert_eq!(c.solver.step_size, 0.02);
        assert_eq!(c.solver.max_iter, 5);
    }
}
