//! Experiment files: one flat TOML table per experiment. Any key other
//! than `name`, `out`, `problem` and `seeds` may hold a list; lists expand
//! to the cross-product of their values, one cell per combination.
//!
//! ```toml
//! name = "synthetic"
//! problem = "synthetic"
//! d = 100
//! solver = ["lancbio", "soba"]
//! eta = [1e-5, 5e-6]
//! iters = 5000
//! seeds = [0, 1, 2]
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use lancbio_core::problems::{HyperCleanSpec, ProblemId, SyntheticSpec};
use lancbio_core::solvers::{DimRamp, SolverConfig, SolverKind};
use thiserror::Error;
use toml::{Table, Value};

/// Source line of a diagnostic, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Line(pub Option<usize>);

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(l) => write!(f, "line {l}"),
            None => f.write_str("line ?"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{line}: {message}")]
    Syntax { line: Line, message: String },
    #[error("{line}: unknown key `{key}`")]
    UnknownKey { key: String, line: Line },
    #[error("{line}: field `{field}`: {message}")]
    InvalidValue {
        field: String,
        line: Line,
        message: String,
    },
    #[error("{line}: field `solver`: unknown solver id `{value}`")]
    UnknownSolver { value: String, line: Line },
    #[error("{line}: field `problem`: unknown problem id `{value}`")]
    UnknownProblem { value: String, line: Line },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
}

impl ConfigError {
    /// Name of the offending key, if the error concerns one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. } => Some(key),
            ConfigError::InvalidValue { field, .. } => Some(field),
            ConfigError::UnknownSolver { .. } => Some("solver"),
            ConfigError::UnknownProblem { .. } => Some("problem"),
            ConfigError::Missing(f) => Some(f),
            _ => None,
        }
    }
}

/// Problem family plus every size/shape parameter. Only the ones relevant
/// to `id` are read when building the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub id: ProblemId,
    /// Instance seed; the run seed is used when absent.
    pub seed: Option<u64>,
    pub d: usize,
    pub c1: f64,
    pub c2: f64,
    pub dim_x: usize,
    pub dim_y: usize,
    pub cond: f64,
    pub rho: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    pub corruption: f64,
    pub c_r: f64,
    pub data_csv: Option<PathBuf>,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    /// Test accuracy is evaluated every this many iterations (and on the last).
    pub metric_every: usize,
}

impl ProblemConfig {
    /// Desk-scale defaults for each family.
    pub fn defaults(id: ProblemId) -> Self {
        let mut p = Self {
            id,
            seed: None,
            d: 100,
            c1: SyntheticSpec::DEFAULT_C1,
            c2: SyntheticSpec::DEFAULT_C2,
            dim_x: 10,
            dim_y: 50,
            cond: 100.0,
            rho: 1.0,
            n_train: 500,
            n_val: 500,
            n_test: 1000,
            features: 20,
            classes: 5,
            separation: 2.0,
            corruption: 0.5,
            c_r: HyperCleanSpec::DEFAULT_C_R,
            data_csv: None,
            mnist_images: None,
            mnist_labels: None,
            metric_every: 10,
        };
        if id == ProblemId::LogReg {
            p.features = 50;
            p.separation = 1.0;
            p.corruption = 0.0;
        }
        p
    }
}

/// One grid cell: a single problem/solver configuration over a list of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    /// File-name label of this cell, e.g. `lancbio_eta=0.1`.
    pub cell: String,
    pub problem: ProblemConfig,
    pub solver: SolverKind,
    pub solver_cfg: SolverConfig,
    pub seeds: Vec<u64>,
    pub time_budget_s: Option<f64>,
    pub out: Option<PathBuf>,
}

fn line_of(text: &str, key: &str) -> Line {
    let found = text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    });
    Line(found.map(|i| i + 1))
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            field: key.into(),
            line: line_of(self.text, key),
            message: message.into(),
        }
    }

    fn f64(&self, key: &str, v: &Value) -> Result<f64, ConfigError> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.invalid(key, format!("expected a number, found {}", v.type_str()))),
        }
    }

    fn u64(&self, key: &str, v: &Value) -> Result<u64, ConfigError> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(self.invalid(key, format!("expected a nonnegative integer, found {v}"))),
        }
    }

    fn usize(&self, key: &str, v: &Value) -> Result<usize, ConfigError> {
        self.u64(key, v).map(|u| u as usize)
    }

    fn str<'v>(&self, key: &str, v: &'v Value) -> Result<&'v str, ConfigError> {
        v.as_str()
            .ok_or_else(|| self.invalid(key, format!("expected a string, found {}", v.type_str())))
    }

    fn path(&self, key: &str, v: &Value) -> Result<PathBuf, ConfigError> {
        self.str(key, v).map(PathBuf::from)
    }

    /// Applies one scalar key to a cell.
    fn apply(&self, cfg: &mut RunConfig, key: &str, v: &Value) -> Result<(), ConfigError> {
        let s = &mut cfg.solver_cfg;
        let p = &mut cfg.problem;
        match key {
            "solver" => {
                let id = self.str(key, v)?;
                cfg.solver = id.parse().map_err(|_| ConfigError::UnknownSolver {
                    value: id.into(),
                    line: line_of(self.text, key),
                })?;
            }
            "time_budget_s" => cfg.time_budget_s = Some(self.f64(key, v)?),
            "lambda" => s.lambda = self.f64(key, v)?,
            "theta" => s.theta = self.f64(key, v)?,
            "eta" => s.eta = self.f64(key, v)?,
            "m" => s.m = self.usize(key, v)?,
            "m0" => s.m0 = self.usize(key, v)?,
            "iters" => s.iters = self.usize(key, v)?,
            "inner_iters" => s.inner_iters = self.usize(key, v)?,
            "neumann_terms" => s.neumann_terms = self.usize(key, v)?,
            "ramp" => {
                s.ramp = match self.str(key, v)? {
                    "linear" => DimRamp::Linear,
                    "off" => DimRamp::Off,
                    other => {
                        return Err(self.invalid(
                            key,
                            format!("expected \"linear\" or \"off\", found \"{other}\""),
                        ))
                    }
                }
            }
            "lambda_decay" => s.lambda_decay = Some(self.f64(key, v)?),
            "ttsa_lambda_exp" => s.ttsa_lambda_exp = self.f64(key, v)?,
            "ttsa_theta_exp" => s.ttsa_theta_exp = self.f64(key, v)?,
            "problem_seed" => p.seed = Some(self.u64(key, v)?),
            "d" => p.d = self.usize(key, v)?,
            "c1" => p.c1 = self.f64(key, v)?,
            "c2" => p.c2 = self.f64(key, v)?,
            "dim_x" => p.dim_x = self.usize(key, v)?,
            "dim_y" => p.dim_y = self.usize(key, v)?,
            "cond" => p.cond = self.f64(key, v)?,
            "rho" => p.rho = self.f64(key, v)?,
            "n_train" => p.n_train = self.usize(key, v)?,
            "n_val" => p.n_val = self.usize(key, v)?,
            "n_test" => p.n_test = self.usize(key, v)?,
            "features" => p.features = self.usize(key, v)?,
            "classes" => p.classes = self.usize(key, v)?,
            "separation" => p.separation = self.f64(key, v)?,
            "corruption" => {
                p.corruption = self.f64(key, v)?;
                if !(0.0..=1.0).contains(&p.corruption) {
                    return Err(self.invalid(key, "must lie in [0, 1]"));
                }
            }
            "c_r" => p.c_r = self.f64(key, v)?,
            "data_csv" => p.data_csv = Some(self.path(key, v)?),
            "mnist_images" => p.mnist_images = Some(self.path(key, v)?),
            "mnist_labels" => p.mnist_labels = Some(self.path(key, v)?),
            "metric_every" => {
                p.metric_every = self.usize(key, v)?;
                if p.metric_every == 0 {
                    return Err(self.invalid(key, "must be at least 1"));
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    line: line_of(self.text, key),
                })
            }
        }
        Ok(())
    }

    fn validate(&self, cfg: &RunConfig) -> Result<(), ConfigError> {
        use lancbio_core::solvers::ConfigError as Core;
        cfg.solver_cfg.validate().map_err(|e| match e {
            Core::Invalid { field, reason } => self.invalid(field, reason),
            other => self.invalid("solver", other.to_string()),
        })?;
        let p = &cfg.problem;
        let positive = [
            ("d", p.d),
            ("dim_x", p.dim_x),
            ("dim_y", p.dim_y),
            ("n_train", p.n_train),
            ("n_val", p.n_val),
            ("features", p.features),
            ("classes", p.classes),
        ];
        if let Some((key, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(self.invalid(key, "must be at least 1"));
        }
        if !(p.cond >= 1.0) {
            return Err(self.invalid("cond", "must be at least 1"));
        }
        if !(p.c_r > 0.0) {
            return Err(self.invalid("c_r", "must be positive"));
        }
        if p.mnist_images.is_some() != p.mnist_labels.is_some() {
            return Err(self.invalid(
                "mnist_images",
                "mnist_images and mnist_labels must be given together",
            ));
        }
        if let Some(t) = cfg.time_budget_s {
            if !(t > 0.0) {
                return Err(self.invalid("time_budget_s", "must be positive"));
            }
        }
        Ok(())
    }
}

fn label_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses an experiment file into its expanded grid cells.
pub fn parse_experiment(text: &str) -> Result<Vec<RunConfig>, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        ConfigError::Syntax {
            line: Line(line),
            message: e.message().to_string(),
        }
    })?;
    let ctx = Ctx { text };

    let problem_id = match table.get("problem") {
        None => return Err(ConfigError::Missing("problem")),
        Some(v) => {
            let s = ctx.str("problem", v)?;
            s.parse::<ProblemId>()
                .map_err(|_| ConfigError::UnknownProblem {
                    value: s.into(),
                    line: line_of(text, "problem"),
                })?
        }
    };
    if !table.contains_key("solver") {
        return Err(ConfigError::Missing("solver"));
    }

    let mut base = RunConfig {
        name: "experiment".into(),
        cell: String::new(),
        problem: ProblemConfig::defaults(problem_id),
        solver: SolverKind::LancBio,
        solver_cfg: SolverConfig::default(),
        seeds: vec![0],
        time_budget_s: None,
        out: None,
    };

    // solver leads the cell label; the rest follow in key order
    let mut axes: Vec<(&str, &Vec<Value>)> = Vec::new();
    for (key, value) in &table {
        let key = key.as_str();
        match (key, value) {
            ("problem", _) => {}
            ("name", v) => base.name = ctx.str(key, v)?.into(),
            ("out", v) => base.out = Some(ctx.path(key, v)?),
            ("seeds", Value::Array(items)) => {
                base.seeds = items
                    .iter()
                    .map(|s| ctx.u64(key, s))
                    .collect::<Result<_, _>>()?;
                if base.seeds.is_empty() {
                    return Err(ctx.invalid(key, "needs at least one seed"));
                }
            }
            ("seeds", v) => base.seeds = vec![ctx.u64(key, v)?],
            (_, Value::Table(_)) => return Err(ctx.invalid(key, "nested tables are not supported")),
            (_, Value::Array(items)) => {
                if items.is_empty() {
                    return Err(ctx.invalid(key, "empty list"));
                }
                if key == "solver" {
                    axes.insert(0, (key, items));
                } else {
                    axes.push((key, items));
                }
            }
            (_, v) => ctx.apply(&mut base, key, v)?,
        }
    }

    let mut cells = vec![(base, String::new())];
    for (key, items) in &axes {
        let mut next = Vec::with_capacity(cells.len() * items.len());
        for (cfg, label) in &cells {
            for item in items.iter() {
                let mut c = cfg.clone();
                ctx.apply(&mut c, key, item)?;
                let part = if *key == "solver" {
                    label_value(item)
                } else {
                    format!("{key}={}", label_value(item))
                };
                let label = if label.is_empty() {
                    part
                } else {
                    format!("{label}_{part}")
                };
                next.push((c, label));
            }
        }
        cells = next;
    }

    cells
        .into_iter()
        .map(|(mut cfg, label)| {
            cfg.cell = if axes.first().is_some_and(|(k, _)| *k == "solver") {
                label
            } else if label.is_empty() {
                cfg.solver.id().to_string()
            } else {
                format!("{}_{label}", cfg.solver.id())
            };
            ctx.validate(&cfg)?;
            Ok(cfg)
        })
        .collect()
}

pub fn load_experiment(path: &Path) -> Result<Vec<RunConfig>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_experiment(&text)
}

impl RunConfig {
    /// Flat table describing exactly this cell; parsing it yields one cell
    /// equal to `self` (up to the cell label).
    pub fn to_toml(&self) -> String {
        let mut t = Table::new();
        let mut put = |k: &str, v: Value| {
            t.insert(k.into(), v);
        };
        let int = |u: usize| Value::Integer(u as i64);
        let path = |p: &PathBuf| Value::String(p.display().to_string());
        let s = &self.solver_cfg;
        let p = &self.problem;
        put("name", Value::String(self.name.clone()));
        put("problem", Value::String(p.id.id().into()));
        put("solver", Value::String(self.solver.id().into()));
        put(
            "seeds",
            Value::Array(
                self.seeds
                    .iter()
                    .map(|&s| Value::Integer(s as i64))
                    .collect(),
            ),
        );
        if let Some(o) = &self.out {
            put("out", path(o));
        }
        if let Some(b) = self.time_budget_s {
            put("time_budget_s", Value::Float(b));
        }
        put("lambda", Value::Float(s.lambda));
        put("theta", Value::Float(s.theta));
        put("eta", Value::Float(s.eta));
        put("m", int(s.m));
        put("m0", int(s.m0));
        put("iters", int(s.iters));
        put("inner_iters", int(s.inner_iters));
        put("neumann_terms", int(s.neumann_terms));
        put(
            "ramp",
            Value::String(
                if s.ramp == DimRamp::Linear {
                    "linear"
                } else {
                    "off"
                }
                .into(),
            ),
        );
        if let Some(d) = s.lambda_decay {
            put("lambda_decay", Value::Float(d));
        }
        put("ttsa_lambda_exp", Value::Float(s.ttsa_lambda_exp));
        put("ttsa_theta_exp", Value::Float(s.ttsa_theta_exp));
        if let Some(seed) = p.seed {
            put("problem_seed", Value::Integer(seed as i64));
        }
        put("d", int(p.d));
        put("c1", Value::Float(p.c1));
        put("c2", Value::Float(p.c2));
        put("dim_x", int(p.dim_x));
        put("dim_y", int(p.dim_y));
        put("cond", Value::Float(p.cond));
        put("rho", Value::Float(p.rho));
        put("n_train", int(p.n_train));
        put("n_val", int(p.n_val));
        put("n_test", int(p.n_test));
        put("features", int(p.features));
        put("classes", int(p.classes));
        put("separation", Value::Float(p.separation));
        put("corruption", Value::Float(p.corruption));
        put("c_r", Value::Float(p.c_r));
        for (k, v) in [
            ("data_csv", &p.data_csv),
            ("mnist_images", &p.mnist_images),
            ("mnist_labels", &p.mnist_labels),
        ] {
            if let Some(v) = v {
                put(k, path(v));
            }
        }
        put("metric_every", int(p.metric_every));
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expands_to_cross_product() {
        let cells = parse_experiment(
            "problem = \"quadratic\"\nsolver = [\"lancbio\", \"soba\"]\neta = [0.1, 0.2, 0.3]\nseeds = [1, 2]\n",
        )
        .unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].cell, "lancbio_eta=0.1");
        assert_eq!(cells[5].cell, "soba_eta=0.3");
        assert!(cells.iter().all(|c| c.seeds == [1, 2]));
    }

    #[test]
    fn scalar_solver_leads_label() {
        let cells =
            parse_experiment("problem = \"synthetic\"\nsolver = \"soba\"\nm = [2, 3]\n").unwrap();
        assert_eq!(cells[1].cell, "soba_m=3");
    }

    #[test]
    fn errors_name_field_and_line() {
        let err = parse_experiment("problem = \"quadratic\"\n\nsolver = \"nope\"\n").unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::UnknownSolver {
                    line: Line(Some(3)),
                    ..
                }
            ),
            "{err}"
        );
        assert_eq!(err.field(), Some("solver"));

        let err =
            parse_experiment("problem = \"quadratic\"\nsolver = \"soba\"\nmm = 3\n").unwrap_err();
        assert!(
            err.to_string().contains("line 3") && err.to_string().contains("`mm`"),
            "{err}"
        );

        let err =
            parse_experiment("problem = \"quadratic\"\nsolver = \"soba\"\nm0 = 12\n").unwrap_err();
        assert_eq!(err.field(), Some("m0"));

        let err = parse_experiment("problem = \"quadratic\"\nsolver = = 1\n").unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::Syntax {
                    line: Line(Some(2)),
                    ..
                }
            ),
            "{err}"
        );

        let err = parse_experiment("solver = \"soba\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Missing("problem")));
    }
}
