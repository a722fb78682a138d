//! Run configuration: a line-oriented `key = value` file.
//!
//! ```text
//! # comment
//! n_theta = 128
//! n_phi = 256
//! diffusion_levels = 1, 2, 4, 8
//! attenuation_set = false, true
//! flow_num_method = 1        # 1 = upwind, 2 = weno3
//! ```
//!
//! Keys may appear at most once. Missing keys take the defaults of
//! [`RunConfig::default`].

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::advection::{AdvectionMethod, FlowParams};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("`{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
}

/// Source of the initial field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMap {
    /// Built-in pattern of Gaussian spots.
    Blob,
    /// An FTMAP1 file holding one realization (copied to all) or all of them.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    pub duration_hours: f64,
    pub flow_num_method: AdvectionMethod,
    /// Multipliers of `base_nu`, one diffusion level per entry.
    pub diffusion_levels: Vec<f64>,
    pub attenuation_set: Vec<bool>,
    pub flow: FlowParams,
    /// Base diffusivity in km²/s.
    pub base_nu: f64,
    /// Upper bound on the flux-transport step.
    pub max_dt_hours: f64,
    pub analysis_cadence_hours: f64,
    pub output_cadence_hours: f64,
    pub n_workers: Option<usize>,
    pub deterministic: bool,
    pub output_dir: PathBuf,
    pub initial_map: InitialMap,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_theta: 512,
            n_phi: 1024,
            duration_hours: 672.0,
            flow_num_method: AdvectionMethod::Weno3,
            diffusion_levels: vec![1.0, 2.0, 4.0, 8.0],
            attenuation_set: vec![false, true],
            flow: FlowParams::default(),
            base_nu: 300.0,
            max_dt_hours: 1.0,
            analysis_cadence_hours: 1.0,
            output_cadence_hours: 24.0,
            n_workers: None,
            deterministic: true,
            output_dir: PathBuf::from("fluxport_out"),
            initial_map: InitialMap::Blob,
        }
    }
}

const KEYS: &[&str] = &[
    "n_theta",
    "n_phi",
    "duration_hours",
    "flow_num_method",
    "diffusion_levels",
    "attenuation_set",
    "d0",
    "d2",
    "d4",
    "m1",
    "m2",
    "b0",
    "base_nu",
    "max_dt_hours",
    "analysis_cadence_hours",
    "output_cadence_hours",
    "n_workers",
    "deterministic",
    "output_dir",
    "initial_map",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn type_error(&self, expected: &'static str) -> ConfigError {
        ConfigError::Type {
            line: self.line,
            key: self.key.to_string(),
            expected,
            value: self.value.to_string(),
        }
    }

    fn number(&self) -> Result<f64, ConfigError> {
        match self.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.type_error("a finite number")),
        }
    }

    fn count(&self) -> Result<usize, ConfigError> {
        self.value.parse::<usize>().map_err(|_| self.type_error("a non-negative integer"))
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        parse_bool(self.value).ok_or_else(|| self.type_error("a boolean"))
    }

    fn numbers(&self) -> Result<Vec<f64>, ConfigError> {
        split_list(self.value)
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.type_error("a comma-separated list of numbers"))
    }

    fn booleans(&self) -> Result<Vec<bool>, ConfigError> {
        split_list(self.value)
            .map(parse_bool)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.type_error("a comma-separated list of booleans"))
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" => Some(true),
        "false" | "off" | "no" => Some(false),
        _ => None,
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(ConfigError::Syntax {
                line,
                col,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                col: eq + 1,
                message: "missing key before `=`".into(),
            });
        }
        if let Some(pos) = key.find(|c: char| !is_key_char(c)) {
            let start = content.find(key).unwrap_or(0);
            return Err(ConfigError::Syntax {
                line,
                col: start + pos + 1,
                message: format!("invalid character in key `{key}`"),
            });
        }
        let value = content[eq + 1..].trim();
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                col: content.len() + 1,
                message: format!("missing value for `{key}`"),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        entries.push(Entry { line, key, value });
    }
    Ok(entries)
}

/// Parse configuration text, filling unspecified keys with defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for e in tokenize(text)? {
        match e.key {
            "n_theta" => cfg.n_theta = e.count()?,
            "n_phi" => cfg.n_phi = e.count()?,
            "duration_hours" => cfg.duration_hours = e.number()?,
            "flow_num_method" => {
                let code = e.value.parse::<i64>().map_err(|_| e.type_error("1 or 2"))?;
                cfg.flow_num_method = AdvectionMethod::from_code(code).map_err(|_| e.type_error("1 or 2"))?;
            }
            "diffusion_levels" => cfg.diffusion_levels = e.numbers()?,
            "attenuation_set" => cfg.attenuation_set = e.booleans()?,
            "d0" => cfg.flow.d0 = e.number()?,
            "d2" => cfg.flow.d2 = e.number()?,
            "d4" => cfg.flow.d4 = e.number()?,
            "m1" => cfg.flow.m1 = e.number()?,
            "m2" => cfg.flow.m2 = e.number()?,
            "b0" => cfg.flow.b0 = e.number()?,
            "base_nu" => cfg.base_nu = e.number()?,
            "max_dt_hours" => cfg.max_dt_hours = e.number()?,
            "analysis_cadence_hours" => cfg.analysis_cadence_hours = e.number()?,
            "output_cadence_hours" => cfg.output_cadence_hours = e.number()?,
            "n_workers" => {
                let n = e.count()?;
                if n == 0 {
                    return Err(e.type_error("a positive integer"));
                }
                cfg.n_workers = Some(n);
            }
            "deterministic" => cfg.deterministic = e.boolean()?,
            "output_dir" => cfg.output_dir = PathBuf::from(e.value),
            "initial_map" => {
                cfg.initial_map = if e.value == "blob" {
                    InitialMap::Blob
                } else {
                    InitialMap::File(PathBuf::from(e.value))
                }
            }
            other => unreachable!("key {other} accepted by tokenizer"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

impl RunConfig {
    /// Check the value constraints that the grammar alone cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_hours < 0.0 {
            return Err(invalid("duration_hours", "must be non-negative"));
        }
        for (key, v) in [
            ("analysis_cadence_hours", self.analysis_cadence_hours),
            ("output_cadence_hours", self.output_cadence_hours),
            ("max_dt_hours", self.max_dt_hours),
            ("b0", self.flow.b0),
        ] {
            if v <= 0.0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.base_nu < 0.0 {
            return Err(invalid("base_nu", "must be non-negative"));
        }
        if self.diffusion_levels.iter().any(|&l| l <= 0.0) {
            return Err(invalid("diffusion_levels", "levels must be positive"));
        }
        Ok(())
    }

    /// Number of realizations in the ensemble this config describes.
    pub fn realization_count(&self) -> usize {
        self.diffusion_levels.len() * self.attenuation_set.len()
    }

    /// Render as config text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let join_f = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let join_b = |v: &[bool]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("n_theta", self.n_theta.to_string());
        kv("n_phi", self.n_phi.to_string());
        kv("duration_hours", format!("{:?}", self.duration_hours));
        kv("flow_num_method", self.flow_num_method.code().to_string());
        kv("diffusion_levels", join_f(&self.diffusion_levels));
        kv("attenuation_set", join_b(&self.attenuation_set));
        kv("d0", format!("{:?}", self.flow.d0));
        kv("d2", format!("{:?}", self.flow.d2));
        kv("d4", format!("{:?}", self.flow.d4));
        kv("m1", format!("{:?}", self.flow.m1));
        kv("m2", format!("{:?}", self.flow.m2));
        kv("b0", format!("{:?}", self.flow.b0));
        kv("base_nu", format!("{:?}", self.base_nu));
        kv("max_dt_hours", format!("{:?}", self.max_dt_hours));
        kv("analysis_cadence_hours", format!("{:?}", self.analysis_cadence_hours));
        kv("output_cadence_hours", format!("{:?}", self.output_cadence_hours));
        if let Some(n) = self.n_workers {
            kv("n_workers", n.to_string());
        }
        kv("deterministic", self.deterministic.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv(
            "initial_map",
            match &self.initial_map {
                InitialMap::Blob => "blob".to_string(),
                InitialMap::File(p) => p.display().to_string(),
            },
        );
        out
    }
}
