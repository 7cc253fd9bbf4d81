//! Flat key-value configuration with dotted section keys.
//!
//! Sources are merged in order: built-in defaults, then the config file,
//! then `--set key=value` flags, then the dedicated flags (`--seed`,
//! `--out`). Lines starting with `#` (or `;`) and blank lines are ignored;
//! everything else must be `key = value`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use coevo_core::model::{Graph, ModelParams};
use coevo_core::{ModelParams64, PlanarState64};

/// A configuration error carrying the offending key.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Known keys (exact names or `prefix.*` families); anything else is a typo.
const KNOWN_KEYS: &[&str] = &[
    "model.gamma",
    "model.tau",
    "model.mu",
    "model.alpha",
    "model.kappa",
    "model.sigma",
    "graph.kind",
    "graph.n",
    "graph.path",
    "layer",
    "init.x",
    "init.epsilon",
    "init.bits",
    "horizon",
    "tol.rel",
    "tol.abs",
    "grid.points",
    "seed",
    "replicas",
    "cycle.section_x",
    "cycle.tolerance",
    "cycle.max_crossings",
    "cycle.horizon",
    "cycle.interior_floor",
    "sweep.param",
    "sweep.values",
    "sweep.param2",
    "sweep.values2",
    "plot.input",
    "plot.kind",
    "out.dir",
];

const KNOWN_PREFIXES: &[&str] = &["policy."];

fn default_entries() -> Vec<(&'static str, String)> {
    vec![
        ("model.gamma", "10".into()),
        ("model.tau", "0.1".into()),
        ("model.mu", "0.6".into()),
        ("model.alpha", "0.3".into()),
        ("model.kappa", "3".into()),
        ("model.sigma", "0.6".into()),
        ("graph.kind", "complete".into()),
        ("graph.n", "100".into()),
        ("layer", "planar".into()),
        ("init.x", "0.5".into()),
        ("init.epsilon", "0.5".into()),
        ("horizon", "10".into()),
        ("tol.rel", "1e-9".into()),
        ("tol.abs", "1e-12".into()),
        ("grid.points", "501".into()),
        ("seed", "1".into()),
        ("replicas", "1".into()),
        ("cycle.tolerance", "1e-4".into()),
        ("cycle.max_crossings", "100".into()),
        ("cycle.horizon", "2000".into()),
        ("cycle.interior_floor", "1e-10".into()),
        ("plot.kind", "line".into()),
        ("out.dir", ".".into()),
    ]
}

/// Resolved configuration: a sorted key-value map plus typed accessors.
#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn resolve(
        file: Option<&Path>,
        sets: &[String],
        seed: Option<u64>,
        out: Option<&Path>,
    ) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, String> = default_entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();

        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ConfigError::new("--config", format!("cannot read {}: {e}", path.display()))
            })?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                    continue;
                }
                let (key, value) = split_pair(line).ok_or_else(|| {
                    ConfigError::new(
                        format!("{}:{}", path.display(), lineno + 1),
                        format!("expected `key = value`, got `{line}`"),
                    )
                })?;
                check_known(&key)?;
                values.insert(key, value);
            }
        }

        for set in sets {
            let (key, value) = split_pair(set).ok_or_else(|| {
                ConfigError::new("--set", format!("expected KEY=VALUE, got `{set}`"))
            })?;
            check_known(&key)?;
            values.insert(key, value);
        }
        if let Some(seed) = seed {
            values.insert("seed".into(), seed.to_string());
        }
        if let Some(out) = out {
            values.insert("out.dir".into(), out.display().to_string());
        }

        Ok(Self { values })
    }

    /// Sorted `key = value` lines for artifact headers.
    pub fn echo_lines(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    /// Copy with some keys replaced (sweep cells).
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Self {
        let mut values = self.values.clone();
        for (key, value) in overrides {
            values.insert(key.clone(), value.clone());
        }
        Self { values }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| ConfigError::new(key, "missing"))?;
        raw.parse()
            .map_err(|_| ConfigError::new(key, format!("`{raw}` is not a number")))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| ConfigError::new(key, "missing"))?;
        raw.parse()
            .map_err(|_| ConfigError::new(key, format!("`{raw}` is not a nonnegative integer")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| ConfigError::new(key, "missing"))?;
        raw.parse()
            .map_err(|_| ConfigError::new(key, format!("`{raw}` is not a 64-bit integer")))
    }

    pub fn string(&self, key: &str) -> Result<&str, ConfigError> {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| ConfigError::new(key, "missing"))
    }

    pub fn params(&self) -> Result<ModelParams64, ConfigError> {
        ModelParams::new(
            self.f64("model.gamma")?,
            self.f64("model.tau")?,
            self.f64("model.mu")?,
            self.f64("model.alpha")?,
            self.f64("model.kappa")?,
            self.f64("model.sigma")?,
        )
        .map_err(|e| ConfigError::new("model.*", e.to_string()))
    }

    pub fn graph(&self) -> Result<Graph, ConfigError> {
        match self.string("graph.kind")? {
            "complete" => {
                let n = self.usize("graph.n")?;
                Graph::complete(n).map_err(|e| ConfigError::new("graph.n", e.to_string()))
            }
            "edges" => {
                let path = self.string("graph.path")?;
                let text = std::fs::read_to_string(path).map_err(|e| {
                    ConfigError::new("graph.path", format!("cannot read {path}: {e}"))
                })?;
                let mut edges = Vec::new();
                let mut n = self.usize("graph.n")?;
                for raw in text.lines() {
                    let line = raw.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut it = line.split_whitespace();
                    let (i, j) = (it.next(), it.next());
                    let parse = |s: Option<&str>| -> Result<usize, ConfigError> {
                        s.and_then(|v| v.parse().ok()).ok_or_else(|| {
                            ConfigError::new("graph.path", format!("bad edge line `{line}`"))
                        })
                    };
                    let (i, j) = (parse(i)?, parse(j)?);
                    n = n.max(i + 1).max(j + 1);
                    edges.push((i, j));
                }
                Graph::from_edges(n, &edges)
                    .map_err(|e| ConfigError::new("graph.path", e.to_string()))
            }
            other => Err(ConfigError::new(
                "graph.kind",
                format!("`{other}` is not one of complete|edges"),
            )),
        }
    }

    pub fn planar_init(&self) -> Result<PlanarState64, ConfigError> {
        PlanarState64::new(self.f64("init.x")?, self.f64("init.epsilon")?)
            .map_err(|e| ConfigError::new("init.*", e.to_string()))
    }
}

fn split_pair(line: &str) -> Option<(String, String)> {
    let idx = line.find('=')?;
    let key = line[..idx].trim();
    let value = line[idx + 1..].trim();
    if key.is_empty() || value.is_empty() {
        return None;
    }
    Some((key.to_string(), value.to_string()))
}

fn check_known(key: &str) -> Result<(), ConfigError> {
    if KNOWN_KEYS.contains(&key) || KNOWN_PREFIXES.iter().any(|p| key.starts_with(p)) {
        Ok(())
    } else {
        Err(ConfigError::new(key, "unknown key"))
    }
}
