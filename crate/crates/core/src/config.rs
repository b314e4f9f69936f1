//! Flat TOML configuration with environment and command-line overrides.
//!
//! Layers apply in order: built-in defaults, config file, `TBAL_*`
//! environment variables, command-line flags. Every key is optional and
//! unknown keys are rejected.

use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiments::{EnsembleConfig, DEFAULT_N_GRID};

/// Prefix for environment overrides, e.g. `TBAL_N=50`.
pub const ENV_PREFIX: &str = "TBAL_";

pub const KEYS: &[&str] = &[
    "n",
    "mu",
    "sigma",
    "r_bound",
    "epsilon",
    "tau_grid",
    "variant",
    "scheduler",
    "runs",
    "t_max",
    "sample_interval",
    "master_seed",
    "tol",
    "out_dir",
    "threads",
    "emit_raw",
    "emit_histograms",
    "emit_timecourses",
    "n_grid",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub ensemble: EnsembleConfig,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    pub emit_raw: bool,
    pub emit_histograms: bool,
    pub emit_timecourses: bool,
    pub n_grid: Vec<usize>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            ensemble: EnsembleConfig::default(),
            out_dir: PathBuf::from("results"),
            threads: 0,
            emit_raw: false,
            emit_histograms: true,
            emit_timecourses: true,
            n_grid: DEFAULT_N_GRID.to_vec(),
        }
    }
}

fn parse_err(field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: message.into(),
    }
}

fn as_float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(parse_err(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn as_uint(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(parse_err(key, format!("expected a non-negative integer, got {i}"))),
        other => Err(parse_err(key, format!("expected an integer, got {}", other.type_str()))),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| parse_err(key, format!("expected a boolean, got {}", v.type_str())))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| parse_err(key, format!("expected a string, got {}", v.type_str())))
}

fn as_array<'a>(key: &str, v: &'a Value) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| parse_err(key, format!("expected a list, got {}", v.type_str())))
}

impl ConfigFile {
    /// Sets one key from a typed TOML value.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let e = &mut self.ensemble;
        match key {
            "n" => e.n = as_uint(key, v)? as usize,
            "mu" => e.mu = as_float(key, v)?,
            "sigma" => e.sigma = as_float(key, v)?,
            "r_bound" => e.r_bound = as_float(key, v)?,
            "epsilon" => e.epsilon = as_float(key, v)?,
            "tau_grid" => {
                e.tau_grid = as_array(key, v)?
                    .iter()
                    .map(|x| as_float(key, x))
                    .collect::<Result<_>>()?
            }
            "variant" => e.variant = as_str(key, v)?.parse().map_err(|m: String| parse_err(key, m))?,
            "scheduler" => e.scheduler = as_str(key, v)?.parse().map_err(|m: String| parse_err(key, m))?,
            "runs" => e.runs = as_uint(key, v)? as usize,
            "t_max" => e.t_max = as_float(key, v)?,
            "sample_interval" => e.sample_interval = as_float(key, v)?,
            "master_seed" => e.master_seed = as_uint(key, v)?,
            "tol" => e.tol = as_float(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(as_str(key, v)?),
            "threads" => self.threads = as_uint(key, v)? as usize,
            "emit_raw" => self.emit_raw = as_bool(key, v)?,
            "emit_histograms" => self.emit_histograms = as_bool(key, v)?,
            "emit_timecourses" => self.emit_timecourses = as_bool(key, v)?,
            "n_grid" => {
                self.n_grid = as_array(key, v)?
                    .iter()
                    .map(|x| as_uint(key, x).map(|u| u as usize))
                    .collect::<Result<_>>()?
            }
            other => return Err(parse_err(other, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn apply_table(&mut self, table: &Table) -> Result<()> {
        for (k, v) in table {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Sets a key from its textual form: a TOML value, or a bare string.
    pub fn set_text(&mut self, key: &str, text: &str) -> Result<()> {
        let value = match format!("v = {text}").parse::<Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => Value::String(text.to_string()),
        };
        self.set(key, &value)
    }

    /// Applies `TBAL_<KEY>` overrides from the given variables.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut matched: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|s| (s.to_ascii_lowercase(), v)))
            .collect();
        matched.sort();
        for (key, value) in matched {
            self.set_text(&key, &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.ensemble.master_seed > i64::MAX as u64 {
            return Err(Error::config("master_seed must fit in a signed 64-bit integer"));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 3) {
            return Err(Error::config("n_grid must be nonempty with every n >= 3"));
        }
        Ok(())
    }

    /// Effective configuration as a TOML document that parses back to `self`.
    pub fn to_toml(&self) -> String {
        let e = &self.ensemble;
        let mut t = Table::new();
        let f = |x: f64| Value::Float(x);
        let int = |x: u64| Value::Integer(x as i64);
        t.insert("n".into(), int(e.n as u64));
        t.insert("mu".into(), f(e.mu));
        t.insert("sigma".into(), f(e.sigma));
        t.insert("r_bound".into(), f(e.r_bound));
        t.insert("epsilon".into(), f(e.epsilon));
        t.insert("tau_grid".into(), Value::Array(e.tau_grid.iter().map(|&x| f(x)).collect()));
        t.insert("variant".into(), Value::String(e.variant.as_str().into()));
        t.insert("scheduler".into(), Value::String(e.scheduler.as_str().into()));
        t.insert("runs".into(), int(e.runs as u64));
        t.insert("t_max".into(), f(e.t_max));
        t.insert("sample_interval".into(), f(e.sample_interval));
        t.insert("master_seed".into(), int(e.master_seed));
        t.insert("tol".into(), f(e.tol));
        t.insert("out_dir".into(), Value::String(self.out_dir.display().to_string()));
        t.insert("threads".into(), int(self.threads as u64));
        t.insert("emit_raw".into(), Value::Boolean(self.emit_raw));
        t.insert("emit_histograms".into(), Value::Boolean(self.emit_histograms));
        t.insert("emit_timecourses".into(), Value::Boolean(self.emit_timecourses));
        t.insert("n_grid".into(), Value::Array(self.n_grid.iter().map(|&x| int(x as u64)).collect()));
        toml::to_string(&t).expect("plain table always serializes")
    }
}

/// Parses a config document on top of the defaults and validates it.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let field = e
            .span()
            .and_then(|s| text.get(s))
            .unwrap_or("<document>")
            .trim()
            .to_string();
        parse_err(&field, e.message().to_string())
    })?;
    let mut cfg = ConfigFile::default();
    cfg.apply_table(&table)?;
    cfg.validate()?;
    Ok(cfg)
}
