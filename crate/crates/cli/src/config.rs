//! Config file loading and flag merging.
//!
//! A config file is TOML whose top-level keys mirror the long flags
//! (`algo`, `task`, `seeds`, `steps`, `preset`, `phase_steps`, `cycles`,
//! `episodes`, `checkpoint`, `deterministic`, `sequential`, `out`).
//! Hyperparameters go in an `[hp]` table and environment settings in an
//! `[env]` table. Command-line flags win over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use echelon_core::{Algo, EnvConfig, Hyperparams};
use serde::Deserialize;

pub const OUT_ENV: &str = "ECHELON_OUT";
pub const DEFAULT_OUT: &str = "runs";

/// Bad flags or config values. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub algo: Option<String>,
    pub task: Option<String>,
    pub tasks: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub steps: Option<u64>,
    pub preset: Option<String>,
    pub phase_steps: Option<u64>,
    pub cycles: Option<u32>,
    pub episodes: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub deterministic: Option<bool>,
    pub sequential: Option<bool>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub hp: BTreeMap<String, toml::Value>,
    pub env: Option<EnvConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }
}

/// Output root: flag, then config file, then `$ECHELON_OUT`, then `runs`.
pub fn output_root(flag: Option<&Path>, file: &FileConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| usage(format!("invalid seed {p:?}")))
        })
        .collect::<Result<_>>()?;
    Ok(seeds)
}

pub fn seeds(flag: Option<&str>, file: &FileConfig, default: Option<u64>) -> Result<Vec<u64>> {
    let seeds = match (flag, &file.seeds) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => default.into_iter().collect(),
    };
    if seeds.is_empty() {
        return Err(usage("at least one seed is required (--seeds)"));
    }
    Ok(seeds)
}

pub fn require<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn toml_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Array(xs) => xs.iter().map(toml_text).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

/// Default hyperparameters for `algo` with file overrides, then `--set`
/// overrides applied in order. A recurrent run whose `n_steps` is changed
/// without an explicit minibatch size keeps the full-window minibatch.
pub fn hyperparams(algo: Algo, file: &FileConfig, sets: &[String]) -> Result<Hyperparams> {
    let mut hp = algo.default_hyperparams();
    let mut pairs: Vec<(String, String)> = file
        .hp
        .iter()
        .map(|(k, v)| (k.clone(), toml_text(v)))
        .collect();
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got {s:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in &pairs {
        hp.set(k, v)?;
    }
    let mb_given = pairs
        .iter()
        .any(|(k, _)| k == "minibatch_size" || k == "batch_size");
    if algo == Algo::Rppo && !mb_given {
        hp.minibatch_size = hp.n_steps;
    }
    hp.validate()?;
    Ok(hp)
}
