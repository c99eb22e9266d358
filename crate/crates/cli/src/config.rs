use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Private,
}

/// Settings shared by the estimation commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub order: usize,
    pub lambda: f64,
    pub t_occ: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub w_mean: f64,
    pub w_sd: f64,
    pub mode: Mode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            order: 2,
            lambda: 100.0,
            t_occ: 48,
            tol: 1e-6,
            max_iter: 20,
            train_fraction: 0.75,
            seed: 0,
            w_mean: 0.1,
            w_sd: 0.1,
            mode: Mode::Plain,
        }
    }
}

/// Flags that override the config file, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunOverrides {
    /// Key-value config file (`key = value` per line, `#` comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model order M.
    #[arg(long)]
    pub order: Option<usize>,
    /// Penalty on ξ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Occupancy period, in sampling intervals.
    #[arg(long = "t-occ")]
    pub t_occ: Option<usize>,
    /// Convergence tolerance on GAP.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Share of periods used for fitting; the rest is held out.
    #[arg(long = "train-fraction")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean of the encryption vector entries.
    #[arg(long = "w-mean")]
    pub w_mean: Option<f64>,
    /// Standard deviation of the encryption vector entries.
    #[arg(long = "w-sd")]
    pub w_sd: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config { line, message: format!("invalid value {value:?} for {key}") })
}

/// Applies a key-value config text on top of `cfg`.
pub fn apply_config_text(cfg: &mut RunConfig, text: &str) -> Result<(), CliError> {
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Config { line, message: format!("expected key = value, found {content:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        let canonical = match key {
            "M" | "order" => "order",
            "T_occ" | "t_occ" => "t_occ",
            other => other,
        };
        if !seen.insert(canonical.to_string()) {
            return Err(CliError::Config { line, message: format!("{key} set more than once") });
        }
        match canonical {
            "order" => cfg.order = parse_value(line, key, value)?,
            "lambda" => cfg.lambda = parse_value(line, key, value)?,
            "t_occ" => cfg.t_occ = parse_value(line, key, value)?,
            "tol" => cfg.tol = parse_value(line, key, value)?,
            "max_iter" => cfg.max_iter = parse_value(line, key, value)?,
            "train_fraction" => cfg.train_fraction = parse_value(line, key, value)?,
            "seed" => cfg.seed = parse_value(line, key, value)?,
            "w_mean" => cfg.w_mean = parse_value(line, key, value)?,
            "w_sd" => cfg.w_sd = parse_value(line, key, value)?,
            "mode" => {
                cfg.mode = Mode::from_str(value, true)
                    .map_err(|_| CliError::Config { line, message: format!("mode must be plain or private, found {value:?}") })?
            }
            _ => return Err(CliError::Config { line, message: format!("unknown key {key:?}") }),
        }
    }
    Ok(())
}

impl RunOverrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = read_text(path)?;
            apply_config_text(&mut cfg, &text)?;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        take!(order, lambda, t_occ, tol, max_iter, train_fraction, seed, w_mean, w_sd, mode);
        validate(&cfg)?;
        Ok(cfg)
    }
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Usage(m));
    if cfg.order == 0 {
        return bad("order must be at least 1".into());
    }
    if cfg.t_occ == 0 {
        return bad("t_occ must be at least 1".into());
    }
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return bad(format!("lambda must be finite and nonnegative, got {}", cfg.lambda));
    }
    if !(cfg.tol > 0.0) {
        return bad(format!("tol must be positive, got {}", cfg.tol));
    }
    if cfg.max_iter == 0 {
        return bad("max_iter must be at least 1".into());
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return bad(format!("train_fraction must lie in (0, 1], got {}", cfg.train_fraction));
    }
    if !(cfg.w_sd > 0.0 && cfg.w_sd.is_finite() && cfg.w_mean.is_finite()) {
        return bad(format!("encryption distribution N({}, {}) is invalid", cfg.w_mean, cfg.w_sd));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}
