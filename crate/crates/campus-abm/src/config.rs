//! Config-file grammar: flat `key = value` lines with `#` comments.
//!
//! Model-level keys are bare (`rho = 0.0187`, `seed = 42`); subsystem keys
//! carry a dotted section prefix (`pop.concentration = 10`,
//! `calibrate.tolerance = 0.005`, `sa.lhs_samples = 1000`). Every key
//! missing from the file keeps its published baseline value, so an empty
//! file is the baseline configuration. Unknown keys, duplicate keys,
//! malformed values and out-of-range values are reported with their line
//! number.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::calibrate::CalibrationSpec;
use crate::core::ModelError;
use crate::output;
use crate::Scenario;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key '{key}': {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

/// Sensitivity-analysis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    pub lhs_samples: usize,
    pub sobol_samples: usize,
    pub replicates_per_sample: usize,
    pub oat_grid_points: usize,
    pub oat_replicates: usize,
    /// Bounds are `[0, bounds_factor * beta_tilde_baseline]` per context.
    pub bounds_factor: f64,
    pub sobol_bootstrap: usize,
    pub regression_bootstrap: usize,
    /// Independent design repetitions to average over.
    pub repetitions: usize,
}

impl SaConfig {
    pub fn baseline() -> Self {
        SaConfig {
            lhs_samples: 1000,
            sobol_samples: 1000,
            replicates_per_sample: 1,
            oat_grid_points: 11,
            oat_replicates: 200,
            bounds_factor: 2.0,
            sobol_bootstrap: 100,
            regression_bootstrap: 1000,
            repetitions: 1,
        }
    }
}

/// Everything the command-line surface needs for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub scenario: Scenario,
    pub calibration: CalibrationSpec,
    pub sa: SaConfig,
    /// Ensemble size for plain simulation runs.
    pub replicates: usize,
}

impl AppConfig {
    pub fn baseline() -> Self {
        AppConfig {
            scenario: Scenario::baseline(),
            calibration: CalibrationSpec::baseline(),
            sa: SaConfig::baseline(),
            replicates: 200,
        }
    }

    /// Canonical dump in the config grammar; `parse_config_str` of the dump
    /// reproduces the configuration.
    pub fn to_config_string(&self) -> String {
        let model = &self.scenario.model;
        let pop = &self.scenario.population;
        let cal = &self.calibration;
        let sa = &self.sa;
        let join = |values: &[f64]| {
            values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        let _ = writeln!(out, "population = {}", model.population);
        let _ = writeln!(out, "rho = {}", model.rho);
        let _ = writeln!(out, "gamma = {}", model.gamma);
        let _ = writeln!(
            out,
            "class_year_fractions = {}",
            join(&model.class_year_fractions)
        );
        let _ = writeln!(
            out,
            "initial_drinker_fraction = {}",
            model.initial_drinker_fraction
        );
        let _ = writeln!(out, "context_sigmas = {}", join(&model.context_sigmas));
        let _ = writeln!(out, "context_betas = {}", join(&model.context_betas));
        let _ = writeln!(out, "horizon_ticks = {}", model.horizon_ticks);
        let _ = writeln!(out, "qs_window = {},{}", model.qs_window.0, model.qs_window.1);
        let _ = writeln!(out, "seed = {}", model.seed);
        let _ = writeln!(out, "replicates = {}", self.replicates);
        let _ = writeln!(out, "pop.mean_visit_probs = {}", join(&pop.mean_visit_probs));
        let _ = writeln!(out, "pop.concentration = {}", pop.concentration);
        let _ = writeln!(out, "calibrate.target_prevalence = {}", cal.target_prevalence);
        let _ = writeln!(out, "calibrate.beta_tilde_max = {}", cal.beta_tilde_max);
        let _ = writeln!(
            out,
            "calibrate.replicates_per_eval = {}",
            cal.replicates_per_eval
        );
        let _ = writeln!(out, "calibrate.tolerance = {}", cal.tolerance);
        let _ = writeln!(out, "calibrate.max_iterations = {}", cal.max_iterations);
        let _ = writeln!(out, "sa.lhs_samples = {}", sa.lhs_samples);
        let _ = writeln!(out, "sa.sobol_samples = {}", sa.sobol_samples);
        let _ = writeln!(
            out,
            "sa.replicates_per_sample = {}",
            sa.replicates_per_sample
        );
        let _ = writeln!(out, "sa.oat_grid_points = {}", sa.oat_grid_points);
        let _ = writeln!(out, "sa.oat_replicates = {}", sa.oat_replicates);
        let _ = writeln!(out, "sa.bounds_factor = {}", sa.bounds_factor);
        let _ = writeln!(out, "sa.sobol_bootstrap = {}", sa.sobol_bootstrap);
        let _ = writeln!(
            out,
            "sa.regression_bootstrap = {}",
            sa.regression_bootstrap
        );
        let _ = writeln!(out, "sa.repetitions = {}", sa.repetitions);
        out
    }
}

struct Parser {
    config: AppConfig,
    seen: HashSet<String>,
    matrix_file: Option<(usize, PathBuf)>,
}

impl Parser {
    fn value_error(line: usize, key: &str, message: &str) -> ConfigError {
        ConfigError::Value {
            line,
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    fn parse_num<T: std::str::FromStr>(
        line: usize,
        key: &str,
        value: &str,
    ) -> Result<T, ConfigError> {
        value
            .parse::<T>()
            .map_err(|_| Self::value_error(line, key, &format!("malformed value '{value}'")))
    }

    fn parse_prob(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
        let v: f64 = Self::parse_num(line, key, value)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Self::value_error(line, key, "must lie in [0, 1]"));
        }
        Ok(v)
    }

    fn parse_positive(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
        let v: f64 = Self::parse_num(line, key, value)?;
        if !(v > 0.0) {
            return Err(Self::value_error(line, key, "must be positive"));
        }
        Ok(v)
    }

    fn parse_count(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
        let v: usize = Self::parse_num(line, key, value)?;
        if v == 0 {
            return Err(Self::value_error(line, key, "must be at least 1"));
        }
        Ok(v)
    }

    fn parse_vector(
        line: usize,
        key: &str,
        value: &str,
        expected: usize,
    ) -> Result<Vec<f64>, ConfigError> {
        let parts: Vec<f64> = value
            .split(',')
            .map(|p| Self::parse_num(line, key, p.trim()))
            .collect::<Result<_, _>>()?;
        if parts.len() != expected {
            return Err(Self::value_error(
                line,
                key,
                &format!("expected {expected} comma-separated values, got {}", parts.len()),
            ));
        }
        Ok(parts)
    }

    fn parse_prob_vector(
        line: usize,
        key: &str,
        value: &str,
        expected: usize,
    ) -> Result<Vec<f64>, ConfigError> {
        let parts = Self::parse_vector(line, key, value, expected)?;
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Self::value_error(line, key, "entries must lie in [0, 1]"));
        }
        Ok(parts)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let model = &mut self.config.scenario.model;
        let pop = &mut self.config.scenario.population;
        let cal = &mut self.config.calibration;
        let sa = &mut self.config.sa;
        let contexts = model.context_count();
        match key {
            "population" => {
                let n = Self::parse_count(line, key, value)?;
                model.population = n;
                pop.count = n;
            }
            "rho" => model.rho = Self::parse_prob(line, key, value)?,
            "gamma" => {
                let g = Self::parse_prob(line, key, value)?;
                if g == 0.0 {
                    return Err(Self::value_error(line, key, "must be positive"));
                }
                model.gamma = g;
            }
            "class_year_fractions" => {
                let v = Self::parse_prob_vector(line, key, value, 5)?;
                let fractions: [f64; 5] = v.try_into().unwrap();
                model.class_year_fractions = fractions;
                pop.class_year_fractions = fractions;
            }
            "initial_drinker_fraction" => {
                let f = Self::parse_prob(line, key, value)?;
                model.initial_drinker_fraction = f;
                pop.initial_drinker_fraction = f;
            }
            "context_sigmas" => {
                model.context_sigmas = Self::parse_prob_vector(line, key, value, contexts)?;
            }
            "context_betas" => {
                model.context_betas = Self::parse_prob_vector(line, key, value, contexts)?;
            }
            "horizon_ticks" => model.horizon_ticks = Self::parse_num(line, key, value)?,
            "qs_window" => {
                let parts: Vec<&str> = value.split(',').map(|p| p.trim()).collect();
                if parts.len() != 2 {
                    return Err(Self::value_error(line, key, "expected 'lo,hi'"));
                }
                let lo: u64 = Self::parse_num(line, key, parts[0])?;
                let hi: u64 = Self::parse_num(line, key, parts[1])?;
                model.qs_window = (lo, hi);
            }
            "seed" => model.seed = Self::parse_num(line, key, value)?,
            "replicates" => self.config.replicates = Self::parse_count(line, key, value)?,
            "pop.mean_visit_probs" => {
                pop.mean_visit_probs = Self::parse_prob_vector(line, key, value, contexts)?;
            }
            "pop.concentration" => {
                pop.concentration = Self::parse_positive(line, key, value)?;
            }
            "pop.matrix_file" => {
                self.matrix_file = Some((line, PathBuf::from(value)));
            }
            "calibrate.target_prevalence" => {
                cal.target_prevalence = Self::parse_prob(line, key, value)?;
            }
            "calibrate.beta_tilde_max" => {
                cal.beta_tilde_max = Self::parse_positive(line, key, value)?;
            }
            "calibrate.replicates_per_eval" => {
                cal.replicates_per_eval = Self::parse_count(line, key, value)?;
            }
            "calibrate.tolerance" => cal.tolerance = Self::parse_positive(line, key, value)?,
            "calibrate.max_iterations" => {
                cal.max_iterations = Self::parse_count(line, key, value)?;
            }
            "sa.lhs_samples" => sa.lhs_samples = Self::parse_count(line, key, value)?,
            "sa.sobol_samples" => sa.sobol_samples = Self::parse_count(line, key, value)?,
            "sa.replicates_per_sample" => {
                sa.replicates_per_sample = Self::parse_count(line, key, value)?;
            }
            "sa.oat_grid_points" => sa.oat_grid_points = Self::parse_count(line, key, value)?,
            "sa.oat_replicates" => sa.oat_replicates = Self::parse_count(line, key, value)?,
            "sa.bounds_factor" => sa.bounds_factor = Self::parse_positive(line, key, value)?,
            "sa.sobol_bootstrap" => sa.sobol_bootstrap = Self::parse_count(line, key, value)?,
            "sa.regression_bootstrap" => {
                sa.regression_bootstrap = Self::parse_count(line, key, value)?;
            }
            "sa.repetitions" => sa.repetitions = Self::parse_count(line, key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

/// Parses a config file; unspecified keys keep their baselines.
pub fn parse_config(path: &Path) -> Result<AppConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses config text (see module docs for the grammar).
pub fn parse_config_str(text: &str) -> Result<AppConfig, ConfigError> {
    let mut parser = Parser {
        config: AppConfig::baseline(),
        seen: HashSet::new(),
        matrix_file: None,
    };
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Value {
                line,
                key: content.to_string(),
                message: "expected 'key = value'".to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::Value {
                line,
                key: raw.to_string(),
                message: "empty key".to_string(),
            });
        }
        if !parser.seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        parser.apply(line, key, value)?;
    }

    let mut config = parser.config;
    if let Some((line, path)) = parser.matrix_file {
        let matrix = output::read_visit_matrix(&path).map_err(|e| ConfigError::Value {
            line,
            key: "pop.matrix_file".to_string(),
            message: e.to_string(),
        })?;
        config.scenario.population.matrix_override = Some(matrix);
    }

    config.scenario.validate()?;
    config.calibration.validate()?;
    Ok(config)
}
