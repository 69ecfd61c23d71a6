//! Experiment configuration: loading, defaults, field-precise validation.

use std::path::{Path, PathBuf};

use carbon_gmam::carbon::ModelParams;
use carbon_gmam::{Gmam, Sim};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One experiment: which parameter file, which c_x, which ν grid, and the
/// solver/simulator knobs. Every field has a default, so an empty config
/// file is a valid (full-default) experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params_file: PathBuf,
    pub c_x: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub nu_step: f64,
    pub gmam: Gmam,
    pub sim: Sim,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params_file: PathBuf::from("params/rothman-modern-ocean.json"),
            c_x: 62.0,
            nu_min: 0.0,
            nu_max: 0.9,
            nu_step: 0.01,
            gmam: Gmam::default(),
            sim: Sim::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.params_file.as_os_str().is_empty() {
            return bad("params_file must not be empty".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir must not be empty".into());
        }
        if !(self.c_x > 0.0) || !self.c_x.is_finite() {
            return bad(format!("c_x must be a positive finite number, got {}", self.c_x));
        }
        if !(self.nu_min >= 0.0) || !self.nu_min.is_finite() {
            return bad(format!("nu_min must be a finite number ≥ 0, got {}", self.nu_min));
        }
        if !self.nu_max.is_finite() || self.nu_max < self.nu_min {
            return bad(format!(
                "nu_max must be finite and ≥ nu_min, got nu_max {} with nu_min {}",
                self.nu_max, self.nu_min
            ));
        }
        if !(self.nu_step > 0.0) || !self.nu_step.is_finite() {
            return bad(format!("nu_step must be a positive finite number, got {}", self.nu_step));
        }
        self.gmam.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// The ν grid: nu_min, nu_min + nu_step, … up to nu_max inclusive
    /// (within a half-ulp slack so 0:0.01:0.9 yields exactly 91 points).
    pub fn nu_grid(&self) -> Vec<f64> {
        let span = self.nu_max - self.nu_min;
        let n = (span / self.nu_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.nu_min + i as f64 * self.nu_step).collect()
    }
}

/// Read a config file. A missing/unreadable file is an I/O error; an empty
/// file means "all defaults"; malformed JSON or an unknown key is a config
/// error naming the offender.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = if text.trim().is_empty() {
        ExperimentConfig::default()
    } else {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Read and validate a model parameter file (strict schema: exactly the
/// ModelParams field names, all finite numbers).
pub fn load_params(path: &Path) -> CliResult<ModelParams<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read params {}: {e}", path.display())))?;
    let params: ModelParams<f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("params {}: {e}", path.display())))?;
    params
        .validate()
        .map_err(|e| CliError::Config(format!("params {}: {e}", path.display())))?;
    Ok(params)
}
