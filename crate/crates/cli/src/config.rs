//! Experiment configuration: JSON file, command-line overrides, validation.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::{Path, PathBuf};

use onebit_core::detector::MAX_M;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const DEFAULT_OUTPUT_DIR: &str = "onebit-out";
pub const RESOLVED_CONFIG_NAME: &str = "config.resolved.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Receive antennas.
    pub m: usize,
    /// Transmit antennas.
    pub p: usize,
    /// Snapshots per detection block (training plus detection in `training`).
    pub n: usize,
    /// Target angle in radians.
    pub phi: f64,
    /// LFM steering angle in radians.
    pub theta: f64,
    /// Noise correlation scale in Σ_N = αHHᴴ + I.
    pub alpha: f64,
    /// Covariance perturbation levels.
    pub rho: Vec<f64>,
    /// SNR levels (dB) for `pd`.
    pub snr_db: Vec<f64>,
    /// SNR (dB) for `roc` and `training`.
    pub roc_snr_db: f64,
    /// Phase of the target amplitude β.
    pub beta_phase: f64,
    pub n_trials: usize,
    /// Prior draws K for `avg-pfa`.
    pub k_draws: usize,
    pub seed: u64,
    /// Training lengths n₁ for `training`; the detection window is n − n₁.
    pub n1: Vec<usize>,
    /// Threshold grid size for `pfa`, `avg-pfa` and `pd`.
    pub gamma_points: usize,
    /// False-alarm grid for `roc` and `training`.
    pub pfa_grid: Vec<f64>,
    /// QMC tolerance of the detector tables.
    pub table_tol: f64,
    /// QMC tolerance of per-draw and per-snapshot orthant probabilities.
    pub coarse_tol: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 2,
            p: 2,
            n: 500,
            phi: FRAC_PI_4,
            theta: FRAC_PI_4,
            alpha: 1.0,
            rho: vec![0.0, 0.02, 0.1],
            snr_db: vec![-20.0, -15.0, -10.0, -7.0],
            roc_snr_db: -17.0,
            beta_phase: 0.5,
            n_trials: 100_000,
            k_draws: 1000,
            seed: 1,
            n1: vec![100, 250],
            gamma_points: 10,
            pfa_grid: vec![1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            table_tol: 1e-7,
            coarse_tol: 1e-5,
            output_dir: None,
        }
    }
}

/// Command-line values that replace config-file entries when present.
#[derive(Clone, Debug, Default)]
pub struct ConfigOverrides {
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub rho: Option<Vec<f64>>,
    pub snr_db: Option<Vec<f64>>,
    pub roc_snr_db: Option<f64>,
    pub n_trials: Option<usize>,
    pub k_draws: Option<usize>,
    pub seed: Option<u64>,
    pub n1: Option<Vec<usize>>,
    pub gamma_points: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: ConfigOverrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(m, p, n, alpha, rho, snr_db, roc_snr_db, n_trials, k_draws, seed, n1, gamma_points);
        if o.output_dir.is_some() {
            self.output_dir = o.output_dir;
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.m == 0 || self.m > MAX_M {
            return bad(format!("m must lie in 1..={MAX_M}, got {}", self.m));
        }
        for (name, v) in [("p", self.p), ("n", self.n), ("n_trials", self.n_trials), ("k_draws", self.k_draws)] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.gamma_points < 2 {
            return bad("gamma_points must be at least 2".into());
        }
        for (name, v) in [("phi", self.phi), ("theta", self.theta), ("roc_snr_db", self.roc_snr_db), ("beta_phase", self.beta_phase)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if self.rho.is_empty() || self.rho.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad("rho must be a nonempty list of nonnegative values".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a nonempty list of finite values".into());
        }
        if self.pfa_grid.is_empty() || self.pfa_grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return bad("pfa_grid entries must lie in (0, 1]".into());
        }
        if self.n1.iter().any(|&n1| n1 < 2 * self.m || n1 >= self.n) {
            return bad(format!("each n1 must satisfy 2m <= n1 < n = {}", self.n));
        }
        for (name, v) in [("table_tol", self.table_tol), ("coarse_tol", self.coarse_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Writes the resolved configuration next to the outputs.
    pub fn write_resolved(&self, dir: &Path) -> CliResult<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(RESOLVED_CONFIG_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
