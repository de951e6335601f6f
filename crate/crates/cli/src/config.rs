use std::path::{Path, PathBuf};

use kac_core::{gaussian, gaussian_on, mixture, mixture_on, GridDensity1D, GridSpec, MixtureSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which one-dimensional generator an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorSpec {
    Gaussian,
    Mixture { delta: f64 },
    /// f_{δ_N} with δ_N = N^{2β-1}, one generator per N.
    Schedule { beta: f64 },
}

impl GeneratorSpec {
    pub fn is_fixed(&self) -> bool {
        !matches!(self, GeneratorSpec::Schedule { .. })
    }

    /// The generator for a fixed spec, on `grid` when given.
    pub fn fixed(&self, grid: Option<GridSpec>) -> CliResult<GridDensity1D> {
        let f = match (*self, grid) {
            (GeneratorSpec::Gaussian, None) => gaussian(1.0)?,
            (GeneratorSpec::Gaussian, Some(g)) => gaussian_on(1.0, g)?,
            (GeneratorSpec::Mixture { delta }, None) => mixture(MixtureSpec::new(delta)?)?,
            (GeneratorSpec::Mixture { delta }, Some(g)) => mixture_on(MixtureSpec::new(delta)?, g)?,
            (GeneratorSpec::Schedule { .. }, _) => {
                return Err(CliError::Validation(
                    "this experiment needs a fixed generator (gaussian or mixture)".into(),
                ))
            }
        };
        Ok(f)
    }

    /// The generator used at particle number `n`.
    pub fn at(&self, n: usize, grid: Option<GridSpec>) -> CliResult<GridDensity1D> {
        match *self {
            GeneratorSpec::Schedule { beta } => {
                let spec = MixtureSpec::scheduled(n, beta)?;
                Ok(match grid {
                    Some(g) => mixture_on(spec, g)?,
                    None => mixture(spec)?,
                })
            }
            _ => self.fixed(grid),
        }
    }

    fn validate(&self, problems: &mut Vec<String>) {
        match *self {
            GeneratorSpec::Gaussian => {}
            GeneratorSpec::Mixture { delta } => {
                if !(delta > 0.0 && delta < 1.0) {
                    problems.push(format!("generator.delta must lie in (0, 1), got {delta}"));
                }
            }
            GeneratorSpec::Schedule { beta } => {
                if !(beta > 0.0 && beta < 0.5) {
                    problems.push(format!("generator.beta must lie in (0, 1/2), got {beta}"));
                }
            }
        }
    }
}

/// Experiment description read from `--config`. Every field is optional;
/// unset fields take the defaults of the chosen subcommand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub generator: Option<GeneratorSpec>,
    pub n_list: Option<Vec<usize>>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<f64>,
    pub seed: Option<u64>,
    pub grid: Option<GridSpec>,
    /// Polynomial degree of the Galerkin space (`gap`).
    pub degree: Option<usize>,
    /// Monte Carlo samples for the Rayleigh quotient (`gap`).
    pub samples: Option<usize>,
    /// Mixture parameters swept by `cercignani`.
    pub deltas: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub snapshot_every: Option<f64>,
    pub replicas: Option<usize>,
    /// u-grid size of the sampler ladders (`chaos`).
    pub ladder_nodes: Option<usize>,
    pub epsilon: Option<f64>,
    pub c1: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid config JSON: {e}")))
    }

    /// Field-level checks that do not depend on the subcommand.
    pub fn validate(&self) -> CliResult<()> {
        let mut problems = Vec::new();
        if let Some(g) = &self.generator {
            g.validate(&mut problems);
        }
        if let Some(ns) = &self.n_list {
            if ns.is_empty() {
                problems.push("n_list must not be empty".into());
            }
            if ns.windows(2).any(|w| w[1] <= w[0]) {
                problems.push("n_list must be strictly increasing".into());
            }
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                problems.push(format!("gamma must lie in [0, 1], got {g}"));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                problems.push(format!("beta must be positive, got {b}"));
            }
        }
        if let Some(grid) = self.grid {
            if let Err(e) = grid.validate() {
                problems.push(format!("grid: {e}"));
            }
        }
        for (name, value) in [("t_end", self.t_end), ("dt", self.dt), ("snapshot_every", self.snapshot_every)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    problems.push(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let Some(ds) = &self.deltas {
            if ds.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                problems.push("deltas must lie in (0, 1)".into());
            }
        }
        for (name, value) in [("samples", self.samples), ("replicas", self.replicas)] {
            if value == Some(0) {
                problems.push(format!("{name} must be positive"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems.join("; ")))
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n_list_or(&self, default: &[usize]) -> Vec<usize> {
        self.n_list.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn generator_or(&self, default: GeneratorSpec) -> GeneratorSpec {
        self.generator.unwrap_or(default)
    }
}

pub const DEFAULT_SEED: u64 = 1;
