//! Run configuration: one JSON file drives every subcommand.
//!
//! The full resolved configuration (seed included) is embedded into every
//! output file, so re-running an output's embedded config reproduces the
//! file bitwise. Timestamps and runtimes are printed to the terminal only
//! and never written into artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use mot_core::grid::GridSpec;
use mot_core::lattice::LatticeTruncation;
use mot_core::measures::DiscreteMeasure;
use mot_core::payoffs::PayoffSpec;


use crate::CliError;

/// Value-grid and horizon parameters. `n` is the dyadic refinement level,
/// `dim` the number of assets, `horizon` the terminal time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: u32,
    pub dim: usize,
    pub horizon: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.n, self.dim, self.horizon)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Lattice truncation window; see the core crate for field semantics.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub m_max: usize,
    pub v_max: f64,
    pub level_step_max: f64,
    pub durations_per_level: usize,
    #[serde(default = "default_max_paths")]
    pub max_paths: usize,
}

fn default_max_paths() -> usize {
    200_000
}

impl TruncationConfig {
    pub fn build(&self, spec: GridSpec) -> LatticeTruncation {
        LatticeTruncation {
            spec,
            m_max: self.m_max,
            v_max: self.v_max,
            level_step_max: self.level_step_max,
            durations_per_level: self.durations_per_level,
            max_paths: self.max_paths,
        }
    }
}

/// One marginal constraint: the law of the path values at `date`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalConfig {
    pub date: f64,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MarginalConfig {
    pub fn build(&self) -> Result<(f64, DiscreteMeasure), CliError> {
        let m = DiscreteMeasure::new(self.atoms.clone(), self.weights.clone())
            .map_err(|e| CliError::Config(format!("marginal at {}: {e}", self.date)))?;
        Ok((self.date, m))
    }
}

/// Budgeted-market relaxation parameters: defect and marginal deviation
/// are allowed up to `budget / level`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxedConfig {
    pub budget: f64,
    pub level: u32,
}

/// Sweep parameters for the continuity command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityConfig {
    /// Number of perturbed marginals; the moved mass halves each step.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Mass fraction moved in the first step.
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Perturbation offset in the first coordinate; defaults to the mesh.
    pub offset: Option<f64>,
}

fn default_steps() -> usize {
    6
}

fn default_fraction() -> f64 {
    0.08
}

/// Path-generator selection for sampled corpora.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// An explicit step path for the distance utility.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub dim: usize,
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// The one configuration type shared by all subcommands; each command
/// requires the sections it uses and ignores the rest.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: Option<GridConfig>,
    pub truncation: Option<TruncationConfig>,
    pub payoff: Option<PayoffSpec>,
    pub marginals: Vec<MarginalConfig>,
    /// Box for the dynamic duals; defaults to the grid level `n`.
    pub gamma_bound: Option<f64>,
    pub relaxed: Option<RelaxedConfig>,
    /// "primal" (default) or "dual"; relaxed mode is primal by nature.
    pub side: Option<String>,
    /// Inclusive level range for the convergence sweep.
    pub n_range: Option<[u32; 2]>,
    pub continuity: Option<ContinuityConfig>,
    pub generator: Option<GeneratorConfig>,
    /// Corpus size for hedge verification; defaults to 1000.
    pub num_paths: Option<usize>,
    /// Override for the super-replication shift; defaults to the
    /// discretization bound `2 n mesh + 3 m_G(3 mesh)`.
    pub shift: Option<f64>,
    /// Diagnostic knob: subtracted from the first static leg before
    /// verification (negative controls for the hedge report).
    pub leg_offset: Option<f64>,
    pub measures: Vec<DiscreteMeasure>,
    pub paths: Vec<PathConfig>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("cannot parse {}: {e}", path.display()))
        })
    }

    /// Folds the command-line seed into the config so the embedded copy is
    /// self-contained.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> u64 {
        let seed = flag.or(self.seed).unwrap_or(0);
        self.seed = Some(seed);
        seed
    }

    pub fn grid(&self) -> Result<&GridConfig, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a 'grid' section".into()))
    }

    pub fn truncation(&self) -> Result<&TruncationConfig, CliError> {
        self.truncation
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a 'truncation' section".into()))
    }

    pub fn payoff(&self) -> Result<&PayoffSpec, CliError> {
        self.payoff
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a 'payoff' section".into()))
    }

    pub fn generator(&self) -> Result<&GeneratorConfig, CliError> {
        self.generator
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a 'generator' section".into()))
    }

    pub fn built_marginals(&self) -> Result<Vec<(f64, DiscreteMeasure)>, CliError> {
        if self.marginals.is_empty() {
            return Err(CliError::Config(
                "config needs at least one entry in 'marginals'".into(),
            ));
        }
        self.marginals.iter().map(|m| m.build()).collect()
    }
}
