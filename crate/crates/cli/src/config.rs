//! Experiment configuration: JSON in, fully-materialized effective config
//! out. Unknown keys are rejected everywhere; every default lands in the
//! echoed config so a run is reproducible from its manifest alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rpod_core::problems::{ChannelConfig, DuffingFpkConfig, GridSpec2D, PollutantConfig, SyntheticConfig};
use rpod_core::sampling::SamplingPlan;
use rpod_core::LtiSystem;

use crate::CliError;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Offset added to the root seed for the noise-excitation stage, so every
/// random draw in a run derives from the single root seed.
pub const NOISE_SEED_STAGE: u64 = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub snapshots: SnapshotConfig,
    pub method: MethodConfig,
    /// Reduced order requested from every enabled method.
    pub order: usize,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    /// Eigenvalue agreement tolerance; when absent the comparison uses
    /// 1e-6 times the largest extracted modulus.
    #[serde(default)]
    pub match_tol: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Drop extracted modes with modulus above one.
    #[serde(default)]
    pub discard_unstable: bool,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Synthetic(SyntheticConfig),
    Pollutant {
        grid: GridSpec2D,
        #[serde(flatten)]
        physics: PollutantConfig,
    },
    Channel(ChannelConfig),
    DuffingFpk(DuffingFpkConfig),
    /// Read `(A, B, C)` from matrix text files.
    MatrixFiles {
        a: PathBuf,
        b: PathBuf,
        c: PathBuf,
        #[serde(default = "default_dt")]
        dt: f64,
    },
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    pub primal_steps: StepSet,
    pub adjoint_steps: StepSet,
}

/// Either an explicit strictly-increasing list of step indices or a
/// strided range `{start, count, stride}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSet {
    List(Vec<usize>),
    Range {
        start: usize,
        count: usize,
        #[serde(default = "default_stride")]
        stride: usize,
    },
}

fn default_stride() -> usize {
    1
}

impl StepSet {
    pub fn materialize(&self) -> Result<Vec<usize>, CliError> {
        match self {
            StepSet::List(list) => {
                if !list.windows(2).all(|w| w[0] < w[1]) {
                    return Err(CliError::Config(
                        "snapshots: step lists must be strictly increasing".into(),
                    ));
                }
                Ok(list.clone())
            }
            StepSet::Range { start, count, stride } => {
                if *stride == 0 {
                    return Err(CliError::Config("snapshots: stride must be positive".into()));
                }
                if *count == 0 {
                    return Err(CliError::Config("snapshots: count must be positive".into()));
                }
                Ok((0..*count).map(|k| start + k * stride).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default)]
    pub bpod: bool,
    #[serde(default)]
    pub rpod: Option<RpodConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpodConfig {
    /// Inputs to keep.
    pub r: usize,
    /// Outputs to keep.
    pub s: usize,
    /// Primal snapshot steps to keep.
    pub m1: usize,
    /// Adjoint snapshot steps to keep.
    pub m2: usize,
    /// Root seed; every other draw in the run derives from it.
    pub seed: u64,
    /// Repeated-sampling runs for the consistency check (1 = single run).
    #[serde(default = "default_trials")]
    pub k: usize,
    /// Input-column sampling weights (uniform when absent).
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub with_replacement: bool,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub excitation: EvalExcitation,
    /// Steps simulated when evaluating ROM error.
    pub steps: usize,
    /// Forcing realizations for the noise excitation.
    pub noise_count: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            excitation: EvalExcitation::Impulse,
            steps: 200,
            noise_count: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalExcitation {
    Impulse,
    Noise,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate_shallow()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    fn validate_shallow(&self) -> Result<(), CliError> {
        if self.order == 0 {
            return Err(CliError::Config("order must be at least 1".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(CliError::Config("rank_tol must lie in (0, 1)".into()));
        }
        if !self.method.bpod && self.method.rpod.is_none() {
            return Err(CliError::Config(
                "method: enable bpod, rpod, or both".into(),
            ));
        }
        if let Some(rpod) = &self.method.rpod {
            if rpod.k == 0 {
                return Err(CliError::Config("method.rpod.k must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Checks that need the realized system dimensions; errors name the
    /// offending field.
    pub fn validate_against(&self, sys: &LtiSystem, m1_pool: usize, m2_pool: usize) -> Result<(), CliError> {
        if let Some(rpod) = &self.method.rpod {
            if rpod.r > sys.input_dim() {
                return Err(CliError::Config(format!(
                    "method.rpod.r = {} exceeds the problem's {} inputs",
                    rpod.r,
                    sys.input_dim()
                )));
            }
            if rpod.s > sys.output_dim() {
                return Err(CliError::Config(format!(
                    "method.rpod.s = {} exceeds the problem's {} outputs",
                    rpod.s,
                    sys.output_dim()
                )));
            }
            if rpod.m1 > m1_pool {
                return Err(CliError::Config(format!(
                    "method.rpod.m1 = {} exceeds the {} primal snapshot steps",
                    rpod.m1, m1_pool
                )));
            }
            if rpod.m2 > m2_pool {
                return Err(CliError::Config(format!(
                    "method.rpod.m2 = {} exceeds the {} adjoint snapshot steps",
                    rpod.m2, m2_pool
                )));
            }
            if let Some(w) = &rpod.weights {
                if w.len() != sys.input_dim() {
                    return Err(CliError::Config(format!(
                        "method.rpod.weights: expected {} entries, got {}",
                        sys.input_dim(),
                        w.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The sampling plan this config describes, given the realized system.
    pub fn sampling_plan(
        &self,
        sys: &LtiSystem,
        primal_pool: &[usize],
        adjoint_pool: &[usize],
    ) -> Option<SamplingPlan> {
        self.method.rpod.as_ref().map(|rpod| {
            let mut plan = SamplingPlan::new(
                sys.input_dim(),
                sys.output_dim(),
                primal_pool.to_vec(),
                adjoint_pool.to_vec(),
                rpod.r,
                rpod.s,
                rpod.m1,
                rpod.m2,
                rpod.seed,
            );
            plan.input_weights = rpod.weights.clone();
            plan.with_replacement = rpod.with_replacement;
            plan.trials = rpod.k;
            plan
        })
    }
}
