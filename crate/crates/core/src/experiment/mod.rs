//! End-to-end experiments on synthetic workloads: planning scenarios,
//! co-location against the least-requested baseline, hyper-parameter
//! sweeps and leave-one-out validation.

mod colocation;
mod scenarios;
mod sweep;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use colocation::{run_colocation, ColocationReport, ColocationTrial, PolicyOutcome};
pub use scenarios::{
    run_scenario1, run_scenario2, PlanOutcome, Scenario1Report, Scenario1Summary, Scenario2Report,
    Scenario2Summary,
};
pub use sweep::{
    evaluate_planner, run_hyperparam_sweep, run_loocv, ErrorStats, LoocvReport, PlannerReport, SweepCell,
    SweepReport,
};

use crate::error::{Result, UrsaError};
use crate::planner::{ModelBundle, PlannerModel, TrainingConfig};
use crate::scheduler::ScheduleConfig;
use crate::simulator::{ClusterSpec, SlowdownModel};
use crate::spec::{CostWeights, ResourceSpec};
use crate::surface::{surface_error, ScalingSurface};
use crate::synth::{stratified_split, SynthParams, Workload, WorkloadSet};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario1Config {
    pub origin: ResourceSpec,
    pub targets: Vec<f64>,
}

impl Default for Scenario1Config {
    fn default() -> Self {
        Scenario1Config {
            origin: ResourceSpec::new(1, 2),
            targets: vec![2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario2Config {
    pub origin: ResourceSpec,
}

impl Default for Scenario2Config {
    fn default() -> Self {
        Scenario2Config {
            origin: ResourceSpec::new(12, 16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColocationConfig {
    pub trials: u32,
    pub workloads: usize,
    pub cluster: ClusterSpec,
    /// Inclusive ranges of the integer-uniform origin draws.
    pub origin_cores: (u32, u32),
    pub origin_memory_gb: (u32, u32),
    pub schedule: ScheduleConfig,
    pub slowdown: SlowdownModel,
}

impl Default for ColocationConfig {
    fn default() -> Self {
        ColocationConfig {
            trials: 10,
            workloads: 56,
            cluster: ClusterSpec::default(),
            origin_cores: (1, 12),
            origin_memory_gb: (2, 16),
            schedule: ScheduleConfig::default(),
            slowdown: SlowdownModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Base specifications to train at; empty means every grid point.
    pub bases: Vec<ResourceSpec>,
    /// Independent train/validation splits averaged per cell.
    pub splits: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_min: 2,
            k_max: 30,
            bases: Vec::new(),
            splits: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub synth: SynthParams,
    pub train_size: usize,
    pub validation_size: usize,
    pub training: TrainingConfig,
    pub cost_weights: CostWeights,
    /// Scale-down performance tolerance.
    pub epsilon: f64,
    pub scenario1: Scenario1Config,
    pub scenario2: Scenario2Config,
    pub colocation: ColocationConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            synth: SynthParams::default(),
            train_size: 44,
            validation_size: 11,
            training: TrainingConfig::default(),
            cost_weights: CostWeights::default(),
            epsilon: 0.05,
            scenario1: Scenario1Config::default(),
            scenario2: Scenario2Config::default(),
            colocation: ColocationConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        c.validate()?;
        Ok(c)
    }

    /// Same configuration with every seed replaced by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self.training.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_size + self.validation_size != self.synth.workloads {
            return Err(UrsaError::invalid(format!(
                "split {}+{} does not match {} workloads",
                self.train_size, self.validation_size, self.synth.workloads
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(UrsaError::invalid(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.training.k == 0 || self.training.k > self.train_size {
            return Err(UrsaError::invalid(format!(
                "k = {} must lie in 1..={}",
                self.training.k, self.train_size
            )));
        }
        self.colocation.schedule.validate()
    }

    pub fn base_spec(&self) -> ResourceSpec {
        self.synth.context.base_spec
    }
}

/// Generated workloads with a train/validation split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub set: WorkloadSet,
    pub workloads: Vec<Workload>,
    pub training: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let set = WorkloadSet::generate(&config.synth)?;
        Prepared::from_set(config, set, config.seed)
    }

    pub fn from_set(config: &ExperimentConfig, set: WorkloadSet, split_seed: u64) -> Result<Self> {
        let workloads = set.materialize()?;
        let ids: Vec<u32> = workloads.iter().map(|w| w.archetype_id).collect();
        let (training, validation) =
            stratified_split(&ids, config.train_size, config.validation_size, split_seed)?;
        Ok(Prepared {
            set,
            workloads,
            training,
            validation,
        })
    }

    pub fn training_workloads(&self) -> Vec<&Workload> {
        self.training.iter().map(|&i| &self.workloads[i]).collect()
    }

    pub fn validation_workloads(&self) -> Vec<&Workload> {
        self.validation.iter().map(|&i| &self.workloads[i]).collect()
    }

    pub fn train_bundle(&self, config: &ExperimentConfig, bases: &[ResourceSpec]) -> Result<ModelBundle> {
        ModelBundle::train(&self.training_workloads(), bases, &config.training)
    }
}

/// The predicted surface of `w` from readings at the model's base spec,
/// and its error against the ground truth.
pub(crate) fn predict(model: &PlannerModel, w: &Workload, noise_sigma: f64) -> Result<(ScalingSurface, f64)> {
    let x = w.observe_indexes(model.base_spec, noise_sigma)?;
    let s = model.predict_surface(&x)?;
    let err = surface_error(&s, &w.surface_at(model.base_spec)?)?;
    Ok((s, err))
}

pub(crate) fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
