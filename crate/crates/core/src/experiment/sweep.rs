use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{predict, save_json, ExperimentConfig, Prepared, REPORT_SCHEMA};
use crate::error::{Result, UrsaError};
use crate::planner::{
    select_training_features, train_planner, train_planner_with, ModelBundle, TrainingConfig,
};
use crate::seed;
use crate::spec::ResourceSpec;
use crate::synth::{Workload, WorkloadSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `std / sqrt(count)`
    pub std_error: f64,
}

impl ErrorStats {
    pub fn of(errors: &[f64]) -> Self {
        let n = errors.len();
        if n == 0 {
            return ErrorStats {
                count: 0,
                mean: 0.0,
                max: 0.0,
                std: 0.0,
                std_error: 0.0,
            };
        }
        let mean = errors.iter().sum::<f64>() / n as f64;
        let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        ErrorStats {
            count: n,
            mean,
            max: errors.iter().copied().fold(0.0, f64::max),
            std,
            std_error: std / (n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadError {
    pub workload_id: u64,
    pub archetype_id: u32,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerReport {
    pub schema_version: u32,
    pub seed: u64,
    pub base_spec: ResourceSpec,
    pub k: usize,
    pub selected_features: Vec<usize>,
    pub validation: Vec<WorkloadError>,
    pub stats: ErrorStats,
}

impl PlannerReport {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(self, dir.as_ref().join("planner.json"))?;
        write_errors_csv(&self.validation, &dir.as_ref().join("planner.csv"))
    }
}

fn write_errors_csv(rows: &[WorkloadError], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Surface prediction error on the validation split.
pub fn evaluate_planner(config: &ExperimentConfig, bundle: Option<&ModelBundle>) -> Result<PlannerReport> {
    let prepared = Prepared::new(config)?;
    let bundle = match bundle {
        Some(b) => b.clone(),
        None => prepared.train_bundle(config, &[config.base_spec()])?,
    };
    let model = bundle.model_for(config.base_spec())?;
    let validation = prepared
        .validation_workloads()
        .into_iter()
        .map(|w| {
            Ok(WorkloadError {
                workload_id: w.workload_id,
                archetype_id: w.archetype_id,
                error: predict(model, w, config.training.noise_sigma)?.1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = validation.iter().map(|e| e.error).collect();
    Ok(PlannerReport {
        schema_version: REPORT_SCHEMA,
        seed: config.seed,
        base_spec: model.base_spec,
        k: model.clustering.k,
        selected_features: model.selection.selected.clone(),
        validation,
        stats: ErrorStats::of(&errors),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub split: u32,
    pub base_spec: ResourceSpec,
    pub k: usize,
    pub mean_error: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub k: usize,
    /// Over every (split, base, validation workload) prediction.
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSummary {
    pub base_spec: ResourceSpec,
    /// Over every (split, k, validation workload) prediction.
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
    pub by_k: Vec<KSummary>,
    pub by_base: Vec<BaseSummary>,
}

impl SweepReport {
    pub fn k_stats(&self, k: usize) -> Option<&ErrorStats> {
        self.by_k.iter().find(|s| s.k == k).map(|s| &s.stats)
    }

    pub fn base_stats(&self, base: ResourceSpec) -> Option<&ErrorStats> {
        self.by_base
            .iter()
            .find(|s| s.base_spec == base)
            .map(|s| &s.stats)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(self, dir.as_ref().join("sweep.json"))?;
        let mut w = csv::Writer::from_path(dir.as_ref().join("sweep.csv"))?;
        w.write_record([
            "split",
            "base_cores",
            "base_memory_gb",
            "k",
            "mean_error",
            "max_error",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.split.to_string(),
                c.base_spec.cores.to_string(),
                c.base_spec.memory_gb.to_string(),
                c.k.to_string(),
                c.mean_error.to_string(),
                c.max_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Validation error for every (base spec, k) pair, over `splits`
/// independent train/validation splits of the same workload set.
pub fn run_hyperparam_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let sc = &config.sweep;
    if sc.k_min == 0 || sc.k_min > sc.k_max || sc.k_max > config.train_size {
        return Err(UrsaError::invalid(format!(
            "k range {}..={} must lie in 1..={}",
            sc.k_min, sc.k_max, config.train_size
        )));
    }
    let set = WorkloadSet::generate(&config.synth)?;
    let bases: Vec<ResourceSpec> = if sc.bases.is_empty() {
        set.context.region.specs().collect()
    } else {
        sc.bases.clone()
    };
    let ks: Vec<usize> = (sc.k_min..=sc.k_max).collect();
    let mut cells = Vec::new();
    let mut per_k: Vec<Vec<f64>> = vec![Vec::new(); ks.len()];
    let mut per_base: Vec<Vec<f64>> = vec![Vec::new(); bases.len()];
    for split in 0..sc.splits.max(1) {
        let split_seed = if split == 0 {
            config.seed
        } else {
            seed::derive(config.seed, &[0x5B, split as u64])
        };
        let prepared = Prepared::from_set(config, set.clone(), split_seed)?;
        let train = prepared.training_workloads();
        let validation = prepared.validation_workloads();
        let training = TrainingConfig {
            seed: seed::derive(config.training.seed, &[split as u64]),
            ..config.training.clone()
        };
        let selection = select_training_features(&train, &training)?;
        for (bi, &base) in bases.iter().enumerate() {
            for (ki, &k) in ks.iter().enumerate() {
                let model = train_planner_with(
                    &train,
                    base,
                    &selection,
                    &TrainingConfig {
                        k,
                        ..training.clone()
                    },
                )?;
                let errors = validation
                    .iter()
                    .map(|w| Ok(predict(&model, w, training.noise_sigma)?.1))
                    .collect::<Result<Vec<f64>>>()?;
                let stats = ErrorStats::of(&errors);
                cells.push(SweepCell {
                    split,
                    base_spec: base,
                    k,
                    mean_error: stats.mean,
                    max_error: stats.max,
                });
                per_k[ki].extend(&errors);
                per_base[bi].extend(&errors);
            }
        }
    }
    Ok(SweepReport {
        schema_version: REPORT_SCHEMA,
        seed: config.seed,
        cells,
        by_k: ks
            .iter()
            .zip(&per_k)
            .map(|(&k, e)| KSummary {
                k,
                stats: ErrorStats::of(e),
            })
            .collect(),
        by_base: bases
            .iter()
            .zip(&per_base)
            .map(|(&base_spec, e)| BaseSummary {
                base_spec,
                stats: ErrorStats::of(e),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub schema_version: u32,
    pub seed: u64,
    pub base_spec: ResourceSpec,
    pub k: usize,
    pub rounds: Vec<WorkloadError>,
    pub stats: ErrorStats,
}

impl LoocvReport {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(self, dir.as_ref().join("loocv.json"))?;
        write_errors_csv(&self.rounds, &dir.as_ref().join("loocv.csv"))
    }
}

/// Holds out each workload in turn and predicts it from a model trained on
/// the rest.
pub fn run_loocv(config: &ExperimentConfig) -> Result<LoocvReport> {
    config.validate()?;
    let workloads = WorkloadSet::generate(&config.synth)?.materialize()?;
    if workloads.len() < 2 {
        return Err(UrsaError::invalid("leave-one-out needs at least 2 workloads"));
    }
    let base = config.base_spec();
    let k = config.training.k.min(workloads.len() - 1);
    let mut rounds = Vec::with_capacity(workloads.len());
    for (i, held) in workloads.iter().enumerate() {
        let train: Vec<&Workload> = workloads
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, w)| w)
            .collect();
        let training = TrainingConfig {
            k,
            seed: seed::derive(config.training.seed, &[i as u64]),
            ..config.training.clone()
        };
        let model = train_planner(&train, base, &training)?;
        rounds.push(WorkloadError {
            workload_id: held.workload_id,
            archetype_id: held.archetype_id,
            error: predict(&model, held, training.noise_sigma)?.1,
        });
    }
    let errors: Vec<f64> = rounds.iter().map(|r| r.error).collect();
    Ok(LoocvReport {
        schema_version: REPORT_SCHEMA,
        seed: config.seed,
        base_spec: base,
        k,
        rounds,
        stats: ErrorStats::of(&errors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_values() {
        let s = ErrorStats::of(&[0.0, 0.2]);
        assert_eq!(s.count, 2);
        assert!((s.mean - 0.1).abs() < 1e-15);
        assert_eq!(s.max, 0.2);
        assert!((s.std - 0.1).abs() < 1e-15);
        assert_eq!(ErrorStats::of(&[]).count, 0);
    }

    #[test]
    fn small_sweep_covers_every_cell() {
        let mut c = ExperimentConfig::default();
        c.synth.archetypes = 5;
        c.synth.workloads = 15;
        c.train_size = 10;
        c.validation_size = 5;
        c.training.k = 5;
        c.training.classifier.mlp.epochs = 50;
        c.sweep = super::super::SweepConfig {
            k_min: 2,
            k_max: 10,
            bases: vec![ResourceSpec::new(6, 8), ResourceSpec::new(1, 2)],
            splits: 1,
        };
        let r = run_hyperparam_sweep(&c).unwrap();
        assert_eq!(r.cells.len(), 2 * 9);
        assert_eq!(r.by_k.len(), 9);
        assert!(r
            .cells
            .iter()
            .all(|c| c.mean_error.is_finite() && c.mean_error >= 0.0));
    }
}
