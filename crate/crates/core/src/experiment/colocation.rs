use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{predict, ratio, save_json, ExperimentConfig, Prepared, REPORT_SCHEMA};
use crate::error::{Result, UrsaError};
use crate::estimator::{build_profile, calibrate, ReferenceTracks, SimulatedProbe};
use crate::planner::{plan_capacity, ModelBundle, PlannerModel, PlanningRequest};
use crate::scheduler::{schedule_all, Deployment, Placement, Policy, ScheduleConfig};
use crate::seed;
use crate::simulator::{simulate_colocated, SlowdownReport};
use crate::spec::ResourceSpec;
use crate::synth::Workload;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub workload_id: u64,
    /// Workload of the generated set this instance runs.
    pub source_workload: u64,
    pub origin: ResourceSpec,
    pub recommended: ResourceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub policy: Policy,
    pub total_cores: u64,
    pub total_memory_gb: u64,
    pub placements: Vec<Placement>,
    pub slowdowns: SlowdownReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColocationTrial {
    pub trial: u32,
    pub seed: u64,
    pub instances: Vec<Instance>,
    /// Why the trial stopped early, if it did.
    pub aborted: Option<String>,
    pub ursa: Option<PolicyOutcome>,
    pub lrp: Option<PolicyOutcome>,
    /// ursa / lrp
    pub p_sys_ratio: Option<f64>,
    /// ursa / lrp
    pub unfairness_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColocationSummary {
    pub trials: u32,
    pub completed: u32,
    /// Trials where URSA's unfairness is below LRP's.
    pub unfairness_wins: u32,
    /// Mean over completed trials of 1 - unfairness_ratio.
    pub mean_unfairness_reduction: f64,
    pub min_p_sys_ratio: f64,
    pub ursa_cores: u64,
    pub ursa_memory_gb: u64,
    pub lrp_cores: u64,
    pub lrp_memory_gb: u64,
    /// 1 - ursa / lrp
    pub core_reduction: f64,
    pub memory_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColocationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: Vec<ColocationTrial>,
    pub summary: ColocationSummary,
}

impl ColocationReport {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(self, dir.as_ref().join("colocation.json"))?;
        let mut w = csv::Writer::from_path(dir.as_ref().join("colocation.csv"))?;
        w.write_record([
            "trial",
            "ursa_p_sys",
            "lrp_p_sys",
            "ursa_unfairness",
            "lrp_unfairness",
            "ursa_cores",
            "lrp_cores",
            "ursa_memory_gb",
            "lrp_memory_gb",
        ])?;
        for t in &self.trials {
            if let (Some(u), Some(l)) = (&t.ursa, &t.lrp) {
                w.write_record([
                    t.trial.to_string(),
                    u.slowdowns.p_sys.to_string(),
                    l.slowdowns.p_sys.to_string(),
                    u.slowdowns.unfairness.to_string(),
                    l.slowdowns.unfairness.to_string(),
                    u.total_cores.to_string(),
                    l.total_cores.to_string(),
                    u.total_memory_gb.to_string(),
                    l.total_memory_gb.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn totals(deps: &[Deployment]) -> (u64, u64) {
    (
        deps.iter().map(|d| d.spec.cores as u64).sum(),
        deps.iter().map(|d| d.spec.memory_gb as u64).sum(),
    )
}

/// Schedules `planned` under `policy` and simulates the result with the
/// ground-truth profiles in `truth`.
fn run_policy(
    policy: Policy,
    planned: &[Deployment],
    truth: &[Deployment],
    config: &ExperimentConfig,
) -> Result<PolicyOutcome> {
    let cc = &config.colocation;
    let mut nodes = cc.cluster.inventory().states()?;
    let schedule = ScheduleConfig {
        policy,
        ..cc.schedule
    };
    let placements = schedule_all(planned, &mut nodes, &schedule)?;
    let slowdowns = simulate_colocated(&placements, truth, &cc.cluster, &cc.slowdown)?;
    let (total_cores, total_memory_gb) = totals(planned);
    Ok(PolicyOutcome {
        policy,
        total_cores,
        total_memory_gb,
        placements,
        slowdowns,
    })
}

fn run_trial(
    trial: u32,
    config: &ExperimentConfig,
    workloads: &[Workload],
    model: &PlannerModel,
    tracks: &ReferenceTracks,
) -> Result<ColocationTrial> {
    let cc = &config.colocation;
    let constants = &config.synth.context.constants;
    let region = &config.synth.context.region;
    let trial_seed = seed::derive(config.seed, &[0xC0, trial as u64]);
    let mut rng = seed::rng(trial_seed, &[]);

    let mut instances = Vec::with_capacity(cc.workloads);
    let mut ursa_planned = Vec::new();
    let mut ursa_truth = Vec::new();
    let mut lrp = Vec::new();
    for j in 0..cc.workloads as u64 {
        let src = &workloads[rng.random_range(0..workloads.len())];
        let drawn = ResourceSpec::new(
            rng.random_range(cc.origin_cores.0..=cc.origin_cores.1),
            rng.random_range(cc.origin_memory_gb.0..=cc.origin_memory_gb.1),
        );
        let origin = region.round_up(drawn).ok_or(UrsaError::OutOfRegion(drawn))?;
        let w = src.instance(j, origin, constants);

        let (surface, _) = predict(model, &w, config.training.noise_sigma)?;
        let request = PlanningRequest::scale_down(origin, config.epsilon, config.cost_weights);
        let recommended = plan_capacity(&request, &surface)?;
        let mut probe = SimulatedProbe::new(w.footprint_at(recommended), constants.clone());
        let estimated = build_profile(&mut probe, tracks)?;

        instances.push(Instance {
            workload_id: j,
            source_workload: src.workload_id,
            origin,
            recommended,
        });
        ursa_planned.push(Deployment {
            workload_id: j,
            spec: recommended,
            profile: estimated,
        });
        ursa_truth.push(Deployment {
            workload_id: j,
            spec: recommended,
            profile: w.profile_at(recommended, constants),
        });
        lrp.push(Deployment {
            workload_id: j,
            spec: origin,
            profile: w.profile_at(origin, constants),
        });
    }

    let mut out = ColocationTrial {
        trial,
        seed: trial_seed,
        instances,
        aborted: None,
        ursa: None,
        lrp: None,
        p_sys_ratio: None,
        unfairness_ratio: None,
    };
    let settle = |r: Result<PolicyOutcome>| match r {
        Ok(o) => Ok(Ok(o)),
        Err(e @ UrsaError::CapacityExhausted(_)) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    };
    match (
        settle(run_policy(Policy::Ursa, &ursa_planned, &ursa_truth, config))?,
        settle(run_policy(Policy::Lrp, &lrp, &lrp, config))?,
    ) {
        (Ok(u), Ok(l)) => {
            out.p_sys_ratio = Some(ratio(u.slowdowns.p_sys, l.slowdowns.p_sys));
            out.unfairness_ratio = Some(ratio(u.slowdowns.unfairness, l.slowdowns.unfairness));
            out.ursa = Some(u);
            out.lrp = Some(l);
        }
        (Err(e), _) | (_, Err(e)) => out.aborted = Some(e),
    }
    Ok(out)
}

/// Repeated co-location of randomly drawn workloads: URSA (scale-down,
/// estimate, contention-aware placement) against least-requested placement
/// at the origin specs.
pub fn run_colocation(config: &ExperimentConfig, bundle: Option<&ModelBundle>) -> Result<ColocationReport> {
    let prepared = Prepared::new(config)?;
    let bundle = match bundle {
        Some(b) => b.clone(),
        None => prepared.train_bundle(config, &[config.base_spec()])?,
    };
    let model = bundle.model_for(config.base_spec())?;
    let tracks = calibrate(&mut SimulatedProbe::calibration(
        config.synth.context.constants.clone(),
    ))?;
    let trials = (0..config.colocation.trials)
        .map(|t| run_trial(t, config, &prepared.workloads, model, &tracks))
        .collect::<Result<Vec<_>>>()?;

    let done: Vec<&ColocationTrial> = trials.iter().filter(|t| t.aborted.is_none()).collect();
    let sum = |f: &dyn Fn(&ColocationTrial) -> u64| -> u64 { done.iter().map(|t| f(t)).sum() };
    let ursa_cores = sum(&|t| t.ursa.as_ref().map_or(0, |o| o.total_cores));
    let ursa_memory_gb = sum(&|t| t.ursa.as_ref().map_or(0, |o| o.total_memory_gb));
    let lrp_cores = sum(&|t| t.lrp.as_ref().map_or(0, |o| o.total_cores));
    let lrp_memory_gb = sum(&|t| t.lrp.as_ref().map_or(0, |o| o.total_memory_gb));
    let reductions: Vec<f64> = done
        .iter()
        .filter_map(|t| t.unfairness_ratio)
        .map(|r| 1.0 - r)
        .collect();
    let summary = ColocationSummary {
        trials: config.colocation.trials,
        completed: done.len() as u32,
        unfairness_wins: done
            .iter()
            .filter(|t| {
                let (u, l) = (t.ursa.as_ref().unwrap(), t.lrp.as_ref().unwrap());
                u.slowdowns.unfairness < l.slowdowns.unfairness
            })
            .count() as u32,
        mean_unfairness_reduction: ratio(reductions.iter().sum(), reductions.len() as f64),
        min_p_sys_ratio: done
            .iter()
            .filter_map(|t| t.p_sys_ratio)
            .reduce(f64::min)
            .unwrap_or(0.0),
        ursa_cores,
        ursa_memory_gb,
        lrp_cores,
        lrp_memory_gb,
        core_reduction: 1.0 - ratio(ursa_cores as f64, lrp_cores as f64),
        memory_reduction: 1.0 - ratio(ursa_memory_gb as f64, lrp_memory_gb as f64),
    };
    Ok(ColocationReport {
        schema_version: REPORT_SCHEMA,
        seed: config.seed,
        trials,
        summary,
    })
}
