use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::ErrorStats;
use super::{predict, ratio, save_json, ExperimentConfig, Prepared, REPORT_SCHEMA};
use crate::error::Result;
use crate::planner::{plan_capacity, ModelBundle, PlanningPolicy, PlanningRequest};
use crate::spec::ResourceSpec;
use crate::synth::Workload;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub workload_id: u64,
    pub archetype_id: u32,
    pub policy: PlanningPolicy,
    pub target_speedup: f64,
    pub current: ResourceSpec,
    /// `None` when the predicted surface cannot meet the request.
    pub recommended: Option<ResourceSpec>,
    /// Cost-minimal spec on the ground-truth surface; `None` if infeasible.
    pub oracle: Option<ResourceSpec>,
    /// Ground-truth speedup of the recommendation over the current spec.
    pub achieved_ratio: Option<f64>,
    pub satisfied: Option<bool>,
    /// Same cost as the oracle and satisfied on the ground truth.
    pub optimal: bool,
    pub core_gap: Option<i64>,
    pub memory_gap: Option<i64>,
}

fn outcome(
    w: &Workload,
    model: &crate::planner::PlannerModel,
    request: &PlanningRequest,
    noise_sigma: f64,
) -> Result<PlanOutcome> {
    let truth = w.surface_at(model.base_spec)?;
    let (predicted, _) = predict(model, w, noise_sigma)?;
    let settle = |r: Result<ResourceSpec>| match r {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.is_infeasible() => Ok(None),
        Err(e) => Err(e),
    };
    let recommended = settle(plan_capacity(request, &predicted))?;
    let oracle = settle(plan_capacity(request, &truth))?;
    let current = truth.speedup_or_err(request.current_spec)?;
    let mut out = PlanOutcome {
        workload_id: w.workload_id,
        archetype_id: w.archetype_id,
        policy: request.policy,
        target_speedup: request.target_speedup,
        current: request.current_spec,
        recommended,
        oracle,
        achieved_ratio: None,
        satisfied: None,
        optimal: false,
        core_gap: None,
        memory_gap: None,
    };
    if let Some(r) = recommended {
        out.achieved_ratio = Some(truth.speedup_or_err(r)? / current);
        let ok = request.is_satisfied(&truth, r)?;
        out.satisfied = Some(ok);
        if let Some(o) = oracle {
            let w = &request.cost_weights;
            out.optimal = ok && r.cost(w) == o.cost(w);
            out.core_gap = Some(r.cores as i64 - o.cores as i64);
            out.memory_gap = Some(r.memory_gb as i64 - o.memory_gb as i64);
        }
    }
    Ok(out)
}

fn write_outcomes_csv(outcomes: &[PlanOutcome], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "workload_id",
        "target_speedup",
        "current_cores",
        "current_memory_gb",
        "recommended_cores",
        "recommended_memory_gb",
        "oracle_cores",
        "oracle_memory_gb",
        "achieved_ratio",
        "satisfied",
        "optimal",
    ])?;
    let opt = |x: Option<u32>| x.map(|v| v.to_string()).unwrap_or_default();
    for o in outcomes {
        w.write_record([
            o.workload_id.to_string(),
            o.target_speedup.to_string(),
            o.current.cores.to_string(),
            o.current.memory_gb.to_string(),
            opt(o.recommended.map(|s| s.cores)),
            opt(o.recommended.map(|s| s.memory_gb)),
            opt(o.oracle.map(|s| s.cores)),
            opt(o.oracle.map(|s| s.memory_gb)),
            o.achieved_ratio.map(|v| v.to_string()).unwrap_or_default(),
            o.satisfied.map(|v| v.to_string()).unwrap_or_default(),
            o.optimal.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn bundle_or_train(
    config: &ExperimentConfig,
    prepared: &Prepared,
    bundle: Option<&ModelBundle>,
) -> Result<ModelBundle> {
    match bundle {
        Some(b) => Ok(b.clone()),
        None => prepared.train_bundle(config, &[config.base_spec()]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Summary {
    pub requests: usize,
    pub oracle_feasible: usize,
    pub recommended: usize,
    pub optimal: usize,
    /// optimal / oracle_feasible
    pub optimal_fraction: f64,
    pub satisfied: usize,
    /// satisfied / recommended
    pub satisfied_fraction: f64,
    pub max_core_gap: i64,
    pub max_memory_gap: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Report {
    pub schema_version: u32,
    pub seed: u64,
    pub base_spec: ResourceSpec,
    pub origin: ResourceSpec,
    pub planner_errors: ErrorStats,
    pub outcomes: Vec<PlanOutcome>,
    pub summary: Scenario1Summary,
}

impl Scenario1Report {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(self, dir.as_ref().join("scenario1.json"))?;
        write_outcomes_csv(&self.outcomes, &dir.as_ref().join("scenario1.csv"))
    }

    /// Number of requests the predicted surface could not meet although the
    /// ground truth can, plus those neither can.
    pub fn infeasible_requests(&self) -> usize {
        self.outcomes.iter().filter(|o| o.recommended.is_none()).count()
    }
}

/// Scale-up requests from a small origin for every validation workload.
pub fn run_scenario1(config: &ExperimentConfig, bundle: Option<&ModelBundle>) -> Result<Scenario1Report> {
    let prepared = Prepared::new(config)?;
    let bundle = bundle_or_train(config, &prepared, bundle)?;
    let model = bundle.model_for(config.base_spec())?;
    let sigma = config.training.noise_sigma;
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for w in prepared.validation_workloads() {
        errors.push(predict(model, w, sigma)?.1);
        for &t in &config.scenario1.targets {
            let req = PlanningRequest::scale_up(config.scenario1.origin, t, config.cost_weights);
            outcomes.push(outcome(w, model, &req, sigma)?);
        }
    }
    let oracle_feasible = outcomes.iter().filter(|o| o.oracle.is_some()).count();
    let recommended = outcomes.iter().filter(|o| o.recommended.is_some()).count();
    let optimal = outcomes.iter().filter(|o| o.optimal).count();
    let satisfied = outcomes.iter().filter(|o| o.satisfied == Some(true)).count();
    let summary = Scenario1Summary {
        requests: outcomes.len(),
        oracle_feasible,
        recommended,
        optimal,
        optimal_fraction: ratio(optimal as f64, oracle_feasible as f64),
        satisfied,
        satisfied_fraction: ratio(satisfied as f64, recommended as f64),
        max_core_gap: outcomes.iter().filter_map(|o| o.core_gap).max().unwrap_or(0),
        max_memory_gap: outcomes.iter().filter_map(|o| o.memory_gap).max().unwrap_or(0),
    };
    Ok(Scenario1Report {
        schema_version: REPORT_SCHEMA,
        seed: config.seed,
        base_spec: model.base_spec,
        origin: config.scenario1.origin,
        planner_errors: ErrorStats::of(&errors),
        outcomes,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario2Summary {
    pub requests: usize,
    pub origin_cores: u64,
    pub origin_memory_gb: u64,
    pub recommended_cores: u64,
    pub recommended_memory_gb: u64,
    pub oracle_cores: u64,
    pub oracle_memory_gb: u64,
    /// 1 - recommended / origin
    pub core_reduction: f64,
    pub memory_reduction: f64,
    /// recommended / oracle - 1
    pub core_excess: f64,
    pub memory_excess: f64,
    /// Recommendations keeping ground-truth performance within epsilon.
    pub preserved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario2Report {
    pub schema_version: u32,
    pub seed: u64,
    pub base_spec: ResourceSpec,
    pub origin: ResourceSpec,
    pub epsilon: f64,
    pub outcomes: Vec<PlanOutcome>,
    pub summary: Scenario2Summary,
}

impl Scenario2Report {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(self, dir.as_ref().join("scenario2.json"))?;
        write_outcomes_csv(&self.outcomes, &dir.as_ref().join("scenario2.csv"))
    }
}

/// Scale-down from a large origin for every validation workload.
pub fn run_scenario2(config: &ExperimentConfig, bundle: Option<&ModelBundle>) -> Result<Scenario2Report> {
    let prepared = Prepared::new(config)?;
    let bundle = bundle_or_train(config, &prepared, bundle)?;
    let model = bundle.model_for(config.base_spec())?;
    let origin = config.scenario2.origin;
    let req = PlanningRequest::scale_down(origin, config.epsilon, config.cost_weights);
    let outcomes = prepared
        .validation_workloads()
        .into_iter()
        .map(|w| outcome(w, model, &req, config.training.noise_sigma))
        .collect::<Result<Vec<_>>>()?;

    let total = |f: &dyn Fn(&PlanOutcome) -> Option<ResourceSpec>, cores: bool| -> u64 {
        outcomes
            .iter()
            .filter_map(f)
            .map(|s| if cores { s.cores as u64 } else { s.memory_gb as u64 })
            .sum()
    };
    let n = outcomes.len() as u64;
    let origin_cores = n * origin.cores as u64;
    let origin_memory_gb = n * origin.memory_gb as u64;
    let recommended_cores = total(&|o| o.recommended, true);
    let recommended_memory_gb = total(&|o| o.recommended, false);
    let oracle_cores = total(&|o| o.oracle, true);
    let oracle_memory_gb = total(&|o| o.oracle, false);
    let summary = Scenario2Summary {
        requests: outcomes.len(),
        origin_cores,
        origin_memory_gb,
        recommended_cores,
        recommended_memory_gb,
        oracle_cores,
        oracle_memory_gb,
        core_reduction: 1.0 - ratio(recommended_cores as f64, origin_cores as f64),
        memory_reduction: 1.0 - ratio(recommended_memory_gb as f64, origin_memory_gb as f64),
        core_excess: ratio(recommended_cores as f64, oracle_cores as f64) - 1.0,
        memory_excess: ratio(recommended_memory_gb as f64, oracle_memory_gb as f64) - 1.0,
        preserved: outcomes.iter().filter(|o| o.satisfied == Some(true)).count(),
    };
    Ok(Scenario2Report {
        schema_version: REPORT_SCHEMA,
        seed: config.seed,
        base_spec: model.base_spec,
        origin,
        epsilon: config.epsilon,
        outcomes,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.synth.archetypes = 6;
        c.synth.workloads = 18;
        c.train_size = 12;
        c.validation_size = 6;
        c.training.k = 6;
        c.training.classifier.mlp.epochs = 100;
        c
    }

    #[test]
    fn unit_target_is_always_met() {
        let mut c = small();
        c.scenario1.targets = vec![1.0];
        let r = run_scenario1(&c, None).unwrap();
        assert_eq!(r.summary.requests, 6);
        for o in &r.outcomes {
            assert_eq!(o.recommended, Some(c.scenario1.origin));
            assert_eq!(o.achieved_ratio, Some(1.0));
        }
    }

    #[test]
    fn full_tolerance_picks_cheapest_spec() {
        let mut c = small();
        c.epsilon = 1.0;
        let r = run_scenario2(&c, None).unwrap();
        for o in &r.outcomes {
            assert_eq!(o.recommended, Some(ResourceSpec::new(1, 2)));
        }
    }

    #[test]
    fn scale_down_never_costs_more_than_origin() {
        let c = small();
        let r = run_scenario2(&c, None).unwrap();
        let w = &c.cost_weights;
        for o in &r.outcomes {
            assert!(o.recommended.unwrap().cost(w) <= c.scenario2.origin.cost(w));
        }
        let s = &r.summary;
        assert_eq!(
            s.core_reduction,
            1.0 - s.recommended_cores as f64 / s.origin_cores as f64
        );
    }
}
