//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists with the same layout as the JSON artifacts.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ursa::estimator::{build_profile, calibrate, ReferenceTracks, SimulatedProbe};
use ursa::experiment::{
    evaluate_planner, run_colocation, run_hyperparam_sweep, run_loocv, run_scenario1, run_scenario2,
    ExperimentConfig, Prepared,
};
use ursa::planner::{ModelBundle, PlanningRequest, TrainingConfig};
use ursa::scheduler::{schedule_all, Deployment, NodeInventory, Placement, Policy, ScheduleConfig};
use ursa::simulator::{simulate_colocated, ClusterSpec, SlowdownModel};
use ursa::synth::{SynthParams, Workload, WorkloadSet};
use ursa::{CostWeights, PerResource, ResourceSpec, SystemIndexVector, UrsaError};

create_exception!(ursa_py, UrsaException, PyException);
create_exception!(ursa_py, InfeasibleError, UrsaException);

fn err(e: UrsaError) -> PyErr {
    match e {
        UrsaError::Infeasible(_) | UrsaError::CapacityExhausted(_) => InfeasibleError::new_err(e.to_string()),
        _ => UrsaException::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = value.py().import("json")?;
    let text: String = json.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn spec((cores, memory_gb): (u32, u32)) -> ResourceSpec {
    ResourceSpec::new(cores, memory_gb)
}

/// A synthetic workload population with ground-truth behavior.
#[pyclass(module = "ursa_py")]
struct Workloads {
    set: WorkloadSet,
    workloads: Vec<Workload>,
}

impl Workloads {
    fn wrap(set: WorkloadSet) -> PyResult<Self> {
        let workloads = set.materialize().map_err(err)?;
        Ok(Workloads { set, workloads })
    }

    fn get(&self, workload_id: u64) -> PyResult<&Workload> {
        self.workloads
            .iter()
            .find(|w| w.workload_id == workload_id)
            .ok_or_else(|| PyValueError::new_err(format!("no workload {workload_id}")))
    }
}

#[pymethods]
impl Workloads {
    #[staticmethod]
    #[pyo3(signature = (seed=0, workloads=None, archetypes=None))]
    fn generate(seed: u64, workloads: Option<usize>, archetypes: Option<usize>) -> PyResult<Self> {
        let mut p = SynthParams {
            seed,
            ..SynthParams::default()
        };
        p.workloads = workloads.unwrap_or(p.workloads);
        p.archetypes = archetypes.unwrap_or(p.archetypes);
        Workloads::wrap(WorkloadSet::generate(&p).map_err(err)?)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Workloads::wrap(WorkloadSet::load(path).map_err(err)?)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.set.save(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.workloads.len()
    }

    fn ids(&self) -> Vec<u64> {
        self.workloads.iter().map(|w| w.workload_id).collect()
    }

    fn origin(&self, workload_id: u64) -> PyResult<(u32, u32)> {
        let s = self.get(workload_id)?.origin_spec;
        Ok((s.cores, s.memory_gb))
    }

    /// Counter readings of a workload at `spec`, with multiplicative noise.
    #[pyo3(signature = (workload_id, spec, noise_sigma=0.0))]
    fn observe_indexes<'py>(
        &self,
        py: Python<'py>,
        workload_id: u64,
        spec: (u32, u32),
        noise_sigma: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let x = self
            .get(workload_id)?
            .observe_indexes(self::spec(spec), noise_sigma)
            .map_err(err)?;
        to_py(py, &x)
    }

    /// Normalized performance on every grid point relative to `base`.
    fn surface<'py>(
        &self,
        py: Python<'py>,
        workload_id: u64,
        base: (u32, u32),
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.get(workload_id)?.surface_at(spec(base)).map_err(err)?)
    }

    fn tps(&self, workload_id: u64, spec: (u32, u32)) -> PyResult<f64> {
        Ok(self.get(workload_id)?.tps(self::spec(spec)))
    }

    /// Ground-truth interference profile at `spec`.
    fn profile<'py>(
        &self,
        py: Python<'py>,
        workload_id: u64,
        spec: (u32, u32),
    ) -> PyResult<Bound<'py, PyAny>> {
        let p = self
            .get(workload_id)?
            .profile_at(self::spec(spec), &self.set.context.constants);
        to_py(py, &p)
    }

    /// Profile measured with the simulated stress probe.
    #[pyo3(signature = (workload_id, spec, noise_sigma=0.0, seed=0))]
    fn estimate_profile<'py>(
        &self,
        py: Python<'py>,
        workload_id: u64,
        spec: (u32, u32),
        noise_sigma: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let c = self.set.context.constants.clone();
        let reference: ReferenceTracks =
            calibrate(&mut SimulatedProbe::calibration(c.clone())).map_err(err)?;
        let fp = self.get(workload_id)?.footprint_at(self::spec(spec));
        let mut probe = SimulatedProbe::new(fp, c);
        if noise_sigma > 0.0 {
            probe = probe.with_noise(noise_sigma, seed);
        }
        to_py(py, &build_profile(&mut probe, &reference).map_err(err)?)
    }
}

/// Trained planner models, one per base specification.
#[pyclass(module = "ursa_py")]
struct Planner {
    bundle: ModelBundle,
}

#[pymethods]
impl Planner {
    /// Trains on the given workload ids (all when omitted).
    #[staticmethod]
    #[pyo3(signature = (workloads, bases, ids=None, k=None, seed=0))]
    fn train(
        workloads: &Workloads,
        bases: Vec<(u32, u32)>,
        ids: Option<Vec<u64>>,
        k: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let mut config = TrainingConfig {
            seed,
            ..TrainingConfig::default()
        };
        config.k = k.unwrap_or(config.k);
        let chosen: Vec<&Workload> = match ids {
            Some(ids) => ids.iter().map(|id| workloads.get(*id)).collect::<PyResult<_>>()?,
            None => workloads.workloads.iter().collect(),
        };
        let bases: Vec<ResourceSpec> = bases.into_iter().map(spec).collect();
        let bundle = ModelBundle::train(&chosen, &bases, &config).map_err(err)?;
        Ok(Planner { bundle })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Planner {
            bundle: ModelBundle::load(path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.bundle.save(path).map_err(err)
    }

    fn bases(&self) -> Vec<(u32, u32)> {
        self.bundle
            .models
            .iter()
            .map(|m| (m.base_spec.cores, m.base_spec.memory_gb))
            .collect()
    }

    fn predict_cluster(&self, indexes: &Bound<'_, PyAny>, base: (u32, u32)) -> PyResult<usize> {
        let x: SystemIndexVector = from_py(indexes)?;
        self.bundle
            .model_for(spec(base))
            .map_err(err)?
            .predict_cluster(&x)
            .map_err(err)
    }

    fn predict_surface<'py>(
        &self,
        py: Python<'py>,
        indexes: &Bound<'py, PyAny>,
        base: (u32, u32),
    ) -> PyResult<Bound<'py, PyAny>> {
        let x: SystemIndexVector = from_py(indexes)?;
        let s = self
            .bundle
            .model_for(spec(base))
            .map_err(err)?
            .predict_surface(&x)
            .map_err(err)?;
        to_py(py, &s)
    }

    /// Cheapest satisfying specification. Give `target` for a scale-up
    /// request or `epsilon` for a scale-down one.
    #[pyo3(signature = (indexes, base, current, target=None, epsilon=None, per_core=None, per_gb=None))]
    #[allow(clippy::too_many_arguments)]
    fn recommend(
        &self,
        indexes: &Bound<'_, PyAny>,
        base: (u32, u32),
        current: (u32, u32),
        target: Option<f64>,
        epsilon: Option<f64>,
        per_core: Option<f64>,
        per_gb: Option<f64>,
    ) -> PyResult<(u32, u32)> {
        let x: SystemIndexVector = from_py(indexes)?;
        let mut w = CostWeights::default();
        w.per_core = per_core.unwrap_or(w.per_core);
        w.per_gb = per_gb.unwrap_or(w.per_gb);
        let request = match (target, epsilon) {
            (Some(t), None) => PlanningRequest::scale_up(spec(current), t, w),
            (None, Some(e)) => PlanningRequest::scale_down(spec(current), e, w),
            _ => return Err(PyValueError::new_err("give exactly one of target and epsilon")),
        };
        let s = self
            .bundle
            .model_for(spec(base))
            .map_err(err)?
            .recommend(&x, &request)
            .map_err(err)?;
        Ok((s.cores, s.memory_gb))
    }
}

fn deployments(items: &[(u64, (u32, u32), Bound<'_, PyAny>)]) -> PyResult<Vec<Deployment>> {
    items
        .iter()
        .map(|(id, s, p)| {
            Ok(Deployment {
                workload_id: *id,
                spec: spec(*s),
                profile: from_py(p)?,
            })
        })
        .collect()
}

/// Places `(workload_id, (cores, memory_gb), profile)` items in order on
/// `nodes` identical nodes. Returns `(workload_id, node_id, score)` tuples.
#[pyfunction]
#[pyo3(signature = (items, nodes=7, capacity=(96, 256), policy="ursa", scaler=1.1))]
fn schedule(
    items: Vec<(u64, (u32, u32), Bound<'_, PyAny>)>,
    nodes: u32,
    capacity: (u32, u32),
    policy: &str,
    scaler: f64,
) -> PyResult<Vec<(u64, u32, f64)>> {
    let config = ScheduleConfig {
        scaler,
        policy: policy.parse::<Policy>().map_err(err)?,
        ..ScheduleConfig::default()
    };
    config.validate().map_err(err)?;
    let mut states = NodeInventory::uniform(nodes, spec(capacity))
        .states()
        .map_err(err)?;
    let placed = schedule_all(&deployments(&items)?, &mut states, &config).map_err(err)?;
    Ok(placed
        .into_iter()
        .map(|p| (p.workload_id, p.node_id, p.score))
        .collect())
}

/// Slowdown report of a placement; `placements` holds
/// `(workload_id, node_id)` pairs.
#[pyfunction]
#[pyo3(signature = (placements, items, nodes=7, capacity=(96, 256)))]
fn simulate<'py>(
    py: Python<'py>,
    placements: Vec<(u64, u32)>,
    items: Vec<(u64, (u32, u32), Bound<'py, PyAny>)>,
    nodes: u32,
    capacity: (u32, u32),
) -> PyResult<Bound<'py, PyAny>> {
    let cluster = ClusterSpec {
        nodes,
        capacity: spec(capacity),
        ..ClusterSpec::default()
    };
    let placements: Vec<Placement> = placements
        .into_iter()
        .map(|(workload_id, node_id)| Placement {
            workload_id,
            node_id,
            score: 0.0,
        })
        .collect();
    let report = simulate_colocated(
        &placements,
        &deployments(&items)?,
        &cluster,
        &SlowdownModel::default(),
    )
    .map_err(err)?;
    to_py(py, &report)
}

/// Contention risk of a node from per-resource pressure sums and maximum
/// sensitivities, in llc, memory bandwidth, disk, network order.
#[pyfunction]
#[pyo3(signature = (sum_pressure, max_sensitivity, scaler=1.1))]
fn contention_risk(sum_pressure: [u32; 4], max_sensitivity: [u32; 4], scaler: f64) -> f64 {
    let per = |v: [u32; 4]| PerResource::from_fn(|r| v[r as usize]);
    ursa::scheduler::risk(&per(sum_pressure), &per(max_sensitivity), scaler)
}

/// Runs one experiment and writes its reports to `out`. Returns the report.
#[pyfunction]
#[pyo3(signature = (name, out, seed=None, config=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    out: PathBuf,
    seed: Option<u64>,
    config: Option<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut c: ExperimentConfig = match config {
        Some(c) => from_py(&c)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        c = c.with_seed(s);
    }
    std::fs::create_dir_all(&out).map_err(|e| UrsaException::new_err(e.to_string()))?;
    macro_rules! report {
        ($r:expr) => {{
            let r = $r.map_err(err)?;
            r.save(&out).map_err(err)?;
            to_py(py, &r)
        }};
    }
    match name {
        "planner" => report!(Prepared::new(&c).and_then(|_| evaluate_planner(&c, None))),
        "scenario1" => report!(run_scenario1(&c, None)),
        "scenario2" => report!(run_scenario2(&c, None)),
        "colocate" => report!(run_colocation(&c, None)),
        "sweep" => report!(run_hyperparam_sweep(&c)),
        "loocv" => report!(run_loocv(&c)),
        _ => Err(PyValueError::new_err(format!("unknown experiment {name}"))),
    }
}

#[pymodule]
fn ursa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Workloads>()?;
    m.add_class::<Planner>()?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(contention_risk, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("UrsaException", m.py().get_type::<UrsaException>())?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    Ok(())
}
