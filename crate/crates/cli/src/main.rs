use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ursa::estimator::{build_profile, calibrate, ProfileRecord, ProfileSet, ReferenceTracks, SimulatedProbe};
use ursa::experiment::{
    evaluate_planner, run_colocation, run_hyperparam_sweep, run_loocv, run_scenario1, run_scenario2,
    ExperimentConfig, Prepared,
};
use ursa::planner::{ModelBundle, PlanningRequest};
use ursa::scheduler::{
    schedule_all, Deployment, NodeInventory, Placement, Policy, ScheduleConfig, UsageBasis,
};
use ursa::simulator::{simulate_colocated, ClusterSpec};
use ursa::synth::WorkloadSet;
use ursa::{ResourceSpec, SystemIndexVector, UrsaError};

#[derive(Parser)]
#[command(
    name = "ursa",
    version,
    about = "Capacity planning and contention-aware placement"
)]
struct Cli {
    /// Experiment configuration (JSON); missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Ursa,
    Lrp,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload set.
    Gen,
    /// Train a model bundle on the training split.
    Train {
        #[arg(long)]
        workloads: Option<PathBuf>,
        /// Base specification(s) to train at; defaults to the configured one.
        #[arg(long = "base")]
        bases: Vec<ResourceSpec>,
        /// Train one model per grid point.
        #[arg(long, conflicts_with = "bases")]
        all_bases: bool,
    },
    /// Record LLC reference tracks on the simulated node.
    Calibrate,
    /// Recommend a specification from counter readings.
    Plan {
        #[arg(long)]
        model: PathBuf,
        /// JSON object with the 15 counter readings.
        #[arg(long, required_unless_present = "workload")]
        indexes: Option<PathBuf>,
        /// Observe the readings of this workload from `--workloads` instead.
        #[arg(long, requires = "workloads", conflicts_with = "indexes")]
        workload: Option<u64>,
        #[arg(long)]
        workloads: Option<PathBuf>,
        #[arg(long)]
        current: ResourceSpec,
        /// Required speedup over the current specification.
        #[arg(long, conflicts_with = "scale_down")]
        target: Option<f64>,
        #[arg(long)]
        scale_down: bool,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Base specification the readings were taken at.
        #[arg(long)]
        base: Option<ResourceSpec>,
    },
    /// Quantify pressure and sensitivity of every workload in a set.
    Estimate {
        #[arg(long)]
        workloads: PathBuf,
        #[arg(long)]
        tracks: Option<PathBuf>,
        /// Measure every workload at this spec instead of its origin.
        #[arg(long)]
        spec: Option<ResourceSpec>,
        /// Emit the generator's ground-truth levels instead of measuring.
        #[arg(long)]
        ground_truth: bool,
    },
    /// Place workloads (in profile-file order) on nodes.
    Schedule {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ursa")]
        policy: PolicyArg,
        #[arg(long)]
        scaler: Option<f64>,
        /// Weight contention risk by usage before the incoming workload.
        #[arg(long)]
        usage_before: bool,
    },
    /// Compute slowdowns of a placement.
    Simulate {
        /// JSON lines as written by `schedule`.
        #[arg(long)]
        placements: PathBuf,
        /// Profiles driving the interference model.
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        nodes: Option<PathBuf>,
    },
    /// Scale-up requests from a small origin.
    Scenario1 {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Scale-down requests from a large origin.
    Scenario2 {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Co-location trials against least-requested placement.
    Colocate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Validation error over k and base specifications.
    Sweep {
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long = "base")]
        bases: Vec<ResourceSpec>,
        #[arg(long)]
        splits: Option<u32>,
    },
    /// Leave-one-out validation of the planner.
    Loocv,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn load_bundle(path: &Option<PathBuf>) -> Result<Option<ModelBundle>> {
    path.as_ref()
        .map(|p| ModelBundle::load(p).with_context(|| format!("loading model {}", p.display())))
        .transpose()
}

fn cluster_for(config: &ExperimentConfig, nodes: &Option<PathBuf>) -> Result<(ClusterSpec, NodeInventory)> {
    let mut cluster = config.colocation.cluster.clone();
    let Some(path) = nodes else {
        return Ok((cluster.clone(), cluster.inventory()));
    };
    let inv: NodeInventory = read_json(path)?;
    inv.states()?;
    Ok((
        {
            let first = inv.nodes[0];
            let uniform = inv.nodes.iter().enumerate().all(|(i, n)| {
                n.node_id == i as u32 && n.cores == first.cores && n.memory_gb == first.memory_gb
            });
            if !uniform {
                bail!("node inventory must list nodes 0..n with equal capacity");
            }
            cluster.nodes = inv.nodes.len() as u32;
            cluster.capacity = ResourceSpec::new(first.cores, first.memory_gb);
            cluster
        },
        inv,
    ))
}

fn read_placements(path: &Path) -> Result<Vec<Placement>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn deployments(profiles: &ProfileSet) -> Vec<Deployment> {
    profiles
        .profiles
        .iter()
        .map(|p| Deployment {
            workload_id: p.workload_id,
            spec: p.spec,
            profile: p.profile,
        })
        .collect()
}

#[derive(Serialize)]
struct PlanOutput {
    schema_version: u32,
    base_spec: ResourceSpec,
    current: ResourceSpec,
    predicted_cluster: usize,
    recommended: ResourceSpec,
    predicted_speedup: f64,
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let out = &cli.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut stdout = io::stdout().lock();

    match &cli.command {
        Command::Gen => {
            let set = WorkloadSet::generate(&config.synth)?;
            let path = out.join("workloads.json");
            set.save(&path)?;
            writeln!(stdout, "{} workloads -> {}", set.workloads.len(), path.display())?;
        }
        Command::Train {
            workloads,
            bases,
            all_bases,
        } => {
            let set = match workloads {
                Some(p) => WorkloadSet::load(p)?,
                None => WorkloadSet::generate(&config.synth)?,
            };
            let mut config = config.clone();
            config.synth.workloads = set.workloads.len();
            config.synth.context = set.context.clone();
            let prepared = Prepared::from_set(&config, set, config.seed)?;
            let bases: Vec<ResourceSpec> = if *all_bases {
                config.synth.context.region.specs().collect()
            } else if bases.is_empty() {
                vec![config.base_spec()]
            } else {
                bases.clone()
            };
            let bundle = prepared.train_bundle(&config, &bases)?;
            let path = out.join("model.json");
            bundle.save(&path)?;
            writeln!(stdout, "{} model(s) -> {}", bundle.models.len(), path.display())?;
            if bases.contains(&config.base_spec()) && workloads.is_none() {
                let report = evaluate_planner(&config, Some(&bundle))?;
                report.save(out)?;
                writeln!(
                    stdout,
                    "validation error at {}: mean {:.4}, max {:.4}",
                    report.base_spec, report.stats.mean, report.stats.max
                )?;
            }
        }
        Command::Calibrate => {
            let tracks = calibrate(&mut SimulatedProbe::calibration(
                config.synth.context.constants.clone(),
            ))?;
            let path = out.join("reference_tracks.json");
            tracks.save(&path)?;
            writeln!(
                stdout,
                "{} reference tracks -> {}",
                tracks.tracks.len(),
                path.display()
            )?;
        }
        Command::Plan {
            model,
            indexes,
            workload,
            workloads,
            current,
            target,
            scale_down,
            epsilon,
            base,
        } => {
            let bundle = ModelBundle::load(model)?;
            let m = bundle.model_for(base.unwrap_or(config.base_spec()))?;
            let x: SystemIndexVector = match (indexes, workload, workloads) {
                (Some(p), _, _) => read_json(p)?,
                (None, Some(id), Some(p)) => {
                    let w = WorkloadSet::load(p)?
                        .materialize()?
                        .into_iter()
                        .find(|w| w.workload_id == *id)
                        .with_context(|| format!("no workload {id} in {}", p.display()))?;
                    w.observe_indexes(m.base_spec, bundle.config.noise_sigma)?
                }
                _ => bail!("give --indexes or --workload with --workloads"),
            };
            let request = match (target, scale_down) {
                (Some(t), false) => PlanningRequest::scale_up(*current, *t, config.cost_weights),
                (None, true) => PlanningRequest::scale_down(
                    *current,
                    epsilon.unwrap_or(config.epsilon),
                    config.cost_weights,
                ),
                _ => bail!("give either --target or --scale-down"),
            };
            let cluster = m.predict_cluster(&x)?;
            let recommended = m.recommend(&x, &request)?;
            let surface = m.predict_surface(&x)?;
            let output = PlanOutput {
                schema_version: 1,
                base_spec: m.base_spec,
                current: *current,
                predicted_cluster: cluster,
                recommended,
                predicted_speedup: surface.speedup_or_err(recommended)? / surface.speedup_or_err(*current)?,
            };
            write_json(out, "plan.json", &output)?;
            writeln!(stdout, "{}", serde_json::to_string(&output)?)?;
        }
        Command::Estimate {
            workloads,
            tracks,
            spec,
            ground_truth,
        } => {
            let set = WorkloadSet::load(workloads)?;
            let constants = set.context.constants.clone();
            let reference = match tracks {
                Some(p) => ReferenceTracks::load(p)?,
                None => calibrate(&mut SimulatedProbe::calibration(constants.clone()))?,
            };
            let mut records = Vec::new();
            for w in set.materialize()? {
                let at = spec.unwrap_or(w.origin_spec);
                if !w.region().within_bounds(at) {
                    return Err(UrsaError::OutOfRegion(at).into());
                }
                let profile = if *ground_truth {
                    w.profile_at(at, &constants)
                } else {
                    build_profile(
                        &mut SimulatedProbe::new(w.footprint_at(at), constants.clone()),
                        &reference,
                    )?
                };
                records.push(ProfileRecord {
                    workload_id: w.workload_id,
                    spec: at,
                    profile,
                });
            }
            let set = ProfileSet::new(records);
            let path = out.join("profiles.json");
            set.save(&path)?;
            writeln!(stdout, "{} profiles -> {}", set.profiles.len(), path.display())?;
        }
        Command::Schedule {
            profiles,
            nodes,
            policy,
            scaler,
            usage_before,
        } => {
            let profiles = ProfileSet::load(profiles)?;
            let (_, inventory) = cluster_for(&config, nodes)?;
            let mut states = inventory.states()?;
            let schedule = ScheduleConfig {
                scaler: scaler.unwrap_or(config.colocation.schedule.scaler),
                policy: match policy {
                    PolicyArg::Ursa => Policy::Ursa,
                    PolicyArg::Lrp => Policy::Lrp,
                },
                usage_basis: if *usage_before {
                    UsageBasis::BeforePlacement
                } else {
                    config.colocation.schedule.usage_basis
                },
            };
            let placements = schedule_all(&deployments(&profiles), &mut states, &schedule)?;
            let mut lines = String::new();
            for p in &placements {
                lines += &serde_json::to_string(p)?;
                lines.push('\n');
            }
            fs::write(out.join("placements.jsonl"), &lines)?;
            stdout.write_all(lines.as_bytes())?;
        }
        Command::Simulate {
            placements,
            profiles,
            nodes,
        } => {
            let placements = read_placements(placements)?;
            let profiles = ProfileSet::load(profiles)?;
            let (cluster, _) = cluster_for(&config, nodes)?;
            let report = simulate_colocated(
                &placements,
                &deployments(&profiles),
                &cluster,
                &config.colocation.slowdown,
            )?;
            report.save_json(out.join("slowdown.json"))?;
            report.write_csv(out.join("slowdown.csv"))?;
            writeln!(
                stdout,
                "p_sys {:.6} unfairness {:.6}",
                report.p_sys, report.unfairness
            )?;
        }
        Command::Scenario1 { model } => {
            let r = run_scenario1(&config, load_bundle(model)?.as_ref())?;
            r.save(out)?;
            let s = &r.summary;
            writeln!(
                stdout,
                "optimal {}/{} feasible, satisfied {}/{} recommended, max gap +{} cores +{} GB",
                s.optimal, s.oracle_feasible, s.satisfied, s.recommended, s.max_core_gap, s.max_memory_gap
            )?;
        }
        Command::Scenario2 { model } => {
            let r = run_scenario2(&config, load_bundle(model)?.as_ref())?;
            r.save(out)?;
            let s = &r.summary;
            writeln!(
                stdout,
                "preserved {}/{}, core reduction {:.1}%, memory reduction {:.1}%, excess {:.1}% cores {:.1}% memory",
                s.preserved,
                s.requests,
                100.0 * s.core_reduction,
                100.0 * s.memory_reduction,
                100.0 * s.core_excess,
                100.0 * s.memory_excess
            )?;
        }
        Command::Colocate { model } => {
            let r = run_colocation(&config, load_bundle(model)?.as_ref())?;
            r.save(out)?;
            let s = &r.summary;
            writeln!(
                stdout,
                "unfairness lower in {}/{} trials, mean reduction {:.1}%, min p_sys ratio {:.4}",
                s.unfairness_wins,
                s.completed,
                100.0 * s.mean_unfairness_reduction,
                s.min_p_sys_ratio
            )?;
        }
        Command::Sweep {
            k_min,
            k_max,
            bases,
            splits,
        } => {
            let mut config = config.clone();
            let sc = &mut config.sweep;
            sc.k_min = k_min.unwrap_or(sc.k_min);
            sc.k_max = k_max.unwrap_or(sc.k_max);
            sc.splits = splits.unwrap_or(sc.splits);
            if !bases.is_empty() {
                sc.bases = bases.clone();
            }
            let r = run_hyperparam_sweep(&config)?;
            r.save(out)?;
            for k in &r.by_k {
                writeln!(stdout, "k {:>2}: mean error {:.4}", k.k, k.stats.mean)?;
            }
        }
        Command::Loocv => {
            let r = run_loocv(&config)?;
            r.save(out)?;
            writeln!(
                stdout,
                "{} rounds, mean error {:.4}, max {:.4}",
                r.stats.count, r.stats.mean, r.stats.max
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<UrsaError>() {
                Some(UrsaError::Infeasible(_) | UrsaError::CapacityExhausted(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
