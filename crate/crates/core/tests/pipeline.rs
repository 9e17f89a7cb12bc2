use ursa::estimator::{build_profile, calibrate, ProfileRecord, ProfileSet, ReferenceTracks, SimulatedProbe};
use ursa::experiment::{ExperimentConfig, Prepared};
use ursa::planner::{ModelBundle, PlanningRequest};
use ursa::scheduler::{schedule_all, Deployment, NodeInventory, Policy, ScheduleConfig};
use ursa::simulator::{simulate_colocated, ClusterSpec, SlowdownModel, SlowdownReport};
use ursa::synth::SynthParams;
use ursa::{surface_error, CostWeights, ResourceSpec, UrsaError, WorkloadSet};

#[test]
fn same_archetype_observations_stay_within_noise() {
    let sigma = 0.05;
    let (mut total, mut within_3) = (0usize, 0usize);
    let mut pairs = 0;
    for seed in 0..10u64 {
        let ws = WorkloadSet::generate(&SynthParams {
            seed,
            ..SynthParams::default()
        })
        .unwrap()
        .materialize()
        .unwrap();
        let same: Vec<_> = ws
            .iter()
            .flat_map(|a| ws.iter().map(move |b| (a, b)))
            .filter(|(a, b)| a.workload_id < b.workload_id && a.archetype_id == b.archetype_id)
            .take(10)
            .collect();
        for (a, b) in same {
            pairs += 1;
            let x = a
                .observe_indexes(ResourceSpec::new(6, 8), sigma)
                .unwrap()
                .to_array();
            let y = b
                .observe_indexes(ResourceSpec::new(6, 8), sigma)
                .unwrap()
                .to_array();
            for (p, q) in x.iter().zip(&y) {
                let d = (p - q).abs() / p.max(*q).max(f64::MIN_POSITIVE);
                assert!(d <= 5.0 * sigma, "{d}");
                total += 1;
                within_3 += (d <= 3.0 * sigma) as usize;
            }
        }
    }
    assert_eq!(pairs, 100);
    assert!(within_3 as f64 >= 0.95 * total as f64, "{within_3}/{total}");
}

#[test]
fn train_plan_estimate_schedule_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::default();
    let prepared = Prepared::new(&config).unwrap();
    let base = config.base_spec();
    let bundle = prepared.train_bundle(&config, &[base]).unwrap();
    let path = dir.path().join("model.json");
    bundle.save(&path).unwrap();
    let bundle = ModelBundle::load(&path).unwrap();
    let model = bundle.model_for(base).unwrap();

    for w in prepared.validation_workloads() {
        let x = w.observe_indexes(base, config.training.noise_sigma).unwrap();
        let predicted = model.predict_surface(&x).unwrap();
        assert!(surface_error(&predicted, &w.surface_at(base).unwrap()).unwrap() <= 0.2);
        let request = PlanningRequest::scale_up(ResourceSpec::new(1, 2), 1.5, CostWeights::default());
        match model.recommend(&x, &request) {
            Ok(spec) => assert!(request.is_satisfied(&predicted, spec).unwrap()),
            Err(e) => assert!(matches!(e, UrsaError::Infeasible(_))),
        }
    }

    let constants = prepared.set.context.constants.clone();
    let tracks = calibrate(&mut SimulatedProbe::calibration(constants.clone())).unwrap();
    let tracks_path = dir.path().join("tracks.json");
    tracks.save(&tracks_path).unwrap();
    let tracks = ReferenceTracks::load(&tracks_path).unwrap();
    let records: Vec<ProfileRecord> = prepared
        .workloads
        .iter()
        .map(|w| {
            let mut probe = SimulatedProbe::new(w.footprint_at(w.origin_spec), constants.clone());
            let profile = build_profile(&mut probe, &tracks).unwrap();
            assert_eq!(profile, w.ground_truth_profile);
            ProfileRecord {
                workload_id: w.workload_id,
                spec: w.origin_spec,
                profile,
            }
        })
        .collect();
    let profiles = ProfileSet::new(records);
    let profiles_path = dir.path().join("profiles.json");
    profiles.save(&profiles_path).unwrap();
    assert_eq!(ProfileSet::load(&profiles_path).unwrap(), profiles);

    let arrivals: Vec<Deployment> = profiles
        .profiles
        .iter()
        .map(|p| Deployment {
            workload_id: p.workload_id,
            spec: p.spec,
            profile: p.profile,
        })
        .collect();
    let cluster = ClusterSpec::default();
    for policy in [Policy::Ursa, Policy::Lrp] {
        let config = ScheduleConfig {
            policy,
            ..ScheduleConfig::default()
        };
        let placed = schedule_all(&arrivals, &mut cluster.inventory().states().unwrap(), &config).unwrap();
        let report = simulate_colocated(&placed, &arrivals, &cluster, &SlowdownModel::default()).unwrap();
        assert_eq!(report.workloads.len(), arrivals.len());
        let json = dir.path().join("slowdown.json");
        report.save_json(&json).unwrap();
        let back: SlowdownReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    let tiny = NodeInventory::uniform(1, ResourceSpec::new(8, 16));
    let err = schedule_all(&arrivals, &mut tiny.states().unwrap(), &ScheduleConfig::default()).unwrap_err();
    assert!(matches!(err, UrsaError::CapacityExhausted(_)));
}
