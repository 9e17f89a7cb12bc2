use proptest::prelude::*;

use ursa::estimator::{build_profile, calibrate, SimulatedProbe};
use ursa::planner::{cheaper, plan_capacity, PlanningRequest};
use ursa::scheduler::{risk, schedule_all, Deployment, NodeInventory, Policy, ScheduleConfig};
use ursa::synth::{generate_archetypes, SurfaceShape, SynthParams};
use ursa::{
    ConfigRegion, CostWeights, InterferenceProfile, NodeConstants, PerResource, ResourceLevels, ResourceSpec,
    ScalingSurface, SharedResource, UrsaError, WorkloadSet,
};

fn cases() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn shape() -> impl Strategy<Value = SurfaceShape> {
    (1.0f64..14.0, 2.0f64..20.0, 0.0f64..1.2, 0.0f64..1.2).prop_map(|(c, m, a, b)| SurfaceShape {
        sat_cores: c,
        sat_memory_gb: m,
        core_exponent: a,
        memory_exponent: b,
    })
}

fn surface() -> impl Strategy<Value = ScalingSurface> {
    (shape(), 0usize..42).prop_map(|(shape, base)| {
        let region = ConfigRegion::default();
        let base = region.spec_at(base);
        ScalingSurface::from_performance(&region, base, |s| shape.performance(s)).unwrap()
    })
}

fn weights() -> impl Strategy<Value = CostWeights> {
    (0.1f64..2.0, 0.05f64..1.0).prop_map(|(per_core, per_gb)| CostWeights { per_core, per_gb })
}

fn levels() -> impl Strategy<Value = PerResource<u32>> {
    proptest::array::uniform4(0u32..=40).prop_map(|v| PerResource::from_fn(|r| v[r as usize]))
}

fn profile() -> impl Strategy<Value = InterferenceProfile> {
    proptest::array::uniform8(0u32..=20)
        .prop_map(|v| PerResource::from_fn(|r| ResourceLevels::new(v[2 * r as usize], v[2 * r as usize + 1])))
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn plan_is_cheapest_satisfying_spec(s in surface(), w in weights(), cur in 0usize..42, t in 1.0f64..4.0) {
        let current = s.region().spec_at(cur);
        let request = PlanningRequest::scale_up(current, t, w);
        let satisfying: Vec<ResourceSpec> =
            s.region().specs().filter(|x| request.is_satisfied(&s, *x).unwrap()).collect();
        match plan_capacity(&request, &s) {
            Ok(spec) => {
                prop_assert!(request.is_satisfied(&s, spec).unwrap());
                for other in &satisfying {
                    prop_assert!(cheaper(spec, *other, &w).is_le());
                }
            }
            Err(UrsaError::Infeasible(_)) => prop_assert!(satisfying.is_empty()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn scale_down_keeps_performance(s in surface(), w in weights(), cur in 0usize..42, eps in 0.0f64..0.5) {
        let current = s.region().spec_at(cur);
        let request = PlanningRequest::scale_down(current, eps, w);
        let spec = plan_capacity(&request, &s).unwrap();
        prop_assert!(s.speedup(spec).unwrap() >= (1.0 - eps) * s.speedup(current).unwrap());
        prop_assert!(spec.cost(&w) <= current.cost(&w));
    }

    #[test]
    fn plan_cost_is_monotone_in_target(
        s in surface(), w in weights(), cur in 0usize..42, t1 in 1.0f64..4.0, dt in 0.0f64..2.0,
    ) {
        let current = s.region().spec_at(cur);
        let lo = plan_capacity(&PlanningRequest::scale_up(current, t1, w), &s);
        let hi = plan_capacity(&PlanningRequest::scale_up(current, t1 + dt, w), &s);
        match (lo, hi) {
            (Ok(a), Ok(b)) => prop_assert!(a.cost(&w) <= b.cost(&w)),
            (Err(_), Ok(_)) => prop_assert!(false, "lower target infeasible, higher feasible"),
            _ => {}
        }
    }

    #[test]
    fn risk_strictly_increases_in_pressure_and_sensitivity(
        sums in levels(), maxs in levels(), r in 0usize..4, scaler in 1.01f64..1.5,
    ) {
        let r = SharedResource::ALL[r];
        let base = risk(&sums, &maxs, scaler);
        let mut more_p = sums;
        more_p[r] += 1;
        let mut more_s = maxs;
        more_s[r] += 1;
        if maxs[r] > 0 {
            prop_assert!(risk(&more_p, &maxs, scaler) > base);
        }
        if sums[r] > 0 {
            prop_assert!(risk(&sums, &more_s, scaler) > base);
        }
    }

    #[test]
    fn replayed_schedule_is_identical(
        ps in proptest::collection::vec((1u32..=12, 2u32..=16, profile()), 1..60), lrp in any::<bool>(),
    ) {
        let arrivals: Vec<Deployment> = ps
            .into_iter()
            .enumerate()
            .map(|(i, (c, m, profile))| Deployment { workload_id: i as u64, spec: ResourceSpec::new(c, m), profile })
            .collect();
        let config = ScheduleConfig {
            policy: if lrp { Policy::Lrp } else { Policy::Ursa },
            ..ScheduleConfig::default()
        };
        let inv = NodeInventory::uniform(5, ResourceSpec::new(48, 128));
        let a = schedule_all(&arrivals, &mut inv.states().unwrap(), &config);
        let b = schedule_all(&arrivals, &mut inv.states().unwrap(), &config);
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn probe_levels_are_bounded_and_monotone_in_footprint(seed in any::<u64>(), scale in 1.0f64..3.0) {
        let c = NodeConstants::default();
        let reference = calibrate(&mut SimulatedProbe::calibration(c.clone())).unwrap();
        for a in generate_archetypes(2, seed).unwrap() {
            let fp = a.footprint_at(a.reference_spec);
            let small = build_profile(&mut SimulatedProbe::new(fp, c.clone()), &reference).unwrap();
            let large = build_profile(&mut SimulatedProbe::new(fp.scaled(scale), c.clone()), &reference).unwrap();
            for r in SharedResource::ALL {
                prop_assert!(small[r].pressure <= c.levels[r] && small[r].sensitivity <= c.levels[r]);
                prop_assert!(large[r].pressure >= small[r].pressure);
            }
        }
    }

    #[test]
    fn noise_free_observations_depend_on_archetype_and_spec_only(seed in any::<u64>(), at in 0usize..42) {
        let p = SynthParams { seed, archetypes: 3, workloads: 12, ..SynthParams::default() };
        let ws = WorkloadSet::generate(&p).unwrap().materialize().unwrap();
        let spec = ws[0].region().spec_at(at);
        for a in &ws {
            prop_assert_eq!(a.observe_indexes(spec, 0.0).unwrap(), a.observe_indexes(spec, 0.0).unwrap());
            for b in ws.iter().filter(|b| b.archetype_id == a.archetype_id) {
                prop_assert_eq!(a.observe_indexes(spec, 0.0).unwrap(), b.observe_indexes(spec, 0.0).unwrap());
                prop_assert_eq!(&a.ground_truth_surface, &b.ground_truth_surface);
            }
        }
    }
}
