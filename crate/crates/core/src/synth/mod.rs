//! Synthetic workloads with latent scaling archetypes.
//!
//! Each archetype couples a saturating performance curve, a counter
//! signature derived from the same parameters, and a ground-truth footprint
//! on the four shared resources. Workloads are noisy instances of an
//! archetype; every random draw is addressed by explicit seeds.

mod archetype;
mod indexes;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use archetype::{Footprint, SurfaceShape, WorkloadArchetype};
pub use indexes::{SystemIndexVector, INDEX_COUNT, INDEX_NAMES};

use crate::error::{Result, UrsaError};
use crate::profile::{InterferenceProfile, NodeConstants};
use crate::seed;
use crate::spec::{ConfigRegion, ResourceSpec};
use crate::surface::ScalingSurface;

pub const WORKLOAD_SET_SCHEMA: u32 = 1;

/// Specification the footprint rates of generated archetypes refer to.
pub const REFERENCE_SPEC: ResourceSpec = ResourceSpec::new(12, 16);

/// Distribution of shared-resource behavior over archetypes. On each
/// resource an archetype is either heavy or light (pressure level at the
/// reference spec) and either sensitive or tolerant, independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FootprintParams {
    pub heavy_fraction: f64,
    pub heavy_pressure: [f64; 2],
    pub light_pressure: [f64; 2],
    pub sensitive_fraction: f64,
    pub high_sensitivity: [f64; 2],
    pub low_sensitivity: [f64; 2],
}

impl Default for FootprintParams {
    fn default() -> Self {
        FootprintParams {
            heavy_fraction: 0.2,
            heavy_pressure: [4.0, 10.0],
            light_pressure: [0.1, 1.0],
            sensitive_fraction: 0.2,
            high_sensitivity: [10.0, 20.0],
            low_sensitivity: [0.0, 2.0],
        }
    }
}

impl FootprintParams {
    fn validate(&self) -> Result<()> {
        let ranges = [
            self.heavy_pressure,
            self.light_pressure,
            self.high_sensitivity,
            self.low_sensitivity,
        ];
        if ranges
            .iter()
            .any(|[lo, hi]| !(*lo >= 0.0 && lo < hi && hi.is_finite()))
            || !(0.0..=1.0).contains(&self.heavy_fraction)
            || !(0.0..=1.0).contains(&self.sensitive_fraction)
        {
            return Err(UrsaError::invalid("invalid footprint distribution"));
        }
        Ok(())
    }
}

pub fn generate_archetypes(count: usize, rng_seed: u64) -> Result<Vec<WorkloadArchetype>> {
    generate_archetypes_with(
        count,
        rng_seed,
        &NodeConstants::default(),
        &FootprintParams::default(),
    )
}

pub fn generate_archetypes_with(
    count: usize,
    rng_seed: u64,
    constants: &NodeConstants,
    params: &FootprintParams,
) -> Result<Vec<WorkloadArchetype>> {
    params.validate()?;
    if count < 2 {
        return Err(UrsaError::invalid(format!(
            "need at least 2 archetypes, got {count}"
        )));
    }
    let mut out: Vec<WorkloadArchetype> = Vec::with_capacity(count);
    for id in 0..count as u32 {
        let mut attempt = 0u64;
        loop {
            let a = draw_archetype(id, seed::rng(rng_seed, &[id as u64, attempt]), constants, params);
            if out.iter().all(|o| o.shape != a.shape) {
                out.push(a);
                break;
            }
            attempt += 1;
        }
    }
    Ok(out)
}

fn draw_archetype(
    id: u32,
    mut rng: impl Rng,
    constants: &NodeConstants,
    params: &FootprintParams,
) -> WorkloadArchetype {
    let shape = SurfaceShape {
        sat_cores: rng.random_range(2.0..14.0),
        sat_memory_gb: rng.random_range(3.0..18.0),
        core_exponent: rng.random_range(0.1..0.9),
        memory_exponent: rng.random_range(0.05..0.6),
    };
    let peak_tps = rng.random_range(500.0..5000.0);
    let read_fraction = rng.random_range(0.3..0.95);

    let mut draw = |p: f64, a: [f64; 2], b: [f64; 2]| {
        let [lo, hi] = if rng.random_bool(p) { a } else { b };
        rng.random_range(lo..hi)
    };
    let fp = params;
    let mut pressure = || draw(fp.heavy_fraction, fp.heavy_pressure, fp.light_pressure);
    let (llc_p, mbw_p, disk_p, net_p) = (pressure(), pressure(), pressure(), pressure());
    let mut sensitivity = || draw(fp.sensitive_fraction, fp.high_sensitivity, fp.low_sensitivity);
    let (mbw_s, disk_s, net_s) = (sensitivity(), sensitivity(), sensitivity());
    let llc_sensitive = draw(fp.sensitive_fraction, [1.0, 2.0], [0.0, 1.0]) >= 1.0;
    let max_ways = constants.llc_ways.saturating_sub(1).max(1);
    let llc_sensitive_ways = if llc_sensitive {
        rng.random_range((max_ways / 2).max(1)..=max_ways)
    } else {
        rng.random_range(0..=(max_ways / 4).min(max_ways))
    };

    let mut footprint = Footprint::idle(constants.llc_ways);
    footprint.llc_sensitive_ways = llc_sensitive_ways;
    footprint.llc_kmps = llc_p * constants.kmps_per_level / footprint.mean_miss_curve();
    footprint.membw_gbps = mbw_p * constants.phy_mbw_gbps / constants.levels.memory_bandwidth as f64;
    footprint.disk_iops = disk_p * constants.iops_scaler;
    footprint.net_gbps = net_p * constants.phy_nbw_gbps / constants.levels.network as f64;
    footprint.membw_sensitivity = mbw_s;
    footprint.disk_sensitivity = disk_s;
    footprint.net_sensitivity = net_s;

    WorkloadArchetype {
        archetype_id: id,
        shape,
        peak_tps,
        read_fraction,
        reference_spec: REFERENCE_SPEC,
        footprint,
    }
}

/// Serialized identity of a workload; everything else is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadRecord {
    pub workload_id: u64,
    pub archetype_id: u32,
    pub noise_seed: u64,
    pub origin_spec: ResourceSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub workload_id: u64,
    pub archetype_id: u32,
    pub noise_seed: u64,
    pub origin_spec: ResourceSpec,
    /// Relative to the workload set's base specification.
    pub ground_truth_surface: ScalingSurface,
    /// Ground-truth levels when running at `origin_spec`.
    pub ground_truth_profile: InterferenceProfile,
    behavior: WorkloadArchetype,
    region: ConfigRegion,
}

/// Shared context for turning records into workloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthContext {
    pub region: ConfigRegion,
    pub base_spec: ResourceSpec,
    pub constants: NodeConstants,
    /// Relative jitter of a workload's curve exponents around its archetype.
    pub surface_noise: f64,
}

impl Default for SynthContext {
    fn default() -> Self {
        SynthContext {
            region: ConfigRegion::default(),
            base_spec: ResourceSpec::new(6, 8),
            constants: NodeConstants::default(),
            surface_noise: 0.0,
        }
    }
}

impl Workload {
    pub fn new(archetype: &WorkloadArchetype, record: WorkloadRecord, ctx: &SynthContext) -> Result<Self> {
        if record.archetype_id != archetype.archetype_id {
            return Err(UrsaError::invalid("record does not match archetype"));
        }
        if !ctx.region.within_bounds(record.origin_spec) {
            return Err(UrsaError::OutOfRegion(record.origin_spec));
        }
        let mut behavior = archetype.clone();
        if ctx.surface_noise > 0.0 {
            let mut rng = seed::rng(record.noise_seed, &[0x5u64]);
            let za: f64 = StandardNormal.sample(&mut rng);
            let zb: f64 = StandardNormal.sample(&mut rng);
            behavior.shape.core_exponent *= (ctx.surface_noise * za).exp();
            behavior.shape.memory_exponent *= (ctx.surface_noise * zb).exp();
        }
        let ground_truth_surface =
            ScalingSurface::from_performance(&ctx.region, ctx.base_spec, |s| behavior.shape.performance(s))?;
        let ground_truth_profile = behavior.footprint_at(record.origin_spec).levels(&ctx.constants);
        Ok(Workload {
            workload_id: record.workload_id,
            archetype_id: record.archetype_id,
            noise_seed: record.noise_seed,
            origin_spec: record.origin_spec,
            ground_truth_surface,
            ground_truth_profile,
            behavior,
            region: ctx.region.clone(),
        })
    }

    pub fn record(&self) -> WorkloadRecord {
        WorkloadRecord {
            workload_id: self.workload_id,
            archetype_id: self.archetype_id,
            noise_seed: self.noise_seed,
            origin_spec: self.origin_spec,
        }
    }

    /// The same workload under a new id and origin (a redeployed copy).
    pub fn instance(
        &self,
        workload_id: u64,
        origin_spec: ResourceSpec,
        constants: &NodeConstants,
    ) -> Workload {
        Workload {
            workload_id,
            origin_spec,
            ground_truth_profile: self.behavior.footprint_at(origin_spec).levels(constants),
            ..self.clone()
        }
    }

    pub fn behavior(&self) -> &WorkloadArchetype {
        &self.behavior
    }

    pub fn region(&self) -> &ConfigRegion {
        &self.region
    }

    pub fn tps(&self, spec: ResourceSpec) -> f64 {
        self.behavior.tps(spec)
    }

    pub fn surface_at(&self, base: ResourceSpec) -> Result<ScalingSurface> {
        self.ground_truth_surface.rebase(base)
    }

    pub fn footprint_at(&self, spec: ResourceSpec) -> Footprint {
        self.behavior.footprint_at(spec)
    }

    pub fn profile_at(&self, spec: ResourceSpec, constants: &NodeConstants) -> InterferenceProfile {
        self.footprint_at(spec).levels(constants)
    }

    /// Counter readings at `spec`, with multiplicative log-normal noise of
    /// relative scale `noise_sigma`. Deterministic in `(noise_seed, spec)`.
    pub fn observe_indexes(&self, spec: ResourceSpec, noise_sigma: f64) -> Result<SystemIndexVector> {
        if !self.region.within_bounds(spec) {
            return Err(UrsaError::OutOfRegion(spec));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(UrsaError::invalid(format!("noise sigma {noise_sigma}")));
        }
        let clean = self.behavior.index_signature(spec);
        if noise_sigma == 0.0 {
            return Ok(clean);
        }
        let mut rng = seed::rng(self.noise_seed, &[spec.cores as u64, spec.memory_gb as u64]);
        let mut v = clean.to_array();
        for x in &mut v {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x *= (noise_sigma * z).exp();
        }
        Ok(SystemIndexVector::sanitized(v))
    }
}

pub fn observe_indexes(
    workload: &Workload,
    spec: ResourceSpec,
    noise_sigma: f64,
) -> Result<SystemIndexVector> {
    workload.observe_indexes(spec, noise_sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub archetypes: usize,
    pub workloads: usize,
    pub seed: u64,
    pub context: SynthContext,
    pub footprint: FootprintParams,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            archetypes: 20,
            workloads: 55,
            seed: 0,
            context: SynthContext::default(),
            footprint: FootprintParams::default(),
        }
    }
}

/// The on-disk workload set: archetypes plus seeded workload records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSet {
    pub schema_version: u32,
    pub context: SynthContext,
    pub archetypes: Vec<WorkloadArchetype>,
    pub workloads: Vec<WorkloadRecord>,
}

impl WorkloadSet {
    /// Workload `i` instantiates archetype `i mod archetypes`.
    pub fn generate(params: &SynthParams) -> Result<Self> {
        if params.workloads == 0 {
            return Err(UrsaError::invalid("workload count must be positive"));
        }
        let ctx = &params.context;
        if ctx.region.index_of(ctx.base_spec).is_none() {
            return Err(UrsaError::OutOfRegion(ctx.base_spec));
        }
        let archetypes =
            generate_archetypes_with(params.archetypes, params.seed, &ctx.constants, &params.footprint)?;
        let grid: Vec<ResourceSpec> = ctx.region.specs().collect();
        let workloads = (0..params.workloads as u64)
            .map(|i| {
                let mut rng = seed::rng(params.seed, &[0xA11C, i]);
                WorkloadRecord {
                    workload_id: i,
                    archetype_id: (i % params.archetypes as u64) as u32,
                    noise_seed: seed::derive(params.seed, &[0x5EED, i]),
                    origin_spec: grid[rng.random_range(0..grid.len())],
                }
            })
            .collect();
        Ok(WorkloadSet {
            schema_version: WORKLOAD_SET_SCHEMA,
            context: ctx.clone(),
            archetypes,
            workloads,
        })
    }

    pub fn materialize(&self) -> Result<Vec<Workload>> {
        let by_id: BTreeMap<u32, &WorkloadArchetype> =
            self.archetypes.iter().map(|a| (a.archetype_id, a)).collect();
        self.workloads
            .iter()
            .map(|r| {
                let a = by_id
                    .get(&r.archetype_id)
                    .ok_or_else(|| UrsaError::invalid(format!("unknown archetype {}", r.archetype_id)))?;
                Workload::new(a, *r, &self.context)
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let set: WorkloadSet = serde_json::from_str(&fs::read_to_string(path)?)?;
        if set.schema_version != WORKLOAD_SET_SCHEMA {
            return Err(UrsaError::invalid(format!(
                "unsupported workload set schema {}",
                set.schema_version
            )));
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Random train/validation split that keeps at least one member of every
/// validation workload's archetype in the training side. Returns positions
/// into `archetype_ids`.
pub fn stratified_split(
    archetype_ids: &[u32],
    n_train: usize,
    n_validation: usize,
    rng_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train + n_validation != archetype_ids.len() {
        return Err(UrsaError::invalid(format!(
            "split {n_train}+{n_validation} does not cover {} workloads",
            archetype_ids.len()
        )));
    }
    if n_train == 0 {
        return Err(UrsaError::invalid("training split is empty"));
    }
    let mut order: Vec<usize> = (0..archetype_ids.len()).collect();
    order.shuffle(&mut seed::rng(rng_seed, &[0x5B11]));
    let mut remaining: BTreeMap<u32, usize> = BTreeMap::new();
    for a in archetype_ids {
        *remaining.entry(*a).or_default() += 1;
    }
    let mut validation = Vec::with_capacity(n_validation);
    let mut leftover = Vec::new();
    for &i in &order {
        let left = remaining.get_mut(&archetype_ids[i]).unwrap();
        if validation.len() < n_validation && *left >= 2 {
            *left -= 1;
            validation.push(i);
        } else {
            leftover.push(i);
        }
    }
    // Not enough duplicated archetypes: top up validation regardless.
    while validation.len() < n_validation {
        validation.push(leftover.pop().unwrap());
    }
    let mut training = leftover;
    training.sort_unstable();
    validation.sort_unstable();
    Ok((training, validation))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archetype_cardinality_and_ids() {
        let a = generate_archetypes(20, 7).unwrap();
        assert_eq!(a.len(), 20);
        for (i, x) in a.iter().enumerate() {
            assert_eq!(x.archetype_id, i as u32);
        }
    }

    #[test]
    fn archetypes_reject_single() {
        assert!(matches!(
            generate_archetypes(1, 0),
            Err(UrsaError::InvalidArgument(_))
        ));
    }

    #[test]
    fn archetypes_are_deterministic() {
        let a = serde_json::to_string(&generate_archetypes(20, 7).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_archetypes(20, 7).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn base_speedup_is_exactly_one() {
        let set = WorkloadSet::generate(&SynthParams::default()).unwrap();
        for w in set.materialize().unwrap() {
            assert_eq!(w.ground_truth_surface.speedup(ResourceSpec::new(6, 8)), Some(1.0));
        }
    }

    #[test]
    fn zero_noise_is_exact_signature() {
        let set = WorkloadSet::generate(&SynthParams::default()).unwrap();
        let w = &set.materialize().unwrap()[3];
        let spec = ResourceSpec::new(6, 8);
        assert_eq!(
            w.observe_indexes(spec, 0.0).unwrap(),
            w.behavior().index_signature(spec)
        );
    }

    #[test]
    fn observation_out_of_region() {
        let set = WorkloadSet::generate(&SynthParams::default()).unwrap();
        let w = &set.materialize().unwrap()[0];
        assert!(matches!(
            w.observe_indexes(ResourceSpec::new(13, 16), 0.05),
            Err(UrsaError::OutOfRegion(_))
        ));
    }

    #[test]
    fn split_keeps_validation_archetypes_in_training() {
        let ids: Vec<u32> = (0..55).map(|i| i % 20).collect();
        let (train, val) = stratified_split(&ids, 44, 11, 3).unwrap();
        assert_eq!(train.len(), 44);
        assert_eq!(val.len(), 11);
        for v in &val {
            assert!(train.iter().any(|t| ids[*t] == ids[*v]));
        }
    }
}
