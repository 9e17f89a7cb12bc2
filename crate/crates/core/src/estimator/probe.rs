use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, UrsaError};
use crate::profile::{NodeConstants, SharedResource};
use crate::seed;
use crate::synth::Footprint;

/// A node on which one target workload runs solo, plus the stress tools
/// needed to measure it.
pub trait NodeProbe {
    fn constants(&self) -> &NodeConstants;

    /// Restricts the target workload to `ways` LLC ways and returns its
    /// miss rate in kilo-misses per second.
    fn set_llc_ways(&mut self, ways: u32) -> Result<f64>;

    /// Runs a stressor of `level` on `resource` next to the target and
    /// returns the target's usage of that resource. Level 0 means no stress.
    fn apply_stress(&mut self, resource: SharedResource, level: u32) -> Result<f64>;

    /// Target usage with no stress, in native units: kmps, GB/s, IOPS, Gb/s.
    fn read_usage(&mut self, resource: SharedResource) -> Result<f64>;

    /// Miss-rate track of the LLC stress program at `level` when run alone,
    /// for ways 1..=W.
    fn run_llc_stressor(&mut self, level: u32) -> Result<Vec<f64>>;
}

/// Probe backed by a synthetic footprint.
///
/// A resource with continuous sensitivity `s` out of `N` levels keeps at
/// least 90% of its usage up to stress level `N - s` (rounded half up) and
/// degrades linearly beyond that. The LLC stress program uses a buffer far
/// larger than the cache, so its miss rate does not depend on the ways it
/// gets. The bandwidth stressors are LLC-neutral.
#[derive(Debug, Clone)]
pub struct SimulatedProbe {
    footprint: Footprint,
    constants: NodeConstants,
    ways: u32,
    noise_sigma: f64,
    rng: ChaCha8Rng,
}

impl SimulatedProbe {
    pub fn new(footprint: Footprint, constants: NodeConstants) -> Self {
        let ways = constants.llc_ways;
        SimulatedProbe {
            footprint,
            constants,
            ways,
            noise_sigma: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Multiplicative log-normal noise on every reading.
    pub fn with_noise(mut self, sigma: f64, rng_seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.rng = seed::rng(rng_seed, &[0x9B0B]);
        self
    }

    /// A probe for calibration only; the target is idle.
    pub fn calibration(constants: NodeConstants) -> Self {
        SimulatedProbe::new(Footprint::idle(constants.llc_ways), constants)
    }

    fn noisy(&mut self, x: f64) -> f64 {
        if self.noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            x * (self.noise_sigma * z).exp()
        } else {
            x
        }
    }

    fn usage(&self, resource: SharedResource) -> f64 {
        let fp = &self.footprint;
        match resource {
            SharedResource::Llc => fp.llc_kmps * fp.miss_curve(self.ways),
            SharedResource::MemoryBandwidth => fp.membw_gbps,
            SharedResource::Disk => fp.disk_iops,
            SharedResource::Network => fp.net_gbps,
        }
    }

    fn tolerance(&self, resource: SharedResource) -> f64 {
        let fp = &self.footprint;
        let s = match resource {
            SharedResource::Llc => return f64::INFINITY,
            SharedResource::MemoryBandwidth => fp.membw_sensitivity,
            SharedResource::Disk => fp.disk_sensitivity,
            SharedResource::Network => fp.net_sensitivity,
        };
        self.constants.levels[resource] as f64 - s
    }
}

impl NodeProbe for SimulatedProbe {
    fn constants(&self) -> &NodeConstants {
        &self.constants
    }

    fn set_llc_ways(&mut self, ways: u32) -> Result<f64> {
        if ways == 0 || ways > self.constants.llc_ways {
            return Err(UrsaError::Probe(format!(
                "cannot allocate {ways} of {} ways",
                self.constants.llc_ways
            )));
        }
        self.ways = ways;
        let k = self.usage(SharedResource::Llc);
        Ok(self.noisy(k))
    }

    fn apply_stress(&mut self, resource: SharedResource, level: u32) -> Result<f64> {
        if level > self.constants.levels[resource] {
            return Err(UrsaError::Probe(format!(
                "{resource} stress level {level} out of range"
            )));
        }
        let base = self.usage(resource);
        let drop = 0.1 * level as f64 / (self.tolerance(resource) + 0.5);
        Ok(self.noisy(base * (1.0 - drop).max(0.0)))
    }

    fn read_usage(&mut self, resource: SharedResource) -> Result<f64> {
        let u = self.usage(resource);
        Ok(self.noisy(u))
    }

    fn run_llc_stressor(&mut self, level: u32) -> Result<Vec<f64>> {
        let k = level as f64 * self.constants.kmps_per_level;
        Ok((1..=self.constants.llc_ways).map(|_| k).collect())
    }
}
