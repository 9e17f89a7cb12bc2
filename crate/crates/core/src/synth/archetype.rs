use serde::{Deserialize, Serialize};

use super::indexes::{SystemIndexVector, INDEX_COUNT};
use crate::profile::{to_level, InterferenceProfile, NodeConstants, ResourceLevels, SharedResource};
use crate::spec::ResourceSpec;

/// Parametric saturating performance curve:
/// `min(cores, sat_cores)^core_exponent * min(mem, sat_memory_gb)^memory_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceShape {
    pub sat_cores: f64,
    pub sat_memory_gb: f64,
    pub core_exponent: f64,
    pub memory_exponent: f64,
}

impl SurfaceShape {
    /// Unnormalized performance at `spec`. Non-decreasing on both axes.
    pub fn performance(&self, spec: ResourceSpec) -> f64 {
        let c = (spec.cores as f64).min(self.sat_cores);
        let m = (spec.memory_gb as f64).min(self.sat_memory_gb);
        c.powf(self.core_exponent) * m.powf(self.memory_exponent)
    }
}

/// Ground-truth shared-resource behavior. Rates are those observed at the
/// archetype's reference specification; they scale with throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    /// LLC misses (thousands/s) with the whole LLC available.
    pub llc_kmps: f64,
    /// Ways below which the miss rate climbs; 0 means cache-insensitive.
    pub llc_sensitive_ways: u32,
    /// Total ways of the LLC model this footprint was generated against.
    pub llc_ways: u32,
    pub membw_gbps: f64,
    pub disk_iops: f64,
    pub net_gbps: f64,
    /// Continuous sensitivity levels for the bandwidth-like resources.
    pub membw_sensitivity: f64,
    pub disk_sensitivity: f64,
    pub net_sensitivity: f64,
}

impl Footprint {
    pub fn idle(llc_ways: u32) -> Self {
        Footprint {
            llc_kmps: 0.0,
            llc_sensitive_ways: 0,
            llc_ways,
            membw_gbps: 0.0,
            disk_iops: 0.0,
            net_gbps: 0.0,
            membw_sensitivity: 0.0,
            disk_sensitivity: 0.0,
            net_sensitivity: 0.0,
        }
    }

    /// Relative miss-rate multiplier when only `ways` ways are allocated.
    /// 1 at and above the sensitive point; jumps by 15% at it and climbs
    /// 10% per way below it.
    pub fn miss_curve(&self, ways: u32) -> f64 {
        let ws = self.llc_sensitive_ways;
        if ws == 0 || ways > ws {
            1.0
        } else {
            1.15 + 0.1 * (ws - ways) as f64
        }
    }

    pub fn mean_miss_curve(&self) -> f64 {
        let w = self.llc_ways.max(1);
        (1..=w).map(|k| self.miss_curve(k)).sum::<f64>() / w as f64
    }

    /// The same footprint running at `scale` times the reference throughput.
    pub fn scaled(&self, scale: f64) -> Footprint {
        Footprint {
            llc_kmps: self.llc_kmps * scale,
            membw_gbps: self.membw_gbps * scale,
            disk_iops: self.disk_iops * scale,
            net_gbps: self.net_gbps * scale,
            ..*self
        }
    }

    /// Levels implied by the model itself. LLC pressure is the average miss
    /// intensity over all way allocations, in stress-program units.
    pub fn levels(&self, constants: &NodeConstants) -> InterferenceProfile {
        let n = &constants.levels;
        let sens = |usage: f64, s: f64, max: u32| if usage > 0.0 { to_level(s, max) } else { 0 };
        let llc_pressure = to_level(
            self.llc_kmps * self.mean_miss_curve() / constants.kmps_per_level,
            n.llc,
        );
        let llc_sens = if self.llc_kmps > 0.0 {
            to_level(
                self.llc_sensitive_ways as f64 * n.llc as f64 / constants.llc_ways as f64,
                n.llc,
            )
        } else {
            0
        };
        let mut p = InterferenceProfile::idle();
        p[SharedResource::Llc] = ResourceLevels::new(llc_pressure, llc_sens);
        p[SharedResource::MemoryBandwidth] = ResourceLevels::new(
            to_level(
                n.memory_bandwidth as f64 * self.membw_gbps / constants.phy_mbw_gbps,
                n.memory_bandwidth,
            ),
            sens(self.membw_gbps, self.membw_sensitivity, n.memory_bandwidth),
        );
        p[SharedResource::Disk] = ResourceLevels::new(
            to_level(self.disk_iops / constants.iops_scaler, n.disk),
            sens(self.disk_iops, self.disk_sensitivity, n.disk),
        );
        p[SharedResource::Network] = ResourceLevels::new(
            to_level(
                n.network as f64 * self.net_gbps / constants.phy_nbw_gbps,
                n.network,
            ),
            sens(self.net_gbps, self.net_sensitivity, n.network),
        );
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadArchetype {
    pub archetype_id: u32,
    pub shape: SurfaceShape,
    /// Transactions per second at `reference_spec`.
    pub peak_tps: f64,
    pub read_fraction: f64,
    pub reference_spec: ResourceSpec,
    pub footprint: Footprint,
}

/// Allocations below these leave every workload throttled alike, which
/// hides archetype-specific counter behavior.
const VISIBLE_CORES: f64 = 4.0;
const VISIBLE_MEMORY_GB: f64 = 6.0;

fn visibility(spec: ResourceSpec) -> f64 {
    let c = (spec.cores as f64 / VISIBLE_CORES).min(1.0);
    let m = (spec.memory_gb as f64 / VISIBLE_MEMORY_GB).min(1.0);
    (c * m).powf(0.8)
}

impl WorkloadArchetype {
    /// A middle-of-the-road archetype; counters of throttled workloads
    /// converge towards its readings.
    pub fn typical(reference_spec: ResourceSpec, llc_ways: u32) -> Self {
        WorkloadArchetype {
            archetype_id: u32::MAX,
            shape: SurfaceShape {
                sat_cores: 8.0,
                sat_memory_gb: 10.0,
                core_exponent: 0.5,
                memory_exponent: 0.3,
            },
            peak_tps: 2000.0,
            read_fraction: 0.65,
            reference_spec,
            footprint: Footprint {
                llc_kmps: 150.0,
                llc_sensitive_ways: 3,
                llc_ways,
                membw_gbps: 10.0,
                disk_iops: 2000.0,
                net_gbps: 1.5,
                membw_sensitivity: 5.0,
                disk_sensitivity: 5.0,
                net_sensitivity: 5.0,
            },
        }
    }

    /// Throughput at `spec` divided by throughput at the reference spec.
    pub fn relative_throughput(&self, spec: ResourceSpec) -> f64 {
        self.shape.performance(spec) / self.shape.performance(self.reference_spec)
    }

    pub fn tps(&self, spec: ResourceSpec) -> f64 {
        self.peak_tps * self.relative_throughput(spec)
    }

    pub fn footprint_at(&self, spec: ResourceSpec) -> Footprint {
        self.footprint.scaled(self.relative_throughput(spec))
    }

    fn raw_indexes(&self, spec: ResourceSpec) -> [f64; INDEX_COUNT] {
        let s = &self.shape;
        let c = spec.cores as f64;
        let m = spec.memory_gb as f64;
        let eff_c = c.min(s.sat_cores);
        let eff_m = m.min(s.sat_memory_gb);
        let tps = self.tps(spec);
        let fp = self.footprint_at(spec);
        let rf = self.read_fraction;
        let cache_share = fp.llc_sensitive_ways as f64 / fp.llc_ways.max(1) as f64;
        let alpha = s.core_exponent;
        let beta = s.memory_exponent;

        let cache_misses = fp.llc_kmps * fp.mean_miss_curve() * 1000.0;
        let memory_usage = eff_m * (0.55 + 0.6 * beta);
        [
            (0.4 + 1.6 * alpha - 0.02 * fp.membw_gbps).max(0.1),
            40.0 * tps * (1.0 + 2.0 * beta) * (1.2 - rf),
            cache_misses,
            2.0e6 * fp.membw_gbps * (1.2 - rf),
            16384.0 * fp.disk_iops * rf,
            fp.disk_iops * rf,
            memory_usage,
            100.0 * eff_c * (0.55 + 0.45 * alpha),
            50.0 + 2000.0 * beta * (1.0 - eff_m / s.sat_memory_gb.max(1.0)).max(0.0)
                + 400.0 * (s.sat_memory_gb / 20.0),
            90.0 * tps * (1.0 + beta),
            cache_misses * (1.3 + 3.0 * cache_share) + 20.0 * tps,
            3.0e6 * fp.membw_gbps * (0.3 + rf),
            1.5 * 16384.0 * fp.disk_iops * (1.0 - rf),
            fp.disk_iops * (1.0 - rf),
            memory_usage * 1024.0 * 0.08 * (1.1 - rf),
        ]
    }

    /// Noise-free counter readings at `spec`.
    pub fn index_signature(&self, spec: ResourceSpec) -> SystemIndexVector {
        let own = self.raw_indexes(spec);
        let h = visibility(spec);
        if h >= 1.0 {
            return SystemIndexVector::sanitized(own);
        }
        let common =
            WorkloadArchetype::typical(self.reference_spec, self.footprint.llc_ways).raw_indexes(spec);
        let mut v = [0.0; INDEX_COUNT];
        for i in 0..INDEX_COUNT {
            v[i] = h * own[i] + (1.0 - h) * common[i];
        }
        SystemIndexVector::sanitized(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miss_curve_crosses_ten_percent_at_sensitive_way() {
        let mut fp = Footprint::idle(11);
        fp.llc_sensitive_ways = 6;
        assert_eq!(fp.miss_curve(11), 1.0);
        assert_eq!(fp.miss_curve(7), 1.0);
        assert!(fp.miss_curve(6) > 1.1);
        assert!(fp.miss_curve(1) > fp.miss_curve(2));
    }

    #[test]
    fn idle_footprint_has_idle_levels() {
        let fp = Footprint::idle(11);
        assert_eq!(fp.levels(&NodeConstants::default()), InterferenceProfile::idle());
    }

    #[test]
    fn signature_blends_at_small_specs() {
        let t = WorkloadArchetype::typical(ResourceSpec::new(12, 16), 11);
        let mut other = t.clone();
        other.shape.core_exponent = 0.9;
        let small = ResourceSpec::new(1, 2);
        let mid = ResourceSpec::new(6, 8);
        let d = |s| (other.index_signature(s).ipc - t.index_signature(s).ipc).abs();
        assert!(d(small) < 0.25 * d(mid));
    }
}
