//! Shared resources, per-resource pressure/sensitivity levels, and the
//! physical constants of a node.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedResource {
    Llc,
    MemoryBandwidth,
    Disk,
    Network,
}

impl SharedResource {
    pub const ALL: [SharedResource; 4] = [
        SharedResource::Llc,
        SharedResource::MemoryBandwidth,
        SharedResource::Disk,
        SharedResource::Network,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SharedResource::Llc => "llc",
            SharedResource::MemoryBandwidth => "memory_bandwidth",
            SharedResource::Disk => "disk",
            SharedResource::Network => "network",
        }
    }
}

impl fmt::Display for SharedResource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One value per shared resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerResource<T> {
    pub llc: T,
    pub memory_bandwidth: T,
    pub disk: T,
    pub network: T,
}

impl<T> PerResource<T> {
    pub fn from_fn(mut f: impl FnMut(SharedResource) -> T) -> Self {
        PerResource {
            llc: f(SharedResource::Llc),
            memory_bandwidth: f(SharedResource::MemoryBandwidth),
            disk: f(SharedResource::Disk),
            network: f(SharedResource::Network),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (SharedResource, &T)> {
        SharedResource::ALL.into_iter().map(move |r| (r, &self[r]))
    }
}

impl<T> Index<SharedResource> for PerResource<T> {
    type Output = T;

    fn index(&self, r: SharedResource) -> &T {
        match r {
            SharedResource::Llc => &self.llc,
            SharedResource::MemoryBandwidth => &self.memory_bandwidth,
            SharedResource::Disk => &self.disk,
            SharedResource::Network => &self.network,
        }
    }
}

impl<T> IndexMut<SharedResource> for PerResource<T> {
    fn index_mut(&mut self, r: SharedResource) -> &mut T {
        match r {
            SharedResource::Llc => &mut self.llc,
            SharedResource::MemoryBandwidth => &mut self.memory_bandwidth,
            SharedResource::Disk => &mut self.disk,
            SharedResource::Network => &mut self.network,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResourceLevels {
    pub pressure: u32,
    pub sensitivity: u32,
}

impl ResourceLevels {
    pub const fn new(pressure: u32, sensitivity: u32) -> Self {
        ResourceLevels {
            pressure,
            sensitivity,
        }
    }
}

/// Pressure on, and sensitivity to, each shared resource.
pub type InterferenceProfile = PerResource<ResourceLevels>;

impl InterferenceProfile {
    pub fn idle() -> Self {
        PerResource::default()
    }

    pub fn within(&self, counts: &PerResource<u32>) -> bool {
        self.iter()
            .all(|(r, l)| l.pressure <= counts[r] && l.sensitivity <= counts[r])
    }
}

/// Physical constants of a node and the discretization used to turn raw
/// usage into levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NodeConstants {
    /// Peak memory bandwidth, GB/s.
    pub phy_mbw_gbps: f64,
    /// NIC bandwidth, Gb/s.
    pub phy_nbw_gbps: f64,
    /// IOPS represented by one disk pressure level.
    pub iops_scaler: f64,
    /// LLC ways available to partitioning.
    pub llc_ways: u32,
    /// LLC misses (thousands per second) generated by one level of the LLC
    /// stress program.
    pub kmps_per_level: f64,
    pub levels: PerResource<u32>,
}

impl Default for NodeConstants {
    fn default() -> Self {
        NodeConstants {
            phy_mbw_gbps: 100.0,
            phy_nbw_gbps: 25.0,
            iops_scaler: 1000.0,
            llc_ways: 11,
            kmps_per_level: 50.0,
            levels: PerResource::from_fn(|_| 20),
        }
    }
}

/// Round-half-up to a level, clamped into `[0, max]`.
pub fn to_level(x: f64, max: u32) -> u32 {
    let r = (x.max(0.0) + 0.5).floor();
    if r >= max as f64 {
        max
    } else {
        r as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up_and_clamped() {
        assert_eq!(to_level(4.5, 20), 5);
        assert_eq!(to_level(4.49, 20), 4);
        assert_eq!(to_level(-1.0, 20), 0);
        assert_eq!(to_level(f64::NAN, 20), 0);
        assert_eq!(to_level(31.0, 20), 20);
    }

    #[test]
    fn profile_serializes_by_resource_name() {
        let mut p = InterferenceProfile::idle();
        p[SharedResource::Disk] = ResourceLevels::new(3, 7);
        let json = serde_json::to_value(p).unwrap();
        assert_eq!(json["disk"]["pressure"], 3);
        assert_eq!(json["disk"]["sensitivity"], 7);
        assert_eq!(json["memory_bandwidth"]["pressure"], 0);
    }
}
