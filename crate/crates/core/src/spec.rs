//! Resource specifications and the grid of specifications a planner
//! searches over.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};

/// A `(cores, memory)` point a tenant can rent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub cores: u32,
    pub memory_gb: u32,
}

impl ResourceSpec {
    pub const fn new(cores: u32, memory_gb: u32) -> Self {
        ResourceSpec { cores, memory_gb }
    }

    /// Linear rental cost under `weights`.
    pub fn cost(&self, weights: &CostWeights) -> f64 {
        weights.per_core * self.cores as f64 + weights.per_gb * self.memory_gb as f64
    }
}

impl fmt::Display for ResourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}C, {}G)", self.cores, self.memory_gb)
    }
}

/// Parses `6,8`, `6C,8G` or `(6C, 8G)`.
impl FromStr for ResourceSpec {
    type Err = UrsaError;

    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ' ' | 'C' | 'c' | 'G' | 'g'))
            .collect();
        let (c, m) = cleaned
            .split_once(',')
            .ok_or_else(|| UrsaError::invalid(format!("cannot parse spec {s:?}")))?;
        let cores = c
            .parse()
            .map_err(|_| UrsaError::invalid(format!("bad core count in {s:?}")))?;
        let memory_gb = m
            .parse()
            .map_err(|_| UrsaError::invalid(format!("bad memory size in {s:?}")))?;
        if cores == 0 || memory_gb == 0 {
            return Err(UrsaError::invalid(format!("spec {s:?} must be positive")));
        }
        Ok(ResourceSpec { cores, memory_gb })
    }
}

/// Price of one core and one GB of memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub per_core: f64,
    pub per_gb: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            per_core: 1.0,
            per_gb: 0.25,
        }
    }
}

/// The grid of specifications. Grid points are enumerated core-major:
/// index = core_index * |memory_levels| + memory_index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct ConfigRegion {
    core_levels: Vec<u32>,
    memory_levels: Vec<u32>,
}

#[derive(Deserialize)]
struct RawRegion {
    core_levels: Vec<u32>,
    memory_levels: Vec<u32>,
}

impl TryFrom<RawRegion> for ConfigRegion {
    type Error = UrsaError;

    fn try_from(raw: RawRegion) -> Result<Self> {
        ConfigRegion::new(raw.core_levels, raw.memory_levels)
    }
}

fn strictly_increasing(levels: &[u32]) -> bool {
    levels.windows(2).all(|w| w[0] < w[1])
}

impl ConfigRegion {
    pub fn new(core_levels: Vec<u32>, memory_levels: Vec<u32>) -> Result<Self> {
        if core_levels.is_empty() || memory_levels.is_empty() {
            return Err(UrsaError::invalid("region levels must be non-empty"));
        }
        if !strictly_increasing(&core_levels) || !strictly_increasing(&memory_levels) {
            return Err(UrsaError::invalid("region levels must be strictly increasing"));
        }
        if core_levels[0] == 0 || memory_levels[0] == 0 {
            return Err(UrsaError::invalid("region levels must be positive"));
        }
        Ok(ConfigRegion {
            core_levels,
            memory_levels,
        })
    }

    pub fn core_levels(&self) -> &[u32] {
        &self.core_levels
    }

    pub fn memory_levels(&self) -> &[u32] {
        &self.memory_levels
    }

    /// Grid cardinality.
    pub fn len(&self) -> usize {
        self.core_levels.len() * self.memory_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spec_at(&self, index: usize) -> ResourceSpec {
        let cols = self.memory_levels.len();
        ResourceSpec::new(self.core_levels[index / cols], self.memory_levels[index % cols])
    }

    pub fn index_of(&self, spec: ResourceSpec) -> Option<usize> {
        let ci = self.core_levels.binary_search(&spec.cores).ok()?;
        let mi = self.memory_levels.binary_search(&spec.memory_gb).ok()?;
        Some(ci * self.memory_levels.len() + mi)
    }

    pub fn specs(&self) -> impl Iterator<Item = ResourceSpec> + '_ {
        (0..self.len()).map(move |i| self.spec_at(i))
    }

    /// Whether `spec` is inside the bounding box of the grid.
    pub fn within_bounds(&self, spec: ResourceSpec) -> bool {
        let (c0, c1) = (self.core_levels[0], *self.core_levels.last().unwrap());
        let (m0, m1) = (self.memory_levels[0], *self.memory_levels.last().unwrap());
        (c0..=c1).contains(&spec.cores) && (m0..=m1).contains(&spec.memory_gb)
    }

    pub fn min_spec(&self) -> ResourceSpec {
        ResourceSpec::new(self.core_levels[0], self.memory_levels[0])
    }

    pub fn max_spec(&self) -> ResourceSpec {
        ResourceSpec::new(
            *self.core_levels.last().unwrap(),
            *self.memory_levels.last().unwrap(),
        )
    }

    /// Smallest grid point that is at least `spec` on both axes, if any.
    pub fn round_up(&self, spec: ResourceSpec) -> Option<ResourceSpec> {
        let c = *self.core_levels.iter().find(|&&c| c >= spec.cores)?;
        let m = *self.memory_levels.iter().find(|&&m| m >= spec.memory_gb)?;
        Some(ResourceSpec::new(c, m))
    }
}

impl Default for ConfigRegion {
    /// Cores {1,2,4,6,8,10,12} x memory {2,4,6,8,12,16}.
    fn default() -> Self {
        ConfigRegion::new(vec![1, 2, 4, 6, 8, 10, 12], vec![2, 4, 6, 8, 12, 16])
            .expect("default region is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_region_shape() {
        let r = ConfigRegion::default();
        assert_eq!(r.len(), 42);
        assert_eq!(r.min_spec(), ResourceSpec::new(1, 2));
        assert_eq!(r.max_spec(), ResourceSpec::new(12, 16));
        for (i, s) in r.specs().enumerate() {
            assert_eq!(r.index_of(s), Some(i));
        }
        assert!(r.index_of(ResourceSpec::new(3, 8)).is_none());
        assert!(r.within_bounds(ResourceSpec::new(3, 8)));
        assert!(!r.within_bounds(ResourceSpec::new(13, 16)));
    }

    #[test]
    fn rejects_unordered_levels() {
        assert!(ConfigRegion::new(vec![2, 2], vec![4]).is_err());
        assert!(ConfigRegion::new(vec![], vec![4]).is_err());
        let bad: std::result::Result<ConfigRegion, _> =
            serde_json::from_str(r#"{"core_levels":[4,2],"memory_levels":[2]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn parse_spec_forms() {
        for s in ["6,8", "6C,8G", "(6C, 8G)"] {
            assert_eq!(s.parse::<ResourceSpec>().unwrap(), ResourceSpec::new(6, 8));
        }
        assert!("6".parse::<ResourceSpec>().is_err());
        assert!("0,8".parse::<ResourceSpec>().is_err());
    }

    #[test]
    fn round_up_to_grid() {
        let r = ConfigRegion::default();
        assert_eq!(
            r.round_up(ResourceSpec::new(3, 9)),
            Some(ResourceSpec::new(4, 12))
        );
        assert_eq!(r.round_up(ResourceSpec::new(1, 2)), Some(ResourceSpec::new(1, 2)));
        assert_eq!(r.round_up(ResourceSpec::new(13, 2)), None);
    }
}
