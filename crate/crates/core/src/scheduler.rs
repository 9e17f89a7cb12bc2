//! Contention-aware placement and the least-requested baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};
use crate::profile::{InterferenceProfile, PerResource, SharedResource};
use crate::spec::ResourceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Ursa,
    /// Least-requested priority: smallest share of free resources consumed.
    Lrp,
}

impl std::str::FromStr for Policy {
    type Err = UrsaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ursa" => Ok(Policy::Ursa),
            "lrp" => Ok(Policy::Lrp),
            _ => Err(UrsaError::invalid(format!("unknown policy {s:?}"))),
        }
    }
}

/// Which node usage multiplies the contention risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UsageBasis {
    /// Usage including the incoming workload.
    AfterPlacement,
    BeforePlacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub scaler: f64,
    pub policy: Policy,
    pub usage_basis: UsageBasis,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            scaler: 1.1,
            policy: Policy::Ursa,
            usage_basis: UsageBasis::AfterPlacement,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scaler > 1.0 && self.scaler.is_finite()) {
            return Err(UrsaError::invalid(format!(
                "scaler {} must exceed 1",
                self.scaler
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub workload_id: u64,
    pub spec: ResourceSpec,
    pub profile: InterferenceProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub node_id: u32,
    pub capacity: ResourceSpec,
    used: ResourceSpec,
    deployed: Vec<Deployment>,
}

impl NodeState {
    pub fn new(node_id: u32, capacity: ResourceSpec) -> Self {
        NodeState {
            node_id,
            capacity,
            used: ResourceSpec::new(0, 0),
            deployed: Vec::new(),
        }
    }

    pub fn used(&self) -> ResourceSpec {
        self.used
    }

    pub fn deployed(&self) -> &[Deployment] {
        &self.deployed
    }

    pub fn free(&self) -> ResourceSpec {
        ResourceSpec::new(
            self.capacity.cores - self.used.cores,
            self.capacity.memory_gb - self.used.memory_gb,
        )
    }

    pub fn fits(&self, spec: ResourceSpec) -> bool {
        let f = self.free();
        spec.cores <= f.cores && spec.memory_gb <= f.memory_gb
    }

    pub fn deploy(&mut self, d: Deployment) -> Result<()> {
        if !self.fits(d.spec) {
            return Err(UrsaError::CapacityExhausted(d.spec));
        }
        self.used.cores += d.spec.cores;
        self.used.memory_gb += d.spec.memory_gb;
        self.deployed.push(d);
        Ok(())
    }

    pub fn sum_pressure(&self) -> PerResource<u32> {
        PerResource::from_fn(|r| self.deployed.iter().map(|d| d.profile[r].pressure).sum())
    }

    pub fn max_sensitivity(&self) -> PerResource<u32> {
        PerResource::from_fn(|r| {
            self.deployed
                .iter()
                .map(|d| d.profile[r].sensitivity)
                .max()
                .unwrap_or(0)
        })
    }

    /// Mean of the used core and memory fractions.
    pub fn usage_average(&self) -> f64 {
        usage_average(self.used, self.capacity)
    }
}

fn usage_average(used: ResourceSpec, capacity: ResourceSpec) -> f64 {
    (used.cores as f64 / capacity.cores as f64 + used.memory_gb as f64 / capacity.memory_gb as f64) / 2.0
}

/// `sum over r of MaxS_r * SumP_r * scaler^SumP_r`.
pub fn risk(sum_pressure: &PerResource<u32>, max_sensitivity: &PerResource<u32>, scaler: f64) -> f64 {
    SharedResource::ALL
        .iter()
        .map(|&r| {
            let p = sum_pressure[r] as f64;
            max_sensitivity[r] as f64 * p * scaler.powf(p)
        })
        .sum()
}

pub fn contention_risk(node: &NodeState, config: &ScheduleConfig) -> f64 {
    risk(&node.sum_pressure(), &node.max_sensitivity(), config.scaler)
}

/// Contention risk of the node with `incoming` added, times its usage.
pub fn score_node(node: &NodeState, incoming: &Deployment, config: &ScheduleConfig) -> f64 {
    let mut sums = node.sum_pressure();
    let mut maxs = node.max_sensitivity();
    for r in SharedResource::ALL {
        sums[r] += incoming.profile[r].pressure;
        maxs[r] = maxs[r].max(incoming.profile[r].sensitivity);
    }
    let used = match config.usage_basis {
        UsageBasis::AfterPlacement => ResourceSpec::new(
            node.used.cores + incoming.spec.cores,
            node.used.memory_gb + incoming.spec.memory_gb,
        ),
        UsageBasis::BeforePlacement => node.used,
    };
    risk(&sums, &maxs, config.scaler) * usage_average(used, node.capacity)
}

/// Average share of the node's free cores and memory the request takes.
pub fn lrp_score(node: &NodeState, spec: ResourceSpec) -> f64 {
    let f = node.free();
    (spec.cores as f64 / f.cores as f64 + spec.memory_gb as f64 / f.memory_gb as f64) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub workload_id: u64,
    pub node_id: u32,
    pub score: f64,
}

/// Places `incoming` on the feasible node with the lowest score (lowest
/// node id on ties) and records it there.
pub fn place(incoming: Deployment, nodes: &mut [NodeState], config: &ScheduleConfig) -> Result<Placement> {
    config.validate()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, n) in nodes.iter().enumerate() {
        if !n.fits(incoming.spec) {
            continue;
        }
        let s = match config.policy {
            Policy::Ursa => score_node(n, &incoming, config),
            Policy::Lrp => lrp_score(n, incoming.spec),
        };
        let better = match best {
            None => true,
            Some((j, b)) => s < b || (s == b && n.node_id < nodes[j].node_id),
        };
        if better {
            best = Some((i, s));
        }
    }
    let (i, score) = best.ok_or(UrsaError::CapacityExhausted(incoming.spec))?;
    nodes[i].deploy(incoming)?;
    Ok(Placement {
        workload_id: incoming.workload_id,
        node_id: nodes[i].node_id,
        score,
    })
}

/// Places workloads in arrival order.
pub fn schedule_all(
    arrivals: &[Deployment],
    nodes: &mut [NodeState],
    config: &ScheduleConfig,
) -> Result<Vec<Placement>> {
    arrivals.iter().map(|d| place(*d, nodes, config)).collect()
}

pub const NODE_INVENTORY_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInventory {
    pub schema_version: u32,
    pub nodes: Vec<NodeCapacity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCapacity {
    pub node_id: u32,
    pub cores: u32,
    pub memory_gb: u32,
}

impl NodeInventory {
    pub fn uniform(count: u32, capacity: ResourceSpec) -> Self {
        NodeInventory {
            schema_version: NODE_INVENTORY_SCHEMA,
            nodes: (0..count)
                .map(|node_id| NodeCapacity {
                    node_id,
                    cores: capacity.cores,
                    memory_gb: capacity.memory_gb,
                })
                .collect(),
        }
    }

    pub fn states(&self) -> Result<Vec<NodeState>> {
        if self.nodes.is_empty() {
            return Err(UrsaError::invalid("node inventory is empty"));
        }
        let mut ids: Vec<u32> = self.nodes.iter().map(|n| n.node_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.nodes.len() {
            return Err(UrsaError::invalid("duplicate node ids"));
        }
        self.nodes
            .iter()
            .map(|n| {
                if n.cores == 0 || n.memory_gb == 0 {
                    return Err(UrsaError::invalid(format!("node {} has no capacity", n.node_id)));
                }
                Ok(NodeState::new(n.node_id, ResourceSpec::new(n.cores, n.memory_gb)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ResourceLevels;

    fn profile(levels: &[(SharedResource, u32, u32)]) -> InterferenceProfile {
        let mut p = InterferenceProfile::idle();
        for &(r, pr, s) in levels {
            p[r] = ResourceLevels::new(pr, s);
        }
        p
    }

    fn dep(id: u64, spec: (u32, u32), p: InterferenceProfile) -> Deployment {
        Deployment {
            workload_id: id,
            spec: ResourceSpec::new(spec.0, spec.1),
            profile: p,
        }
    }

    fn node(id: u32) -> NodeState {
        NodeState::new(id, ResourceSpec::new(96, 256))
    }

    #[test]
    fn risk_examples() {
        let cfg = ScheduleConfig::default();
        assert_eq!(contention_risk(&node(0), &cfg), 0.0);

        let mut n = node(0);
        n.deploy(dep(1, (1, 1), profile(&[(SharedResource::Llc, 3, 2)])))
            .unwrap();
        assert!((contention_risk(&n, &cfg) - 7.986).abs() < 1e-9);

        n.deploy(dep(2, (1, 1), profile(&[(SharedResource::Disk, 5, 1)])))
            .unwrap();
        assert!((contention_risk(&n, &cfg) - 16.03855).abs() < 1e-9);
    }

    #[test]
    fn score_examples() {
        let cfg = ScheduleConfig::default();
        let zero = dep(1, (4, 8), InterferenceProfile::idle());
        assert_eq!(score_node(&node(0), &zero, &cfg), 0.0);

        let mut n = node(0);
        n.deploy(dep(1, (44, 56), profile(&[(SharedResource::Llc, 3, 2)])))
            .unwrap();
        let incoming = dep(2, (4, 8), profile(&[(SharedResource::Disk, 5, 1)]));
        let expected = 16.03855 * 0.375;
        assert!((score_node(&n, &incoming, &cfg) - expected).abs() < 1e-9);
    }

    #[test]
    fn ties_go_to_lowest_node_id() {
        for policy in [Policy::Ursa, Policy::Lrp] {
            let cfg = ScheduleConfig {
                policy,
                ..Default::default()
            };
            let mut nodes = vec![node(0), node(1), node(2)];
            let p = place(dep(1, (4, 8), InterferenceProfile::idle()), &mut nodes, &cfg).unwrap();
            assert_eq!(p.node_id, 0);
        }
    }

    #[test]
    fn quieter_node_wins() {
        let cfg = ScheduleConfig::default();
        let mut nodes = vec![node(0), node(1)];
        nodes[0]
            .deploy(dep(
                1,
                (4, 8),
                profile(&[(SharedResource::MemoryBandwidth, 6, 3)]),
            ))
            .unwrap();
        nodes[1]
            .deploy(dep(
                2,
                (4, 8),
                profile(&[(SharedResource::MemoryBandwidth, 2, 3)]),
            ))
            .unwrap();
        let incoming = dep(3, (4, 8), profile(&[(SharedResource::MemoryBandwidth, 1, 1)]));
        assert_eq!(place(incoming, &mut nodes, &cfg).unwrap().node_id, 1);
    }

    #[test]
    fn infeasible_and_single_feasible() {
        let cfg = ScheduleConfig {
            policy: Policy::Lrp,
            ..Default::default()
        };
        let mut nodes = vec![NodeState::new(0, ResourceSpec::new(2, 4)), node(1)];
        let p = place(dep(1, (8, 8), InterferenceProfile::idle()), &mut nodes, &cfg).unwrap();
        assert_eq!(p.node_id, 1);
        assert!(matches!(
            place(dep(2, (97, 8), InterferenceProfile::idle()), &mut nodes, &cfg),
            Err(UrsaError::CapacityExhausted(_))
        ));
        let bad = ScheduleConfig { scaler: 1.0, ..cfg };
        assert!(place(dep(3, (1, 1), InterferenceProfile::idle()), &mut nodes, &bad).is_err());
    }

    #[test]
    fn largest_specs_fill_seven_nodes() {
        let cfg = ScheduleConfig::default();
        let mut nodes: Vec<NodeState> = (0..7).map(node).collect();
        let arrivals: Vec<Deployment> = (0..56)
            .map(|i| dep(i, (12, 16), profile(&[(SharedResource::Llc, 2, 4)])))
            .collect();
        let placed = schedule_all(&arrivals, &mut nodes, &cfg).unwrap();
        assert_eq!(placed.len(), 56);
        assert!(nodes.iter().all(|n| n.used() == ResourceSpec::new(96, 128)));
    }
}
