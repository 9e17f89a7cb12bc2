//! Co-located execution model and cluster-level metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};
use crate::profile::{NodeConstants, SharedResource};
use crate::scheduler::{Deployment, NodeInventory, Placement};
use crate::spec::ResourceSpec;

pub const SLOWDOWN_REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlowdownModel {
    pub gamma: f64,
    /// Pressure tolerated before any slowdown; `None` means a quarter of
    /// the resource's level count.
    pub theta: Option<f64>,
}

impl Default for SlowdownModel {
    fn default() -> Self {
        SlowdownModel {
            gamma: 0.5,
            theta: None,
        }
    }
}

impl SlowdownModel {
    /// Relative speed of a workload with sensitivity `s` facing co-runner
    /// pressure `p` on a resource with `n` levels.
    pub fn factor(&self, p: f64, s: f64, n: u32) -> f64 {
        let n = n as f64;
        let theta = self.theta.unwrap_or(n / 4.0);
        1.0 / (1.0 + self.gamma * s * (p - theta).max(0.0) / (n * n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: u32,
    pub capacity: ResourceSpec,
    pub constants: NodeConstants,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            nodes: 7,
            capacity: ResourceSpec::new(96, 256),
            constants: NodeConstants::default(),
        }
    }
}

impl ClusterSpec {
    pub fn inventory(&self) -> NodeInventory {
        NodeInventory::uniform(self.nodes, self.capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowdownEntry {
    pub workload_id: u64,
    pub node_id: u32,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowdownReport {
    pub schema_version: u32,
    pub workloads: Vec<SlowdownEntry>,
    pub p_sys: f64,
    pub unfairness: f64,
}

impl SlowdownReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.workloads {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sum of slowdowns and `(max - min) / max`.
pub fn compute_metrics(slowdowns: &[f64]) -> Result<(f64, f64)> {
    if slowdowns.is_empty() {
        return Err(UrsaError::invalid("no slowdowns"));
    }
    if let Some(x) = slowdowns.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(UrsaError::invalid(format!("slowdown {x} is not positive")));
    }
    let p_sys = slowdowns.iter().sum();
    let max = slowdowns.iter().copied().fold(f64::MIN, f64::max);
    let min = slowdowns.iter().copied().fold(f64::MAX, f64::min);
    Ok((p_sys, (max - min) / max))
}

/// Slowdown of every placed workload given the ground-truth profiles in
/// `workloads`. Each workload contends with the summed pressure of the
/// others on its node.
pub fn simulate_colocated(
    placements: &[Placement],
    workloads: &[Deployment],
    cluster: &ClusterSpec,
    model: &SlowdownModel,
) -> Result<SlowdownReport> {
    let by_id: BTreeMap<u64, &Deployment> = workloads.iter().map(|w| (w.workload_id, w)).collect();
    if by_id.len() != workloads.len() {
        return Err(UrsaError::invalid("duplicate workload ids"));
    }
    let mut seen = BTreeSet::new();
    let mut per_node: BTreeMap<u32, Vec<&Deployment>> = BTreeMap::new();
    for p in placements {
        if p.node_id >= cluster.nodes {
            return Err(UrsaError::invalid(format!("unknown node {}", p.node_id)));
        }
        if !seen.insert(p.workload_id) {
            return Err(UrsaError::invalid(format!(
                "workload {} placed twice",
                p.workload_id
            )));
        }
        let w = by_id
            .get(&p.workload_id)
            .ok_or_else(|| UrsaError::invalid(format!("unknown workload {}", p.workload_id)))?;
        per_node.entry(p.node_id).or_default().push(w);
    }
    for (node, ws) in &per_node {
        let cores: u32 = ws.iter().map(|w| w.spec.cores).sum();
        let mem: u32 = ws.iter().map(|w| w.spec.memory_gb).sum();
        if cores > cluster.capacity.cores || mem > cluster.capacity.memory_gb {
            return Err(UrsaError::invalid(format!("node {node} is over capacity")));
        }
    }

    let levels = &cluster.constants.levels;
    let mut sd_of: BTreeMap<u64, f64> = BTreeMap::new();
    for ws in per_node.values() {
        for w in ws {
            let mut sd = 1.0;
            for r in SharedResource::ALL {
                let others: u32 = ws
                    .iter()
                    .filter(|o| o.workload_id != w.workload_id)
                    .map(|o| o.profile[r].pressure)
                    .sum();
                sd *= model.factor(others as f64, w.profile[r].sensitivity as f64, levels[r]);
            }
            sd_of.insert(w.workload_id, sd);
        }
    }
    let entries: Vec<SlowdownEntry> = placements
        .iter()
        .map(|p| SlowdownEntry {
            workload_id: p.workload_id,
            node_id: p.node_id,
            sd: sd_of[&p.workload_id],
        })
        .collect();
    let sds: Vec<f64> = entries.iter().map(|e| e.sd).collect();
    let (p_sys, unfairness) = compute_metrics(&sds)?;
    Ok(SlowdownReport {
        schema_version: SLOWDOWN_REPORT_SCHEMA,
        workloads: entries,
        p_sys,
        unfairness,
    })
}
