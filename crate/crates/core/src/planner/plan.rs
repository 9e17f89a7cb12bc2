//! Cost-minimal specification search over a (predicted) scaling surface.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};
use crate::spec::{CostWeights, ResourceSpec};
use crate::surface::ScalingSurface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanningPolicy {
    /// Reach `target_speedup` times the current performance.
    ScaleUp,
    /// Keep current performance up to `performance_tolerance`.
    ScaleDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningRequest {
    pub policy: PlanningPolicy,
    pub current_spec: ResourceSpec,
    pub target_speedup: f64,
    pub performance_tolerance: f64,
    pub cost_weights: CostWeights,
}

impl PlanningRequest {
    pub fn scale_up(current_spec: ResourceSpec, target_speedup: f64, cost_weights: CostWeights) -> Self {
        PlanningRequest {
            policy: PlanningPolicy::ScaleUp,
            current_spec,
            target_speedup,
            performance_tolerance: 0.0,
            cost_weights,
        }
    }

    pub fn scale_down(
        current_spec: ResourceSpec,
        performance_tolerance: f64,
        cost_weights: CostWeights,
    ) -> Self {
        PlanningRequest {
            policy: PlanningPolicy::ScaleDown,
            current_spec,
            target_speedup: 1.0,
            performance_tolerance,
            cost_weights,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.policy {
            PlanningPolicy::ScaleUp if !(self.target_speedup >= 1.0 && self.target_speedup.is_finite()) => {
                Err(UrsaError::invalid(format!(
                    "scale-up target {} must be at least 1",
                    self.target_speedup
                )))
            }
            PlanningPolicy::ScaleDown if !(0.0..=1.0).contains(&self.performance_tolerance) => {
                Err(UrsaError::invalid(format!(
                    "performance tolerance {} outside [0, 1]",
                    self.performance_tolerance
                )))
            }
            _ => Ok(()),
        }
    }

    /// Whether `spec` meets the request on `surface`.
    pub fn is_satisfied(&self, surface: &ScalingSurface, spec: ResourceSpec) -> Result<bool> {
        let current = surface.speedup_or_err(self.current_spec)?;
        let s = surface.speedup_or_err(spec)?;
        Ok(match self.policy {
            PlanningPolicy::ScaleUp => s / current >= self.target_speedup,
            PlanningPolicy::ScaleDown => s >= (1.0 - self.performance_tolerance) * current,
        })
    }
}

/// Cheaper first; among equal cost, fewer cores, then less memory.
pub fn cheaper(a: ResourceSpec, b: ResourceSpec, w: &CostWeights) -> Ordering {
    a.cost(w)
        .partial_cmp(&b.cost(w))
        .unwrap_or(Ordering::Equal)
        .then(a.cores.cmp(&b.cores))
        .then(a.memory_gb.cmp(&b.memory_gb))
}

/// Exhaustive scan of the grid for the cheapest specification meeting the
/// request on `surface`.
pub fn plan_capacity(request: &PlanningRequest, surface: &ScalingSurface) -> Result<ResourceSpec> {
    request.validate()?;
    surface.speedup_or_err(request.current_spec)?;
    let mut best: Option<ResourceSpec> = None;
    for spec in surface.region().specs() {
        if !request.is_satisfied(surface, spec)? {
            continue;
        }
        best = match best {
            Some(b) if cheaper(b, spec, &request.cost_weights) != Ordering::Greater => Some(b),
            _ => Some(spec),
        };
    }
    best.ok_or_else(|| {
        UrsaError::Infeasible(format!(
            "no specification reaches {:.3}x of {}",
            request.target_speedup, request.current_spec
        ))
    })
}
