//! Capacity planning and contention-aware placement for database
//! workloads.
//!
//! The pipeline predicts a workload's scaling surface from counter readings
//! taken at a single specification, recommends the cheapest specification
//! meeting a performance goal, quantifies the workload's pressure on and
//! sensitivity to shared resources, and places it on the node with the
//! lowest contention score. A deterministic cluster simulator provides the
//! ground truth all of these are evaluated against.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod planner;
pub mod profile;
pub mod scheduler;
pub mod seed;
pub mod simulator;
pub mod spec;
pub mod surface;
pub mod synth;

pub use error::{Result, UrsaError};
pub use profile::{InterferenceProfile, NodeConstants, PerResource, ResourceLevels, SharedResource};
pub use spec::{ConfigRegion, CostWeights, ResourceSpec};
pub use surface::{surface_error, ScalingSurface};
pub use synth::{SystemIndexVector, Workload, WorkloadArchetype, WorkloadSet};
