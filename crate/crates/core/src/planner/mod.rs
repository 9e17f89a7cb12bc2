//! Scaling-surface prediction and capacity planning.
//!
//! Training clusters the ground-truth surfaces of the training workloads,
//! selects counter features with a cross-validated lasso against
//! throughput, and fits a classifier from base-configuration counter
//! readings to cluster ids. A new workload's surface is the centroid of the
//! cluster its readings are classified into.

mod classifier;
mod kmeans;
mod lasso;
mod plan;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use classifier::{
    train_classifier, ClassifierConfig, ClassifierKind, ClassifierModel, MlpParams, Normalization,
    SurfaceClassifier,
};
pub use kmeans::{cluster_surfaces, kmeans, KMeans, SurfaceClustering, MAX_ITERATIONS};
pub use lasso::{
    cross_validate_lambda, default_lambda_grid, lambda_max, select_features, select_features_cv,
    FeatureSelection, SUPPORT_EPS,
};
pub use plan::{cheaper, plan_capacity, PlanningPolicy, PlanningRequest};

use crate::error::{Result, UrsaError};
use crate::seed;
use crate::spec::ResourceSpec;
use crate::surface::ScalingSurface;
use crate::synth::{SystemIndexVector, Workload};

pub const MODEL_BUNDLE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub k: usize,
    /// Relative noise of the counter readings used for training.
    pub noise_sigma: f64,
    pub lambda_grid_size: usize,
    pub cv_folds: usize,
    /// Skip the lasso and feed every counter to the classifier.
    pub use_all_features: bool,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            k: 20,
            noise_sigma: 0.05,
            lambda_grid_size: 16,
            cv_folds: 5,
            use_all_features: false,
            classifier: ClassifierConfig::default(),
            seed: 0,
        }
    }
}

/// A trained predictor for one base specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerModel {
    pub base_spec: ResourceSpec,
    pub selection: FeatureSelection,
    pub clustering: SurfaceClustering,
    pub classifier: SurfaceClassifier,
}

impl PlannerModel {
    fn check(&self) -> Result<()> {
        if self.classifier.k != self.clustering.k || self.clustering.centroids.len() != self.clustering.k {
            return Err(UrsaError::invalid(format!(
                "classifier has k = {} but clustering has k = {} with {} centroids",
                self.classifier.k,
                self.clustering.k,
                self.clustering.centroids.len()
            )));
        }
        if self.classifier.base_spec != self.base_spec {
            return Err(UrsaError::invalid(
                "classifier was trained at another base specification",
            ));
        }
        Ok(())
    }

    pub fn predict_cluster(&self, indexes: &SystemIndexVector) -> Result<usize> {
        self.check()?;
        self.classifier.predict(indexes)
    }

    /// Centroid of the predicted cluster, relative to the base spec.
    pub fn predict_surface(&self, indexes: &SystemIndexVector) -> Result<ScalingSurface> {
        let c = self.predict_cluster(indexes)?;
        Ok(self.clustering.centroids[c].clone())
    }

    /// Cheapest specification meeting `request` on the predicted surface.
    pub fn recommend(&self, indexes: &SystemIndexVector, request: &PlanningRequest) -> Result<ResourceSpec> {
        plan_capacity(request, &self.predict_surface(indexes)?)
    }
}

/// (readings, throughput) pairs at every grid point of every workload.
pub fn lasso_samples(workloads: &[&Workload], noise_sigma: f64) -> Result<Vec<(SystemIndexVector, f64)>> {
    let mut out = Vec::new();
    for w in workloads {
        for spec in w.region().specs() {
            out.push((w.observe_indexes(spec, noise_sigma)?, w.tps(spec)));
        }
    }
    Ok(out)
}

/// Feature selection shared by every base specification and k.
pub fn select_training_features(
    workloads: &[&Workload],
    config: &TrainingConfig,
) -> Result<FeatureSelection> {
    if config.use_all_features {
        return Ok(FeatureSelection::all());
    }
    let samples = lasso_samples(workloads, config.noise_sigma)?;
    let lambda = cross_validate_lambda(
        &samples,
        &default_lambda_grid(config.lambda_grid_size),
        config.cv_folds,
        seed::derive(config.seed, &[0x1A]),
    )?;
    select_features(&samples, lambda)
}

pub fn train_planner(
    workloads: &[&Workload],
    base_spec: ResourceSpec,
    config: &TrainingConfig,
) -> Result<PlannerModel> {
    let selection = select_training_features(workloads, config)?;
    train_planner_with(workloads, base_spec, &selection, config)
}

/// Training with a precomputed feature selection.
pub fn train_planner_with(
    workloads: &[&Workload],
    base_spec: ResourceSpec,
    selection: &FeatureSelection,
    config: &TrainingConfig,
) -> Result<PlannerModel> {
    if workloads.is_empty() {
        return Err(UrsaError::invalid("no training workloads"));
    }
    let surfaces = workloads
        .iter()
        .map(|w| Ok((w.workload_id, w.surface_at(base_spec)?)))
        .collect::<Result<Vec<_>>>()?;
    let clustering = cluster_surfaces(&surfaces, config.k, seed::derive(config.seed, &[0xC1]))?;
    let training = workloads
        .iter()
        .map(|w| {
            Ok((
                w.observe_indexes(base_spec, config.noise_sigma)?,
                clustering.assignments[&w.workload_id],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut classifier_config = config.classifier.clone();
    classifier_config.mlp.seed = seed::derive(config.seed, &[0x3F, classifier_config.mlp.seed]);
    let classifier = train_classifier(&training, config.k, base_spec, selection, &classifier_config)?;
    Ok(PlannerModel {
        base_spec,
        selection: selection.clone(),
        clustering,
        classifier,
    })
}

/// Predictors for one or more base specifications, stored as one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u32,
    pub config: TrainingConfig,
    pub training_workloads: Vec<u64>,
    pub models: Vec<PlannerModel>,
}

impl ModelBundle {
    pub fn train(workloads: &[&Workload], bases: &[ResourceSpec], config: &TrainingConfig) -> Result<Self> {
        if bases.is_empty() {
            return Err(UrsaError::invalid("no base specifications"));
        }
        let selection = select_training_features(workloads, config)?;
        let models = bases
            .iter()
            .map(|b| train_planner_with(workloads, *b, &selection, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelBundle {
            schema_version: MODEL_BUNDLE_SCHEMA,
            config: config.clone(),
            training_workloads: workloads.iter().map(|w| w.workload_id).collect(),
            models,
        })
    }

    pub fn model_for(&self, base_spec: ResourceSpec) -> Result<&PlannerModel> {
        self.models
            .iter()
            .find(|m| m.base_spec == base_spec)
            .ok_or_else(|| UrsaError::invalid(format!("no model trained at base {base_spec}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bundle: ModelBundle = serde_json::from_str(&fs::read_to_string(path)?)?;
        if bundle.schema_version != MODEL_BUNDLE_SCHEMA {
            return Err(UrsaError::invalid(format!(
                "unsupported model bundle schema {}",
                bundle.schema_version
            )));
        }
        for m in &bundle.models {
            m.check()?;
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }
}
