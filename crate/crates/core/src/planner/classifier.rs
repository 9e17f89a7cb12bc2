//! Classifiers from counter readings to a scaling-surface cluster.
//!
//! The default is a one-hidden-layer perceptron with logistic units and a
//! softmax output trained by per-sample gradient descent. A nearest-centroid
//! rule over the same standardized features serves as an auditable second
//! implementation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lasso::FeatureSelection;
use crate::error::{Result, UrsaError};
use crate::seed;
use crate::spec::ResourceSpec;
use crate::synth::{SystemIndexVector, INDEX_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Mlp,
    NearestCentroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 32,
            learning_rate: 0.01,
            epochs: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub mlp: MlpParams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Mlp,
            mlp: MlpParams::default(),
        }
    }
}

/// Per-feature mean and standard deviation of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
            if s.is_nan() || *s <= 0.0 {
                *s = 1.0;
            }
        }
        Normalization { mean, std }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// hidden x inputs, row-major
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// outputs x hidden, row-major
    w2: Vec<f64>,
    b2: Vec<f64>,
    inputs: usize,
    hidden: usize,
    outputs: usize,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mlp {
    fn new(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut init = |fan_in: usize, fan_out: usize, len: usize| -> Vec<f64> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..len).map(|_| rng.random_range(-a..a)).collect()
        };
        Mlp {
            w1: init(inputs, hidden, hidden * inputs),
            b1: vec![0.0; hidden],
            w2: init(hidden, outputs, outputs * hidden),
            b2: vec![0.0; outputs],
            inputs,
            hidden,
            outputs,
        }
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                logistic(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h])
            })
            .collect()
    }

    fn probabilities(&self, hidden: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.outputs)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                row.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>() + self.b2[o]
            })
            .collect();
        let max = logits.iter().copied().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    fn step(&mut self, x: &[f64], label: usize, lr: f64) {
        let h = self.hidden_layer(x);
        let mut dz = self.probabilities(&h);
        dz[label] -= 1.0;
        let mut dh = vec![0.0; self.hidden];
        for (o, &d) in dz.iter().enumerate() {
            let row = &mut self.w2[o * self.hidden..(o + 1) * self.hidden];
            for j in 0..self.hidden {
                dh[j] += row[j] * d;
                row[j] -= lr * d * h[j];
            }
            self.b2[o] -= lr * d;
        }
        for j in 0..self.hidden {
            let g = dh[j] * h[j] * (1.0 - h[j]);
            let row = &mut self.w1[j * self.inputs..(j + 1) * self.inputs];
            for (w, v) in row.iter_mut().zip(x) {
                *w -= lr * g * v;
            }
            self.b1[j] -= lr * g;
        }
    }

    fn train(rows: &[Vec<f64>], labels: &[usize], outputs: usize, params: &MlpParams) -> Self {
        let mut rng = seed::rng(params.seed, &[0x3150]);
        let mut net = Mlp::new(rows[0].len(), params.hidden.max(1), outputs, &mut rng);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                net.step(&rows[i], labels[i], params.learning_rate);
            }
        }
        net
    }

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.probabilities(&self.hidden_layer(x)))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    /// (cluster id, mean standardized feature vector) for clusters with
    /// training samples.
    centroids: Vec<(usize, Vec<f64>)>,
}

impl NearestCentroid {
    fn train(rows: &[Vec<f64>], labels: &[usize], k: usize) -> Self {
        let d = rows[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .enumerate()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(c, (s, n))| (c, s.into_iter().map(|v| v / n as f64).collect()))
            .collect();
        NearestCentroid { centroids }
    }

    fn predict(&self, x: &[f64]) -> usize {
        let mut best = (self.centroids[0].0, f64::INFINITY);
        for (c, m) in &self.centroids {
            let d: f64 = m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (*c, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierModel {
    /// Every training sample carried the same cluster id.
    Constant(usize),
    Mlp(Mlp),
    NearestCentroid(NearestCentroid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceClassifier {
    pub base_spec: ResourceSpec,
    pub k: usize,
    /// Index positions fed to the model.
    pub features: Vec<usize>,
    pub normalization: Normalization,
    pub model: ClassifierModel,
}

fn project(x: &SystemIndexVector, features: &[usize]) -> Vec<f64> {
    let a = x.to_array();
    features.iter().map(|&i| a[i]).collect()
}

pub fn train_classifier(
    training: &[(SystemIndexVector, usize)],
    k: usize,
    base_spec: ResourceSpec,
    selection: &FeatureSelection,
    config: &ClassifierConfig,
) -> Result<SurfaceClassifier> {
    if training.is_empty() {
        return Err(UrsaError::invalid("empty training set"));
    }
    if let Some((_, c)) = training.iter().find(|(_, c)| *c >= k) {
        return Err(UrsaError::invalid(format!("cluster id {c} is not below k = {k}")));
    }
    for (x, _) in training {
        x.ensure_finite()?;
    }
    let features = if selection.selected.is_empty() {
        (0..INDEX_COUNT).collect()
    } else {
        selection.selected.clone()
    };
    let raw: Vec<Vec<f64>> = training.iter().map(|(x, _)| project(x, &features)).collect();
    let normalization = Normalization::fit(&raw);
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| normalization.apply(r)).collect();
    let labels: Vec<usize> = training.iter().map(|(_, c)| *c).collect();

    let model = if labels.iter().all(|l| *l == labels[0]) {
        ClassifierModel::Constant(labels[0])
    } else {
        match config.kind {
            ClassifierKind::Mlp => ClassifierModel::Mlp(Mlp::train(&rows, &labels, k, &config.mlp)),
            ClassifierKind::NearestCentroid => {
                ClassifierModel::NearestCentroid(NearestCentroid::train(&rows, &labels, k))
            }
        }
    };
    Ok(SurfaceClassifier {
        base_spec,
        k,
        features,
        normalization,
        model,
    })
}

impl SurfaceClassifier {
    pub fn predict(&self, x: &SystemIndexVector) -> Result<usize> {
        x.ensure_finite()?;
        let z = self.normalization.apply(&project(x, &self.features));
        Ok(match &self.model {
            ClassifierModel::Constant(c) => *c,
            ClassifierModel::Mlp(m) => m.predict(&z),
            ClassifierModel::NearestCentroid(n) => n.predict(&z),
        })
    }

    pub fn accuracy(&self, samples: &[(SystemIndexVector, usize)]) -> Result<f64> {
        let mut hits = 0;
        for (x, c) in samples {
            if self.predict(x)? == *c {
                hits += 1;
            }
        }
        Ok(hits as f64 / samples.len().max(1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per: usize, k: usize, spread: f64, seed_: u64) -> Vec<(SystemIndexVector, usize)> {
        let mut rng = seed::rng(seed_, &[]);
        let centers: Vec<[f64; INDEX_COUNT]> = (0..k)
            .map(|_| {
                let mut c = [0.0f64; INDEX_COUNT];
                for v in &mut c {
                    *v = rng.random_range(10.0..100.0);
                }
                c
            })
            .collect();
        let mut out = Vec::new();
        for (ci, c) in centers.iter().enumerate() {
            for _ in 0..n_per {
                let mut x = *c;
                for v in &mut x {
                    *v *= 1.0 + spread * rng.random_range(-1.0..1.0);
                }
                x[2] = x[2].min(x[10]);
                out.push((SystemIndexVector::from_array(x), ci));
            }
        }
        out
    }

    #[test]
    fn single_cluster_is_constant() {
        let data: Vec<_> = blobs(5, 3, 0.05, 1).into_iter().map(|(x, _)| (x, 2)).collect();
        let c = train_classifier(
            &data,
            4,
            ResourceSpec::new(6, 8),
            &FeatureSelection::all(),
            &ClassifierConfig::default(),
        )
        .unwrap();
        let probe = SystemIndexVector::from_array([1.0; INDEX_COUNT]);
        assert_eq!(c.predict(&probe).unwrap(), 2);
    }

    #[test]
    fn separable_blobs_fit_exactly() {
        let data = blobs(3, 8, 0.02, 2);
        for kind in [ClassifierKind::Mlp, ClassifierKind::NearestCentroid] {
            let cfg = ClassifierConfig {
                kind,
                ..Default::default()
            };
            let c =
                train_classifier(&data, 8, ResourceSpec::new(6, 8), &FeatureSelection::all(), &cfg).unwrap();
            assert_eq!(c.accuracy(&data).unwrap(), 1.0, "{kind:?}");
        }
    }

    #[test]
    fn non_finite_prediction_input_rejected() {
        let data = blobs(3, 2, 0.02, 3);
        let c = train_classifier(
            &data,
            2,
            ResourceSpec::new(6, 8),
            &FeatureSelection::all(),
            &ClassifierConfig::default(),
        )
        .unwrap();
        let mut x = data[0].0;
        x.cpu_usage = f64::NAN;
        assert!(matches!(c.predict(&x), Err(UrsaError::InvalidArgument(_))));
    }

    #[test]
    fn rejects_empty_and_out_of_range_labels() {
        let cfg = ClassifierConfig::default();
        let sel = FeatureSelection::all();
        assert!(train_classifier(&[], 2, ResourceSpec::new(6, 8), &sel, &cfg).is_err());
        let data = blobs(2, 3, 0.02, 4);
        assert!(train_classifier(&data, 2, ResourceSpec::new(6, 8), &sel, &cfg).is_err());
    }

    #[test]
    fn uses_selected_features_only() {
        let data = blobs(3, 4, 0.02, 5);
        let sel = FeatureSelection {
            lambda: 0.1,
            selected: vec![0, 7],
            weights: vec![0.0; INDEX_COUNT],
        };
        let c = train_classifier(
            &data,
            4,
            ResourceSpec::new(6, 8),
            &sel,
            &ClassifierConfig::default(),
        )
        .unwrap();
        assert_eq!(c.features, vec![0, 7]);
        assert_eq!(c.normalization.mean.len(), 2);
    }
}
