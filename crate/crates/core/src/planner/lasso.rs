//! Lasso feature selection by cyclic coordinate descent on standardized
//! data.
//!
//! Objective: `(1/2n) ||y - X b||^2 + lambda ||b||_1` where every column of
//! `X` and the response `y` are centered and scaled to unit (population)
//! variance. With this scaling the smallest lambda giving an empty support
//! is the largest absolute feature/response correlation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};
use crate::seed;
use crate::synth::{SystemIndexVector, INDEX_COUNT};

/// Coefficients with magnitude at or below this are treated as zero.
pub const SUPPORT_EPS: f64 = 1e-9;
const TOLERANCE: f64 = 1e-6;
const MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub lambda: f64,
    /// Positions (into the 15 indexes) with nonzero weight, ascending.
    pub selected: Vec<usize>,
    /// Standardized coefficients, one per index.
    pub weights: Vec<f64>,
}

impl FeatureSelection {
    /// Keeps every index; useful when no selection step is wanted.
    pub fn all() -> Self {
        FeatureSelection {
            lambda: 0.0,
            selected: (0..INDEX_COUNT).collect(),
            weights: vec![1.0; INDEX_COUNT],
        }
    }
}

pub(crate) struct Standardized {
    /// Column-major, `p` columns of length `n`.
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// False for zero-variance columns, which are left out of the fit.
    pub active: Vec<bool>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn validate(samples: &[(SystemIndexVector, f64)]) -> Result<()> {
    if samples.len() < 2 {
        return Err(UrsaError::invalid(format!(
            "lasso needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    for (x, y) in samples {
        x.ensure_finite()?;
        if !y.is_finite() || *y <= 0.0 {
            return Err(UrsaError::invalid(format!(
                "performance value {y} must be positive"
            )));
        }
    }
    Ok(())
}

pub(crate) fn standardize(samples: &[(SystemIndexVector, f64)]) -> Standardized {
    let rows: Vec<[f64; INDEX_COUNT]> = samples.iter().map(|(x, _)| x.to_array()).collect();
    let mut cols = Vec::with_capacity(INDEX_COUNT);
    let mut active = Vec::with_capacity(INDEX_COUNT);
    for j in 0..INDEX_COUNT {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (m, s) = mean_std(&col);
        if s > 0.0 && s.is_finite() {
            cols.push(col.iter().map(|v| (v - m) / s).collect());
            active.push(true);
        } else {
            cols.push(vec![0.0; col.len()]);
            active.push(false);
        }
    }
    let ys: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let (ym, ysd) = mean_std(&ys);
    let y = if ysd > 0.0 {
        ys.iter().map(|v| (v - ym) / ysd).collect()
    } else {
        vec![0.0; ys.len()]
    };
    Standardized { cols, y, active }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Coordinate descent on pre-standardized data. Columns have unit mean
/// square, so each coordinate update is a plain soft threshold.
pub(crate) fn fit(data: &Standardized, lambda: f64) -> Vec<f64> {
    let n = data.y.len() as f64;
    let mut beta = vec![0.0; INDEX_COUNT];
    let mut resid = data.y.clone();
    for _ in 0..MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        let mut max_beta: f64 = 0.0;
        for (j, b) in beta.iter_mut().enumerate() {
            if !data.active[j] {
                continue;
            }
            let col = &data.cols[j];
            let rho = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n + *b;
            let new = soft_threshold(rho, lambda);
            let delta = new - *b;
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                *b = new;
            }
            max_delta = max_delta.max(delta.abs());
            max_beta = max_beta.max(new.abs());
        }
        if max_delta <= TOLERANCE * max_beta.max(1.0) {
            break;
        }
    }
    beta
}

fn to_selection(lambda: f64, weights: Vec<f64>) -> FeatureSelection {
    let selected = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() > SUPPORT_EPS)
        .map(|(i, _)| i)
        .collect();
    FeatureSelection {
        lambda,
        selected,
        weights,
    }
}

pub fn select_features(samples: &[(SystemIndexVector, f64)], lambda: f64) -> Result<FeatureSelection> {
    validate(samples)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(UrsaError::invalid(format!(
            "lambda {lambda} must be non-negative"
        )));
    }
    let data = standardize(samples);
    Ok(to_selection(lambda, fit(&data, lambda)))
}

/// Smallest lambda for which every coefficient is zero.
pub fn lambda_max(samples: &[(SystemIndexVector, f64)]) -> Result<f64> {
    validate(samples)?;
    let data = standardize(samples);
    let n = data.y.len() as f64;
    Ok(data
        .cols
        .iter()
        .map(|c| (c.iter().zip(&data.y).map(|(x, y)| x * y).sum::<f64>() / n).abs())
        .fold(0.0, f64::max))
}

/// `count` log-spaced values from 1e-4 to 1e1.
pub fn default_lambda_grid(count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / (count - 1) as f64))
        .collect()
}

/// Picks lambda from `grid` by k-fold cross-validated squared error of the
/// standardized response. `grid` must be ascending; ties go to the larger
/// lambda.
pub fn cross_validate_lambda(
    samples: &[(SystemIndexVector, f64)],
    grid: &[f64],
    folds: usize,
    rng_seed: u64,
) -> Result<f64> {
    validate(samples)?;
    if grid.is_empty() {
        return Err(UrsaError::invalid("empty lambda grid"));
    }
    let folds = folds.clamp(2, samples.len());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut seed::rng(rng_seed, &[0x1A550]));

    let mut errors = vec![0.0; grid.len()];
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..order.len()).partition(|pos| pos % folds == f);
        let test: Vec<usize> = test.into_iter().map(|p| order[p]).collect();
        let train: Vec<usize> = train.into_iter().map(|p| order[p]).collect();
        if test.is_empty() || train.len() < 2 {
            continue;
        }
        let train_samples: Vec<_> = train.iter().map(|&i| samples[i]).collect();
        // Standardize using the training fold only.
        let xs: Vec<[f64; INDEX_COUNT]> = train_samples.iter().map(|(x, _)| x.to_array()).collect();
        let stats: Vec<(f64, f64)> = (0..INDEX_COUNT)
            .map(|j| mean_std(&xs.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let (ym, ysd) = mean_std(&train_samples.iter().map(|(_, y)| *y).collect::<Vec<_>>());
        let data = standardize(&train_samples);
        for (gi, &lambda) in grid.iter().enumerate() {
            let beta = fit(&data, lambda);
            for &t in &test {
                let x = samples[t].0.to_array();
                let mut pred = 0.0;
                for j in 0..INDEX_COUNT {
                    if data.active[j] {
                        pred += beta[j] * (x[j] - stats[j].0) / stats[j].1;
                    }
                }
                let y = if ysd > 0.0 { (samples[t].1 - ym) / ysd } else { 0.0 };
                errors[gi] += (y - pred).powi(2);
            }
        }
    }
    let mut best = 0;
    // Grid is ascending, so later near-ties favor the larger lambda.
    for i in 1..grid.len() {
        if errors[i] <= errors[best] * (1.0 + 1e-12) {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Lasso with lambda chosen by 5-fold cross-validation over the default
/// log grid.
pub fn select_features_cv(samples: &[(SystemIndexVector, f64)], rng_seed: u64) -> Result<FeatureSelection> {
    let lambda = cross_validate_lambda(samples, &default_lambda_grid(16), 5, rng_seed)?;
    select_features(samples, lambda)
}
