//! Lloyd's k-means with k-means++ seeding.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};
use crate::seed;
use crate::surface::ScalingSurface;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Objective after every assignment step; non-increasing.
    pub cost_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (i, d) = nearest(p, centroids);
            cost += d;
            i
        })
        .collect();
    (labels, cost)
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // Every point coincides with a centroid already.
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters `points` into `k` groups. Deterministic in `rng_seed`; stops at
/// an assignment fixpoint or after [`MAX_ITERATIONS`]. A cluster that loses
/// all its members keeps its previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng_seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(UrsaError::invalid("k must be at least 1"));
    }
    if k > points.len() {
        return Err(UrsaError::invalid(format!(
            "k = {k} exceeds the {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(UrsaError::invalid("points have different dimensions"));
    }
    let mut rng = seed::rng(rng_seed, &[0xC1u64]);
    let mut centroids = plus_plus(points, k, &mut rng);
    let (mut labels, cost) = assign(points, &centroids);
    let mut cost_history = vec![cost];

    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (sum, n)) in centroids.iter_mut().zip(sums.into_iter().zip(&counts)) {
            if *n > 0 {
                *c = sum.into_iter().map(|s| s / *n as f64).collect();
            }
        }
        let (next, cost) = assign(points, &centroids);
        cost_history.push(cost);
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeans {
        centroids,
        assignments: labels,
        cost_history,
    })
}

/// Scaling-surface clusters; each centroid is the mean of its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceClustering {
    pub k: usize,
    pub centroids: Vec<ScalingSurface>,
    /// workload id -> cluster id
    pub assignments: BTreeMap<u64, usize>,
}

impl SurfaceClustering {
    pub fn centroid(&self, cluster: usize) -> Option<&ScalingSurface> {
        self.centroids.get(cluster)
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = u64> + '_ {
        self.assignments
            .iter()
            .filter(move |(_, c)| **c == cluster)
            .map(|(id, _)| *id)
    }
}

pub fn cluster_surfaces(
    surfaces: &[(u64, ScalingSurface)],
    k: usize,
    rng_seed: u64,
) -> Result<SurfaceClustering> {
    let first = &surfaces
        .first()
        .ok_or_else(|| UrsaError::invalid("no surfaces to cluster"))?
        .1;
    if surfaces.iter().any(|(_, s)| !s.same_grid(first)) {
        return Err(UrsaError::invalid(
            "surfaces do not share one region and base specification",
        ));
    }
    let points: Vec<Vec<f64>> = surfaces.iter().map(|(_, s)| s.values().to_vec()).collect();
    let km = kmeans(&points, k, rng_seed)?;
    let centroids = km
        .centroids
        .into_iter()
        .map(|c| ScalingSurface::new(first.region().clone(), first.base_spec(), c))
        .collect::<Result<Vec<_>>>()?;
    let assignments = surfaces
        .iter()
        .zip(&km.assignments)
        .map(|((id, _), c)| (*id, *c))
        .collect();
    Ok(SurfaceClustering {
        k,
        centroids,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec<f64>> {
        v.iter().map(|(a, b)| vec![*a, *b]).collect()
    }

    #[test]
    fn k_equals_n_gives_zero_cost() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (5.0, 5.0), (9.0, 1.0)]);
        let km = kmeans(&p, 4, 3).unwrap();
        assert_eq!(*km.cost_history.last().unwrap(), 0.0);
        let mut labels = km.assignments.clone();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 4);
    }

    #[test]
    fn k_one_is_global_mean() {
        let p = pts(&[(0.0, 0.0), (2.0, 4.0), (4.0, 2.0)]);
        let km = kmeans(&p, 1, 0).unwrap();
        assert_eq!(km.centroids[0], vec![2.0, 2.0]);
    }

    #[test]
    fn rejects_bad_k() {
        let p = pts(&[(0.0, 0.0)]);
        assert!(kmeans(&p, 2, 0).is_err());
        assert!(kmeans(&p, 0, 0).is_err());
    }

    #[test]
    fn duplicate_points_leave_spare_clusters_empty() {
        let p = pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let km = kmeans(&p, 2, 0).unwrap();
        assert_eq!(*km.cost_history.last().unwrap(), 0.0);
        assert!(km.assignments.iter().all(|a| *a < 2));
    }

    #[test]
    fn cost_is_non_increasing_and_final_is_fixpoint() {
        let mut rng = seed::rng(9, &[]);
        let p: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let km = kmeans(&p, 7, 11).unwrap();
        for w in km.cost_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let (labels, _) = assign(&p, &km.centroids);
        assert_eq!(labels, km.assignments);
    }
}
