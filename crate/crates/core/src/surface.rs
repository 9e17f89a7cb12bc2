//! Scaling surfaces: speedup relative to a base specification at every grid
//! point of a configuration region.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};
use crate::spec::{ConfigRegion, ResourceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSurface {
    region: ConfigRegion,
    base_spec: ResourceSpec,
    /// Speedups in grid order (see [`ConfigRegion::spec_at`]).
    speedups: Vec<f64>,
}

impl ScalingSurface {
    pub fn new(region: ConfigRegion, base_spec: ResourceSpec, speedups: Vec<f64>) -> Result<Self> {
        if speedups.len() != region.len() {
            return Err(UrsaError::invalid(format!(
                "surface has {} values for a {}-point region",
                speedups.len(),
                region.len()
            )));
        }
        if region.index_of(base_spec).is_none() {
            return Err(UrsaError::invalid(format!(
                "base {base_spec} is not a grid point"
            )));
        }
        if let Some(bad) = speedups.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(UrsaError::invalid(format!("speedup {bad} is not positive")));
        }
        Ok(ScalingSurface {
            region,
            base_spec,
            speedups,
        })
    }

    /// Builds a surface from an absolute performance function, normalizing
    /// at `base_spec`.
    pub fn from_performance(
        region: &ConfigRegion,
        base_spec: ResourceSpec,
        perf: impl Fn(ResourceSpec) -> f64,
    ) -> Result<Self> {
        let base = perf(base_spec);
        let speedups = region.specs().map(|s| perf(s) / base).collect();
        ScalingSurface::new(region.clone(), base_spec, speedups)
    }

    pub fn region(&self) -> &ConfigRegion {
        &self.region
    }

    pub fn base_spec(&self) -> ResourceSpec {
        self.base_spec
    }

    pub fn values(&self) -> &[f64] {
        &self.speedups
    }

    pub fn speedup(&self, spec: ResourceSpec) -> Option<f64> {
        self.region.index_of(spec).map(|i| self.speedups[i])
    }

    pub fn speedup_or_err(&self, spec: ResourceSpec) -> Result<f64> {
        self.speedup(spec).ok_or(UrsaError::OutOfRegion(spec))
    }

    /// Re-anchors the surface at another grid point.
    pub fn rebase(&self, base_spec: ResourceSpec) -> Result<ScalingSurface> {
        let anchor = self.speedup_or_err(base_spec)?;
        let speedups = self.speedups.iter().map(|v| v / anchor).collect();
        ScalingSurface::new(self.region.clone(), base_spec, speedups)
    }

    /// Non-decreasing along both axes.
    pub fn is_monotone(&self) -> bool {
        let cols = self.region.memory_levels().len();
        let rows = self.region.core_levels().len();
        let at = |r: usize, c: usize| self.speedups[r * cols + c];
        for r in 0..rows {
            for c in 0..cols {
                if r + 1 < rows && at(r + 1, c) < at(r, c) {
                    return false;
                }
                if c + 1 < cols && at(r, c + 1) < at(r, c) {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_speedup(&self) -> f64 {
        self.speedups.iter().copied().fold(f64::MIN, f64::max)
    }

    pub(crate) fn same_grid(&self, other: &ScalingSurface) -> bool {
        self.region == other.region && self.base_spec == other.base_spec
    }

    /// Component-wise mean of `members`. All must share one region and base.
    pub fn mean_of(members: &[&ScalingSurface]) -> Result<ScalingSurface> {
        let first = members
            .first()
            .ok_or_else(|| UrsaError::invalid("mean of zero surfaces"))?;
        if members.iter().any(|s| !s.same_grid(first)) {
            return Err(UrsaError::invalid("surfaces do not share a region and base"));
        }
        let n = members.len() as f64;
        let mut acc = vec![0.0; first.speedups.len()];
        for s in members {
            for (a, v) in acc.iter_mut().zip(&s.speedups) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= n;
        }
        ScalingSurface::new(first.region.clone(), first.base_spec, acc)
    }
}

/// Mean relative deviation of `predicted` from `actual`:
/// `sum_i |predicted_i / actual_i - 1| / N_conf`.
pub fn surface_error(predicted: &ScalingSurface, actual: &ScalingSurface) -> Result<f64> {
    if !predicted.same_grid(actual) {
        return Err(UrsaError::invalid(
            "predicted and actual surfaces differ in region or base",
        ));
    }
    let mut total = 0.0;
    for (p, a) in predicted.speedups.iter().zip(&actual.speedups) {
        if *a == 0.0 {
            return Err(UrsaError::invalid("actual speedup is zero"));
        }
        total += (p / a - 1.0).abs();
    }
    Ok(total / actual.speedups.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(values: Vec<f64>) -> ScalingSurface {
        let region = ConfigRegion::new(vec![1], vec![2, 4]).unwrap();
        ScalingSurface::new(region, ResourceSpec::new(1, 2), values).unwrap()
    }

    #[test]
    fn error_of_identical_is_zero() {
        let s = two_point(vec![1.0, 1.7]);
        assert_eq!(surface_error(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn error_of_doubled_is_one() {
        let a = two_point(vec![1.0, 1.7]);
        let p = two_point(vec![2.0, 3.4]);
        assert_eq!(surface_error(&p, &a).unwrap(), 1.0);
    }

    #[test]
    fn error_direct_substitution() {
        let p = two_point(vec![1.0, 1.5]);
        let a = two_point(vec![1.0, 2.0]);
        assert_eq!(surface_error(&p, &a).unwrap(), 0.125);
        // Not symmetric: |2/1.5 - 1| / 2 = 1/6.
        assert!((surface_error(&a, &p).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn error_rejects_mismatched_regions() {
        let a = two_point(vec![1.0, 2.0]);
        let other = ScalingSurface::new(
            ConfigRegion::new(vec![1], vec![2, 8]).unwrap(),
            ResourceSpec::new(1, 2),
            vec![1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            surface_error(&a, &other),
            Err(UrsaError::InvalidArgument(_))
        ));
        let rebased = a.rebase(ResourceSpec::new(1, 4)).unwrap();
        assert!(surface_error(&a, &rebased).is_err());
    }

    #[test]
    fn zero_speedup_rejected_at_construction() {
        let region = ConfigRegion::new(vec![1], vec![2, 4]).unwrap();
        assert!(ScalingSurface::new(region, ResourceSpec::new(1, 2), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn rebase_anchors_exactly() {
        let s = two_point(vec![1.0, 1.7]);
        let r = s.rebase(ResourceSpec::new(1, 4)).unwrap();
        assert_eq!(r.speedup(ResourceSpec::new(1, 4)), Some(1.0));
    }

    #[test]
    fn monotonicity_check() {
        assert!(two_point(vec![1.0, 1.0]).is_monotone());
        assert!(!two_point(vec![1.0, 0.9]).is_monotone());
    }
}
