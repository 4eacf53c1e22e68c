use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted positive interarrival times together with their sample mean.
///
/// The values are the order statistics of the sample; the empirical cdf is
/// implied by them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitSample {
    values: Vec<f64>,
    mean: f64,
}

impl PitSample {
    /// Sorts and validates `values`. Every value must be finite and > 0.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "interarrival times must be finite and positive, got {bad}"
            )));
        }
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self { values, mean })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample mean, the maximum likelihood estimate of the exponential mean.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Second raw sample moment, `sum(x^2) / n`.
    pub fn second_moment(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    /// Empirical cdf, right-continuous: the share of values `<= t`.
    pub fn ecdf(&self, t: f64) -> f64 {
        self.values.partition_point(|&x| x <= t) as f64 / self.len() as f64
    }

    /// `E_n[(X - t)_+] = int_t^inf (1 - F_n)`, given suffix sums of the values.
    pub(crate) fn stop_loss_with(&self, suffix: &[f64], t: f64) -> f64 {
        let k = self.values.partition_point(|&x| x <= t);
        let count = (self.len() - k) as f64;
        (suffix[k] - count * t) / self.len() as f64
    }

    /// Suffix sums `suffix[k] = sum_{i >= k} x_(i)`, length `n + 1`.
    pub(crate) fn suffix_sums(&self) -> Vec<f64> {
        let mut suffix = vec![0.0; self.len() + 1];
        for i in (0..self.len()).rev() {
            suffix[i] = suffix[i + 1] + self.values[i];
        }
        suffix
    }

    /// Same sample multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|x| x * c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_caches_mean() {
        let s = PitSample::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.mean(), 2.0);
        assert_eq!(s.second_moment(), 14.0 / 3.0);
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert!(matches!(PitSample::new(vec![]), Err(Error::EmptySample)));
        assert!(PitSample::new(vec![1.0, 0.0]).is_err());
        assert!(PitSample::new(vec![1.0, -2.0]).is_err());
        assert!(PitSample::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn ecdf_handles_ties() {
        let s = PitSample::new(vec![1.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.ecdf(0.5), 0.0);
        assert_eq!(s.ecdf(1.0), 0.5);
        assert_eq!(s.ecdf(3.0), 0.75);
        assert_eq!(s.ecdf(4.0), 1.0);
    }

    #[test]
    fn stop_loss_matches_direct_sum() {
        let s = PitSample::new(vec![0.5, 1.0, 2.5, 4.0]).unwrap();
        let suffix = s.suffix_sums();
        for &t in &[0.0, 0.7, 1.0, 3.0, 5.0] {
            let direct: f64 =
                s.values().iter().map(|x| (x - t).max(0.0)).sum::<f64>() / 4.0;
            assert!((s.stop_loss_with(&suffix, t) - direct).abs() < 1e-14);
        }
    }
}
