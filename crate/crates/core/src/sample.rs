//! The ordered sample every test operates on.

use serde::Serialize;

use crate::{Error, Result};

/// A validated sample of finite observations, sorted descending:
/// `x_(1) >= x_(2) >= ... >= x_(n)`.
///
/// Exponential-domain consumers additionally require nonnegative values and
/// Pareto-domain consumers values above a positive threshold; those checks
/// live at the call sites that need them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderedSample {
    values: Vec<f64>,
}

impl OrderedSample {
    /// Builds a sample from unordered observations, sorting them descending.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientSample("sample is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample contains {bad}")));
        }
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(Self { values })
    }

    /// Wraps values that are already sorted descending; order is verified.
    pub fn from_sorted_desc(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientSample("sample is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample contains {bad}")));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("values are not sorted descending".into()));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// The full sample, largest value first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `x_(rank)` with 1-based rank, so `order_stat(1)` is the maximum.
    pub fn order_stat(&self, rank: usize) -> f64 {
        self.values[rank - 1]
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Sample standard deviation (n − 1 denominator); 0 for n = 1.
    pub fn sd(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    /// The top `k` values as a new sample, shifted down by the (k+1)-th order
    /// statistic when one exists.
    ///
    /// Conditional on `x_(k+1)`, the excesses of the top `k` values of an
    /// Exponential sample are again an Exponential sample of size `k`
    /// (memorylessness), which makes the shifted subsample the correct input
    /// for null tables of size `k`. When `k == n` the sample is returned
    /// unshifted.
    pub fn top_excess(&self, k: usize) -> Result<OrderedSample> {
        let n = self.values.len();
        if k == 0 || k > n {
            return Err(Error::InsufficientSample(format!(
                "cannot take top {k} of {n} values"
            )));
        }
        if k == n {
            return Ok(self.clone());
        }
        let threshold = self.values[k];
        let shifted = self.values[..k].iter().map(|v| v - threshold).collect();
        OrderedSample::from_sorted_desc(shifted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_sorts_descending() {
        let s = OrderedSample::new(vec![1.0, 4.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.values(), &[4.0, 2.0, 1.0, 1.0]);
        assert_eq!(s.order_stat(1), 4.0);
        assert_eq!(s.order_stat(4), 1.0);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(OrderedSample::new(vec![]).is_err());
        assert!(OrderedSample::new(vec![1.0, f64::NAN]).is_err());
        assert!(OrderedSample::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn from_sorted_desc_verifies_order() {
        assert!(OrderedSample::from_sorted_desc(vec![3.0, 2.0, 2.0]).is_ok());
        assert!(OrderedSample::from_sorted_desc(vec![2.0, 3.0]).is_err());
    }

    #[test]
    fn top_excess_shifts_by_next_order_stat() {
        let s = OrderedSample::new(vec![5.0, 3.0, 2.0, 1.0]).unwrap();
        let top = s.top_excess(2).unwrap();
        assert_eq!(top.values(), &[3.0, 1.0]);
        // k == n leaves the sample alone
        assert_eq!(s.top_excess(4).unwrap().values(), s.values());
        assert!(s.top_excess(5).is_err());
    }
}
