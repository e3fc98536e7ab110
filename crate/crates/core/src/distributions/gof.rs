//! Goodness-of-fit utilities: Kolmogorov-Smirnov tests and chi-square
//! likelihood-ratio tests.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::families::ExponentialParams;
use super::fit::{exponential_loglik, mle_exponential, mle_weibull, weibull_loglik};
use crate::sample::OrderedSample;
use crate::{Error, Result};

/// KS statistic and its asymptotic p-value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`,
/// truncated at 100 terms (error < 1e-6 for every lambda of interest).
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100u32 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against an arbitrary continuous df.
pub fn ks_test_cdf<F: Fn(f64) -> f64>(sample: &OrderedSample, cdf: F) -> Result<KsResult> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::InsufficientSample(format!(
            "KS test needs n >= 2, got {n}"
        )));
    }
    // Walk the sample ascending; the empirical CDF steps from (i-1)/n to i/n
    // at the i-th ascending value.
    let mut d: f64 = 0.0;
    let nf = n as f64;
    for (i, &x) in sample.values().iter().rev().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let p = kolmogorov_survival(nf.sqrt() * d);
    Ok(KsResult { statistic: d, p_value: p })
}

/// One-sample KS test against an Exponential df with the given parameters.
pub fn ks_test_exponential(
    sample: &OrderedSample,
    params: &ExponentialParams,
) -> Result<KsResult> {
    ks_test_cdf(sample, |x| params.cdf(x))
}

/// Two-sample KS test with the asymptotic p-value at the effective size
/// `n1 n2 / (n1 + n2)`.
pub fn ks_test_two_sample(a: &OrderedSample, b: &OrderedSample) -> Result<KsResult> {
    let (na, nb) = (a.n(), b.n());
    if na < 2 || nb < 2 {
        return Err(Error::InsufficientSample(
            "two-sample KS needs n >= 2 in each sample".into(),
        ));
    }
    // Merge the two ascending sequences, tracking the gap between the
    // empirical CDFs.
    let xa: Vec<f64> = a.values().iter().rev().copied().collect();
    let xb: Vec<f64> = b.values().iter().rev().copied().collect();
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while ia < na && ib < nb {
        let (va, vb) = (xa[ia], xb[ib]);
        let step = va.min(vb);
        while ia < na && xa[ia] <= step {
            ia += 1;
        }
        while ib < nb && xb[ib] <= step {
            ib += 1;
        }
        d = d.max((ia as f64 / na as f64 - ib as f64 / nb as f64).abs());
    }
    let effective = (na * nb) as f64 / (na + nb) as f64;
    let p = kolmogorov_survival(effective.sqrt() * d);
    Ok(KsResult { statistic: d, p_value: p })
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_survival(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).expect("df >= 1").sf(x)
}

/// Chi-square LRT p-value for nested models.
///
/// `loglik_alt` must not fall below `loglik_null` beyond numeric tolerance;
/// the alternative nests the null, so a lower score means its optimizer
/// failed.
pub fn likelihood_ratio_test(loglik_null: f64, loglik_alt: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidParameter("LRT needs df >= 1".into()));
    }
    let deficit = loglik_null - loglik_alt;
    if deficit > 1e-8 * (1.0 + loglik_null.abs()) {
        return Err(Error::OptimizationFailure(format!(
            "alternative log-likelihood {loglik_alt} below null {loglik_null}"
        )));
    }
    let statistic = (2.0 * (loglik_alt - loglik_null)).max(0.0);
    Ok(chi_square_survival(statistic, df))
}

/// Tests a Weibull alternative against the Exponential null (both fitted by
/// MLE) with a one-degree chi-square LRT. Sensitive to fat (`kappa < 1`) and
/// thin (`kappa > 1`) misspecification of an assumed Exponential sample.
pub fn weibull_vs_exponential_lrt(sample: &OrderedSample) -> Result<f64> {
    if sample.n() < 3 {
        return Err(Error::InsufficientSample(format!(
            "LRT needs n >= 3, got {}",
            sample.n()
        )));
    }
    if sample.min() <= 0.0 {
        return Err(Error::Domain(
            "weibull alternative requires strictly positive values".into(),
        ));
    }
    let weibull = mle_weibull(sample)?;
    let exponential = mle_exponential(sample, 0.0)?;
    let ll_alt = weibull_loglik(sample, &weibull);
    let ll_null = exponential_loglik(sample, &exponential);
    likelihood_ratio_test(ll_null, ll_alt, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_quantiles() {
        assert_eq!(likelihood_ratio_test(-10.0, -10.0, 1).unwrap(), 1.0);
        let p = likelihood_ratio_test(0.0, 3.841 / 2.0, 1).unwrap();
        assert!((p - 0.05).abs() < 5e-4, "p = {p}");
        let p = likelihood_ratio_test(0.0, 6.635 / 2.0, 1).unwrap();
        assert!((p - 0.01).abs() < 2e-4, "p = {p}");
        assert!(likelihood_ratio_test(0.0, -1.0, 1).is_err());
    }

    #[test]
    fn ks_statistic_at_midpoint_quantiles() {
        // Values placed at the (i - 0.5)/n reference quantiles leave a
        // deviation of exactly 0.5/n on each side.
        let n = 8;
        let params = ExponentialParams::std();
        let values: Vec<f64> = (1..=n)
            .map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln())
            .collect();
        let s = OrderedSample::new(values).unwrap();
        let ks = ks_test_exponential(&s, &params).unwrap();
        assert!((ks.statistic - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn two_sample_ks_on_identical_samples() {
        let s = OrderedSample::new(vec![0.3, 1.0, 2.5, 4.0]).unwrap();
        let ks = ks_test_two_sample(&s, &s).unwrap();
        assert_eq!(ks.statistic, 0.0);
        assert_eq!(ks.p_value, 1.0);
    }

    #[test]
    fn two_sample_ks_detects_disjoint_samples() {
        let a = OrderedSample::new((1..60).map(|i| i as f64).collect()).unwrap();
        let b = OrderedSample::new((1..60).map(|i| i as f64 + 1000.0).collect()).unwrap();
        let ks = ks_test_two_sample(&a, &b).unwrap();
        assert_eq!(ks.statistic, 1.0);
        assert!(ks.p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_survival_endpoints() {
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(3.0) < 1e-6);
        // Classic table value: Q(1.36) is close to 0.05.
        assert!((kolmogorov_survival(1.36) - 0.049).abs() < 2e-3);
    }

    #[test]
    fn weibull_lrt_rejects_identical_values() {
        let s = OrderedSample::new(vec![2.0; 10]).unwrap();
        assert!(weibull_vs_exponential_lrt(&s).is_err());
    }
}
