//! Exponential bulk plus Gaussian contamination, fitted by EM.
//!
//! The density is `f(x) = pi a exp(-a x) + (1 - pi) phi(x; mu, sigma)`:
//! the Gaussian carries the outlier regime and `pi` weights the Exponential
//! bulk, so `n (1 - pi)` estimates the number of outliers. Each point's
//! posterior probability of the Gaussian component (its responsibility)
//! classifies it directly, which makes this the tool of choice for
//! clustered outliers that max- and spacing-based statistics cannot
//! separate.
//!
//! The likelihood-ratio test against a pure Exponential sits on the
//! boundary `pi = 1` of the parameter space, where the chi-square
//! asymptotics fail, so p-values come from a Monte-Carlo table of the LRT
//! statistic over Exp(1) null samples ([`MixtureLrtTable`]).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::TableHeader;
use crate::rng::{mix_seed, std_exponential, stream_rng};
use crate::sample::OrderedSample;
use crate::{Error, Result};

/// Parameters of the two-component density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureParams {
    /// Weight of the Exponential bulk, in [0, 1].
    pub pi: f64,
    /// Exponential rate.
    pub alpha: f64,
    /// Gaussian (outlier-regime) location.
    pub mu: f64,
    /// Gaussian scale.
    pub sigma: f64,
}

impl MixtureParams {
    pub fn new(pi: f64, alpha: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::InvalidParameter(format!(
                "mixture weight must be in [0, 1], got {pi}"
            )));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponential rate must be positive, got {alpha}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian component needs finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}"
            )));
        }
        Ok(Self { pi, alpha, mu, sigma })
    }
}

/// EM settings.
#[derive(Debug, Clone, Copy)]
pub struct MixtureConfig {
    /// Stop when the log-likelihood gain falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// The Gaussian scale is floored at this fraction of the sample SD to
    /// keep the likelihood from blowing up on singleton clusters.
    pub sigma_floor_factor: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, sigma_floor_factor: 1e-3 }
    }
}

/// A fitted mixture.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureFit {
    pub params: MixtureParams,
    pub loglik: f64,
    /// Posterior probability of the Gaussian (outlier) component, one per
    /// point in descending-value order.
    pub responsibilities: Vec<f64>,
    /// Points with responsibility above 1/2.
    pub k_hat: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The Gaussian collapsed onto the sigma floor while claiming at most a
    /// single point.
    pub degenerate: bool,
    /// Log-likelihood after every iteration; nondecreasing.
    pub loglik_trace: Vec<f64>,
}

fn check_sample(sample: &OrderedSample) -> Result<()> {
    if sample.n() < 4 {
        return Err(Error::InsufficientSample(format!(
            "mixture fit needs n >= 4, got {}",
            sample.n()
        )));
    }
    if sample.min() < 0.0 {
        return Err(Error::Domain(
            "mixture fit requires nonnegative values".into(),
        ));
    }
    Ok(())
}

/// Log-likelihood of the sample under a pure Exponential at its MLE rate.
pub fn pure_exponential_loglik(sample: &OrderedSample) -> Result<f64> {
    let n = sample.n() as f64;
    let mean = sample.mean();
    if mean <= 0.0 {
        return Err(Error::DegenerateSample("all values are zero".into()));
    }
    Ok(n * (1.0 / mean).ln() - n)
}

/// Runs EM from the given initial parameters.
///
/// E-step: posterior responsibilities of the Gaussian component. M-step:
/// closed-form updates (weight from the mean responsibility, rate from the
/// responsibility-weighted Exponential MLE, location/scale from the
/// weighted Gaussian MLE with the scale floored). Both steps leave the
/// log-likelihood nondecreasing; iteration stops when the gain drops below
/// `config.tol` or at `config.max_iter`.
pub fn em_fit(
    sample: &OrderedSample,
    init: MixtureParams,
    config: &MixtureConfig,
) -> Result<MixtureFit> {
    check_sample(sample)?;
    let x = sample.values();
    let n = x.len();
    let nf = n as f64;
    let sigma_floor = (config.sigma_floor_factor * sample.sd()).max(1e-300);

    let mut params = init;
    let mut responsibilities = vec![0.0f64; n];
    let mut loglik = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=config.max_iter {
        iterations = iter;
        // E-step in log space.
        let log_pi = if params.pi > 0.0 { params.pi.ln() } else { f64::NEG_INFINITY };
        let log_one_minus_pi = if params.pi < 1.0 {
            (1.0 - params.pi).ln()
        } else {
            f64::NEG_INFINITY
        };
        let log_alpha = params.alpha.ln();
        let log_norm = -(params.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let mut new_loglik = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let lpe = log_pi + log_alpha - params.alpha * xi;
            let z = (xi - params.mu) / params.sigma;
            let lpg = log_one_minus_pi + log_norm - 0.5 * z * z;
            let hi = lpe.max(lpg);
            if hi == f64::NEG_INFINITY {
                return Err(Error::NonFinite(format!(
                    "zero mixture density at x = {xi}"
                )));
            }
            let li = hi + ((lpe - hi).exp() + (lpg - hi).exp()).ln();
            responsibilities[i] = (lpg - li).exp();
            new_loglik += li;
        }
        if !new_loglik.is_finite() {
            return Err(Error::NonFinite("mixture log-likelihood".into()));
        }

        let gain = new_loglik - loglik;
        loglik = new_loglik;
        trace.push(loglik);
        if gain.abs() < config.tol && iter > 1 {
            converged = true;
            break;
        }

        // M-step.
        let sg: f64 = responsibilities.iter().sum();
        params.pi = (1.0 - sg / nf).clamp(0.0, 1.0);
        let exp_weight = nf - sg;
        let exp_weighted_sum: f64 = x
            .iter()
            .zip(&responsibilities)
            .map(|(&xi, &g)| (1.0 - g) * xi)
            .sum();
        if exp_weight > 1e-12 && exp_weighted_sum > 0.0 {
            params.alpha = exp_weight / exp_weighted_sum;
        }
        if sg > 1e-12 {
            let mu: f64 = x
                .iter()
                .zip(&responsibilities)
                .map(|(&xi, &g)| g * xi)
                .sum::<f64>()
                / sg;
            let var: f64 = x
                .iter()
                .zip(&responsibilities)
                .map(|(&xi, &g)| g * (xi - mu) * (xi - mu))
                .sum::<f64>()
                / sg;
            params.mu = mu;
            params.sigma = var.sqrt().max(sigma_floor);
        }
    }

    let k_hat = responsibilities.iter().filter(|&&g| g > 0.5).count();
    let sg: f64 = responsibilities.iter().sum();
    let degenerate = params.sigma <= sigma_floor && sg <= 1.5 && params.pi < 1.0;
    Ok(MixtureFit {
        params,
        loglik,
        responsibilities,
        k_hat,
        iterations,
        converged,
        degenerate,
        loglik_trace: trace,
    })
}

/// Moment-based starting point claiming the top `m0` points for the
/// Gaussian component.
pub fn moment_init(sample: &OrderedSample, m0: usize) -> Result<MixtureParams> {
    check_sample(sample)?;
    let n = sample.n();
    let m0 = m0.clamp(2, n - 2);
    let top = &sample.values()[..m0];
    let rest = &sample.values()[m0..];
    let mu = top.iter().sum::<f64>() / m0 as f64;
    let top_var =
        top.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (m0 - 1).max(1) as f64;
    let sigma = top_var.sqrt().max(1e-3 * sample.sd()).max(1e-6);
    let rest_mean = rest.iter().sum::<f64>() / rest.len() as f64;
    if rest_mean <= 0.0 {
        return Err(Error::DegenerateSample(
            "bulk values are all zero".into(),
        ));
    }
    MixtureParams::new(1.0 - m0 as f64 / n as f64, 1.0 / rest_mean, mu, sigma)
}

/// Multi-start EM: moment starts seeded with the top `n/10`, top 2, and top
/// `n/5` points, plus the boundary fit (pure Exponential, `pi = 1`), keeping
/// the highest final log-likelihood.
///
/// Including the boundary guarantees the returned log-likelihood is at
/// least the pure-Exponential maximum, so downstream LRT statistics are
/// nonnegative.
pub fn fit_mixture(sample: &OrderedSample, config: &MixtureConfig) -> Result<MixtureFit> {
    check_sample(sample)?;
    let n = sample.n();
    let mut m0_candidates = vec![
        (n as f64 / 10.0).round() as usize,
        2,
        (n as f64 / 5.0).round() as usize,
    ];
    m0_candidates.iter_mut().for_each(|m| *m = (*m).clamp(2, n - 2));
    m0_candidates.dedup();
    m0_candidates.sort_unstable();
    m0_candidates.dedup();

    let mut best: Option<MixtureFit> = None;
    for m0 in m0_candidates {
        let init = moment_init(sample, m0)?;
        let fit = em_fit(sample, init, config)?;
        if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
            best = Some(fit);
        }
    }

    let null_loglik = pure_exponential_loglik(sample)?;
    let best = match best {
        Some(fit) if fit.loglik >= null_loglik => fit,
        _ => boundary_fit(sample, null_loglik)?,
    };
    Ok(best)
}

/// The pure-Exponential boundary of the mixture family (`pi = 1`).
fn boundary_fit(sample: &OrderedSample, null_loglik: f64) -> Result<MixtureFit> {
    let alpha = 1.0 / sample.mean();
    Ok(MixtureFit {
        params: MixtureParams::new(1.0, alpha, sample.max(), sample.sd().max(1e-6))?,
        loglik: null_loglik,
        responsibilities: vec![0.0; sample.n()],
        k_hat: 0,
        iterations: 1,
        converged: true,
        degenerate: false,
        loglik_trace: vec![null_loglik],
    })
}

/// Indices (into the descending sample) whose responsibility exceeds
/// `threshold`. At the default threshold of 1/2 the count equals the fit's
/// `k_hat`.
pub fn classify_outliers(fit: &MixtureFit, threshold: f64) -> Vec<usize> {
    fit.responsibilities
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Sorted Monte-Carlo draws of the mixture-vs-Exponential LRT statistic
/// `2 (loglik_mix - loglik_exp)` over Exp(1) samples of size `n`.
///
/// The statistic is scale-free (both families are closed under rescaling),
/// so one table per sample size serves any rate.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureLrtTable {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    values: Vec<f64>,
}

/// Default replication count for mixture LRT null tables.
pub const DEFAULT_LRT_REPLICATES: usize = 2000;

impl MixtureLrtTable {
    pub fn build(
        n: usize,
        replicates: usize,
        seed: u64,
        config: &MixtureConfig,
    ) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        let mut values = (0..replicates)
            .into_par_iter()
            .with_min_len(8)
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let sample = OrderedSample::new(
                    (0..n).map(|_| std_exponential(&mut rng)).collect(),
                )?;
                let fit = fit_mixture(&sample, config)?;
                let null = pure_exponential_loglik(&sample)?;
                Ok((2.0 * (fit.loglik - null)).max(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { n, replicates, seed, values })
    }

    pub(crate) fn from_parts(n: usize, replicates: usize, seed: u64, values: Vec<f64>) -> Self {
        Self { n, replicates, seed, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn p_value(&self, observed_lrt: f64) -> f64 {
        let below = self
            .values
            .partition_point(|v| v.total_cmp(&observed_lrt).is_lt());
        let ge = self.replicates - below;
        (1 + ge) as f64 / (self.replicates + 1) as f64
    }
}

/// Monte-Carlo p-value of the fitted mixture against the pure Exponential.
pub fn mixture_lrt(
    sample: &OrderedSample,
    fit: &MixtureFit,
    table: &MixtureLrtTable,
) -> Result<f64> {
    if table.n != sample.n() {
        return Err(Error::InvalidParameter(format!(
            "LRT table is for n = {}, sample has n = {}",
            table.n,
            sample.n()
        )));
    }
    let null = pure_exponential_loglik(sample)?;
    if fit.loglik < null - 1e-8 * (1.0 + null.abs()) {
        return Err(Error::OptimizationFailure(format!(
            "mixture log-likelihood {} below pure-Exponential {null}",
            fit.loglik
        )));
    }
    let statistic = (2.0 * (fit.loglik - null)).max(0.0);
    Ok(table.p_value(statistic))
}

/// Memoizing source of mixture LRT null tables, optionally persisted to the
/// same cache directory as statistic tables (statistic code 255).
pub struct MixtureLrtStore {
    replicates: usize,
    master_seed: u64,
    config: MixtureConfig,
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<usize, Arc<MixtureLrtTable>>>,
}

impl MixtureLrtStore {
    pub fn new(replicates: usize, master_seed: u64) -> Self {
        Self {
            replicates,
            master_seed,
            config: MixtureConfig::default(),
            dir: None,
            mem: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_cache_dir(mut self, dir: PathBuf) -> Self {
        self.dir = Some(dir);
        self
    }

    pub fn config(&self) -> &MixtureConfig {
        &self.config
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    fn table_seed(&self, n: usize) -> u64 {
        let mut s = mix_seed(self.master_seed, crate::calibration::MIXTURE_LRT_CODE as u64);
        s = mix_seed(s, n as u64);
        mix_seed(s, self.replicates as u64)
    }

    pub fn table(&self, n: usize) -> Result<Arc<MixtureLrtTable>> {
        if let Some(hit) = self.mem.lock().unwrap().get(&n) {
            return Ok(Arc::clone(hit));
        }
        let seed = self.table_seed(n);
        let header = TableHeader::for_mixture(n, self.replicates, seed);
        let loaded = self.dir.as_ref().and_then(|dir| {
            let path = dir.join(header.file_name());
            if !path.exists() {
                return None;
            }
            match crate::calibration::read_cached_table(&path) {
                Ok((read_header, values)) if read_header == header => Some(
                    MixtureLrtTable::from_parts(n, self.replicates, seed, values),
                ),
                _ => None,
            }
        });
        let table = match loaded {
            Some(table) => Arc::new(table),
            None => {
                let built =
                    MixtureLrtTable::build(n, self.replicates, seed, &self.config)?;
                if let Some(dir) = &self.dir {
                    crate::calibration::write_cached_table(dir, &header, built.values())?;
                }
                Arc::new(built)
            }
        };
        let mut mem = self.mem.lock().unwrap();
        let entry = mem.entry(n).or_insert_with(|| Arc::clone(&table));
        Ok(Arc::clone(entry))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn exp_sample(n: usize, stream: u64) -> OrderedSample {
        let mut rng = stream_rng(23, stream);
        OrderedSample::new((0..n).map(|_| std_exponential(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn boundary_init_is_a_fixed_point() {
        let sample = exp_sample(30, 0);
        let init = MixtureParams::new(1.0, 2.0, 5.0, 1.0).unwrap();
        let fit = em_fit(&sample, init, &MixtureConfig::default()).unwrap();
        assert!(fit.responsibilities.iter().all(|&g| g == 0.0));
        assert_eq!(fit.params.pi, 1.0);
        let exp_mle_rate = 1.0 / sample.mean();
        assert!((fit.params.alpha - exp_mle_rate).abs() < 1e-12);
        let null = pure_exponential_loglik(&sample).unwrap();
        assert!((fit.loglik - null).abs() < 1e-9);
    }

    #[test]
    fn responsibilities_are_probabilities() {
        let mut values: Vec<f64> = exp_sample(40, 1).values().to_vec();
        values.extend([8.0, 8.1, 7.9, 8.05]);
        let sample = OrderedSample::new(values).unwrap();
        let fit = fit_mixture(&sample, &MixtureConfig::default()).unwrap();
        assert!(fit
            .responsibilities
            .iter()
            .all(|&g| (0.0..=1.0).contains(&g)));
    }

    #[test]
    fn finds_a_planted_cluster() {
        let mut values: Vec<f64> = exp_sample(45, 2).values().to_vec();
        values.extend([8.0, 8.2, 7.9, 8.1, 8.05]);
        let sample = OrderedSample::new(values).unwrap();
        let fit = fit_mixture(&sample, &MixtureConfig::default()).unwrap();
        assert_eq!(fit.k_hat, 5, "responsibilities: {:?}", &fit.responsibilities[..8]);
        assert!((fit.params.mu - 8.0).abs() < 0.3);
        assert_eq!(classify_outliers(&fit, 0.5), vec![0, 1, 2, 3, 4]);
        assert!(classify_outliers(&fit, 1.0).is_empty());
        // Count consistency: k_hat tracks n(1 - pi).
        let implied = sample.n() as f64 * (1.0 - fit.params.pi);
        assert!((implied - fit.k_hat as f64).abs() <= 1.0);
    }

    #[test]
    fn loglik_trace_is_monotone() {
        let mut values: Vec<f64> = exp_sample(25, 3).values().to_vec();
        values.extend([6.0, 6.1, 5.9]);
        let sample = OrderedSample::new(values).unwrap();
        let init = moment_init(&sample, 3).unwrap();
        let fit = em_fit(&sample, init, &MixtureConfig::default()).unwrap();
        for pair in fit.loglik_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-8);
        }
    }

    #[test]
    fn fit_is_permutation_invariant() {
        let mut values: Vec<f64> = exp_sample(30, 4).values().to_vec();
        values.extend([7.0, 7.1]);
        let a = OrderedSample::new(values.clone()).unwrap();
        values.reverse();
        values.swap(3, 11);
        let b = OrderedSample::new(values).unwrap();
        let fit_a = fit_mixture(&a, &MixtureConfig::default()).unwrap();
        let fit_b = fit_mixture(&b, &MixtureConfig::default()).unwrap();
        assert_eq!(fit_a.loglik, fit_b.loglik);
        assert_eq!(fit_a.responsibilities, fit_b.responsibilities);
    }

    #[test]
    fn lrt_p_is_one_when_mixture_matches_null() {
        let sample = exp_sample(20, 5);
        let table = MixtureLrtTable::build(20, 200, 7, &MixtureConfig::default()).unwrap();
        let null = pure_exponential_loglik(&sample).unwrap();
        let fit = boundary_fit(&sample, null).unwrap();
        let p = mixture_lrt(&sample, &fit, &table).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn lrt_rejects_an_obvious_cluster() {
        let mut values: Vec<f64> = exp_sample(45, 6).values().to_vec();
        values.extend([9.0, 9.05, 8.95, 9.1, 9.02]);
        let sample = OrderedSample::new(values).unwrap();
        let table = MixtureLrtTable::build(50, 400, 8, &MixtureConfig::default()).unwrap();
        let fit = fit_mixture(&sample, &MixtureConfig::default()).unwrap();
        let p = mixture_lrt(&sample, &fit, &table).unwrap();
        assert!(p <= 0.01, "p = {p}");
    }

    #[test]
    fn rejects_small_and_negative_samples() {
        assert!(fit_mixture(
            &OrderedSample::new(vec![1.0, 2.0, 3.0]).unwrap(),
            &MixtureConfig::default()
        )
        .is_err());
        assert!(fit_mixture(
            &OrderedSample::new(vec![-0.5, 1.0, 2.0, 3.0, 4.0]).unwrap(),
            &MixtureConfig::default()
        )
        .is_err());
    }
}
