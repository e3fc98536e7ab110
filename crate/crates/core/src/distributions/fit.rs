//! Maximum-likelihood fitting for the Exponential, Pareto, and Weibull
//! families, and the piecewise (layered) Pareto fit.

use serde::Serialize;

use super::families::{ExponentialParams, ParetoParams, WeibullParams};
use crate::sample::OrderedSample;
use crate::{Error, Result};

/// Exponential rate MLE above a known lower truncation:
/// `alpha = 1 / mean(x - u)`.
pub fn mle_exponential(sample: &OrderedSample, u: f64) -> Result<ExponentialParams> {
    if sample.min() < u {
        return Err(Error::Domain(format!(
            "value {} below truncation {u}",
            sample.min()
        )));
    }
    let mean_excess = sample.mean() - u;
    if mean_excess <= 0.0 {
        return Err(Error::DegenerateSample(
            "all values equal the truncation point".into(),
        ));
    }
    ExponentialParams::new(1.0 / mean_excess, u)
}

/// Pareto exponent MLE above a known threshold:
/// `alpha = n / sum(log(x / u))`.
///
/// Coincides exactly with the Exponential rate MLE after the log transform
/// `x -> log(x / u)`.
pub fn mle_pareto(sample: &OrderedSample, u: f64) -> Result<ParetoParams> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pareto threshold must be positive, got {u}"
        )));
    }
    if sample.min() < u {
        return Err(Error::Domain(format!(
            "value {} below threshold {u}",
            sample.min()
        )));
    }
    let log_sum: f64 = sample.values().iter().map(|v| (v / u).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::DegenerateSample(
            "all values equal the threshold".into(),
        ));
    }
    ParetoParams::new(sample.n() as f64 / log_sum, u)
}

/// Log-likelihood of `values` under a (possibly truncated) Exponential.
pub fn exponential_loglik(sample: &OrderedSample, params: &ExponentialParams) -> f64 {
    let n = sample.n() as f64;
    let excess: f64 = sample.sum() - n * params.lower_truncation;
    n * params.alpha.ln() - params.alpha * excess
}

/// Log-likelihood of `values` under a Pareto df.
pub fn pareto_loglik(sample: &OrderedSample, params: &ParetoParams) -> f64 {
    let n = sample.n() as f64;
    let log_sum: f64 = sample.values().iter().map(|v| v.ln()).sum();
    n * params.alpha.ln() + n * params.alpha * params.u.ln() - (params.alpha + 1.0) * log_sum
}

/// Log-likelihood of `values` under a Weibull df.
pub fn weibull_loglik(sample: &OrderedSample, params: &WeibullParams) -> f64 {
    let n = sample.n() as f64;
    let mut log_sum = 0.0;
    let mut pow_sum = 0.0;
    for &x in sample.values() {
        let z = x / params.tau;
        log_sum += z.ln();
        pow_sum += z.powf(params.kappa);
    }
    n * (params.kappa / params.tau).ln() + (params.kappa - 1.0) * log_sum - pow_sum
}

const SHAPE_BRACKET: (f64, f64) = (1e-3, 1e3);
const SHAPE_TOL: f64 = 1e-10;
const SHAPE_MAX_ITER: usize = 200;

/// Weibull MLE by solving the profile score for the shape.
///
/// The profile log-likelihood in `kappa` is unimodal; the score is solved
/// with a safeguarded Newton iteration (bisection fallback) on the bracket
/// `[1e-3, 1e3]` to absolute tolerance 1e-10, after which the scale has the
/// closed form `tau = mean(x^kappa)^(1/kappa)`.
pub fn mle_weibull(sample: &OrderedSample) -> Result<WeibullParams> {
    let n = sample.n();
    if n < 3 {
        return Err(Error::InsufficientSample(format!(
            "weibull fit needs n >= 3, got {n}"
        )));
    }
    if sample.min() <= 0.0 {
        return Err(Error::Domain(
            "weibull fit requires strictly positive values".into(),
        ));
    }

    // Work with x / max(x): the score is invariant under rescaling and the
    // normalized powers cannot overflow at large shape values.
    let scale = sample.max();
    let xs: Vec<f64> = sample.values().iter().map(|v| v / scale).collect();
    let mean_log: f64 = xs.iter().map(|x| x.ln()).sum::<f64>() / n as f64;

    // score(k) = 1/k + mean(ln x) - sum(x^k ln x) / sum(x^k), strictly
    // decreasing in k.
    let score_and_slope = |k: f64| -> (f64, f64) {
        let mut s0 = 0.0; // sum x^k
        let mut s1 = 0.0; // sum x^k ln x
        let mut s2 = 0.0; // sum x^k (ln x)^2
        for &x in &xs {
            let lx = x.ln();
            let p = (k * lx).exp();
            s0 += p;
            s1 += p * lx;
            s2 += p * lx * lx;
        }
        let g = 1.0 / k + mean_log - s1 / s0;
        let dg = -1.0 / (k * k) - (s2 * s0 - s1 * s1) / (s0 * s0);
        (g, dg)
    };

    let (mut lo, mut hi) = SHAPE_BRACKET;
    let (g_lo, _) = score_and_slope(lo);
    let (g_hi, _) = score_and_slope(hi);
    if g_lo <= 0.0 || g_hi >= 0.0 {
        // No sign change: the score has no root in the bracket. Happens for
        // degenerate samples (all values equal pushes the shape to infinity).
        return Err(Error::NonConvergence { iterations: 0, lo, hi });
    }

    let mut k = (lo * hi).sqrt();
    for iteration in 0..SHAPE_MAX_ITER {
        let (g, dg) = score_and_slope(k);
        if g > 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        let next = if dg < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - k).abs() <= SHAPE_TOL * (1.0 + k.abs()) {
            let kappa = next;
            let mean_pow: f64 =
                xs.iter().map(|x| x.powf(kappa)).sum::<f64>() / n as f64;
            let tau = scale * mean_pow.powf(1.0 / kappa);
            return WeibullParams::new(kappa, tau);
        }
        k = next;
        let _ = iteration;
    }
    Err(Error::NonConvergence { iterations: SHAPE_MAX_ITER, lo, hi })
}

/// A piecewise Pareto fit over contiguous layers.
///
/// Layer `l` covers `[breakpoints[l], breakpoints[l+1])`, the last layer is
/// unbounded above. Occupancy weights are the empirical layer fractions and
/// each exponent maximizes the conditional (within-layer, truncated Pareto)
/// likelihood, which keeps the model CCDF continuous across breakpoints.
#[derive(Debug, Clone, Serialize)]
pub struct LayeredParetoFit {
    pub breakpoints: Vec<f64>,
    pub alphas: Vec<f64>,
    pub layer_counts: Vec<usize>,
    pub loglik: f64,
}

pub fn fit_layered_pareto(
    sample: &OrderedSample,
    breakpoints: &[f64],
) -> Result<LayeredParetoFit> {
    if breakpoints.is_empty() {
        return Err(Error::InvalidParameter("no breakpoints given".into()));
    }
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "breakpoints must be strictly ascending".into(),
        ));
    }
    if !(breakpoints[0] > 0.0) {
        return Err(Error::InvalidParameter(
            "breakpoints must be positive".into(),
        ));
    }
    if sample.min() < breakpoints[0] {
        return Err(Error::Domain(format!(
            "value {} below the lowest breakpoint {}",
            sample.min(),
            breakpoints[0]
        )));
    }

    let n = sample.n();
    let n_layers = breakpoints.len();
    let mut layers: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
    for &x in sample.values() {
        // partition_point over ascending breakpoints: the layer whose lower
        // edge is the largest breakpoint <= x.
        let idx = breakpoints.partition_point(|&b| b <= x) - 1;
        layers[idx].push(x);
    }

    let mut alphas = Vec::with_capacity(n_layers);
    let mut layer_counts = Vec::with_capacity(n_layers);
    let mut loglik = 0.0;
    for (l, values) in layers.iter().enumerate() {
        if values.is_empty() {
            return Err(Error::EmptyLayer(format!(
                "layer {l} starting at {} holds no points",
                breakpoints[l]
            )));
        }
        let n_l = values.len();
        layer_counts.push(n_l);
        let lower = breakpoints[l];
        let occupancy = n_l as f64 / n as f64;
        let layer_sample = OrderedSample::new(values.clone())?;
        let (alpha, conditional_ll) = if l + 1 == n_layers {
            let params = mle_pareto(&layer_sample, lower)?;
            (params.alpha, pareto_loglik(&layer_sample, &params))
        } else {
            let upper = breakpoints[l + 1];
            let alpha = truncated_pareto_mle(&layer_sample, lower, upper)?;
            (alpha, truncated_pareto_loglik(&layer_sample, lower, upper, alpha))
        };
        alphas.push(alpha);
        loglik += n_l as f64 * occupancy.ln() + conditional_ll;
    }

    Ok(LayeredParetoFit {
        breakpoints: breakpoints.to_vec(),
        alphas,
        layer_counts,
        loglik,
    })
}

/// MLE of the exponent for a Pareto truncated to `[lower, upper)`.
///
/// The score depends on the data only through `mean(log(x / lower))`, so
/// each bisection step is O(1). When the likelihood is maximized at a
/// bracket edge (log-spacings too uniform or too concentrated) the edge
/// value is returned.
fn truncated_pareto_mle(sample: &OrderedSample, lower: f64, upper: f64) -> Result<f64> {
    let n = sample.n() as f64;
    let mean_log: f64 =
        sample.values().iter().map(|v| (v / lower).ln()).sum::<f64>() / n;
    let span = (upper / lower).ln();

    // score(a)/n = 1/a - mean_log - span * exp(-a*span) / (1 - exp(-a*span))
    let score = |a: f64| -> f64 {
        let e = (-a * span).exp();
        1.0 / a - mean_log - span * e / (1.0 - e)
    };

    let (mut lo, mut hi) = SHAPE_BRACKET;
    if score(lo) <= 0.0 {
        return Ok(lo);
    }
    if score(hi) >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= SHAPE_TOL * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn truncated_pareto_loglik(
    sample: &OrderedSample,
    lower: f64,
    upper: f64,
    alpha: f64,
) -> f64 {
    let n = sample.n() as f64;
    let log_sum: f64 = sample.values().iter().map(|v| v.ln()).sum();
    let mass = 1.0 - (lower / upper).powf(alpha);
    n * alpha.ln() + n * alpha * lower.ln() - (alpha + 1.0) * log_sum - n * mass.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(values: &[f64]) -> OrderedSample {
        OrderedSample::new(values.to_vec()).unwrap()
    }

    #[test]
    fn exponential_mle_hand_values() {
        let fit = mle_exponential(&sample(&[1.0, 2.0, 3.0]), 0.0).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-12);

        let fit = mle_exponential(&sample(&[3.5, 3.5, 3.5]), 2.5).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-12);

        let fit = mle_exponential(&sample(&[5.0, 4.0, 3.0]), 2.0).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-12);

        assert!(mle_exponential(&sample(&[2.0, 2.0]), 2.0).is_err());
        assert!(mle_exponential(&sample(&[1.0]), 2.0).is_err());
    }

    #[test]
    fn pareto_mle_hand_values() {
        let e = std::f64::consts::E;
        let fit = mle_pareto(&sample(&[e, e, e * e]), 1.0).unwrap();
        assert!((fit.alpha - 0.75).abs() < 1e-12);

        let u = 3.0;
        let fit = mle_pareto(&sample(&[e * u, e * u, e * u]), u).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-12);

        assert!(mle_pareto(&sample(&[2.0, 0.5]), 1.0).is_err());
        assert!(mle_pareto(&sample(&[1.0, 1.0]), 1.0).is_err());
    }

    #[test]
    fn pareto_mle_equals_exponential_mle_after_log_transform() {
        let values = vec![1.3, 2.0, 2.1, 5.5, 17.0, 1.01];
        let s = sample(&values);
        let direct = mle_pareto(&s, 1.0).unwrap().alpha;
        let transformed = super::super::pareto_to_exp(&s, 1.0).unwrap();
        let via_log = mle_exponential(&transformed, 0.0).unwrap().alpha;
        assert!((direct - via_log).abs() <= 1e-12 * direct);
    }

    #[test]
    fn weibull_mle_recovers_exponential_data_shape() {
        // Exp(2) = Weibull(kappa 1, tau 0.5); a seeded sample should fit
        // near kappa = 1.
        let mut rng = crate::rng::stream_rng(11, 0);
        let params = super::super::FamilyParams::Exponential(
            ExponentialParams::new(2.0, 0.0).unwrap(),
        );
        let s = super::super::sample(&params, 4000, &mut rng).unwrap();
        let fit = mle_weibull(&s).unwrap();
        assert!((fit.kappa - 1.0).abs() < 0.05, "kappa = {}", fit.kappa);
        assert!((fit.tau - 0.5).abs() < 0.05, "tau = {}", fit.tau);
    }

    #[test]
    fn weibull_mle_rejects_degenerate_samples() {
        assert!(matches!(
            mle_weibull(&sample(&[2.0, 2.0, 2.0, 2.0])),
            Err(Error::NonConvergence { .. })
        ));
        assert!(mle_weibull(&sample(&[1.0, 2.0])).is_err());
        assert!(mle_weibull(&sample(&[0.0, 1.0, 2.0])).is_err());
    }

    #[test]
    fn single_layer_fit_reduces_to_plain_pareto() {
        let values = vec![1.5, 2.0, 3.0, 8.0, 21.0];
        let s = sample(&values);
        let layered = fit_layered_pareto(&s, &[1.0]).unwrap();
        let plain = mle_pareto(&s, 1.0).unwrap();
        assert!((layered.alphas[0] - plain.alpha).abs() < 1e-12);
        let plain_ll = pareto_loglik(&s, &plain);
        assert!((layered.loglik - plain_ll).abs() < 1e-9);
        assert_eq!(layered.layer_counts, vec![5]);
    }

    #[test]
    fn layered_fit_flags_empty_layers() {
        let s = sample(&[1.5, 2.0, 2.5]);
        assert!(matches!(
            fit_layered_pareto(&s, &[1.0, 10.0]),
            Err(Error::EmptyLayer(_))
        ));
        assert!(fit_layered_pareto(&s, &[2.0]).is_err()); // value below lowest edge
        assert!(fit_layered_pareto(&s, &[1.0, 1.0]).is_err());
    }
}
