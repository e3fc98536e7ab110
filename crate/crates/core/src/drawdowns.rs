//! ε-drawdown and ε-drawup extraction from intraday price series.
//!
//! A drawdown is the cumulative log-return of a negative run in price, with
//! a tolerance for small counter-moves: starting at the first negative
//! return, the cumulative return `r_{i0,i}` is tracked until it has
//! reversed by more than `epsilon * sigma` off its running minimum, where
//! `sigma` is the return standard deviation of the previous trading day.
//! The drawdown then spans from the start to the minimum; a drawup begins
//! at the next index with the mirrored rule (running maximum, reversal
//! downward), and the two kinds alternate through the day. The last episode
//! of a day never sees its reversal and is emitted flagged as censored.
//!
//! Sizes are normalized by the previous day's sigma so that episodes are
//! comparable across volatility regimes; the first day of a series has no
//! previous sigma and is dropped from normalized output.

use std::collections::HashMap;

use serde::Serialize;

use crate::{Error, Result};

/// One trading day of evenly spaced prices.
#[derive(Debug, Clone, Serialize)]
pub struct PriceSeries {
    /// Day (or contract-day) identifier.
    pub day: String,
    pub timestamps: Vec<f64>,
    pub prices: Vec<f64>,
    /// Sampling interval the timestamps are expected to follow.
    pub delta: f64,
    /// Number of gaps (spacing further than 1.5 delta) found at validation.
    pub gaps: usize,
}

impl PriceSeries {
    pub fn new(day: String, timestamps: Vec<f64>, prices: Vec<f64>, delta: f64) -> Result<Self> {
        if prices.len() != timestamps.len() {
            return Err(Error::InvalidParameter(format!(
                "{} timestamps vs {} prices",
                timestamps.len(),
                prices.len()
            )));
        }
        if prices.len() < 2 {
            return Err(Error::InsufficientSample(
                "price series needs at least 2 points".into(),
            ));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling interval must be positive, got {delta}"
            )));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "timestamps must be strictly ascending".into(),
            ));
        }
        if let Some(bad) = prices.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::Domain(format!("nonpositive price {bad}")));
        }
        let gaps = timestamps
            .windows(2)
            .filter(|w| w[1] - w[0] > 1.5 * delta)
            .count();
        Ok(Self { day, timestamps, prices, delta, gaps })
    }

    pub fn log_returns(&self) -> Vec<f64> {
        log_returns(&self.prices)
    }
}

/// `r_i = log(p_i / p_(i-1))`, one per consecutive price pair.
pub fn log_returns(prices: &[f64]) -> Vec<f64> {
    prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

/// Resamples ticks onto a `delta`-spaced grid with the last price in each
/// interval; empty intervals are skipped.
pub fn resample_last_price(
    timestamps: &[f64],
    prices: &[f64],
    delta: f64,
) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(timestamps.len(), prices.len());
    let mut out_t = Vec::new();
    let mut out_p = Vec::new();
    if timestamps.is_empty() {
        return (out_t, out_p);
    }
    let t0 = timestamps[0];
    let mut current_bin = 0u64;
    let mut last_price = prices[0];
    let mut have_open_bin = false;
    for (&t, &p) in timestamps.iter().zip(prices) {
        let bin = ((t - t0) / delta).floor() as u64;
        if have_open_bin && bin != current_bin {
            out_t.push(t0 + (current_bin + 1) as f64 * delta);
            out_p.push(last_price);
        }
        current_bin = bin;
        last_price = p;
        have_open_bin = true;
    }
    if have_open_bin {
        out_t.push(t0 + (current_bin + 1) as f64 * delta);
        out_p.push(last_price);
    }
    (out_t, out_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EpisodeKind {
    Drawdown,
    Drawup,
}

/// One extracted episode. Indices point into the day's return sequence
/// (0-based).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Episode {
    pub kind: EpisodeKind,
    /// First return of the episode.
    pub start: usize,
    /// Return index of the extremum; the episode covers `[start, trough]`.
    pub trough: usize,
    /// Index at which the reversal fired; `None` when the day ended first.
    pub detect: Option<usize>,
    /// Cumulative log-return over `[start, trough]`; nonpositive for
    /// drawdowns, nonnegative for drawups.
    pub size: f64,
    /// `|size| / sigma(previous day)`, filled by normalization.
    pub normalized_size: Option<f64>,
}

impl Episode {
    pub fn censored(&self) -> bool {
        self.detect.is_none()
    }
}

/// Reversal tolerance: `epsilon` times the previous day's return SD.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpsilonConfig {
    pub epsilon: f64,
    /// Return standard deviation of the previous trading day.
    pub sigma: f64,
}

impl EpsilonConfig {
    pub fn new(epsilon: f64, sigma: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { epsilon, sigma })
    }

    pub fn threshold(&self) -> f64 {
        self.epsilon * self.sigma
    }
}

/// Extracts the alternating episode sequence from one day of returns.
///
/// The first episode is a drawdown starting at the first strictly negative
/// return; returns before it are outside any episode. Reversals use a
/// strict inequality, so with `epsilon = 0` any positive (negative) return
/// ends a drawdown (drawup), while zero returns never fire a reversal. Ties
/// in the running extremum keep the first occurrence.
pub fn extract_episodes(returns: &[f64], config: &EpsilonConfig) -> Vec<Episode> {
    let threshold = config.threshold();
    let mut episodes = Vec::new();
    let Some(first_negative) = returns.iter().position(|&r| r < 0.0) else {
        return episodes;
    };

    let mut start = first_negative;
    let mut kind = EpisodeKind::Drawdown;
    'days: loop {
        // Track the cumulative return from `start` and its running extremum.
        let mut cumulative = 0.0;
        let mut extremum = f64::NAN;
        let mut extremum_idx = start;
        let mut detect = None;
        for (offset, &r) in returns[start..].iter().enumerate() {
            let i = start + offset;
            cumulative += r;
            let is_new_extremum = match kind {
                _ if offset == 0 => true,
                EpisodeKind::Drawdown => cumulative < extremum,
                EpisodeKind::Drawup => cumulative > extremum,
            };
            if is_new_extremum {
                extremum = cumulative;
                extremum_idx = i;
            }
            let reversal = match kind {
                EpisodeKind::Drawdown => cumulative - extremum > threshold,
                EpisodeKind::Drawup => extremum - cumulative > threshold,
            };
            if reversal {
                detect = Some(i);
                break;
            }
        }
        episodes.push(Episode {
            kind,
            start,
            trough: extremum_idx,
            detect,
            size: extremum,
            normalized_size: None,
        });
        if detect.is_none() || extremum_idx + 1 >= returns.len() {
            break 'days;
        }
        start = extremum_idx + 1;
        kind = match kind {
            EpisodeKind::Drawdown => EpisodeKind::Drawup,
            EpisodeKind::Drawup => EpisodeKind::Drawdown,
        };
    }
    episodes
}

/// Episodes of one day, annotated with the day's identifier.
#[derive(Debug, Clone, Serialize)]
pub struct DayEpisodes {
    pub day: String,
    pub episodes: Vec<Episode>,
    pub sigma: f64,
    pub n_returns: usize,
}

/// Result of normalizing episodes across a sequence of days.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizeOutcome {
    pub days: Vec<DayEpisodes>,
    /// Episodes dropped because their day had no previous-day sigma.
    pub dropped_no_previous_day: usize,
}

/// Fills `normalized_size = |size| / sigma(previous day)` for every episode.
///
/// `sigmas` maps each day to its own return SD; day order follows `days`.
/// The first day (and any day whose predecessor is missing from the map)
/// contributes no normalized episodes and is counted in the outcome.
pub fn normalize_episodes(
    days: &[DayEpisodes],
    sigmas: &HashMap<String, f64>,
) -> NormalizeOutcome {
    let mut out_days = Vec::with_capacity(days.len());
    let mut dropped = 0;
    for (i, day) in days.iter().enumerate() {
        let previous_sigma = if i == 0 {
            None
        } else {
            sigmas.get(&days[i - 1].day).copied()
        };
        match previous_sigma {
            Some(sigma) if sigma > 0.0 => {
                let mut normalized = day.clone();
                for episode in &mut normalized.episodes {
                    episode.normalized_size = Some(episode.size.abs() / sigma);
                }
                out_days.push(normalized);
            }
            _ => dropped += day.episodes.len(),
        }
    }
    NormalizeOutcome { days: out_days, dropped_no_previous_day: dropped }
}

/// Sample standard deviation of a return sequence.
pub fn return_sd(returns: &[f64]) -> f64 {
    let n = returns.len();
    if n < 2 {
        return 0.0;
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let ss: f64 = returns.iter().map(|r| (r - mean) * (r - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Extraction over a sequence of consecutive days.
#[derive(Debug, Clone, Serialize)]
pub struct CrossDayExtraction {
    pub days: Vec<DayEpisodes>,
    /// Days skipped because no positive previous-day sigma was available
    /// (always at least the first day).
    pub skipped_days: usize,
}

/// End-to-end extraction over consecutive days: day `i` is extracted with
/// the reversal threshold `epsilon * sd(day i-1 returns)` and its episodes
/// normalized by the same sigma. Days without a usable previous-day sigma
/// (the first day, or one following a flat day) are skipped and counted.
pub fn extract_across_days(
    days: &[(String, Vec<f64>)],
    epsilon: f64,
) -> Result<CrossDayExtraction> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let mut out_days = Vec::new();
    let mut skipped = 0;
    for (i, (day, returns)) in days.iter().enumerate() {
        let previous_sigma = if i == 0 {
            None
        } else {
            Some(return_sd(&days[i - 1].1)).filter(|s| *s > 0.0)
        };
        let Some(sigma) = previous_sigma else {
            skipped += 1;
            continue;
        };
        let config = EpsilonConfig::new(epsilon, sigma)?;
        let mut episodes = extract_episodes(returns, &config);
        for episode in &mut episodes {
            episode.normalized_size = Some(episode.size.abs() / sigma);
        }
        out_days.push(DayEpisodes {
            day: day.clone(),
            episodes,
            sigma: return_sd(returns),
            n_returns: returns.len(),
        });
    }
    Ok(CrossDayExtraction { days: out_days, skipped_days: skipped })
}
