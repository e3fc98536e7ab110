//! Seeded simulation studies: power against planted outliers, masking and
//! swamping across block sizes, inward/outward/mixture comparison, and
//! sensitivity to misspecification of the Exponential null.
//!
//! Every study fans out over replications with one RNG stream per trial,
//! derives ground truth (the planted outlier identities) alongside each
//! sample, and aggregates rejection rates plus quartiles of the estimated
//! outlier count over rejecting runs. Reports are plain rows ready for CSV
//! or JSON emission.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{spec_for_rank, OutwardCalibrator, TableSource};
use crate::distributions::{
    ks_test_exponential, mle_exponential, weibull_vs_exponential_lrt, NormalParams,
    WeibullParams,
};
use crate::mixture::{fit_mixture, mixture_lrt, MixtureLrtStore};
use crate::procedures::{block_test, inward_test, outward_test_with_marginal};
use crate::rng::{mix_seed, std_exponential, stream_rng};
use crate::sample::OrderedSample;
use crate::statistics::StatisticKind;
use crate::{Error, Result};

/// How outliers are planted on top of the null sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScenarioKind {
    /// Pure Exp(1), no outliers.
    Null,
    /// One Gaussian outlier at `mu`.
    SingleGaussian { mu: f64, sigma: f64 },
    /// `k` outliers at `shift + Exp(rate)`: dispersed above a fixed level.
    DispersedFixedShift { k: usize, shift: f64, rate: f64 },
    /// `k` outliers at `max(inliers) + Exp(rate)`: dispersed above the
    /// largest inlier of the same draw.
    DispersedMaxShift { k: usize, rate: f64 },
    /// `k` Gaussian outliers clustered at `mu`.
    ClusteredGaussian { k: usize, mu: f64, sigma: f64 },
    /// Weibull(kappa, 1) bulk instead of Exp(1), no outliers.
    WeibullNull { kappa: f64 },
    /// Weibull bulk plus `k` max-shifted Exponential outliers.
    WeibullDispersed { kappa: f64, k: usize, rate: f64 },
}

impl ScenarioKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::Null => "null",
            ScenarioKind::SingleGaussian { .. } => "single_gaussian",
            ScenarioKind::DispersedFixedShift { .. } => "dispersed_fixed_shift",
            ScenarioKind::DispersedMaxShift { .. } => "dispersed_max_shift",
            ScenarioKind::ClusteredGaussian { .. } => "clustered_gaussian",
            ScenarioKind::WeibullNull { .. } => "weibull_null",
            ScenarioKind::WeibullDispersed { .. } => "weibull_dispersed",
        }
    }

    /// Number of planted outliers.
    pub fn k(&self) -> usize {
        match *self {
            ScenarioKind::Null | ScenarioKind::WeibullNull { .. } => 0,
            ScenarioKind::SingleGaussian { .. } => 1,
            ScenarioKind::DispersedFixedShift { k, .. }
            | ScenarioKind::DispersedMaxShift { k, .. }
            | ScenarioKind::ClusteredGaussian { k, .. }
            | ScenarioKind::WeibullDispersed { k, .. } => k,
        }
    }
}

/// A scenario with its sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, n: usize) -> Result<Self> {
        let k = kind.k();
        if k >= n {
            return Err(Error::InvalidParameter(format!(
                "scenario plants k = {k} outliers in a sample of n = {n}"
            )));
        }
        let ok = match kind {
            ScenarioKind::Null => true,
            ScenarioKind::SingleGaussian { sigma, .. }
            | ScenarioKind::ClusteredGaussian { sigma, .. } => sigma > 0.0,
            ScenarioKind::DispersedFixedShift { rate, .. }
            | ScenarioKind::DispersedMaxShift { rate, .. } => rate > 0.0,
            ScenarioKind::WeibullNull { kappa } => kappa > 0.0,
            ScenarioKind::WeibullDispersed { kappa, rate, .. } => kappa > 0.0 && rate > 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "scenario parameters out of domain: {kind:?}"
            )));
        }
        Ok(Self { kind, n })
    }
}

/// Draws one sample and the descending-order indices of its planted
/// outliers.
pub fn generate_scenario<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<(OrderedSample, Vec<usize>)> {
    let n = spec.n;
    let k = spec.kind.k();
    let n_inliers = n - k;

    let inliers: Vec<f64> = match spec.kind {
        ScenarioKind::WeibullNull { kappa } | ScenarioKind::WeibullDispersed { kappa, .. } => {
            let params = WeibullParams::new(kappa, 1.0)?;
            (0..n_inliers).map(|_| params.draw(rng)).collect()
        }
        _ => (0..n_inliers).map(|_| std_exponential(rng)).collect(),
    };

    let outliers: Vec<f64> = match spec.kind {
        ScenarioKind::Null | ScenarioKind::WeibullNull { .. } => Vec::new(),
        ScenarioKind::SingleGaussian { mu, sigma } => {
            vec![NormalParams::new(mu, sigma)?.draw(rng)]
        }
        ScenarioKind::ClusteredGaussian { k, mu, sigma } => {
            let params = NormalParams::new(mu, sigma)?;
            (0..k).map(|_| params.draw(rng)).collect()
        }
        ScenarioKind::DispersedFixedShift { k, shift, rate } => {
            (0..k).map(|_| shift + std_exponential(rng) / rate).collect()
        }
        ScenarioKind::DispersedMaxShift { k, rate }
        | ScenarioKind::WeibullDispersed { k, rate, .. } => {
            let max_inlier = inliers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..k).map(|_| max_inlier + std_exponential(rng) / rate).collect()
        }
    };

    let mut tagged: Vec<(f64, bool)> = inliers
        .into_iter()
        .map(|v| (v, false))
        .chain(outliers.into_iter().map(|v| (v, true)))
        .collect();
    tagged.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let planted = tagged
        .iter()
        .enumerate()
        .filter(|(_, (_, is_outlier))| *is_outlier)
        .map(|(i, _)| i)
        .collect();
    let sample = OrderedSample::from_sorted_desc(tagged.into_iter().map(|(v, _)| v).collect())?;
    Ok((sample, planted))
}

/// One aggregated grid cell of a study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub scenario: String,
    /// Varying grid parameter (contamination location, scale inflation,
    /// block size, or Weibull shape, depending on the study).
    pub parameter: f64,
    pub method: String,
    pub rejection_rate: f64,
    pub k_hat_q1: Option<f64>,
    pub k_hat_median: Option<f64>,
    pub k_hat_q3: Option<f64>,
}

/// A full study report; rows are one per grid point and method.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    pub rows: Vec<StudyRow>,
}

pub const STUDY_SCHEMA_VERSION: u32 = 1;

/// Inclusive (type-1) sample quantile: the smallest order statistic with at
/// least a fraction `p` of the data at or below it.
fn quantile_type1(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[idx - 1]
}

fn k_hat_quartiles(k_hats: &[usize]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if k_hats.is_empty() {
        return (None, None, None);
    }
    let mut sorted: Vec<f64> = k_hats.iter().map(|&k| k as f64).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    (
        Some(quantile_type1(&sorted, 0.25)),
        Some(quantile_type1(&sorted, 0.5)),
        Some(quantile_type1(&sorted, 0.75)),
    )
}

fn aggregate_row(
    scenario: String,
    parameter: f64,
    method: String,
    outcomes: &[(bool, Option<usize>)],
) -> StudyRow {
    let trials = outcomes.len();
    let rejections = outcomes.iter().filter(|(rejected, _)| *rejected).count();
    // Quartiles of the estimated count are conditional on rejection.
    let k_hats: Vec<usize> = outcomes
        .iter()
        .filter(|(rejected, _)| *rejected)
        .filter_map(|(_, k)| *k)
        .collect();
    let (q1, median, q3) = k_hat_quartiles(&k_hats);
    StudyRow {
        scenario,
        parameter,
        method,
        rejection_rate: rejections as f64 / trials as f64,
        k_hat_q1: q1,
        k_hat_median: median,
        k_hat_q3: q3,
    }
}

/// A grid point of a power study.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub scenario: ScenarioSpec,
    /// The grid's varying parameter, echoed into the report.
    pub parameter: f64,
}

/// Block-test methods for power and masking studies, with the mixture as
/// an optional extra competitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PowerMethod {
    /// Block test at `r = m = k` (the true outlier count; 1 under the null).
    Block(StatisticKind),
    /// Mixture LRT at the study level, counting responsibilities for k-hat.
    Mixture,
}

impl PowerMethod {
    fn label(&self) -> String {
        match self {
            PowerMethod::Block(kind) => kind.to_string(),
            PowerMethod::Mixture => "Mix".to_string(),
        }
    }
}

/// Rejection frequency of each method over a grid of scenarios.
pub fn power_study(
    methods: &[PowerMethod],
    grid: &[GridPoint],
    replications: usize,
    level: f64,
    seed: u64,
    tables: &dyn TableSource,
    mixture_nulls: &MixtureLrtStore,
) -> Result<StudyReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty scenario grid".into()));
    }
    let mut rows = Vec::new();
    for (gi, point) in grid.iter().enumerate() {
        let n = point.scenario.n;
        let k = point.scenario.kind.k().max(1);
        let needs_mixture = methods.iter().any(|m| matches!(m, PowerMethod::Mixture));
        let mixture_table = if needs_mixture {
            Some(mixture_nulls.table(n)?)
        } else {
            None
        };
        // Warm the table store outside the parallel region.
        for method in methods {
            if let PowerMethod::Block(kind) = method {
                let spec = spec_for_rank(*kind, k, kind.uses_trim().then_some(k))?;
                tables.table(&spec, n)?;
            }
        }
        let point_seed = mix_seed(seed, gi as u64);
        let outcomes = (0..replications)
            .into_par_iter()
            .with_min_len(16)
            .map(|trial| {
                let mut rng = stream_rng(point_seed, trial as u64);
                let (sample, _) = generate_scenario(&point.scenario, &mut rng)?;
                let mut per_method = Vec::with_capacity(methods.len());
                for method in methods {
                    let outcome = match method {
                        PowerMethod::Block(kind) => {
                            let spec =
                                spec_for_rank(*kind, k, kind.uses_trim().then_some(k))?;
                            let result = block_test(&sample, &spec, level, tables)?;
                            (result.rejected, None)
                        }
                        PowerMethod::Mixture => {
                            let table = mixture_table.as_ref().expect("prefetched");
                            let fit = fit_mixture(&sample, mixture_nulls.config())?;
                            let p = mixture_lrt(&sample, &fit, table)?;
                            (p <= level, Some(fit.k_hat))
                        }
                    };
                    per_method.push(outcome);
                }
                Ok(per_method)
            })
            .collect::<Result<Vec<_>>>()?;

        for (mi, method) in methods.iter().enumerate() {
            let method_outcomes: Vec<(bool, Option<usize>)> =
                outcomes.iter().map(|per| per[mi]).collect();
            rows.push(aggregate_row(
                point.scenario.kind.label().to_string(),
                point.parameter,
                method.label(),
                &method_outcomes,
            ));
        }
    }
    Ok(StudyReport {
        schema_version: STUDY_SCHEMA_VERSION,
        replications,
        level,
        seed,
        rows,
    })
}

/// Rejection frequency of block tests across a range of block sizes on one
/// fixed scenario; exposes swamping (block too large) and masking (block
/// too small) directly. Robust statistics keep their trim at the true
/// outlier count.
pub fn mask_swamp_study(
    kinds: &[StatisticKind],
    scenario: &ScenarioSpec,
    block_sizes: &[usize],
    replications: usize,
    level: f64,
    seed: u64,
    tables: &dyn TableSource,
) -> Result<StudyReport> {
    let k = scenario.kind.k();
    if k == 0 {
        return Err(Error::InvalidParameter(
            "masking/swamping study needs a scenario with planted outliers".into(),
        ));
    }
    let mut rows = Vec::new();
    for &b in block_sizes {
        for kind in kinds {
            let spec = spec_for_rank(*kind, b, kind.uses_trim().then_some(k))?;
            spec.validate_for(scenario.n)?;
            tables.table(&spec, scenario.n)?;
            let point_seed = mix_seed(seed, b as u64);
            let outcomes = (0..replications)
                .into_par_iter()
                .with_min_len(32)
                .map(|trial| {
                    let mut rng = stream_rng(point_seed, trial as u64);
                    let (sample, _) = generate_scenario(scenario, &mut rng)?;
                    let result = block_test(&sample, &spec, level, tables)?;
                    Ok((result.rejected, None))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(aggregate_row(
                scenario.kind.label().to_string(),
                b as f64,
                kind.to_string(),
                &outcomes,
            ));
        }
    }
    Ok(StudyReport {
        schema_version: STUDY_SCHEMA_VERSION,
        replications,
        level,
        seed,
        rows,
    })
}

/// Methods compared by [`sequential_comparison_study`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ComparisonMethod {
    Outward(StatisticKind),
    Inward(StatisticKind),
    Mixture,
    /// Block test handed the true outlier count (`r = m = k`, or 1 under
    /// the null); the benchmark the sequential procedures chase.
    Block(StatisticKind),
}

impl ComparisonMethod {
    pub fn label(&self) -> String {
        match self {
            ComparisonMethod::Outward(kind) => format!("{kind} Out"),
            ComparisonMethod::Inward(kind) => format!("{kind} In"),
            ComparisonMethod::Mixture => "Mix".to_string(),
            ComparisonMethod::Block(kind) => format!("{kind} Block"),
        }
    }
}

/// The method set used throughout the sequential comparison.
pub fn standard_comparison_methods() -> Vec<ComparisonMethod> {
    vec![
        ComparisonMethod::Outward(StatisticKind::Ms),
        ComparisonMethod::Outward(StatisticKind::Ss),
        ComparisonMethod::Outward(StatisticKind::Mrs),
        ComparisonMethod::Outward(StatisticKind::Srs),
        ComparisonMethod::Inward(StatisticKind::Mrs),
        ComparisonMethod::Mixture,
        ComparisonMethod::Block(StatisticKind::Srs),
    ]
}

/// The four standard cases at the studied sample sizes (50, 30, and 15).
///
/// Contamination placements: a single Gaussian outlier, a Gaussian cluster,
/// and Exponential shifts above the largest inlier, with locations chosen
/// per sample size.
pub fn standard_comparison_cases(n: usize) -> Result<Vec<ScenarioSpec>> {
    let sigma = 0.1;
    let (single_mu, cluster_mu, k) = match n {
        50 => (7.0, 5.0, 5),
        30 => (7.0, 5.0, 3),
        15 => (4.0, 4.0, 3),
        other => {
            return Err(Error::InvalidParameter(format!(
                "no standard cases for n = {other} (use 50, 30, or 15)"
            )))
        }
    };
    Ok(vec![
        ScenarioSpec::new(ScenarioKind::Null, n)?,
        ScenarioSpec::new(ScenarioKind::SingleGaussian { mu: single_mu, sigma }, n)?,
        ScenarioSpec::new(ScenarioKind::ClusteredGaussian { k, mu: cluster_mu, sigma }, n)?,
        ScenarioSpec::new(ScenarioKind::DispersedMaxShift { k, rate: 1.0 / 5.0 }, n)?,
    ])
}

/// Configuration of the sequential comparison.
#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub cases: Vec<ScenarioSpec>,
    /// Maximum outliers for the outward walk (also its trim).
    pub r: usize,
    /// Robustness trim / maximum removals for inward.
    pub m: usize,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    pub methods: Vec<ComparisonMethod>,
}

/// Rejection rate and estimated-count quartiles per case and method.
///
/// Every method sees the same sample within a trial. Outward marginal
/// levels are calibrated once per statistic family and shared by all
/// trials.
pub fn sequential_comparison_study(
    config: &ComparisonConfig,
    tables: &dyn TableSource,
    calibrator: &OutwardCalibrator,
    mixture_nulls: &MixtureLrtStore,
) -> Result<StudyReport> {
    let mut rows = Vec::new();
    for (ci, case) in config.cases.iter().enumerate() {
        let n = case.n;
        let k = case.kind.k();
        let needs_mixture = config
            .methods
            .iter()
            .any(|m| matches!(m, ComparisonMethod::Mixture));
        let mixture_table = if needs_mixture {
            Some(mixture_nulls.table(n)?)
        } else {
            None
        };

        // Calibrate and warm every table outside the trial loop.
        let mut calibrations = Vec::new();
        for method in &config.methods {
            match method {
                ComparisonMethod::Outward(kind) => {
                    let trim = kind.uses_trim().then_some(config.m);
                    for j in 1..=config.r {
                        tables.table(&spec_for_rank(*kind, j, trim)?, n)?;
                    }
                    calibrations.push(Some(calibrator.marginal_level(
                        *kind,
                        n,
                        config.r,
                        config.m,
                        config.level,
                        tables,
                    )?));
                }
                ComparisonMethod::Inward(kind) => {
                    for t in 1..=config.m {
                        let trim = kind.uses_trim().then_some(config.m - t + 1);
                        tables.table(&spec_for_rank(*kind, 1, trim)?, n - t + 1)?;
                    }
                    calibrations.push(None);
                }
                ComparisonMethod::Block(kind) => {
                    let r = k.max(1);
                    tables.table(&spec_for_rank(*kind, r, kind.uses_trim().then_some(r))?, n)?;
                    calibrations.push(None);
                }
                ComparisonMethod::Mixture => calibrations.push(None),
            }
        }

        let case_seed = mix_seed(config.seed, ci as u64);
        let outcomes = (0..config.replications)
            .into_par_iter()
            .with_min_len(8)
            .map(|trial| {
                let mut rng = stream_rng(case_seed, trial as u64);
                let (sample, _) = generate_scenario(case, &mut rng)?;
                let mut per_method = Vec::with_capacity(config.methods.len());
                for (mi, method) in config.methods.iter().enumerate() {
                    let outcome: (bool, Option<usize>) = match method {
                        ComparisonMethod::Outward(kind) => {
                            let calibration =
                                calibrations[mi].as_ref().expect("calibrated above");
                            let result = outward_test_with_marginal(
                                &sample,
                                *kind,
                                config.r,
                                config.m,
                                config.level,
                                calibration,
                                tables,
                            )?;
                            (result.rejected(), Some(result.k_hat))
                        }
                        ComparisonMethod::Inward(kind) => {
                            let result = inward_test(
                                &sample,
                                *kind,
                                config.m,
                                config.level,
                                tables,
                            )?;
                            (result.rejected(), Some(result.k_hat))
                        }
                        ComparisonMethod::Mixture => {
                            let table = mixture_table.as_ref().expect("prefetched");
                            let fit = fit_mixture(&sample, mixture_nulls.config())?;
                            let p = mixture_lrt(&sample, &fit, table)?;
                            (p <= config.level, Some(fit.k_hat))
                        }
                        ComparisonMethod::Block(kind) => {
                            let r = k.max(1);
                            let spec =
                                spec_for_rank(*kind, r, kind.uses_trim().then_some(r))?;
                            let result = block_test(&sample, &spec, config.level, tables)?;
                            (result.rejected, None)
                        }
                    };
                    per_method.push(outcome);
                }
                Ok(per_method)
            })
            .collect::<Result<Vec<_>>>()?;

        for (mi, method) in config.methods.iter().enumerate() {
            let method_outcomes: Vec<(bool, Option<usize>)> =
                outcomes.iter().map(|per| per[mi]).collect();
            rows.push(aggregate_row(
                case.kind.label().to_string(),
                k as f64,
                method.label(),
                &method_outcomes,
            ));
        }
    }
    Ok(StudyReport {
        schema_version: STUDY_SCHEMA_VERSION,
        replications: config.replications,
        level: config.level,
        seed: config.seed,
        rows,
    })
}

/// Configuration of the misspecification study.
#[derive(Debug, Clone)]
pub struct RobustnessConfig {
    pub kappa_grid: Vec<f64>,
    pub n: usize,
    /// Block size tested (and trim of the robust statistics).
    pub r: usize,
    /// Outliers planted in the power arm, at `max(bulk) + Exp(rate)`.
    pub k_outliers: usize,
    pub outlier_rate: f64,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            kappa_grid: (0..=10).map(|i| 0.5 + 0.1 * i as f64).collect(),
            n: 30,
            r: 3,
            k_outliers: 3,
            outlier_rate: 1.0 / 3.0,
            replications: 1000,
            level: 0.1,
            seed: 0,
        }
    }
}

/// False-positive and true-positive rates of the block tests when the bulk
/// is Weibull rather than Exponential, plus the power of two diagnostics
/// for catching the misspecification itself (the Weibull-vs-Exponential
/// LRT and a KS test against the fitted Exponential).
pub fn robustness_study(
    config: &RobustnessConfig,
    tables: &dyn TableSource,
) -> Result<StudyReport> {
    let kinds = [
        StatisticKind::Ss,
        StatisticKind::Srs,
        StatisticKind::Ms,
        StatisticKind::Mrs,
        StatisticKind::D,
        StatisticKind::Dk,
    ];
    // All six tables at (r, n) plus nothing else: the diagnostics are
    // table-free.
    for kind in kinds {
        let spec = spec_for_rank(kind, config.r, kind.uses_trim().then_some(config.r))?;
        spec.validate_for(config.n)?;
        tables.table(&spec, config.n)?;
    }

    let mut rows = Vec::new();
    for (ki, &kappa) in config.kappa_grid.iter().enumerate() {
        for planted in [false, true] {
            let scenario = if planted {
                ScenarioSpec::new(
                    ScenarioKind::WeibullDispersed {
                        kappa,
                        k: config.k_outliers,
                        rate: config.outlier_rate,
                    },
                    config.n,
                )?
            } else {
                ScenarioSpec::new(ScenarioKind::WeibullNull { kappa }, config.n)?
            };
            let arm_seed = mix_seed(config.seed, (ki * 2 + planted as usize) as u64);
            let outcomes = (0..config.replications)
                .into_par_iter()
                .with_min_len(16)
                .map(|trial| {
                    let mut rng = stream_rng(arm_seed, trial as u64);
                    let (sample, _) = generate_scenario(&scenario, &mut rng)?;
                    let mut per_method = Vec::with_capacity(kinds.len() + 2);
                    for kind in kinds {
                        let spec = spec_for_rank(
                            kind,
                            config.r,
                            kind.uses_trim().then_some(config.r),
                        )?;
                        let result = block_test(&sample, &spec, config.level, tables)?;
                        per_method.push((result.rejected, None));
                    }
                    let lrt_p = weibull_vs_exponential_lrt(&sample)?;
                    per_method.push((lrt_p <= config.level, None));
                    let fitted = mle_exponential(&sample, 0.0)?;
                    let ks = ks_test_exponential(&sample, &fitted)?;
                    per_method.push((ks.p_value <= config.level, None));
                    Ok(per_method)
                })
                .collect::<Result<Vec<Vec<(bool, Option<usize>)>>>>()?;

            let labels: Vec<String> = kinds
                .iter()
                .map(|k| k.to_string())
                .chain(["WeibullLRT".to_string(), "KS".to_string()])
                .collect();
            let scenario_label = scenario.kind.label().to_string();
            for (mi, label) in labels.into_iter().enumerate() {
                let method_outcomes: Vec<(bool, Option<usize>)> =
                    outcomes.iter().map(|per| per[mi]).collect();
                rows.push(aggregate_row(
                    scenario_label.clone(),
                    kappa,
                    label,
                    &method_outcomes,
                ));
            }
        }
    }
    Ok(StudyReport {
        schema_version: STUDY_SCHEMA_VERSION,
        replications: config.replications,
        level: config.level,
        seed: config.seed,
        rows,
    })
}

impl StudyReport {
    /// The row for `(scenario, method)` closest to `parameter`.
    pub fn row(&self, scenario: &str, method: &str, parameter: f64) -> Option<&StudyRow> {
        self.rows
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method)
            .min_by(|a, b| {
                (a.parameter - parameter)
                    .abs()
                    .total_cmp(&(b.parameter - parameter).abs())
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_scenario_plants_nothing() {
        let spec = ScenarioSpec::new(ScenarioKind::Null, 50).unwrap();
        let mut rng = stream_rng(1, 0);
        let (sample, planted) = generate_scenario(&spec, &mut rng).unwrap();
        assert_eq!(sample.n(), 50);
        assert!(planted.is_empty());
    }

    #[test]
    fn single_gaussian_plants_exactly_one() {
        let spec =
            ScenarioSpec::new(ScenarioKind::SingleGaussian { mu: 7.0, sigma: 0.1 }, 50)
                .unwrap();
        for stream in 0..20 {
            let mut rng = stream_rng(2, stream);
            let (sample, planted) = generate_scenario(&spec, &mut rng).unwrap();
            assert_eq!(planted.len(), 1);
            let value = sample.values()[planted[0]];
            assert!((value - 7.0).abs() < 1.0, "outlier at {value}");
        }
    }

    #[test]
    fn max_shifted_outliers_sit_above_every_inlier() {
        let spec = ScenarioSpec::new(
            ScenarioKind::DispersedMaxShift { k: 5, rate: 0.2 },
            50,
        )
        .unwrap();
        for stream in 0..20 {
            let mut rng = stream_rng(3, stream);
            let (_sample, planted) = generate_scenario(&spec, &mut rng).unwrap();
            // Above the largest inlier means they occupy the top 5 ranks.
            assert_eq!(planted, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn scenario_validation() {
        assert!(ScenarioSpec::new(
            ScenarioKind::ClusteredGaussian { k: 10, mu: 5.0, sigma: 0.1 },
            10
        )
        .is_err());
        assert!(ScenarioSpec::new(ScenarioKind::WeibullNull { kappa: 0.0 }, 10).is_err());
    }

    #[test]
    fn type1_quantiles_are_order_statistics() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type1(&sorted, 0.25), 1.0);
        assert_eq!(quantile_type1(&sorted, 0.5), 2.0);
        assert_eq!(quantile_type1(&sorted, 0.75), 3.0);
        assert_eq!(quantile_type1(&sorted, 1.0), 4.0);
    }

    #[test]
    fn standard_cases_cover_the_four_structures() {
        let cases = standard_comparison_cases(50).unwrap();
        let labels: Vec<&str> = cases.iter().map(|c| c.kind.label()).collect();
        assert_eq!(
            labels,
            vec!["null", "single_gaussian", "clustered_gaussian", "dispersed_max_shift"]
        );
        assert!(standard_comparison_cases(40).is_err());
    }

    #[test]
    fn study_reports_are_deterministic() {
        let tables = crate::calibration::TableStore::new(1000, 9);
        let mix = MixtureLrtStore::new(50, 9);
        let grid = [GridPoint {
            scenario: ScenarioSpec::new(
                ScenarioKind::SingleGaussian { mu: 8.0, sigma: 0.1 },
                20,
            )
            .unwrap(),
            parameter: 8.0,
        }];
        let methods = [
            PowerMethod::Block(StatisticKind::Ss),
            PowerMethod::Block(StatisticKind::D),
        ];
        let a = power_study(&methods, &grid, 200, 0.1, 4, &tables, &mix).unwrap();
        let b = power_study(&methods, &grid, 200, 0.1, 4, &tables, &mix).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.rejection_rate, rb.rejection_rate);
        }
        // A strong single outlier: SS should reject nearly always.
        assert!(a.rows[0].rejection_rate > 0.9);
    }
}
