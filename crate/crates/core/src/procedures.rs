//! Outlier testing procedures: block, inward sequential, outward
//! sequential, and the tail sweep with a consecutive-rejection rule.
//!
//! A block test fixes the suspected outlier count `r` a priori and decides
//! in one shot. The sequential procedures estimate the count:
//!
//! * The inward walk tests the current largest point, removes it on
//!   rejection, and stops at the first non-rejection. Its overall type-1
//!   error equals the marginal level (a rejection happens exactly when the
//!   first test rejects), so no correction is needed. Robust statistics
//!   keep the denominator pinned to the original bottom `n - m` points
//!   across steps so that suspected outliers never contaminate it.
//! * The outward walk tests ranks `r, r-1, ..., 1` and stops at the first
//!   rejection, which fixes the estimated count at that rank. Its marginal
//!   level must be calibrated down to hold the overall level (see
//!   [`crate::calibration`]).
//!
//! The tail sweep reruns a procedure over the top-`n` excess subsamples for
//! a range of `n` and only declares outliers after a long enough run of
//! consecutive rejections, which guards the verdict against picking the
//! single luckiest subsample size.

use serde::Serialize;

use crate::calibration::{spec_for_rank, MarginalLevelResult, OutwardCalibrator, TableSource};
use crate::sample::OrderedSample;
use crate::statistics::{compute_statistic, StatisticKind, StatisticSpec};
use crate::{Error, Result};

/// Outcome of a single block test.
#[derive(Debug, Clone, Serialize)]
pub struct BlockResult {
    pub spec: StatisticSpec,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub level: f64,
}

/// Runs the block test for the outliers pinned by `spec`.
pub fn block_test(
    sample: &OrderedSample,
    spec: &StatisticSpec,
    level: f64,
    source: &dyn TableSource,
) -> Result<BlockResult> {
    check_level(level)?;
    let statistic = compute_statistic(spec, sample)?;
    let table = source.table(spec, sample.n())?;
    let p_value = table.p_value(statistic);
    Ok(BlockResult {
        spec: *spec,
        statistic,
        p_value,
        // Ties at p == level reject, consistent with the plus-one p-value.
        rejected: p_value <= level,
        level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Inward,
    Outward,
}

/// One step of a sequential walk.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SequentialStep {
    /// The original-sample rank whose outlyingness this step decides.
    pub rank: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
}

/// Outcome of a sequential (inward or outward) test.
#[derive(Debug, Clone, Serialize)]
pub struct SequentialResult {
    pub direction: Direction,
    /// Estimated number of outliers.
    pub k_hat: usize,
    pub steps: Vec<SequentialStep>,
    /// Level each marginal test was held at.
    pub marginal_level: f64,
    /// Overall type-1 level of the procedure.
    pub overall_level: f64,
}

impl SequentialResult {
    pub fn rejected(&self) -> bool {
        self.k_hat > 0
    }
}

/// Inward sequential test with at most `m` removals.
///
/// Step `t` tests the largest remaining point of the `t`-th reduced sample
/// with the rank-1 statistic of `kind`. For the robust kinds the trim at
/// step `t` is `m - t + 1`, which keeps the denominator equal to the sum of
/// the original bottom `n - m` points at every step; each step is referred
/// to the null table for the current subsample size and trim.
pub fn inward_test(
    sample: &OrderedSample,
    kind: StatisticKind,
    m: usize,
    level: f64,
    source: &dyn TableSource,
) -> Result<SequentialResult> {
    check_level(level)?;
    let n = sample.n();
    if m == 0 {
        return Err(Error::InvalidParameter("inward test needs m >= 1".into()));
    }
    if n < m + 2 {
        return Err(Error::InsufficientSample(format!(
            "inward test with m = {m} needs n >= m + 2, got n = {n}"
        )));
    }

    let mut steps = Vec::new();
    let mut k_hat = 0;
    for t in 1..=m {
        let reduced = OrderedSample::from_sorted_desc(sample.values()[t - 1..].to_vec())?;
        let trim = kind.uses_trim().then_some(m - t + 1);
        let spec = spec_for_rank(kind, 1, trim)?;
        let table = source.table(&spec, reduced.n())?;
        let statistic = compute_statistic(&spec, &reduced)?;
        let p_value = table.p_value(statistic);
        let rejected = p_value <= level;
        steps.push(SequentialStep { rank: t, statistic, p_value, rejected });
        if !rejected {
            break;
        }
        k_hat = t;
    }

    Ok(SequentialResult {
        direction: Direction::Inward,
        k_hat,
        steps,
        marginal_level: level,
        overall_level: level,
    })
}

/// Outward sequential test for up to `r` outliers with robustness trim `m`.
///
/// Obtains the calibrated marginal level for `(kind, n, r, m, a)`, then
/// tests ranks `r` down to 1; the first rejection at rank `j` estimates `j`
/// outliers.
pub fn outward_test(
    sample: &OrderedSample,
    kind: StatisticKind,
    r: usize,
    m: usize,
    overall_level: f64,
    source: &dyn TableSource,
    calibrator: &OutwardCalibrator,
) -> Result<SequentialResult> {
    check_level(overall_level)?;
    let calibration =
        calibrator.marginal_level(kind, sample.n(), r, m, overall_level, source)?;
    outward_test_with_marginal(sample, kind, r, m, overall_level, &calibration, source)
}

/// Outward test against an already-calibrated marginal level.
pub fn outward_test_with_marginal(
    sample: &OrderedSample,
    kind: StatisticKind,
    r: usize,
    m: usize,
    overall_level: f64,
    calibration: &MarginalLevelResult,
    source: &dyn TableSource,
) -> Result<SequentialResult> {
    let n = sample.n();
    if r == 0 || r > m || m >= n {
        return Err(Error::InvalidParameter(format!(
            "outward test needs 1 <= r <= m < n, got r = {r}, m = {m}, n = {n}"
        )));
    }
    let b = calibration.b;
    let trim = kind.uses_trim().then_some(m);
    let mut steps = Vec::new();
    let mut k_hat = 0;
    for j in (1..=r).rev() {
        let spec = spec_for_rank(kind, j, trim)?;
        let table = source.table(&spec, n)?;
        let statistic = compute_statistic(&spec, sample)?;
        let p_value = table.p_value(statistic);
        let rejected = p_value <= b;
        steps.push(SequentialStep { rank: j, statistic, p_value, rejected });
        if rejected {
            k_hat = j;
            break;
        }
    }
    Ok(SequentialResult {
        direction: Direction::Outward,
        k_hat,
        steps,
        marginal_level: b,
        overall_level,
    })
}

/// Which procedure a tail sweep runs at each subsample size.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum SweepProcedure {
    Block { spec: StatisticSpec },
    Inward { kind: StatisticKind, m: usize },
    Outward { kind: StatisticKind, r: usize, m: usize },
}

/// Sweep outcome at one subsample size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepStep {
    pub n_tail: usize,
    pub k_hat: usize,
    /// p-value of the first (decision-relevant) marginal test.
    pub p_first_step: f64,
    pub rejected: bool,
    /// Shift subtracted from the top-`n` values (the next order statistic),
    /// 0 when the subsample is the full sample.
    pub threshold: f64,
}

/// Outcome of a tail sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub steps: Vec<SweepStep>,
    /// Length of the consecutive-rejection run required for a verdict.
    pub run_rule_c: usize,
    /// True when at least `run_rule_c` consecutive subsample sizes reject.
    pub verdict: bool,
}

/// Applies `procedure` to the top-`n` excess subsample for every `n` in
/// `[n_min, n_max]`.
///
/// Conditional on the next order statistic, the top-`n` excesses of an
/// Exponential sample are again Exponential, so each subsample is tested
/// against the plain size-`n` null tables. Outliers are declared only when
/// at least `c = ceil(n_max / 10)` consecutive subsample sizes reject,
/// which controls the type-1 error across the many dependent tests.
///
/// Sequential trims are clamped to what the subsample can support
/// (`m <= n - 2`), so a sweep configured with `m = 10` still runs at
/// `n_min = 10`.
pub fn tail_sweep(
    sample: &OrderedSample,
    n_min: usize,
    n_max: usize,
    procedure: &SweepProcedure,
    level: f64,
    source: &dyn TableSource,
    calibrator: &OutwardCalibrator,
) -> Result<SweepResult> {
    check_level(level)?;
    if n_min < 2 || n_min >= n_max || n_max > sample.n() {
        return Err(Error::InvalidParameter(format!(
            "tail sweep needs 2 <= n_min < n_max <= {}, got [{n_min}, {n_max}]",
            sample.n()
        )));
    }

    let run_rule_c = n_max.div_ceil(10);
    let mut steps = Vec::with_capacity(n_max - n_min + 1);
    for n_tail in n_min..=n_max {
        let threshold = if n_tail < sample.n() {
            sample.values()[n_tail]
        } else {
            0.0
        };
        let subsample = sample.top_excess(n_tail)?;
        let (k_hat, p_first, rejected) = match procedure {
            SweepProcedure::Block { spec } => {
                let result = block_test(&subsample, spec, level, source)?;
                let k = if result.rejected { spec.rank } else { 0 };
                (k, result.p_value, result.rejected)
            }
            SweepProcedure::Inward { kind, m } => {
                let m_eff = (*m).min(n_tail - 2).max(1);
                let result = inward_test(&subsample, *kind, m_eff, level, source)?;
                (result.k_hat, result.steps[0].p_value, result.rejected())
            }
            SweepProcedure::Outward { kind, r, m } => {
                let m_eff = (*m).min(n_tail - 2).max(1);
                let r_eff = (*r).min(m_eff);
                let result = outward_test(
                    &subsample, *kind, r_eff, m_eff, level, source, calibrator,
                )?;
                (result.k_hat, result.steps[0].p_value, result.rejected())
            }
        };
        steps.push(SweepStep {
            n_tail,
            k_hat,
            p_first_step: p_first,
            rejected,
            threshold,
        });
    }

    let mut run = 0usize;
    let mut longest = 0usize;
    for step in &steps {
        run = if step.rejected { run + 1 } else { 0 };
        longest = longest.max(run);
    }

    Ok(SweepResult { steps, run_rule_c, verdict: longest >= run_rule_c })
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    Ok(())
}
