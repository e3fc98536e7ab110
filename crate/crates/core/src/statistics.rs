//! Test statistics for upper outliers in an ordered sample.
//!
//! Every statistic compares the "outlyingness" of the suspected upper points
//! (numerator) against a dispersion measure over another subset of the data
//! (denominator). For `x_(1) >= ... >= x_(n)`:
//!
//! * `SS(r)   = sum_{i<=r} x_(i) / sum_{i<=n} x_(i)` — sum over sum.
//! * `SRS(r,m)= sum_{i<=r} x_(i) / sum_{i>m} x_(i)` — sum over a trimmed sum,
//!   robust to masking through the denominator.
//! * `MS(j)   = x_(j) / sum_{i>=j} x_(i)` — max over sum at rank `j`.
//! * `MRS(j,m)= x_(j) / sum_{i>m} x_(i)` — max over a trimmed sum.
//! * `D(r)    = x_(1) / x_(r+1)` — the Dixon ratio.
//! * `DK(r)   = sum_{i<=r} z_i / sum_{i>r} z_i` over the weighted spacings
//!   `z_i = i (x_(i) - x_(i+1))`, `z_n = n x_(n)`.
//!
//! Under an Exponential null the weighted spacings are iid Exponential, so
//! all six statistics are ancillary to the rate parameter: they are ratios
//! of degree-1 homogeneous forms and invariant under rescaling the sample.
//! The DK statistic is the one member with a closed-form null law: scaled by
//! `(n - r) / r` it is F-distributed with `(2r, 2(n - r))` degrees of
//! freedom. The others are referred to Monte-Carlo null tables (see
//! [`crate::calibration`]).

use serde::{Deserialize, Serialize};

use crate::sample::OrderedSample;
use crate::{Error, Result};

/// Which test statistic to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    /// Sum over sum.
    Ss,
    /// Sum over robust (trimmed) sum.
    Srs,
    /// Max over sum.
    Ms,
    /// Max over robust (trimmed) sum.
    Mrs,
    /// Dixon ratio of extreme order statistics.
    D,
    /// Weighted-spacing ratio.
    Dk,
}

impl StatisticKind {
    pub fn uses_trim(self) -> bool {
        matches!(self, StatisticKind::Srs | StatisticKind::Mrs)
    }

    /// Stable one-byte code used in cache keys and file headers.
    pub fn code(self) -> u8 {
        match self {
            StatisticKind::Ss => 0,
            StatisticKind::Srs => 1,
            StatisticKind::Ms => 2,
            StatisticKind::Mrs => 3,
            StatisticKind::D => 4,
            StatisticKind::Dk => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => StatisticKind::Ss,
            1 => StatisticKind::Srs,
            2 => StatisticKind::Ms,
            3 => StatisticKind::Mrs,
            4 => StatisticKind::D,
            5 => StatisticKind::Dk,
            _ => return None,
        })
    }
}

impl std::fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StatisticKind::Ss => "SS",
            StatisticKind::Srs => "SRS",
            StatisticKind::Ms => "MS",
            StatisticKind::Mrs => "MRS",
            StatisticKind::D => "D",
            StatisticKind::Dk => "DK",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(StatisticKind::Ss),
            "srs" => Ok(StatisticKind::Srs),
            "ms" => Ok(StatisticKind::Ms),
            "mrs" => Ok(StatisticKind::Mrs),
            "d" => Ok(StatisticKind::D),
            "dk" => Ok(StatisticKind::Dk),
            other => Err(Error::InvalidParameter(format!(
                "unknown statistic '{other}' (expected ss, srs, ms, mrs, d, dk)"
            ))),
        }
    }
}

/// A statistic plus its parameters: the key into null tables.
///
/// `rank` is the block size for SS/SRS/D/DK and the tested rank `j` for
/// MS/MRS. `trim` is the robustness value `m` (SRS/MRS only): the m largest
/// points are excluded from the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatisticSpec {
    pub kind: StatisticKind,
    pub rank: usize,
    pub trim: Option<usize>,
}

impl StatisticSpec {
    pub fn new(kind: StatisticKind, rank: usize, trim: Option<usize>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be >= 1".into()));
        }
        match (kind.uses_trim(), trim) {
            (true, Some(m)) if m >= 1 => Ok(Self { kind, rank, trim }),
            (true, _) => Err(Error::InvalidParameter(format!(
                "{kind} requires a trim m >= 1"
            ))),
            (false, None) => Ok(Self { kind, rank, trim: None }),
            (false, Some(_)) => Err(Error::InvalidParameter(format!(
                "{kind} does not take a trim"
            ))),
        }
    }

    pub fn ss(r: usize) -> Result<Self> {
        Self::new(StatisticKind::Ss, r, None)
    }

    pub fn srs(r: usize, m: usize) -> Result<Self> {
        Self::new(StatisticKind::Srs, r, Some(m))
    }

    pub fn ms(j: usize) -> Result<Self> {
        Self::new(StatisticKind::Ms, j, None)
    }

    pub fn mrs(j: usize, m: usize) -> Result<Self> {
        Self::new(StatisticKind::Mrs, j, Some(m))
    }

    pub fn dixon(r: usize) -> Result<Self> {
        Self::new(StatisticKind::D, r, None)
    }

    pub fn dk(r: usize) -> Result<Self> {
        Self::new(StatisticKind::Dk, r, None)
    }

    /// Checks that the spec can be evaluated on a sample of size `n`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::SpecMismatch { n, reason });
        match self.kind {
            StatisticKind::Ss | StatisticKind::Srs | StatisticKind::Dk => {
                if self.rank >= n {
                    return fail(format!("{} needs r < n, got r = {}", self.kind, self.rank));
                }
            }
            StatisticKind::Ms | StatisticKind::Mrs => {
                if self.rank >= n {
                    return fail(format!("{} needs j < n, got j = {}", self.kind, self.rank));
                }
            }
            StatisticKind::D => {
                if self.rank + 1 > n {
                    return fail(format!("D needs r + 1 <= n, got r = {}", self.rank));
                }
            }
        }
        if let Some(m) = self.trim {
            if m >= n {
                return fail(format!("{} needs m < n, got m = {m}", self.kind));
            }
        }
        Ok(())
    }

    /// Rank parameter under its conventional name for sum-type statistics.
    pub fn r(&self) -> usize {
        self.rank
    }
}

/// The weighted spacings `z_i = i (x_(i) - x_(i+1))`, `z_n = n x_(n)`.
///
/// They telescope back to the sample total: `sum z_i = sum x_(i)`. Under
/// Exp(α) data they are iid Exp(α) (the Rényi representation of spacings).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSpacings {
    pub z: Vec<f64>,
}

pub fn weighted_spacings(sample: &OrderedSample) -> WeightedSpacings {
    let x = sample.values();
    let n = x.len();
    let mut z = Vec::with_capacity(n);
    for i in 1..n {
        z.push(i as f64 * (x[i - 1] - x[i]));
    }
    z.push(n as f64 * x[n - 1]);
    WeightedSpacings { z }
}

/// Evaluates `spec` on `sample`.
///
/// The only value error beyond spec/size mismatch is an all-zero
/// denominator; samples may contain exact zeros.
pub fn compute_statistic(spec: &StatisticSpec, sample: &OrderedSample) -> Result<f64> {
    spec.validate_for(sample.n())?;
    compute_on_sorted(spec, sample.values())
}

/// Same as [`compute_statistic`] on a slice already sorted descending.
///
/// Used internally by procedures that walk reduced samples without
/// reallocating; callers must uphold the ordering.
pub(crate) fn compute_on_sorted(spec: &StatisticSpec, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let r = spec.rank;
    let value = match spec.kind {
        StatisticKind::Ss => {
            let num: f64 = x[..r].iter().sum();
            let den: f64 = x.iter().sum();
            ratio(num, den)?
        }
        StatisticKind::Srs => {
            let m = spec.trim.expect("validated");
            let num: f64 = x[..r].iter().sum();
            let den: f64 = x[m..].iter().sum();
            ratio(num, den)?
        }
        StatisticKind::Ms => {
            let den: f64 = x[r - 1..].iter().sum();
            ratio(x[r - 1], den)?
        }
        StatisticKind::Mrs => {
            let m = spec.trim.expect("validated");
            let den: f64 = x[m..].iter().sum();
            ratio(x[r - 1], den)?
        }
        StatisticKind::D => ratio(x[0], x[r])?,
        StatisticKind::Dk => {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 1..n {
                let z = i as f64 * (x[i - 1] - x[i]);
                if i <= r {
                    num += z;
                } else {
                    den += z;
                }
            }
            den += n as f64 * x[n - 1];
            ratio(num, den)?
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite(format!(
            "{} evaluated to a non-finite value",
            spec.kind
        )));
    }
    Ok(value)
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(num / den)
}

/// Closed-form p-value for the DK statistic.
///
/// Both spacing sums are Gamma variates under the null, so the
/// mean-scaled ratio `T (n - r) / r` follows `F_{2r, 2(n-r)}`; the raw
/// ratio itself does not for `r != n - r`. Returns the upper tail at the
/// scaled value.
pub fn dk_p_value(t: f64, r: usize, n: usize) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("statistic {t} < 0")));
    }
    if r == 0 || r >= n {
        return Err(Error::InvalidParameter(format!(
            "DK p-value needs 1 <= r < n, got r = {r}, n = {n}"
        )));
    }
    let scaled = t * (n - r) as f64 / r as f64;
    Ok(f_survival(2.0 * r as f64, 2.0 * (n - r) as f64, scaled))
}

/// Upper tail of the F distribution via the regularized incomplete beta
/// function: `P(F_{d1,d2} > x) = I_{d2/(d2 + d1 x)}(d2/2, d1/2)`.
pub(crate) fn f_survival(d1: f64, d2: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::beta::beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(values: &[f64]) -> OrderedSample {
        OrderedSample::new(values.to_vec()).unwrap()
    }

    #[test]
    fn weighted_spacings_hand_value() {
        let z = weighted_spacings(&sample(&[4.0, 2.0, 1.0, 1.0])).z;
        assert_eq!(z, vec![2.0, 2.0, 0.0, 4.0]);
    }

    #[test]
    fn weighted_spacings_single_point() {
        let z = weighted_spacings(&sample(&[3.5])).z;
        assert_eq!(z, vec![3.5]);
    }

    #[test]
    fn spacings_telescope_to_sample_total() {
        let s = sample(&[9.25, 4.0, 3.125, 0.5, 0.0]);
        let z = weighted_spacings(&s).z;
        let total: f64 = z.iter().sum();
        assert!((total - s.sum()).abs() < 1e-12 * s.sum().abs());
    }

    #[test]
    fn all_six_statistics_on_the_reference_sample() {
        let s = sample(&[4.0, 2.0, 1.0, 1.0]);
        let eval = |spec: StatisticSpec| compute_statistic(&spec, &s).unwrap();
        assert_eq!(eval(StatisticSpec::ss(2).unwrap()), 0.75);
        assert_eq!(eval(StatisticSpec::srs(2, 2).unwrap()), 3.0);
        assert_eq!(eval(StatisticSpec::ms(1).unwrap()), 0.5);
        assert_eq!(eval(StatisticSpec::ms(2).unwrap()), 0.5);
        assert_eq!(eval(StatisticSpec::mrs(1, 2).unwrap()), 2.0);
        assert_eq!(eval(StatisticSpec::dixon(2).unwrap()), 4.0);
        let dk = eval(StatisticSpec::dk(1).unwrap());
        assert!((dk - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ms_rank_one_equals_ss_rank_one() {
        let s = sample(&[7.0, 3.0, 2.0, 0.5, 0.25]);
        let ms = compute_statistic(&StatisticSpec::ms(1).unwrap(), &s).unwrap();
        let ss = compute_statistic(&StatisticSpec::ss(1).unwrap(), &s).unwrap();
        assert_eq!(ms, ss);
    }

    #[test]
    fn spec_size_validation() {
        let s = sample(&[4.0, 2.0, 1.0]);
        assert!(compute_statistic(&StatisticSpec::ss(3).unwrap(), &s).is_err());
        assert!(compute_statistic(&StatisticSpec::dixon(2).unwrap(), &s).is_ok());
        assert!(compute_statistic(&StatisticSpec::dixon(3).unwrap(), &s).is_err());
        assert!(compute_statistic(&StatisticSpec::srs(1, 3).unwrap(), &s).is_err());
    }

    #[test]
    fn zero_denominator_is_an_error_but_zero_values_are_fine() {
        let zeros_below = sample(&[5.0, 0.0, 0.0]);
        assert!(matches!(
            compute_statistic(&StatisticSpec::srs(1, 1).unwrap(), &zeros_below),
            Err(Error::DegenerateDenominator)
        ));
        let with_zero = sample(&[5.0, 1.0, 0.0]);
        let v = compute_statistic(&StatisticSpec::srs(1, 1).unwrap(), &with_zero).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn dk_p_value_hand_value() {
        // T = 1/3 with r = 1, n = 4 scales to 1; P(F_{2,6} > 1) = (4/3)^-3.
        let p = dk_p_value(1.0 / 3.0, 1, 4).unwrap();
        assert!((p - 27.0 / 64.0).abs() < 1e-12);
        assert_eq!(dk_p_value(0.0, 1, 4).unwrap(), 1.0);
    }

    #[test]
    fn dk_p_value_rejects_bad_arguments() {
        assert!(dk_p_value(-0.1, 1, 4).is_err());
        assert!(dk_p_value(1.0, 4, 4).is_err());
        assert!(dk_p_value(1.0, 0, 4).is_err());
    }

    #[test]
    fn statistic_kind_round_trips_through_strings_and_codes() {
        for kind in [
            StatisticKind::Ss,
            StatisticKind::Srs,
            StatisticKind::Ms,
            StatisticKind::Mrs,
            StatisticKind::D,
            StatisticKind::Dk,
        ] {
            assert_eq!(kind.to_string().parse::<StatisticKind>().unwrap(), kind);
            assert_eq!(StatisticKind::from_code(kind.code()), Some(kind));
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn specs_for(n: usize) -> Vec<StatisticSpec> {
            let r = 1 + n / 3;
            let m = 1 + n / 2;
            vec![
                StatisticSpec::ss(r).unwrap(),
                StatisticSpec::srs(r, m).unwrap(),
                StatisticSpec::ms(r).unwrap(),
                StatisticSpec::mrs(r, m).unwrap(),
                StatisticSpec::dixon(r).unwrap(),
                StatisticSpec::dk(r).unwrap(),
            ]
        }

        proptest! {
            #[test]
            fn scale_invariance(
                values in proptest::collection::vec(0.01f64..100.0, 4..40),
                scale in 0.001f64..1000.0,
            ) {
                let s = OrderedSample::new(values.clone()).unwrap();
                let scaled =
                    OrderedSample::new(values.iter().map(|v| v * scale).collect()).unwrap();
                for spec in specs_for(s.n()) {
                    let a = compute_statistic(&spec, &s).unwrap();
                    let b = compute_statistic(&spec, &scaled).unwrap();
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                }
            }

            #[test]
            fn spacings_sum_matches_sample_sum(
                values in proptest::collection::vec(0.0f64..50.0, 1..60),
            ) {
                let s = OrderedSample::new(values).unwrap();
                let z: f64 = weighted_spacings(&s).z.iter().sum();
                prop_assert!((z - s.sum()).abs() <= 1e-9 * s.sum().max(1.0));
            }

            #[test]
            fn ms1_is_ss1(values in proptest::collection::vec(0.01f64..100.0, 2..50)) {
                let s = OrderedSample::new(values).unwrap();
                let ms = compute_statistic(&StatisticSpec::ms(1).unwrap(), &s).unwrap();
                let ss = compute_statistic(&StatisticSpec::ss(1).unwrap(), &s).unwrap();
                prop_assert_eq!(ms, ss);
            }
        }
    }
}
