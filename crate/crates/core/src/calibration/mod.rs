//! Monte-Carlo null distributions of test statistics under Exp(1), and
//! calibration of outward-test marginal levels.
//!
//! With the exception of the DK statistic, none of the test statistics has a
//! usable closed-form null df, so p-values are referred to empirical tables:
//! a [`NullTable`] holds the sorted draws of one statistic over independent
//! Exp(1) samples of a fixed size. Replicate `i` always draws from RNG
//! stream `i` of the table seed and draws are sorted once at the end, so a
//! table is a pure function of `(spec, n, replicates, seed)` no matter how
//! the work is scheduled. [`TableStore`] memoizes tables in memory and,
//! optionally, on disk (see [`cache`] for the file layout).
//!
//! An outward sequential test rejects when any of its `r` marginal tests
//! rejects, so its marginal level `b` must sit below the desired overall
//! level `a`; dependence between the marginal statistics puts `b` somewhere
//! in `[a^r, a]`. [`calibrate_outward_b`] locates it by monotone bisection
//! against the simulated overall rejection rate.

mod cache;

pub(crate) use cache::{
    read_table as read_cached_table, write_table as write_cached_table, TableHeader,
    MIXTURE_LRT_CODE,
};

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::rng::{mix_seed, std_exponential, stream_rng};
use crate::statistics::{compute_on_sorted, StatisticKind, StatisticSpec};
use crate::{Error, Result};

/// Sorted Monte-Carlo draws of one statistic under the Exp(1) null.
#[derive(Debug, Clone, Serialize)]
pub struct NullTable {
    pub spec: StatisticSpec,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Ascending statistic draws, one per replicate.
    values: Vec<f64>,
}

impl NullTable {
    /// Simulates `replicates` draws of `spec` on Exp(1) samples of size `n`.
    ///
    /// Deterministic for a fixed seed regardless of worker count.
    pub fn build(
        spec: &StatisticSpec,
        n: usize,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        spec.validate_for(n)?;
        if replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        let mut values = (0..replicates)
            .into_par_iter()
            .with_min_len(128)
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let mut sample: Vec<f64> = (0..n).map(|_| std_exponential(&mut rng)).collect();
                sample.sort_unstable_by(|a, b| b.total_cmp(a));
                compute_on_sorted(spec, &sample)
            })
            .collect::<Result<Vec<f64>>>()?;
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { spec: *spec, n, replicates, seed, values })
    }

    pub(crate) fn from_parts(
        spec: StatisticSpec,
        n: usize,
        replicates: usize,
        seed: u64,
        values: Vec<f64>,
    ) -> Self {
        Self { spec, n, replicates, seed, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right-tail Monte-Carlo p-value with the plus-one correction:
    /// `(1 + #{draws >= observed}) / (replicates + 1)`.
    ///
    /// The correction keeps p-values valid (if slightly conservative) for
    /// finite tables: under the null the reported p is stochastically no
    /// smaller than uniform.
    pub fn p_value(&self, observed: f64) -> f64 {
        let below = self
            .values
            .partition_point(|v| v.total_cmp(&observed).is_lt());
        let ge = self.replicates - below;
        (1 + ge) as f64 / (self.replicates + 1) as f64
    }

    /// Smallest tabled value whose [`p_value`](Self::p_value) is at or below
    /// `level`, so that `p_value(critical_value(level)) <= level` holds.
    pub fn critical_value(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "level must be in (0, 1), got {level}"
            )));
        }
        if level * (self.replicates as f64) < 1.0 {
            return Err(Error::Resolution { level, replicates: self.replicates });
        }
        let idx = self
            .values
            .partition_point(|v| self.p_value(*v) > level);
        match self.values.get(idx) {
            Some(v) => Ok(*v),
            None => Err(Error::Resolution { level, replicates: self.replicates }),
        }
    }
}

/// Anything that can hand out null tables; lets procedures stay agnostic of
/// where tables come from (fresh builds, memory, or disk).
pub trait TableSource: Sync {
    fn table(&self, spec: &StatisticSpec, n: usize) -> Result<Arc<NullTable>>;
}

/// Memoizing table source.
///
/// Every distinct `(spec, n)` builds with its own seed, derived from the
/// master seed and the full cache key, so any subset of tables can be
/// rebuilt independently and reproducibly. The optional directory persists
/// tables across processes with write-temp-then-rename publication; the
/// in-memory map supports concurrent readers within one process.
pub struct TableStore {
    replicates: usize,
    master_seed: u64,
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<(StatisticSpec, usize), Arc<NullTable>>>,
    memory_hits: AtomicUsize,
    disk_hits: AtomicUsize,
    builds: AtomicUsize,
}

/// Default table size; heavy but affordable, and fine enough to resolve
/// marginal levels around 0.02.
pub const DEFAULT_TABLE_REPLICATES: usize = 50_000;

impl TableStore {
    pub fn new(replicates: usize, master_seed: u64) -> Self {
        Self {
            replicates,
            master_seed,
            dir: None,
            mem: Mutex::new(HashMap::new()),
            memory_hits: AtomicUsize::new(0),
            disk_hits: AtomicUsize::new(0),
            builds: AtomicUsize::new(0),
        }
    }

    pub fn with_cache_dir(mut self, dir: PathBuf) -> Self {
        self.dir = Some(dir);
        self
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// (memory hits, disk hits, fresh builds) so far.
    pub fn stats(&self) -> (usize, usize, usize) {
        (
            self.memory_hits.load(Ordering::Relaxed),
            self.disk_hits.load(Ordering::Relaxed),
            self.builds.load(Ordering::Relaxed),
        )
    }

    /// Seed for the table of `(spec, n)`: a hash chain over the cache key.
    pub fn table_seed(&self, spec: &StatisticSpec, n: usize) -> u64 {
        let header = TableHeader::for_spec(spec, n, self.replicates, 0);
        let mut s = mix_seed(self.master_seed, cache::FORMAT_VERSION as u64);
        s = mix_seed(s, header.kind_code as u64);
        s = mix_seed(s, header.r as u64);
        s = mix_seed(s, header.j as u64);
        s = mix_seed(s, header.m as u64);
        s = mix_seed(s, n as u64);
        mix_seed(s, self.replicates as u64)
    }

    fn load_from_disk(&self, spec: &StatisticSpec, n: usize, seed: u64) -> Option<NullTable> {
        let dir = self.dir.as_ref()?;
        let header = TableHeader::for_spec(spec, n, self.replicates, seed);
        let path = dir.join(header.file_name());
        if !path.exists() {
            return None;
        }
        match cache::read_table(&path) {
            Ok((read_header, values)) if read_header == header => Some(
                NullTable::from_parts(*spec, n, self.replicates, seed, values),
            ),
            // A mismatched or unreadable file is treated as a miss; the
            // rebuilt table will overwrite it.
            _ => None,
        }
    }
}

impl TableSource for TableStore {
    fn table(&self, spec: &StatisticSpec, n: usize) -> Result<Arc<NullTable>> {
        let key = (*spec, n);
        if let Some(hit) = self.mem.lock().unwrap().get(&key) {
            self.memory_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(hit));
        }

        let seed = self.table_seed(spec, n);
        let table = if let Some(table) = self.load_from_disk(spec, n, seed) {
            self.disk_hits.fetch_add(1, Ordering::Relaxed);
            Arc::new(table)
        } else {
            let built = NullTable::build(spec, n, self.replicates, seed)?;
            self.builds.fetch_add(1, Ordering::Relaxed);
            if let Some(dir) = &self.dir {
                let header = TableHeader::for_spec(spec, n, self.replicates, seed);
                cache::write_table(dir, &header, built.values())?;
            }
            Arc::new(built)
        };

        let mut mem = self.mem.lock().unwrap();
        let entry = mem.entry(key).or_insert_with(|| Arc::clone(&table));
        Ok(Arc::clone(entry))
    }
}

/// The statistic tested at rank `j` of an outward (or inward) walk.
pub fn spec_for_rank(kind: StatisticKind, j: usize, m: Option<usize>) -> Result<StatisticSpec> {
    match kind {
        StatisticKind::Ss => StatisticSpec::ss(j),
        StatisticKind::Ms => StatisticSpec::ms(j),
        StatisticKind::D => StatisticSpec::dixon(j),
        StatisticKind::Dk => StatisticSpec::dk(j),
        StatisticKind::Srs => StatisticSpec::srs(
            j,
            m.ok_or_else(|| Error::InvalidParameter("SRS needs a trim m".into()))?,
        ),
        StatisticKind::Mrs => StatisticSpec::mrs(
            j,
            m.ok_or_else(|| Error::InvalidParameter("MRS needs a trim m".into()))?,
        ),
    }
}

/// One probe of the marginal level during calibration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationPoint {
    pub b: f64,
    pub achieved_a: f64,
}

/// A calibrated outward marginal level.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalLevelResult {
    pub kind: StatisticKind,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub target_a: f64,
    /// Marginal level for each of the r outward tests.
    pub b: f64,
    /// Overall null rejection rate measured at `b`.
    pub achieved_a: f64,
    pub replicates: usize,
    pub seed: u64,
    pub trace: Vec<CalibrationPoint>,
}

/// Default number of null samples for measuring the overall outward level.
pub const DEFAULT_CALIBRATION_REPLICATES: usize = 10_000;
/// Default stopping tolerance on the achieved overall level.
pub const DEFAULT_CALIBRATION_TOLERANCE: f64 = 0.005;

/// Finds the marginal level `b` at which the outward procedure with `r`
/// ranks has overall null rejection rate `target_a`.
///
/// The outward procedure rejects exactly when the smallest of its `r`
/// marginal p-values is at or below `b`, so the measured level at any `b`
/// is the empirical CDF of per-sample minimum p-values; those are simulated
/// once and the bisection walks the monotone bracket `[a^r, a]` until the
/// achieved level is within `tolerance` of the target.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_outward_b(
    kind: StatisticKind,
    n: usize,
    r: usize,
    m: usize,
    target_a: f64,
    replicates: usize,
    seed: u64,
    tolerance: f64,
    source: &dyn TableSource,
) -> Result<MarginalLevelResult> {
    if !(target_a > 0.0 && target_a < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "overall level must be in (0, 1), got {target_a}"
        )));
    }
    if r == 0 || r > m || m >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= r <= m < n, got r = {r}, m = {m}, n = {n}"
        )));
    }

    // A single marginal test is the overall test: no correction to find.
    if r == 1 {
        return Ok(MarginalLevelResult {
            kind,
            n,
            r,
            m,
            target_a,
            b: target_a,
            achieved_a: target_a,
            replicates,
            seed,
            trace: vec![CalibrationPoint { b: target_a, achieved_a: target_a }],
        });
    }

    let trim = kind.uses_trim().then_some(m);
    let mut specs = Vec::with_capacity(r);
    let mut tables = Vec::with_capacity(r);
    for j in 1..=r {
        let spec = spec_for_rank(kind, j, trim)?;
        spec.validate_for(n)?;
        tables.push(source.table(&spec, n)?);
        specs.push(spec);
    }

    let mut min_p = (0..replicates)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut sample: Vec<f64> = (0..n).map(|_| std_exponential(&mut rng)).collect();
            sample.sort_unstable_by(|a, b| b.total_cmp(a));
            let mut best = f64::INFINITY;
            for (spec, table) in specs.iter().zip(&tables) {
                let stat = compute_on_sorted(spec, &sample)?;
                best = best.min(table.p_value(stat));
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    min_p.sort_unstable_by(f64::total_cmp);

    let achieved_at = |b: f64| -> f64 {
        let count = min_p.partition_point(|p| p.total_cmp(&b).is_le());
        count as f64 / replicates as f64
    };

    let mut lo = target_a.powi(r as i32);
    let mut hi = target_a;
    let mut trace = Vec::new();
    let mut best = CalibrationPoint { b: f64::NAN, achieved_a: f64::INFINITY };
    for _ in 0..200 {
        let b = 0.5 * (lo + hi);
        let achieved_a = achieved_at(b);
        let point = CalibrationPoint { b, achieved_a };
        trace.push(point);
        if (achieved_a - target_a).abs() < (best.achieved_a - target_a).abs() {
            best = point;
        }
        if (achieved_a - target_a).abs() <= tolerance {
            return Ok(MarginalLevelResult {
                kind,
                n,
                r,
                m,
                target_a,
                b,
                achieved_a,
                replicates,
                seed,
                trace,
            });
        }
        if achieved_a < target_a {
            lo = b;
        } else {
            hi = b;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Err(Error::CalibrationTolerance {
        best_b: best.b,
        achieved: best.achieved_a,
        target: target_a,
    })
}

/// Memoizes calibrated marginal levels per `(kind, n, r, m, level)`.
pub struct OutwardCalibrator {
    replicates: usize,
    seed: u64,
    tolerance: f64,
    mem: Mutex<HashMap<(StatisticKind, usize, usize, usize, u64), Arc<MarginalLevelResult>>>,
}

impl OutwardCalibrator {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            tolerance: DEFAULT_CALIBRATION_TOLERANCE,
            mem: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn marginal_level(
        &self,
        kind: StatisticKind,
        n: usize,
        r: usize,
        m: usize,
        target_a: f64,
        source: &dyn TableSource,
    ) -> Result<Arc<MarginalLevelResult>> {
        let key = (kind, n, r, m, target_a.to_bits());
        if let Some(hit) = self.mem.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let seed = mix_seed(self.seed, mix_seed(key.4, (n * 1_000_003 + r * 1009 + m) as u64));
        let result = Arc::new(calibrate_outward_b(
            kind,
            n,
            r,
            m,
            target_a,
            self.replicates,
            seed,
            self.tolerance,
            source,
        )?);
        let mut mem = self.mem.lock().unwrap();
        let entry = mem.entry(key).or_insert_with(|| Arc::clone(&result));
        Ok(Arc::clone(entry))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_ms1() -> StatisticSpec {
        StatisticSpec::ms(1).unwrap()
    }

    #[test]
    fn tables_are_deterministic() {
        let spec = spec_ms1();
        let a = NullTable::build(&spec, 12, 400, 7).unwrap();
        let b = NullTable::build(&spec, 12, 400, 7).unwrap();
        assert_eq!(a.values(), b.values());
        let c = NullTable::build(&spec, 12, 400, 8).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn ms_at_n2_draws_live_in_open_half_interval() {
        // x1/(x1+x2) with x1 the larger of two positive draws is in (1/2, 1).
        let spec = spec_ms1();
        let table = NullTable::build(&spec, 2, 2000, 3).unwrap();
        assert!(table.values().iter().all(|v| *v > 0.5 && *v < 1.0));
    }

    #[test]
    fn p_value_extremes() {
        let table = NullTable::from_parts(spec_ms1(), 2, 999, 0, {
            let mut v: Vec<f64> = (1..=999).map(|i| i as f64).collect();
            v.sort_unstable_by(f64::total_cmp);
            v
        });
        assert_eq!(table.p_value(0.5), 1.0);
        assert_eq!(table.p_value(1e9), 1.0 / 1000.0);
        let median_p = table.p_value(500.0);
        assert!((median_p - 0.5).abs() <= 1.0 / 999.0);
    }

    #[test]
    fn critical_value_round_trip() {
        let table = NullTable::from_parts(
            spec_ms1(),
            2,
            1000,
            0,
            (1..=1000).map(|i| i as f64).collect(),
        );
        for level in [0.5, 0.1, 0.01] {
            let t = table.critical_value(level).unwrap();
            assert!(
                table.p_value(t) <= level,
                "level {level}: p({t}) = {} > {level}",
                table.p_value(t)
            );
            // And t is the smallest such tabled value.
            let idx = table.values().iter().position(|v| *v == t).unwrap();
            if idx > 0 {
                assert!(table.p_value(table.values()[idx - 1]) > level);
            }
        }
        assert!(table.critical_value(1e-5).is_err());
        assert!(table.critical_value(0.0).is_err());
    }

    #[test]
    fn store_memoizes_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let spec = spec_ms1();
        let store =
            TableStore::new(500, 11).with_cache_dir(dir.path().to_path_buf());
        let first = store.table(&spec, 8).unwrap();
        let again = store.table(&spec, 8).unwrap();
        assert!(Arc::ptr_eq(&first, &again));
        assert_eq!(store.stats(), (1, 0, 1));

        // A fresh store with the same seed loads the persisted file.
        let reloaded_store =
            TableStore::new(500, 11).with_cache_dir(dir.path().to_path_buf());
        let reloaded = reloaded_store.table(&spec, 8).unwrap();
        assert_eq!(reloaded.values(), first.values());
        assert_eq!(reloaded_store.stats(), (0, 1, 0));

        // Different master seed: different table.
        let other_store = TableStore::new(500, 12).with_cache_dir(dir.path().to_path_buf());
        let other = other_store.table(&spec, 8).unwrap();
        assert_ne!(other.values(), first.values());
    }

    #[test]
    fn calibration_r1_returns_the_target() {
        let store = TableStore::new(2000, 5);
        let result = calibrate_outward_b(
            StatisticKind::Ms,
            10,
            1,
            1,
            0.1,
            1000,
            9,
            0.005,
            &store,
        )
        .unwrap();
        assert_eq!(result.b, 0.1);
    }

    #[test]
    fn calibration_rejects_bad_arguments() {
        let store = TableStore::new(1000, 5);
        assert!(calibrate_outward_b(
            StatisticKind::Ms, 10, 5, 3, 0.1, 100, 0, 0.005, &store
        )
        .is_err());
        assert!(calibrate_outward_b(
            StatisticKind::Ms, 10, 2, 2, 1.5, 100, 0, 0.005, &store
        )
        .is_err());
    }
}
