//! Oracles for the Monte-Carlo calibration layer: the DK table against its
//! closed-form law, p-value uniformity, worker-count independence, marginal
//! level bounds, and null behavior of the procedures.

use dragonking_core::calibration::{
    calibrate_outward_b, NullTable, OutwardCalibrator, TableSource, TableStore,
};
use dragonking_core::procedures::{
    block_test, inward_test, tail_sweep, SweepProcedure,
};
use dragonking_core::rng::{std_exponential, stream_rng};
use dragonking_core::statistics::dk_p_value;
use dragonking_core::{OrderedSample, StatisticKind, StatisticSpec};

fn exp_sample(n: usize, seed: u64, stream: u64) -> OrderedSample {
    let mut rng = stream_rng(seed, stream);
    OrderedSample::new((0..n).map(|_| std_exponential(&mut rng)).collect()).unwrap()
}

#[test]
fn dk_table_quantiles_match_the_f_law() {
    let (r, n) = (1, 20);
    let spec = StatisticSpec::dk(r).unwrap();
    let table = NullTable::build(&spec, n, 50_000, 0xDCAF).unwrap();
    // Invert: the q-quantile of the statistic should solve
    // dk_p_value(t) = 1 - q.
    for q in [0.5, 0.9, 0.95, 0.99] {
        let idx = ((q * 50_000f64) as usize).min(49_999);
        let empirical = table.values()[idx];
        let p = dk_p_value(empirical, r, n).unwrap();
        assert!(
            ((1.0 - p) - q).abs() < 0.01,
            "quantile {q}: statistic {empirical}, implied cdf {}",
            1.0 - p
        );
    }
}

#[test]
fn null_p_values_are_uniform_for_every_statistic_kind() {
    let n = 20;
    let fresh_draws = 5000;
    let specs = [
        StatisticSpec::ss(2).unwrap(),
        StatisticSpec::srs(2, 3).unwrap(),
        StatisticSpec::ms(2).unwrap(),
        StatisticSpec::mrs(2, 3).unwrap(),
        StatisticSpec::dixon(2).unwrap(),
        StatisticSpec::dk(2).unwrap(),
    ];
    for (si, spec) in specs.iter().enumerate() {
        let table = NullTable::build(spec, n, 20_000, 0x0F1D + si as u64).unwrap();
        let mut p_values: Vec<f64> = (0..fresh_draws)
            .map(|i| {
                let sample = exp_sample(n, 0xFE5A + si as u64, i as u64);
                let stat = dragonking_core::statistics::compute_statistic(spec, &sample)
                    .unwrap();
                table.p_value(stat)
            })
            .collect();
        p_values.sort_unstable_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &p) in p_values.iter().enumerate() {
            let lo = i as f64 / fresh_draws as f64;
            let hi = (i + 1) as f64 / fresh_draws as f64;
            d = d.max((p - lo).abs()).max((hi - p).abs());
        }
        assert!(d < 0.02, "{}: KS distance to uniform {d}", spec.kind);
    }
}

#[test]
fn tables_do_not_depend_on_the_worker_count() {
    let spec = StatisticSpec::srs(2, 4).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| NullTable::build(&spec, 15, 4000, 77).unwrap());
    let parallel = NullTable::build(&spec, 15, 4000, 77).unwrap();
    assert_eq!(single.values(), parallel.values());
}

#[test]
fn calibrated_marginal_level_is_in_bounds_and_trace_is_monotone() {
    let store = TableStore::new(20_000, 0xCA11);
    let result = calibrate_outward_b(
        StatisticKind::Ms,
        30,
        5,
        5,
        0.1,
        10_000,
        0xB0B,
        0.005,
        &store,
    )
    .unwrap();
    assert!(result.b >= 0.1f64.powi(5) && result.b <= 0.1, "b = {}", result.b);
    assert!((result.achieved_a - 0.1).abs() <= 0.005);
    // Reference value for this cell is near 0.028.
    assert!((result.b - 0.028).abs() <= 0.01, "b = {}", result.b);

    let mut probes = result.trace.clone();
    probes.sort_by(|a, b| a.b.total_cmp(&b.b));
    for pair in probes.windows(2) {
        assert!(
            pair[1].achieved_a >= pair[0].achieved_a,
            "achieved level not monotone in b"
        );
    }
}

#[test]
fn block_test_holds_its_level_under_the_null() {
    let store = TableStore::new(20_000, 0xB10C);
    let spec = StatisticSpec::srs(3, 3).unwrap();
    let trials = 2000;
    let rejections = (0..trials)
        .filter(|&i| {
            let sample = exp_sample(25, 0xE0E0, i as u64);
            block_test(&sample, &spec, 0.1, &store).unwrap().rejected
        })
        .count();
    let rate = rejections as f64 / trials as f64;
    assert!((0.08..=0.12).contains(&rate), "null rejection rate {rate}");
}

#[test]
fn inward_null_rejection_rate_equals_the_marginal_level() {
    let store = TableStore::new(20_000, 0x13A7);
    let (n, m, level) = (50, 10, 0.1);
    let trials = 3000;
    let rejections = (0..trials)
        .filter(|&i| {
            let sample = exp_sample(n, 0xA11E, i as u64);
            inward_test(&sample, StatisticKind::Mrs, m, level, &store)
                .unwrap()
                .rejected()
        })
        .count();
    let rate = rejections as f64 / trials as f64;
    assert!(
        (rate - level).abs() <= 0.02,
        "inward null rate {rate} vs marginal level {level}"
    );
}

#[test]
fn sweep_run_rule_keeps_the_null_verdict_rate_low() {
    let store = TableStore::new(10_000, 0x51EE);
    let calibrator = OutwardCalibrator::new(1000, 1);
    let procedure = SweepProcedure::Inward { kind: StatisticKind::Mrs, m: 5 };
    let trials = 400;
    let verdicts = (0..trials)
        .filter(|&i| {
            let sample = exp_sample(50, 0x0DD5, i as u64);
            tail_sweep(&sample, 10, 50, &procedure, 0.1, &store, &calibrator)
                .unwrap()
                .verdict
        })
        .count();
    let rate = verdicts as f64 / trials as f64;
    assert!(rate <= 0.15, "null sweep verdict rate {rate}");
}

#[test]
fn store_reports_cache_hits_across_calibrations() {
    let store = TableStore::new(2000, 3);
    let spec = StatisticSpec::ms(1).unwrap();
    store.table(&spec, 12).unwrap();
    let (mem0, _, builds0) = store.stats();
    assert_eq!((mem0, builds0), (0, 1));
    for _ in 0..3 {
        store.table(&spec, 12).unwrap();
    }
    let (mem, _, builds) = store.stats();
    assert_eq!((mem, builds), (3, 1));
}
