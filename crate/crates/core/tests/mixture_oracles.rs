//! Simulation oracles for the mixture route: planted-cluster recovery and
//! the Monte-Carlo LRT's null level.

use dragonking_core::mixture::{
    classify_outliers, fit_mixture, mixture_lrt, MixtureConfig, MixtureLrtStore,
};
use dragonking_core::rng::{std_exponential, stream_rng};
use dragonking_core::studies::{generate_scenario, ScenarioKind, ScenarioSpec};
use dragonking_core::OrderedSample;

#[test]
fn em_recovers_a_planted_cluster_in_most_seeds() {
    // 45 Exp(1) inliers plus 5 outliers clustered at 8: the fit should put
    // the Gaussian component on the cluster nearly always.
    let spec = ScenarioSpec::new(
        ScenarioKind::ClusteredGaussian { k: 5, mu: 8.0, sigma: 0.1 },
        50,
    )
    .unwrap();
    let config = MixtureConfig::default();
    let seeds = 500;
    let mut exact_recoveries = 0;
    let mut mu_hits = 0;
    for i in 0..seeds {
        let mut rng = stream_rng(0xC105, i as u64);
        let (sample, planted) = generate_scenario(&spec, &mut rng).unwrap();
        let fit = fit_mixture(&sample, &config).unwrap();
        if (fit.params.mu - 8.0).abs() <= 0.2 {
            mu_hits += 1;
        }
        if classify_outliers(&fit, 0.5) == planted {
            exact_recoveries += 1;
        }
    }
    assert!(
        exact_recoveries as f64 >= 0.9 * seeds as f64,
        "exact recoveries: {exact_recoveries}/{seeds}"
    );
    assert!(
        mu_hits as f64 >= 0.9 * seeds as f64,
        "mu within 0.2 of 8: {mu_hits}/{seeds}"
    );
}

#[test]
fn mixture_lrt_holds_its_level_on_null_data() {
    let n = 50;
    let store = MixtureLrtStore::new(1000, 0x11A7);
    let table = store.table(n).unwrap();
    let config = MixtureConfig::default();
    let trials = 500;
    let rejections = (0..trials)
        .filter(|&i| {
            let mut rng = stream_rng(0x0BB1, i as u64);
            let sample =
                OrderedSample::new((0..n).map(|_| std_exponential(&mut rng)).collect())
                    .unwrap();
            let fit = fit_mixture(&sample, &config).unwrap();
            mixture_lrt(&sample, &fit, &table).unwrap() <= 0.1
        })
        .count();
    let rate = rejections as f64 / trials as f64;
    assert!((0.05..=0.16).contains(&rate), "null rejection rate {rate}");
}

#[test]
fn k_hat_tracks_the_mixture_weight_on_separated_fits() {
    let spec = ScenarioSpec::new(
        ScenarioKind::ClusteredGaussian { k: 4, mu: 9.0, sigma: 0.1 },
        40,
    )
    .unwrap();
    let config = MixtureConfig::default();
    for i in 0..50 {
        let mut rng = stream_rng(0x4B17, i);
        let (sample, _) = generate_scenario(&spec, &mut rng).unwrap();
        let fit = fit_mixture(&sample, &config).unwrap();
        if fit.converged && !fit.degenerate && fit.params.pi < 1.0 {
            let implied = sample.n() as f64 * (1.0 - fit.params.pi);
            assert!(
                (implied - fit.k_hat as f64).abs() <= 1.0 + 1e-9,
                "n(1 - pi) = {implied}, k_hat = {}",
                fit.k_hat
            );
        }
    }
}
