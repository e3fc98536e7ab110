//! Regenerates the synthetic datasets bundled under `data/`.
//!
//! Usage: `cargo run -p dragonking-core --example make_fixtures [out_dir]`
//!
//! Everything is seeded, so the files are reproducible byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use dragonking_core::distributions::{ExponentialParams, NormalParams, ParetoParams};
use dragonking_core::rng::{std_exponential, stream_rng};
use rand::Rng;

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).expect("write fixture");
    println!("wrote {}", path.display());
}

/// Pareto sample with a handful of shifted outliers beyond the tail:
/// exercise the tail sweep.
fn pareto_with_outliers(dir: &Path) {
    let mut rng = stream_rng(0xF1C5, 1);
    let mut log_values: Vec<f64> = (0..1495).map(|_| std_exponential(&mut rng) / 4.5).collect();
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..5 {
        log_values.push(max + 0.3 + std_exponential(&mut rng) / 1.5);
    }
    let mut out = String::from("drawdown\n");
    for v in log_values {
        writeln!(out, "{:.6}", v.exp()).unwrap();
    }
    write(&dir.join("pareto_outliers.csv"), &out);
}

/// Two-regime tail: a steep layer between 1.97 and 4.45 and a shallower
/// one above, sized like a whitened-returns tail.
fn two_regime(dir: &Path) {
    let mut rng = stream_rng(0xF1C5, 118);
    let mut values = Vec::with_capacity(200);
    let (alpha_low, a, b) = (3.8, 1.97, 4.45);
    let mass = 1.0 - (a / b as f64).powf(alpha_low);
    for _ in 0..193 {
        let u: f64 = rng.random::<f64>() * mass;
        values.push(a * (1.0 - u).powf(-1.0 / alpha_low));
    }
    let tail = ParetoParams::new(1.8, b).unwrap();
    for _ in 0..7 {
        values.push(tail.draw(&mut rng));
    }
    let mut out = String::from("magnitude\n");
    for v in values {
        writeln!(out, "{:.6}", v).unwrap();
    }
    write(&dir.join("returns_two_regime.csv"), &out);
}

/// A small heavy-tail-plus-cluster sample shaped like a log-scale severity
/// measure: exercises the mixture classifier.
fn severity_cluster(dir: &Path) {
    let mut rng = stream_rng(0xF1C5, 3);
    let bulk = ExponentialParams::new(0.8, 0.0).unwrap();
    let cluster = NormalParams::new(7.7, 0.3).unwrap();
    let mut values: Vec<f64> = (0..11).map(|_| bulk.draw(&mut rng)).collect();
    for _ in 0..4 {
        values.push(cluster.draw(&mut rng));
    }
    let mut out = String::from("severity\n");
    for v in values {
        writeln!(out, "{:.4}", v).unwrap();
    }
    write(&dir.join("severity_cluster.csv"), &out);
}

/// Four synthetic sessions of 30-second prices; day 3 carries a crash run
/// an order of magnitude beyond the ordinary moves.
fn intraday_prices(dir: &Path) {
    let mut rng = stream_rng(0xF1C5, 4);
    let mut out = String::from("timestamp,price,day\n");
    for day in 1..=4 {
        let mut price = 100.0 + 5.0 * day as f64;
        let sigma = 0.0008;
        for bar in 0..780 {
            let t = bar as f64 * 30.0;
            let z: f64 = {
                // sum of uniforms is close enough to Gaussian for noise
                let mut s = 0.0;
                for _ in 0..12 {
                    s += rng.random::<f64>();
                }
                s - 6.0
            };
            let mut ret = sigma * z;
            if day == 3 && (300..318).contains(&bar) {
                ret -= 0.004; // the crash run
            }
            price *= (ret as f64).exp();
            writeln!(out, "{t},{price:.5},day{day}").unwrap();
        }
    }
    write(&dir.join("intraday_prices.csv"), &out);
}

fn main() {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let dir = Path::new(&out_dir);
    std::fs::create_dir_all(dir).expect("create output dir");
    pareto_with_outliers(dir);
    two_regime(dir);
    severity_cluster(dir);
    intraday_prices(dir);
}
