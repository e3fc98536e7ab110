//! Command implementations: resolve configuration, run the mapped library
//! operation, and wrap the result in a report envelope.

use std::time::Instant;

use serde_json::{json, Value};

use dragonking_core::calibration::{calibrate_outward_b, OutwardCalibrator, TableStore};
use dragonking_core::distributions::{
    empirical_ccdf, fit_layered_pareto, likelihood_ratio_test, mle_pareto, pareto_loglik,
    pareto_to_exp,
};
use dragonking_core::drawdowns::{extract_across_days, log_returns, EpisodeKind};
use dragonking_core::mixture::{classify_outliers, fit_mixture, mixture_lrt, MixtureLrtStore};
use dragonking_core::procedures::{block_test, inward_test, outward_test, tail_sweep, SweepProcedure};
use dragonking_core::studies::{
    mask_swamp_study, power_study, robustness_study, sequential_comparison_study,
    standard_comparison_cases, standard_comparison_methods, ComparisonConfig, GridPoint,
    PowerMethod, RobustnessConfig, ScenarioKind, ScenarioSpec,
};
use dragonking_core::{OrderedSample, StatisticKind, StatisticSpec};

use crate::cli::{CaseArg, Cli, Command, EpisodeKindArg, StudyArg, SweepProcArg};
use crate::error::CliError;
use crate::ingest::{ingest_prices, ingest_sample, IngestedSample};
use crate::report::{emit, CacheStats, Payload, ReportEnvelope};

fn build_spec(
    kind: StatisticKind,
    rank: usize,
    trim: Option<usize>,
) -> Result<StatisticSpec, CliError> {
    let trim = if kind.uses_trim() {
        Some(trim.unwrap_or(rank))
    } else {
        None
    };
    StatisticSpec::new(kind, rank, trim).map_err(CliError::from)
}

fn check_level(level: f64, flag: &str) -> Result<(), CliError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!(
            "{flag} must be in (0, 1), got {level}"
        )));
    }
    Ok(())
}

fn ingest_echo(ingested: &IngestedSample) -> Value {
    json!({
        "n": ingested.sample.n(),
        "rows_read": ingested.rows_read,
        "rows_skipped": ingested.rows_skipped,
        "rows_filtered": ingested.rows_filtered,
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    let seed = cli.seed.unwrap_or_else(rand::random::<u64>);
    let cache_dir = cli
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("DRAGONKING_CACHE_DIR").map(Into::into));
    if cli.replicates < 1000 {
        return Err(CliError::Usage(format!(
            "--replicates must be at least 1000, got {}",
            cli.replicates
        )));
    }

    let mut tables = TableStore::new(cli.replicates, seed);
    if let Some(dir) = &cache_dir {
        tables = tables.with_cache_dir(dir.clone());
    }

    let started = Instant::now();
    let (command_name, config, payload, mut warnings) =
        dispatch(&cli, seed, &tables, cache_dir.as_deref())?;

    let mut envelope = ReportEnvelope::new(command_name, config, seed);
    envelope.elapsed_ms = started.elapsed().as_millis();
    let (memory_hits, disk_hits, builds) = tables.stats();
    envelope.cache = Some(CacheStats { memory_hits, disk_hits, builds });
    envelope.payload = payload.to_json()?;
    envelope.warnings.append(&mut warnings);
    emit(&envelope, &payload, cli.format, cli.output.as_ref())
}

type Dispatched = (&'static str, Value, Payload, Vec<String>);

fn dispatch(
    cli: &Cli,
    seed: u64,
    tables: &TableStore,
    cache_dir: Option<&std::path::Path>,
) -> Result<Dispatched, CliError> {
    match &cli.command {
        Command::Test { stat, r, m, level, ingest } => {
            check_level(*level, "--level")?;
            let spec = build_spec(stat.kind(), *r, *m)?;
            let ingested = ingest_sample(ingest)?;
            let result = block_test(&ingested.sample, &spec, *level, tables)?;
            let config = json!({
                "stat": spec.kind.to_string(),
                "r": spec.rank,
                "m": spec.trim,
                "level": level,
                "replicates": cli.replicates,
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            Ok(("test", config, Payload::Block(result), ingested.warnings))
        }

        Command::Inward { stat, m, level, ingest } => {
            check_level(*level, "--level")?;
            let ingested = ingest_sample(ingest)?;
            let result = inward_test(&ingested.sample, stat.kind(), *m, *level, tables)?;
            let config = json!({
                "stat": stat.kind().to_string(),
                "m": m,
                "level": level,
                "replicates": cli.replicates,
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            Ok(("inward", config, Payload::Sequential(result), ingested.warnings))
        }

        Command::Outward { stat, r, m, a, cal_replicates, cal_tol, ingest } => {
            check_level(*a, "--a")?;
            let m = m.unwrap_or(*r);
            let ingested = ingest_sample(ingest)?;
            let calibrator =
                OutwardCalibrator::new(*cal_replicates, seed).with_tolerance(*cal_tol);
            let result = outward_test(
                &ingested.sample,
                stat.kind(),
                *r,
                m,
                *a,
                tables,
                &calibrator,
            )?;
            let config = json!({
                "stat": stat.kind().to_string(),
                "r": r,
                "m": m,
                "a": a,
                "cal_replicates": cal_replicates,
                "cal_tol": cal_tol,
                "replicates": cli.replicates,
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            Ok(("outward", config, Payload::Sequential(result), ingested.warnings))
        }

        Command::Sweep {
            procedure,
            stat,
            m,
            r,
            nmin,
            nmax,
            level,
            cal_replicates,
            ingest,
        } => {
            check_level(*level, "--level")?;
            let ingested = ingest_sample(ingest)?;
            let n = ingested.sample.n();
            let nmax_eff = (*nmax).min(n);
            if *nmin >= nmax_eff {
                return Err(CliError::Usage(format!(
                    "need --nmin < min(--nmax, sample size); got nmin = {nmin}, effective nmax = {nmax_eff}"
                )));
            }
            let proc = match procedure {
                SweepProcArg::Inward => SweepProcedure::Inward { kind: stat.kind(), m: *m },
                SweepProcArg::Outward => SweepProcedure::Outward {
                    kind: stat.kind(),
                    r: r.unwrap_or(*m),
                    m: *m,
                },
                SweepProcArg::Block => {
                    let spec = build_spec(stat.kind(), r.unwrap_or(1), Some(*m))?;
                    SweepProcedure::Block { spec }
                }
            };
            let calibrator = OutwardCalibrator::new(*cal_replicates, seed);
            let result = tail_sweep(
                &ingested.sample,
                *nmin,
                nmax_eff,
                &proc,
                *level,
                tables,
                &calibrator,
            )?;
            let config = json!({
                "procedure": format!("{procedure:?}").to_lowercase(),
                "stat": stat.kind().to_string(),
                "m": m,
                "r": r,
                "nmin": nmin,
                "nmax": nmax_eff,
                "level": level,
                "replicates": cli.replicates,
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            Ok(("sweep", config, Payload::Sweep(result), ingested.warnings))
        }

        Command::Calibrate { stat, n, r, m, a, cal_replicates, cal_tol } => {
            check_level(*a, "--a")?;
            let m = m.unwrap_or(*r);
            let result = calibrate_outward_b(
                stat.kind(),
                *n,
                *r,
                m,
                *a,
                *cal_replicates,
                seed,
                *cal_tol,
                tables,
            )?;
            let config = json!({
                "stat": stat.kind().to_string(),
                "n": n,
                "r": r,
                "m": m,
                "a": a,
                "cal_replicates": cal_replicates,
                "cal_tol": cal_tol,
                "replicates": cli.replicates,
            });
            Ok(("calibrate", config, Payload::Calibration(result), vec![]))
        }

        Command::Mixture { lrt_replicates, threshold, level, ingest } => {
            check_level(*level, "--level")?;
            let ingested = ingest_sample(ingest)?;
            let mut store = MixtureLrtStore::new(*lrt_replicates, seed);
            if let Some(dir) = cache_dir {
                store = store.with_cache_dir(dir.to_path_buf());
            }
            let fit = fit_mixture(&ingested.sample, store.config())?;
            let table = store.table(ingested.sample.n())?;
            let p_value = mixture_lrt(&ingested.sample, &fit, &table)?;
            let outliers = classify_outliers(&fit, *threshold);
            let config = json!({
                "lrt_replicates": lrt_replicates,
                "threshold": threshold,
                "level": level,
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            let values = ingested.sample.values().to_vec();
            let payload = Payload::Mixture {
                fit,
                p_value,
                rejected: p_value <= *level,
                level: *level,
                outliers,
                values,
            };
            Ok(("mixture", config, payload, ingested.warnings))
        }

        Command::Drawdowns {
            inputs,
            delta,
            epsilon,
            kind,
            include_censored,
            m,
            nmin,
            nmax,
            level,
        } => {
            check_level(*level, "--level")?;
            let prices = ingest_prices(inputs, *delta)?;
            let day_returns: Vec<(String, Vec<f64>)> = prices
                .days
                .iter()
                .map(|(day, prices)| (day.clone(), log_returns(prices)))
                .collect();
            let extraction = extract_across_days(&day_returns, *epsilon)?;

            let wanted = match kind {
                EpisodeKindArg::Drawdown => EpisodeKind::Drawdown,
                EpisodeKindArg::Drawup => EpisodeKind::Drawup,
            };
            let mut censored_excluded = 0usize;
            let mut sizes = Vec::new();
            for day in &extraction.days {
                for episode in &day.episodes {
                    if episode.kind != wanted {
                        continue;
                    }
                    if episode.censored() && !include_censored {
                        censored_excluded += 1;
                        continue;
                    }
                    if let Some(s) = episode.normalized_size {
                        if s > 0.0 {
                            sizes.push(s);
                        }
                    }
                }
            }
            if sizes.len() < nmin + 1 {
                return Err(CliError::Input(format!(
                    "only {} usable episodes; the sweep needs more than --nmin = {nmin}",
                    sizes.len()
                )));
            }
            let normalized = OrderedSample::new(sizes).map_err(CliError::from)?;
            // Pareto tail exponent of the tested episodes, for report parity
            // with CCDF plots.
            let tail_n = normalized.n().min(500);
            let tail_alpha = {
                let top = OrderedSample::new(normalized.values()[..tail_n].to_vec())
                    .map_err(CliError::from)?;
                mle_pareto(&top, top.min()).map(|p| p.alpha).ok()
            };
            // Log domain: the tail sweep re-thresholds each subsample, so
            // the base only fixes the origin.
            let log_sample =
                pareto_to_exp(&normalized, normalized.min()).map_err(CliError::from)?;
            let nmax_eff = (*nmax).min(log_sample.n());
            let calibrator = OutwardCalibrator::new(10_000, seed);
            let sweep = tail_sweep(
                &log_sample,
                *nmin,
                nmax_eff,
                &SweepProcedure::Inward { kind: StatisticKind::Mrs, m: *m },
                *level,
                tables,
                &calibrator,
            )?;

            let per_day: Vec<Value> = extraction
                .days
                .iter()
                .map(|d| {
                    json!({
                        "day": d.day,
                        "episodes": d.episodes.len(),
                        "sigma": d.sigma,
                        "n_returns": d.n_returns,
                    })
                })
                .collect();
            let summary = json!({
                "days": per_day,
                "skipped_days": extraction.skipped_days,
                "episodes_tested": normalized.n(),
                "censored_excluded": censored_excluded,
                "tail_alpha": tail_alpha,
                "rows_read": prices.rows_read,
                "rows_skipped": prices.rows_skipped,
            });
            let config = json!({
                "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "delta": delta,
                "epsilon": epsilon,
                "kind": format!("{kind:?}").to_lowercase(),
                "include_censored": include_censored,
                "m": m,
                "nmin": nmin,
                "nmax": nmax_eff,
                "level": level,
                "replicates": cli.replicates,
            });
            let payload = Payload::Drawdowns {
                extraction_summary: summary,
                extraction,
                sweep,
            };
            Ok(("drawdowns", config, payload, vec![]))
        }

        Command::Simulate {
            study,
            case,
            n,
            m,
            replications,
            full,
            level,
            lrt_replicates,
            cal_replicates,
        } => {
            check_level(*level, "--level")?;
            let mut mix_nulls = MixtureLrtStore::new(*lrt_replicates, seed);
            if let Some(dir) = cache_dir {
                mix_nulls = mix_nulls.with_cache_dir(dir.to_path_buf());
            }
            let calibrator = OutwardCalibrator::new(*cal_replicates, seed);
            let (report, study_config) = match study {
                StudyArg::Power => {
                    let replications = replications.unwrap_or(if *full { 2000 } else { 1000 });
                    let (grid, methods, label) = power_grid(*case, *n)?;
                    let report = power_study(
                        &methods,
                        &grid,
                        replications,
                        *level,
                        seed,
                        tables,
                        &mix_nulls,
                    )?;
                    (report, json!({ "study": "power", "case": label, "replications": replications }))
                }
                StudyArg::Maskswamp => {
                    let replications = replications.unwrap_or(if *full { 2000 } else { 1000 });
                    let n = n.unwrap_or(30);
                    let scenario = masking_scenario(*case, n)?;
                    let kinds = all_kinds();
                    let block_sizes: Vec<usize> = (1..=10).collect();
                    let report = mask_swamp_study(
                        &kinds,
                        &scenario,
                        &block_sizes,
                        replications,
                        *level,
                        seed,
                        tables,
                    )?;
                    (
                        report,
                        json!({ "study": "maskswamp", "case": format!("{case:?}").to_lowercase(), "n": n, "replications": replications }),
                    )
                }
                StudyArg::Sequential => {
                    let replications = replications.unwrap_or(if *full { 5000 } else { 1000 });
                    let n = n.unwrap_or(50);
                    let m = m.unwrap_or(if n == 50 { 10 } else { 5 });
                    let config = ComparisonConfig {
                        cases: standard_comparison_cases(n)?,
                        r: m,
                        m,
                        replications,
                        level: *level,
                        seed,
                        methods: standard_comparison_methods(),
                    };
                    let report = sequential_comparison_study(
                        &config,
                        tables,
                        &calibrator,
                        &mix_nulls,
                    )?;
                    (
                        report,
                        json!({ "study": "sequential", "n": n, "m": m, "r": m, "replications": replications, "cal_replicates": cal_replicates }),
                    )
                }
                StudyArg::Robustness => {
                    let replications = replications.unwrap_or(1000);
                    let config = RobustnessConfig {
                        n: n.unwrap_or(30),
                        replications,
                        level: *level,
                        seed,
                        ..RobustnessConfig::default()
                    };
                    let report = robustness_study(&config, tables)?;
                    (
                        report,
                        json!({ "study": "robustness", "n": config.n, "r": config.r, "kappa_grid": config.kappa_grid, "replications": replications }),
                    )
                }
            };
            let config = json!({
                "study_config": study_config,
                "level": level,
                "replicates": cli.replicates,
                "lrt_replicates": lrt_replicates,
            });
            Ok(("simulate", config, Payload::Study(report), vec![]))
        }

        Command::Layered { breaks, ingest } => {
            let ingested = ingest_sample(ingest)?;
            let fit = fit_layered_pareto(&ingested.sample, breaks)?;
            let single = mle_pareto(&ingested.sample, breaks[0])?;
            let single_loglik = pareto_loglik(&ingested.sample, &single);
            let p_value = if breaks.len() > 1 {
                Some(likelihood_ratio_test(
                    single_loglik,
                    fit.loglik,
                    2 * (breaks.len() - 1),
                )?)
            } else {
                None
            };
            let config = json!({
                "breaks": breaks,
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            let payload = Payload::Layered {
                fit,
                single_alpha: single.alpha,
                single_loglik,
                p_value,
            };
            Ok(("layered", config, payload, ingested.warnings))
        }

        Command::Ccdf { ingest } => {
            let ingested = ingest_sample(ingest)?;
            let points = empirical_ccdf(&ingested.sample);
            let config = json!({
                "input": ingest.input.display().to_string(),
                "ingest": ingest_echo(&ingested),
            });
            Ok(("ccdf", config, Payload::Ccdf(points), ingested.warnings))
        }
    }
}

fn all_kinds() -> Vec<StatisticKind> {
    vec![
        StatisticKind::Ss,
        StatisticKind::Srs,
        StatisticKind::Ms,
        StatisticKind::Mrs,
        StatisticKind::D,
        StatisticKind::Dk,
    ]
}

fn power_grid(
    case: CaseArg,
    n_override: Option<usize>,
) -> Result<(Vec<GridPoint>, Vec<PowerMethod>, &'static str), CliError> {
    let block_methods: Vec<PowerMethod> =
        all_kinds().into_iter().map(PowerMethod::Block).collect();
    match case {
        CaseArg::Single => {
            let n = n_override.unwrap_or(20);
            let grid = (3..=10)
                .map(|mu| {
                    Ok(GridPoint {
                        scenario: ScenarioSpec::new(
                            ScenarioKind::SingleGaussian { mu: mu as f64, sigma: 0.1 },
                            n,
                        )?,
                        parameter: mu as f64,
                    })
                })
                .collect::<Result<Vec<_>, dragonking_core::Error>>()?;
            Ok((grid, block_methods, "single"))
        }
        CaseArg::Dispersed => {
            let n = n_override.unwrap_or(50);
            let grid = (1..=6)
                .map(|beta| {
                    Ok(GridPoint {
                        scenario: ScenarioSpec::new(
                            ScenarioKind::DispersedFixedShift {
                                k: 5,
                                shift: 3.0,
                                rate: 1.0 / beta as f64,
                            },
                            n,
                        )?,
                        parameter: beta as f64,
                    })
                })
                .collect::<Result<Vec<_>, dragonking_core::Error>>()?;
            let mut methods = block_methods;
            methods.push(PowerMethod::Mixture);
            Ok((grid, methods, "dispersed"))
        }
        CaseArg::Clustered => {
            let n = n_override.unwrap_or(50);
            let grid = (3..=10)
                .map(|mu| {
                    Ok(GridPoint {
                        scenario: ScenarioSpec::new(
                            ScenarioKind::ClusteredGaussian { k: 5, mu: mu as f64, sigma: 0.1 },
                            n,
                        )?,
                        parameter: mu as f64,
                    })
                })
                .collect::<Result<Vec<_>, dragonking_core::Error>>()?;
            let mut methods = block_methods;
            methods.push(PowerMethod::Mixture);
            Ok((grid, methods, "clustered"))
        }
    }
}

fn masking_scenario(case: CaseArg, n: usize) -> Result<ScenarioSpec, CliError> {
    let spec = match case {
        CaseArg::Single => {
            ScenarioSpec::new(ScenarioKind::SingleGaussian { mu: 8.0, sigma: 0.1 }, n)?
        }
        CaseArg::Dispersed => ScenarioSpec::new(
            ScenarioKind::DispersedFixedShift { k: 5, shift: 3.0, rate: 1.0 / 5.0 },
            n,
        )?,
        CaseArg::Clustered => ScenarioSpec::new(
            ScenarioKind::ClusteredGaussian { k: 5, mu: 8.0, sigma: 0.1 },
            n,
        )?,
    };
    Ok(spec)
}
