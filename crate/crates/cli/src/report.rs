//! Report envelope and output emission.
//!
//! Every command wraps its payload in an envelope carrying the tool
//! version, the fully resolved configuration, and the seed, so any report
//! can be regenerated bit-for-bit from its own echo.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use dragonking_core::calibration::MarginalLevelResult;
use dragonking_core::distributions::LayeredParetoFit;
use dragonking_core::drawdowns::CrossDayExtraction;
use dragonking_core::mixture::MixtureFit;
use dragonking_core::procedures::{BlockResult, SequentialResult, SweepResult};
use dragonking_core::studies::StudyReport;

use crate::cli::OutputFormat;
use crate::error::CliError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct CacheStats {
    pub memory_hits: usize,
    pub disk_hits: usize,
    pub builds: usize,
}

#[derive(Debug, Serialize)]
pub struct ReportEnvelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: String,
    /// Fully resolved configuration; replaying it with the seed reproduces
    /// the payload.
    pub config: Value,
    pub seed: u64,
    pub elapsed_ms: u128,
    pub warnings: Vec<String>,
    pub cache: Option<CacheStats>,
    pub payload: Value,
}

impl ReportEnvelope {
    pub fn new(command: &str, config: Value, seed: u64) -> Self {
        Self {
            tool: "dragonking",
            version: env!("CARGO_PKG_VERSION"),
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            config,
            seed,
            elapsed_ms: 0,
            warnings: Vec::new(),
            cache: None,
            payload: Value::Null,
        }
    }
}

/// Tabular view of a payload for CSV output.
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub enum Payload {
    Block(BlockResult),
    Sequential(SequentialResult),
    Sweep(SweepResult),
    Calibration(MarginalLevelResult),
    Mixture {
        fit: MixtureFit,
        p_value: f64,
        rejected: bool,
        level: f64,
        outliers: Vec<usize>,
        values: Vec<f64>,
    },
    Drawdowns {
        extraction_summary: Value,
        extraction: CrossDayExtraction,
        sweep: SweepResult,
    },
    Layered {
        fit: LayeredParetoFit,
        single_alpha: f64,
        single_loglik: f64,
        /// Chi-square LRT of the layered model against the single tail;
        /// absent for a single layer.
        p_value: Option<f64>,
    },
    Study(StudyReport),
    Ccdf(Vec<(f64, f64)>),
}

impl Payload {
    pub fn to_json(&self) -> Result<Value, CliError> {
        let value = match self {
            Payload::Block(r) => serde_json::to_value(r),
            Payload::Sequential(r) => serde_json::to_value(r),
            Payload::Sweep(r) => serde_json::to_value(r),
            Payload::Calibration(r) => serde_json::to_value(r),
            Payload::Mixture { fit, p_value, rejected, level, outliers, values } => {
                Ok(json!({
                    "fit": serde_json::to_value(fit).unwrap_or(Value::Null),
                    "p_value": p_value,
                    "rejected": rejected,
                    "level": level,
                    "outlier_ranks": outliers.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    "values": values,
                }))
            }
            Payload::Drawdowns { extraction_summary, extraction, sweep } => Ok(json!({
                "summary": extraction_summary,
                "days": serde_json::to_value(&extraction.days).unwrap_or(Value::Null),
                "skipped_days": extraction.skipped_days,
                "sweep": serde_json::to_value(sweep).unwrap_or(Value::Null),
            })),
            Payload::Layered { fit, single_alpha, single_loglik, p_value } => Ok(json!({
                "fit": serde_json::to_value(fit).unwrap_or(Value::Null),
                "single_alpha": single_alpha,
                "single_loglik": single_loglik,
                "p_value": p_value,
            })),
            Payload::Study(r) => serde_json::to_value(r),
            Payload::Ccdf(points) => Ok(json!(points
                .iter()
                .map(|(v, p)| json!({"value": v, "ccdf": p}))
                .collect::<Vec<_>>())),
        };
        value.map_err(|e| CliError::Numeric(format!("serialization: {e}")))
    }

    pub fn to_csv(&self) -> CsvTable {
        match self {
            Payload::Block(r) => CsvTable {
                header: vec![
                    "statistic_kind".into(),
                    "rank".into(),
                    "trim".into(),
                    "statistic".into(),
                    "p_value".into(),
                    "rejected".into(),
                    "level".into(),
                ],
                rows: vec![vec![
                    r.spec.kind.to_string(),
                    r.spec.rank.to_string(),
                    r.spec.trim.map(|m| m.to_string()).unwrap_or_default(),
                    fmt(r.statistic),
                    fmt(r.p_value),
                    r.rejected.to_string(),
                    fmt(r.level),
                ]],
            },
            Payload::Sequential(r) => CsvTable {
                header: vec![
                    "rank".into(),
                    "statistic".into(),
                    "p_value".into(),
                    "rejected".into(),
                ],
                rows: r
                    .steps
                    .iter()
                    .map(|s| {
                        vec![
                            s.rank.to_string(),
                            fmt(s.statistic),
                            fmt(s.p_value),
                            s.rejected.to_string(),
                        ]
                    })
                    .collect(),
            },
            Payload::Sweep(r) => sweep_table(r),
            Payload::Calibration(r) => CsvTable {
                header: vec![
                    "statistic_kind".into(),
                    "n".into(),
                    "r".into(),
                    "m".into(),
                    "target_a".into(),
                    "b".into(),
                    "achieved_a".into(),
                    "replicates".into(),
                ],
                rows: vec![vec![
                    r.kind.to_string(),
                    r.n.to_string(),
                    r.r.to_string(),
                    r.m.to_string(),
                    fmt(r.target_a),
                    fmt(r.b),
                    fmt(r.achieved_a),
                    r.replicates.to_string(),
                ]],
            },
            Payload::Mixture { fit, values, .. } => CsvTable {
                header: vec![
                    "rank".into(),
                    "value".into(),
                    "outlier_responsibility".into(),
                ],
                rows: values
                    .iter()
                    .zip(&fit.responsibilities)
                    .enumerate()
                    .map(|(i, (v, g))| vec![(i + 1).to_string(), fmt(*v), fmt(*g)])
                    .collect(),
            },
            Payload::Drawdowns { sweep, .. } => sweep_table(sweep),
            Payload::Layered { fit: r, .. } => CsvTable {
                header: vec![
                    "layer".into(),
                    "lower_edge".into(),
                    "alpha".into(),
                    "count".into(),
                ],
                rows: r
                    .breakpoints
                    .iter()
                    .zip(&r.alphas)
                    .zip(&r.layer_counts)
                    .enumerate()
                    .map(|(i, ((edge, alpha), count))| {
                        vec![
                            (i + 1).to_string(),
                            fmt(*edge),
                            fmt(*alpha),
                            count.to_string(),
                        ]
                    })
                    .collect(),
            },
            Payload::Study(r) => CsvTable {
                header: vec![
                    "scenario".into(),
                    "parameter".into(),
                    "method".into(),
                    "rejection_rate".into(),
                    "k_hat_q1".into(),
                    "k_hat_median".into(),
                    "k_hat_q3".into(),
                ],
                rows: r
                    .rows
                    .iter()
                    .map(|row| {
                        vec![
                            row.scenario.clone(),
                            fmt(row.parameter),
                            row.method.clone(),
                            fmt(row.rejection_rate),
                            row.k_hat_q1.map(fmt).unwrap_or_default(),
                            row.k_hat_median.map(fmt).unwrap_or_default(),
                            row.k_hat_q3.map(fmt).unwrap_or_default(),
                        ]
                    })
                    .collect(),
            },
            Payload::Ccdf(points) => CsvTable {
                header: vec!["value".into(), "ccdf".into()],
                rows: points
                    .iter()
                    .map(|(v, p)| vec![fmt(*v), fmt(*p)])
                    .collect(),
            },
        }
    }
}

fn sweep_table(r: &SweepResult) -> CsvTable {
    CsvTable {
        header: vec![
            "n_tail".into(),
            "k_hat".into(),
            "p_first_step".into(),
            "rejected".into(),
            "threshold".into(),
        ],
        rows: r
            .steps
            .iter()
            .map(|s| {
                vec![
                    s.n_tail.to_string(),
                    s.k_hat.to_string(),
                    fmt(s.p_first_step),
                    s.rejected.to_string(),
                    fmt(s.threshold),
                ]
            })
            .collect(),
    }
}

/// Writes the report as JSON or CSV to the chosen destination.
pub fn emit(
    envelope: &ReportEnvelope,
    payload: &Payload,
    format: OutputFormat,
    output: Option<&PathBuf>,
) -> Result<(), CliError> {
    let rendered = match format {
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(envelope)
                .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
            text.push('\n');
            text
        }
        OutputFormat::Csv => {
            let table = payload.to_csv();
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(&table.header)
                .and_then(|_| {
                    table.rows.iter().try_for_each(|row| writer.write_record(row))
                })
                .map_err(|e| CliError::Numeric(format!("csv: {e}")))?;
            let bytes = writer
                .into_inner()
                .map_err(|e| CliError::Numeric(format!("csv: {e}")))?;
            String::from_utf8(bytes).map_err(|e| CliError::Numeric(format!("csv: {e}")))?
        }
    };
    match output {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.as_bytes())
                .map_err(|e| CliError::Input(e.to_string()))
        }
    }
}
