//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Default number of replicates for Monte-Carlo null tables.
const DEFAULT_TABLE_REPLICATES: &str = "50000";

#[derive(Debug, Parser)]
#[command(
    name = "dragonking",
    version,
    about = "Outlier (dragon king) detection in samples with Exponential or Pareto tails",
    propagate_version = true
)]
pub struct Cli {
    /// RNG seed; drawn from entropy and echoed in the report when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte-Carlo replicates per null table.
    #[arg(long, global = true, default_value = DEFAULT_TABLE_REPLICATES)]
    pub replicates: usize,

    /// Directory for persisted null tables (also read from
    /// DRAGONKING_CACHE_DIR).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value = "0")]
    pub threads: usize,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: OutputFormat,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transform {
    None,
    Log,
}

/// Options shared by every command that reads a numeric sample.
#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Input file: CSV or one value per line.
    pub input: PathBuf,

    /// Zero-based column holding the values.
    #[arg(long, default_value = "0")]
    pub column: usize,

    /// Keep only values at or above this threshold; also the base of the
    /// log transform.
    #[arg(long)]
    pub u: Option<f64>,

    /// Value transform: `log` maps a Pareto tail onto the Exponential
    /// domain via log(x / u).
    #[arg(long, value_enum, default_value = "none")]
    pub transform: Transform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Ss,
    Srs,
    Ms,
    Mrs,
    D,
    Dk,
}

impl StatArg {
    pub fn kind(self) -> dragonking_core::StatisticKind {
        use dragonking_core::StatisticKind::*;
        match self {
            StatArg::Ss => Ss,
            StatArg::Srs => Srs,
            StatArg::Ms => Ms,
            StatArg::Mrs => Mrs,
            StatArg::D => D,
            StatArg::Dk => Dk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepProcArg {
    Inward,
    Outward,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyArg {
    Power,
    Maskswamp,
    Sequential,
    Robustness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Single,
    Dispersed,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EpisodeKindArg {
    Drawdown,
    Drawup,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Block test for a pre-specified number of outliers.
    Test {
        /// Test statistic.
        #[arg(long, value_enum)]
        stat: StatArg,
        /// Block size (rank for ms/mrs).
        #[arg(long)]
        r: usize,
        /// Robustness trim (srs/mrs; defaults to r).
        #[arg(long)]
        m: Option<usize>,
        /// Test level.
        #[arg(long, default_value = "0.1")]
        level: f64,
        #[command(flatten)]
        ingest: IngestArgs,
    },

    /// Inward sequential test: remove the largest point while it rejects.
    Inward {
        #[arg(long, value_enum, default_value = "mrs")]
        stat: StatArg,
        /// Maximum number of removals (robustness trim).
        #[arg(long, default_value = "10")]
        m: usize,
        #[arg(long, default_value = "0.1")]
        level: f64,
        #[command(flatten)]
        ingest: IngestArgs,
    },

    /// Outward sequential test with a calibrated marginal level.
    Outward {
        #[arg(long, value_enum, default_value = "ms")]
        stat: StatArg,
        /// Maximum number of outliers.
        #[arg(long)]
        r: usize,
        /// Robustness trim (defaults to r).
        #[arg(long)]
        m: Option<usize>,
        /// Overall type-1 level.
        #[arg(long, default_value = "0.1")]
        a: f64,
        /// Null samples for the marginal-level calibration.
        #[arg(long, default_value = "10000")]
        cal_replicates: usize,
        /// Tolerance on the achieved overall level.
        #[arg(long, default_value = "0.005")]
        cal_tol: f64,
        #[command(flatten)]
        ingest: IngestArgs,
    },

    /// Run a procedure over the top-n subsamples for a range of n.
    Sweep {
        #[arg(long, value_enum, default_value = "inward")]
        procedure: SweepProcArg,
        #[arg(long, value_enum, default_value = "mrs")]
        stat: StatArg,
        /// Trim / maximum removals (inward, outward, robust block).
        #[arg(long, default_value = "10")]
        m: usize,
        /// Block size (block) or maximum outliers (outward).
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value = "10")]
        nmin: usize,
        /// Largest subsample size; clamped to the sample size.
        #[arg(long, default_value = "100")]
        nmax: usize,
        #[arg(long, default_value = "0.1")]
        level: f64,
        #[arg(long, default_value = "10000")]
        cal_replicates: usize,
        #[command(flatten)]
        ingest: IngestArgs,
    },

    /// Calibrate the outward marginal level b for a target overall level.
    Calibrate {
        #[arg(long, value_enum)]
        stat: StatArg,
        /// Sample size the tables are simulated at.
        #[arg(long)]
        n: usize,
        /// Maximum number of outliers.
        #[arg(long)]
        r: usize,
        /// Robustness trim (defaults to r).
        #[arg(long)]
        m: Option<usize>,
        /// Target overall level.
        #[arg(long, default_value = "0.1")]
        a: f64,
        #[arg(long, default_value = "10000")]
        cal_replicates: usize,
        #[arg(long, default_value = "0.005")]
        cal_tol: f64,
    },

    /// Fit the Exponential + Gaussian mixture, test it, classify points.
    Mixture {
        /// Replicates for the Monte-Carlo LRT null table.
        #[arg(long, default_value = "2000")]
        lrt_replicates: usize,
        /// Responsibility threshold for classifying a point as an outlier.
        #[arg(long, default_value = "0.5")]
        threshold: f64,
        #[arg(long, default_value = "0.1")]
        level: f64,
        #[command(flatten)]
        ingest: IngestArgs,
    },

    /// Extract epsilon-drawdowns from intraday prices, normalize by
    /// previous-day volatility, and sweep-test the tail.
    Drawdowns {
        /// Price files: a single CSV with timestamp,price[,day] columns, or
        /// one file per day.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Sampling interval in the timestamp unit (seconds).
        #[arg(long, default_value = "30")]
        delta: f64,
        /// Reversal tolerance in units of previous-day return SD.
        #[arg(long, default_value = "1.0")]
        epsilon: f64,
        /// Episode kind to test.
        #[arg(long, value_enum, default_value = "drawdown")]
        kind: EpisodeKindArg,
        /// Keep day-boundary (censored) episodes in the tested sample.
        #[arg(long)]
        include_censored: bool,
        /// Inward trim for the sweep.
        #[arg(long, default_value = "10")]
        m: usize,
        #[arg(long, default_value = "10")]
        nmin: usize,
        #[arg(long, default_value = "1000")]
        nmax: usize,
        #[arg(long, default_value = "0.1")]
        level: f64,
    },

    /// Reproduce a simulation study at desk scale.
    Simulate {
        #[arg(long, value_enum)]
        study: StudyArg,
        /// Scenario family for power and masking studies.
        #[arg(long, value_enum, default_value = "clustered")]
        case: CaseArg,
        /// Sample size (sequential study accepts 50, 30, or 15).
        #[arg(long)]
        n: Option<usize>,
        /// Outward maximum / inward trim for the sequential study.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        replications: Option<usize>,
        /// Use the full replication counts from the original studies
        /// instead of the desk-scale default of 1000.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value = "0.1")]
        level: f64,
        #[arg(long, default_value = "2000")]
        lrt_replicates: usize,
        #[arg(long, default_value = "10000")]
        cal_replicates: usize,
    },

    /// Fit a piecewise Pareto over the given layers and test it against a
    /// single tail.
    Layered {
        /// Ascending layer lower edges, comma separated (e.g. 1.97,4.45).
        #[arg(long, value_delimiter = ',', required = true)]
        breaks: Vec<f64>,
        #[command(flatten)]
        ingest: IngestArgs,
    },

    /// Emit the empirical CCDF of a sample.
    Ccdf {
        #[command(flatten)]
        ingest: IngestArgs,
    },
}
