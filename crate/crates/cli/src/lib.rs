//! Command-line surface for the `randcode` engine.
//!
//! Every command renders into a byte buffer first ([`run_to_bytes`]) and is
//! then written to stdout or `--out-path`.  Given the same flags and seed the
//! buffer is identical on every run, apart from the timing fields of `bench`.

// `!(x > 0)` rejects NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{FileConfig, Settings};
pub use output::Format;

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<randcode::Error> for CliError {
    fn from(e: randcode::Error) -> Self {
        use randcode::Error as E;
        match e {
            E::InvalidParameter { .. } | E::LengthMismatch { .. } | E::NonPhysical { .. } => {
                CliError::Config(e.to_string())
            }
            E::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "randcode",
    version,
    about = "Random-codebook reconciliation: optimizer, simulator and figure data"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.  Commands ignore the ones they have no
/// use for; `optimize` and `table2` search over `gamma`, `delta` and
/// `sigma_x2` instead of reading them.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Channel transmittance.
    #[arg(long = "T", global = true)]
    pub t: Option<f64>,
    /// Excess noise in shot-noise units.
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    /// Codebook size, a power of two; `2^k` is accepted.
    #[arg(long, global = true, value_parser = config::parse_q)]
    pub q: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Modulation variance.
    #[arg(long = "sigma_x2", global = true)]
    pub sigma_x2: Option<f64>,
    /// Number of blocks.
    #[arg(long = "N", global = true)]
    pub blocks: Option<usize>,
    /// Quantizer bit depth.
    #[arg(long, global = true)]
    pub b: Option<u8>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "out-path", global = true)]
    pub out_path: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// TOML file with keys T, xi, sigma_x2, q, gamma, delta, N, b, seed.
    /// Flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Mutual information and leakage against modulation variance.
    Fig1,
    /// Key bits per second against distance.
    Fig4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    TrueRandom,
    Pseudorandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpanderArg {
    Chacha8,
    Chacha20,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Exact,
    Lut,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximize SKR/DW over (sigma_x2, gamma, delta).
    Optimize {
        /// Include every evaluated point (JSON only).
        #[arg(long)]
        trace: bool,
    },
    /// Optimum for several codebook sizes.
    Table2 {
        /// Comma-separated codebook sizes; empty for none.
        #[arg(long, default_value = "2^5,2^10,2^15,2^20,2^30")]
        qs: String,
    },
    /// Monte-Carlo session with the key-budget ledger.
    Simulate {
        #[arg(long, value_enum, default_value_t = VariantArg::TrueRandom)]
        variant: VariantArg,
        #[arg(long, value_enum, default_value_t = ExpanderArg::Chacha8)]
        expander: ExpanderArg,
        #[arg(long, value_enum, default_value_t = KernelArg::Exact)]
        kernel: KernelArg,
        /// Enable the lossy prune schedule.
        #[arg(long)]
        prune: bool,
        /// Collect true and fake score moments.
        #[arg(long)]
        scores: bool,
        /// Draw Gaussian scores instead of vectors.
        #[arg(long)]
        model: bool,
        /// Write per-block records as JSON lines to this file.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Cap on n * q * N multiply-accumulates.
        #[arg(long, default_value_t = randcode::protocol::DEFAULT_BUDGET)]
        budget: f64,
    },
    /// Histograms of true and fake scores.
    ScoreDist {
        #[arg(long, default_value_t = 60)]
        bins: usize,
        /// Histogram range as `lo,hi`.
        #[arg(long, default_value = "-5,10", allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value_t = randcode::protocol::DEFAULT_BUDGET)]
        budget: f64,
    },
    /// Leakage sweep or key rate against distance.
    LeakageCurve {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Smallest modulation variance (fig1).
        #[arg(long, default_value_t = 0.01)]
        from: f64,
        /// Largest modulation variance (fig1).
        #[arg(long, default_value_t = 100.0)]
        to: f64,
        /// Log-spaced points (fig1).
        #[arg(long, default_value_t = 121)]
        points: usize,
        /// Longest distance in km (fig4).
        #[arg(long, default_value_t = 400.0)]
        max_km: f64,
        /// Distance step in km (fig4).
        #[arg(long, default_value_t = 10.0)]
        step_km: f64,
        /// Pulses per second (fig4).
        #[arg(long, default_value_t = 1e6)]
        pulse_rate: f64,
    },
    /// SKR/DW on a (gamma, delta) grid.
    Landscape {
        #[arg(long, default_value = "-0.6,0", allow_hyphen_values = true)]
        gamma_range: String,
        #[arg(long, default_value = "-1.5,0.5", allow_hyphen_values = true)]
        delta_range: String,
        /// Grid size as `gammas,deltas`.
        #[arg(long, default_value = "61,81")]
        resolution: String,
    },
    /// Decoder throughput at a large codebook.
    Bench {
        /// Also time the lookup-table kernel.
        #[arg(long)]
        lut: bool,
        #[arg(long, default_value_t = randcode::protocol::DEFAULT_BUDGET)]
        budget: f64,
    },
}

/// Runs a parsed command line and returns what it would write.
pub fn run_to_bytes(cli: &Cli) -> Result<Vec<u8>, CliError> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let s = Settings::merge(&cli.common, &file)?;
    let f = cli.common.format;
    match &cli.command {
        Command::Optimize { trace } => commands::optimize(&s, f, *trace),
        Command::Table2 { qs } => commands::table2(&s, f, &config::parse_q_list(qs)?),
        Command::Simulate {
            variant,
            expander,
            kernel,
            prune,
            scores,
            model,
            records,
            budget,
        } => commands::simulate(
            &s,
            f,
            &commands::SimulateOptions {
                variant: *variant,
                expander: *expander,
                kernel: *kernel,
                prune: *prune,
                scores: *scores,
                model: *model,
                records: records.clone(),
                budget: *budget,
            },
        ),
        Command::ScoreDist {
            bins,
            range,
            budget,
        } => commands::score_dist(&s, f, *bins, config::parse_pair(range, "range")?, *budget),
        Command::LeakageCurve {
            figure,
            from,
            to,
            points,
            max_km,
            step_km,
            pulse_rate,
        } => match figure {
            Figure::Fig1 => commands::leakage_fig1(&s, f, *from, *to, *points),
            Figure::Fig4 => commands::rate_fig4(&s, f, *max_km, *step_km, *pulse_rate),
        },
        Command::Landscape {
            gamma_range,
            delta_range,
            resolution,
        } => {
            let (g, d) = config::parse_pair(resolution, "resolution")?;
            if g < 1.0 || d < 1.0 || g.fract() != 0.0 || d.fract() != 0.0 {
                return Err(CliError::Config(format!(
                    "resolution must be two positive integers, got {resolution}"
                )));
            }
            commands::landscape(
                &s,
                f,
                config::parse_pair(gamma_range, "gamma-range")?,
                config::parse_pair(delta_range, "delta-range")?,
                (g as usize, d as usize),
            )
        }
        Command::Bench { lut, budget } => commands::bench(&s, f, *lut, *budget),
    }
}

/// Runs a parsed command line and writes the result to its destination.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let bytes = run_to_bytes(cli)?;
    match &cli.common.out_path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}
