//! `trackkit` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod layout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn from_lib(e: trackkit::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<trackkit::Error> for CliError {
    fn from(e: trackkit::Error) -> Self {
        CliError::from_lib(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "trackkit", version, about = "Motion-only multi-object tracking toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Flat `key = value` config file; see `trackkit defaults`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set tracker.nsa=true`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track detections of one or more sequence directories.
    Track {
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
        /// Output directory; tracks go to `<out>/<sequence>.txt`.
        #[arg(long)]
        out: PathBuf,
        /// Also run the configured post-processing steps.
        #[arg(long)]
        postprocess: bool,
    },
    /// Fuse detection files of several models with Weighted Boxes Fusion.
    Ensemble {
        #[arg(required = true)]
        detections: Vec<PathBuf>,
        /// Fused detection file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the configured post-processing steps to a track file.
    Postprocess {
        tracks: PathBuf,
        /// Sequence directory providing image size and name.
        #[arg(long)]
        sequence: PathBuf,
        /// Output track file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate tracks against ground truth.
    Eval {
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
        /// Directory holding `<sequence>.txt` track files.
        #[arg(long)]
        tracks: PathBuf,
        /// Also write the combined report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hyper-parameter search with the clipped-surrogate policy search.
    Search(SearchArgs),
    /// Write a synthetic dataset in the sequence directory layout.
    Simulate(SimulateArgs),
    /// Run the component ablation grid and print the table.
    Ablate {
        /// Sequence directories with ground truth.
        sequences: Vec<PathBuf>,
        /// Use `n` simulated sequences instead of directories.
        #[arg(long, value_name = "N", conflicts_with = "sequences")]
        simulate: Option<u64>,
        #[arg(long, value_enum, default_value_t = Grid::Cumulative)]
        grid: Grid,
        /// Label of the detection source in the first column.
        #[arg(long, default_value = "det")]
        models: String,
        /// Directory for the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the documented default configuration.
    Defaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    /// Add one component per row.
    Cumulative,
    /// Every on/off combination.
    Full,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Number of parameters; bounds and initial mean come from the config.
    #[arg(long, default_value_t = 1)]
    pub dims: usize,
    /// Score threshold search: average precision of these detections...
    #[arg(long, requires = "gt", conflicts_with = "command")]
    pub ap_detections: Option<PathBuf>,
    /// ...against this ground-truth file.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Directory for the history and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Objective command; parameters are appended as arguments and the score
    /// is read from the last line of standard output.
    #[arg(last = true)]
    pub command: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of sequences.
    #[arg(long, default_value_t = 1)]
    pub sequences: u64,
    /// Seed of the first sequence; later ones use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Zero every noise source.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long)]
    pub tracks: Option<usize>,
    #[arg(long)]
    pub length: Option<u32>,
    #[arg(long)]
    pub drop_prob: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub fp_rate: Option<f64>,
    /// Camera translation per frame, `dx,dy`.
    #[arg(long, value_parser = parse_pair)]
    pub pan: Option<(f64, f64)>,
    #[arg(long)]
    pub shake: Option<f64>,
    /// Keep detections unclipped at the image border.
    #[arg(long)]
    pub no_clip: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `dx,dy`")?;
    Ok((
        a.trim().parse().map_err(|_| format!("invalid number `{a}`"))?,
        b.trim().parse().map_err(|_| format!("invalid number `{b}`"))?,
    ))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
