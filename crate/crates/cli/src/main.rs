//! `forest-transfer`: synthetic data, predictor selection, forest fitting,
//! transfer evaluation, validity domains, effort curves and maps.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

/// Root seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Parser, Debug)]
#[command(name = "forest-transfer", version, about = "Basal-area models, transferability and extrapolation risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Root seed for every random stage.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelOpts {
    /// Trees per forest.
    #[arg(long)]
    pub ntrees: Option<usize>,
    /// Features tried per split (default: max(1, p/3)).
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Minimum node size.
    #[arg(long = "min-node")]
    pub min_node: Option<usize>,
    /// Maximum number of continuous predictors kept.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PlanOpts {
    /// Thinning grid resolutions in km, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Option<Vec<f64>>,
    /// Iterations per resolution, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub iterations: Option<Vec<usize>>,
    /// Number of pixels sampled as extrapolation queries.
    #[arg(long, default_value_t = 2000)]
    pub queries: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic study area: plot tables, raster stack, truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Raster cellsize in meters.
        #[arg(long)]
        cellsize: Option<f64>,
    },
    /// Lasso + importance predictor selection on a plot table.
    Select {
        #[arg(long)]
        plots: PathBuf,
        /// Output JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelOpts,
    },
    /// Split, select, fit the forest and build the envelope for one table.
    Fit {
        #[arg(long)]
        plots: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelOpts,
    },
    /// Goodness of fit of a model on a plot table.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        plots: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every model on every test table.
    Transfer {
        /// Directory holding `<name>_model.json` and `<name>_test.csv` pairs.
        #[arg(long, conflicts_with_all = ["models", "tests"])]
        dir: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        models: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        tests: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibration envelopes.
    Hull {
        #[command(subcommand)]
        action: HullAction,
    },
    /// Effort curves from grid thinning of a plot network.
    Thin {
        /// Network to thin.
        #[arg(long)]
        plots: PathBuf,
        /// Fixed evaluation table.
        #[arg(long)]
        test: PathBuf,
        /// Model whose schema and hyperparameters are refitted.
        #[arg(long)]
        model: PathBuf,
        /// Envelope whose predictors span the hull.
        #[arg(long)]
        envelope: PathBuf,
        /// Raster stack providing the extent and the query pixels.
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        plan: PlanOpts,
        #[command(flatten)]
        model_opts: ModelOpts,
    },
    /// Basal-area and extrapolation-risk maps.
    Map {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        envelope: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output file prefix.
        #[arg(long, default_value = "map")]
        name: String,
        /// Pixel window `row,col,nrows,ncols`.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<usize>>,
        /// Also write PGM/PPM previews.
        #[arg(long)]
        preview: bool,
    },
    /// Full study on synthetic data.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cellsize: Option<f64>,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        plan: PlanOpts,
    },
}

#[derive(Subcommand, Debug)]
pub enum HullAction {
    /// Envelope over the given predictors of a calibration table.
    Build {
        #[arg(long)]
        plots: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        predictors: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify plots (per-row CSV) or stack pixels (summary JSON).
    Classify {
        #[arg(long)]
        envelope: PathBuf,
        #[arg(long, required_unless_present = "stack", conflicts_with = "stack")]
        plots: Option<PathBuf>,
        #[arg(long)]
        stack: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = Cli::parse();
    if let Command::Map { window: Some(w), .. } = &cli.command {
        if w.len() != 4 {
            Cli::command()
                .error(ErrorKind::WrongNumberOfValues, "--window takes row,col,nrows,ncols")
                .exit();
        }
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
