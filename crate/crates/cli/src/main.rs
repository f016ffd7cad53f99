use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nic_core::config::RunConfig;
use nic_core::models::{Objective, Task};
use nic_core::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "nic", version, about = "Multitask neural image compression experiments")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic patch tasks, mini-WSIs, labels and a cohort.
    GenData,
    /// Train the shared encoder on a subset of the patch tasks.
    TrainEncoder {
        /// `all` or a comma-separated list of lymph, mitosis, prostate, colorectal.
        #[arg(long)]
        tasks: Option<String>,
        /// Embedding length (sets both encoder and image-level code size).
        #[arg(long)]
        code_size: Option<usize>,
        #[arg(long)]
        patches: Option<PathBuf>,
    },
    /// Compress every image in a directory to NICW grids.
    Compress {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Cross-validate the image-level network on compressed images.
    TrainWsi {
        #[arg(long)]
        compressed: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
        #[arg(long, value_parser = parse_objective)]
        objective: Option<Objective>,
    },
    /// Score predictions, or analyse an ablation CSV.
    Evaluate {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
        #[arg(long)]
        ablation: Option<PathBuf>,
        #[arg(long, value_parser = parse_objective)]
        objective: Option<Objective>,
    },
    /// Train one encoder per task subset and correlate task inclusion with
    /// image-level performance.
    Ablate {
        #[arg(long)]
        patches: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        repeat_full: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct LabelArgs {
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    cohort: Option<PathBuf>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "mse" => Ok(Objective::Mse),
        "ce" => Ok(Objective::Ce),
        "cox" => Ok(Objective::Cox),
        _ => Err(format!("unknown objective {s:?} (expected mse, ce or cox)")),
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// Folds command-line overrides into the configuration.
fn apply(cli: &Cli, cfg: &mut RunConfig) -> Result<&'static str, Error> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    let p = &mut cfg.paths;
    let name = match &cli.command {
        Command::GenData => "gen-data",
        Command::TrainEncoder { tasks, code_size, patches } => {
            if let Some(t) = tasks {
                Task::parse_list(t)?;
                cfg.tasks = t.clone();
            }
            if let Some(c) = code_size {
                cfg.encoder.code_size = *c;
                cfg.wsi.code_size = *c;
            }
            set(&mut p.patches, patches.clone());
            "train-encoder"
        }
        Command::Compress { checkpoint, images } => {
            set(&mut p.checkpoint, checkpoint.clone());
            set(&mut p.images, images.clone());
            "compress"
        }
        Command::TrainWsi { compressed, labels, objective } => {
            set(&mut p.compressed, compressed.clone());
            set(&mut p.labels, labels.labels.clone());
            set(&mut p.cohort, labels.cohort.clone());
            if let Some(o) = objective {
                cfg.wsi.objective = *o;
            }
            "train-wsi"
        }
        Command::Evaluate { predictions, labels, ablation, objective } => {
            set(&mut p.predictions, predictions.clone());
            set(&mut p.labels, labels.labels.clone());
            set(&mut p.cohort, labels.cohort.clone());
            set(&mut p.ablation, ablation.clone());
            if let Some(o) = objective {
                cfg.wsi.objective = *o;
            }
            "evaluate"
        }
        Command::Ablate { patches, images, labels, repeat_full } => {
            set(&mut p.patches, patches.clone());
            set(&mut p.images, images.clone());
            set(&mut p.labels, labels.clone());
            if let Some(r) = repeat_full {
                cfg.ablation.repeat_full = *r;
            }
            "ablate"
        }
    };
    cfg.validate()?;
    Ok(name)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let name = apply(cli, &mut cfg)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    match cli.command {
        Command::GenData => commands::gen_data(&cfg),
        Command::TrainEncoder { .. } => commands::train_encoder(&cfg),
        Command::Compress { .. } => commands::compress_images(&cfg),
        Command::TrainWsi { .. } => commands::train_wsi(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg),
        Command::Ablate { .. } => commands::ablate(&cfg),
    }
    .map(|dir| println!("{name}: outputs in {}", dir.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
