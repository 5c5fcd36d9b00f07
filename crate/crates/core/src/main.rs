use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vrtrace::config::ExperimentConfig;
use vrtrace::maze::Branching;
use vrtrace::par::Exec;
use vrtrace::pipeline::{self, PipelineError, Task};

#[derive(Parser)]
#[command(
    name = "vrtrace",
    version,
    about = "Synthetic VR maze telemetry and privacy-risk pipeline"
)]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Predict,
    Reid,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchingArg {
    Low,
    High,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default configuration.
    Init {
        #[arg(long, default_value = "vrtrace.toml")]
        out: PathBuf,
    },
    /// Generate one maze as JSON.
    GenMaze {
        #[arg(long)]
        seed: u64,
        /// Side length, or WIDTHxDEPTH.
        #[arg(long)]
        size: String,
        #[arg(long, value_enum)]
        branching: BranchingArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the cohort: mazes, trajectories and manifest.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature table and per-trajectory series.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Use this maze for every trajectory instead of the manifest's.
        #[arg(long)]
        maze: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the next-step or re-identification model.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score both models on held-out runs and write the risk report.
    Report {
        #[arg(long)]
        predict_model: PathBuf,
        #[arg(long)]
        reid_model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, extract, train both models and report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_size(s: &str) -> Result<(usize, usize), PipelineError> {
    let bad =
        || PipelineError::Validation(format!("invalid size `{s}`; expected N or WIDTHxDEPTH"));
    match s.split_once('x') {
        Some((w, d)) => Ok((w.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?)),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match cli.command {
        Command::Init { out } => {
            pipeline::cmd_init(&out)?;
            println!("wrote {}", out.display());
        }
        Command::GenMaze {
            seed,
            size,
            branching,
            out,
        } => {
            let (w, d) = parse_size(&size)?;
            let branching = match branching {
                BranchingArg::Low => Branching::Low,
                BranchingArg::High => Branching::High,
            };
            let m = pipeline::cmd_gen_maze(seed, w, d, branching, &out)?;
            println!(
                "wrote {} ({}x{}, {} passages)",
                out.display(),
                m.width(),
                m.depth(),
                m.open_edges().len()
            );
        }
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            let manifest = pipeline::cmd_simulate(&cfg, &out, exec)?;
            println!(
                "wrote {} trajectories under {}",
                manifest.rows.len(),
                out.display()
            );
        }
        Command::Extract {
            manifest,
            maze,
            out,
        } => {
            let rows = pipeline::cmd_extract(&manifest, maze.as_deref(), &out, exec)?;
            println!(
                "wrote features for {} trajectories under {}",
                rows.len(),
                out.display()
            );
        }
        Command::Train {
            manifest,
            task,
            config,
            seed,
            out,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let task = match task {
                TaskArg::Predict => Task::Predict,
                TaskArg::Reid => Task::Reid,
            };
            let (_, log) = pipeline::cmd_train(&manifest, task, &cfg, &out, exec)?;
            println!(
                "{}: validation loss {:.6} -> {:.6} over {} epochs",
                task.name(),
                log.initial_val_loss,
                log.final_val_loss(),
                log.epochs.len()
            );
        }
        Command::Report {
            predict_model,
            reid_model,
            manifest,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref(), None)?;
            let r = pipeline::cmd_report(&predict_model, &reid_model, &manifest, &cfg, &out, exec)?;
            print!("{}", r.to_json());
        }
        Command::Run { config, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            let r = pipeline::cmd_run(&cfg, &out, exec)?;
            print!("{}", r.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
