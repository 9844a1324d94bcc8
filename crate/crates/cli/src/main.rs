use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toponet_cli::{pipeline, CliError, ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "toponet", version, about = "Train small ReLU/softmax networks on manifold data and analyse their layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides both the dataset and the training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline into a fresh directory, or one stage with --stage.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_stage)]
        stage: Option<Stage>,
    },
    /// Sample the labelled dataset.
    Generate(Common),
    /// Train the network on the stored dataset.
    Train(Common),
    /// Record per-layer activations (and inject the kernel witness when enabled).
    Trace(Common),
    /// Move reports, separation verdict and component counts.
    Analyze(Common),
    /// Isomap projections of every traced layer.
    Isomap(Common),
    /// Aggregate stage outputs into report.json.
    Report(Common),
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
        format!("unknown stage {s:?}; expected one of {}", names.join(", "))
    })
}

fn prepare(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set output_dir".into()))?;
    Ok((cfg, out))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, stage) = match &cli.command {
        Command::Run { common, stage } => (common, *stage),
        Command::Generate(c) => (c, Some(Stage::Generate)),
        Command::Train(c) => (c, Some(Stage::Train)),
        Command::Trace(c) => (c, Some(Stage::Trace)),
        Command::Analyze(c) => (c, Some(Stage::Analyze)),
        Command::Isomap(c) => (c, Some(Stage::Isomap)),
        Command::Report(c) => (c, Some(Stage::Report)),
    };
    let (cfg, out) = prepare(common)?;
    match stage {
        Some(s) => {
            pipeline::run_stage(s, &cfg, &out)?;
            eprintln!("{}: done ({})", s.name(), out.display());
        }
        None => {
            let report = pipeline::run(&cfg, &out)?;
            eprintln!(
                "{}: accuracy {:.4}, report in {}",
                report.name,
                report.training.final_accuracy,
                out.join(pipeline::REPORT_FILE).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("toponet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
