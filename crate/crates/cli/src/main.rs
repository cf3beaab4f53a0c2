use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xkep_core::pipeline::{Context, Workspace};
use xkep_core::{run_pipeline, PipelineConfig, ReportFormat, Stage};

#[derive(Parser)]
#[command(
    name = "xkep",
    version,
    about = "Explain, cluster and summarise a tabular classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Run(Common),
    /// Feature selection.
    Fs(Common),
    /// Train the classifier on the selected features.
    Train(Common),
    /// Rank explainer configurations.
    Autoxai(Common),
    /// Explain every instance with the chosen configuration.
    Explain(Common),
    /// Cluster the explanations.
    Cluster(Common),
    /// Per-cluster rules, statistics and representative instances.
    Insight(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Md,
    Both,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    workspace: PathBuf,
    /// Master seed; overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

fn execute(stage: Option<Stage>, args: &Common) -> anyhow::Result<()> {
    let cfg = PipelineConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let format = match args.format {
        Format::Json => ReportFormat::Json,
        Format::Md => ReportFormat::Md,
        Format::Both => ReportFormat::Both,
    };
    match stage {
        None => {
            let report = run_pipeline(&cfg, &args.workspace, seed, format)?;
            println!(
                "{} clusters; explainer {} {}",
                report.c, report.chosen.algorithm, report.chosen.hyperparameters
            );
        }
        Some(stage) => {
            let ws = Workspace::create(&args.workspace)?;
            Context::new(&cfg, &ws, seed, format).run_stage(stage)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (stage, args) = match &cli.command {
        Command::Run(a) => (None, a),
        Command::Fs(a) => (Some(Stage::Fs), a),
        Command::Train(a) => (Some(Stage::Train), a),
        Command::Autoxai(a) => (Some(Stage::Autoxai), a),
        Command::Explain(a) => (Some(Stage::Explain), a),
        Command::Cluster(a) => (Some(Stage::Cluster), a),
        Command::Insight(a) => (Some(Stage::Insight), a),
    };
    match execute(stage, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
