use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Extensible embedding vocabularies: data statistics, synthetic data,
/// weekly incremental-training experiments and snapshot inspection.
#[derive(Debug, Parser)]
#[command(name = "dynemb", version, about)]
struct Cli {
    /// Base seed. `synth` uses it as the generator seed; `run` uses it as
    /// the first of its consecutive run seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,

    /// Log to stderr as one JSON object per line.
    #[arg(long, global = true)]
    json_logs: bool,

    /// Maximum concurrent runs (default: available processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weekly new-item counts and session summary as CSV.
    Stats {
        #[arg(long)]
        clicks: PathBuf,
        #[arg(long)]
        buys: Option<PathBuf>,
    },
    /// Generate a synthetic clickstream in YooChoose format.
    Synth {
        /// JSON generator config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the weekly train/evaluate experiment.
    Run(RunArgs),
    /// Inspect embedding snapshots.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotAction,
    },
    /// Redraw chart.svg from a results.json.
    Chart {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    clicks: PathBuf,
    #[arg(long)]
    buys: PathBuf,
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated approaches, overriding the config.
    #[arg(long, value_delimiter = ',')]
    approaches: Option<Vec<String>>,
    /// Write per-week embedding snapshots of the first seed to <out>/snapshots.
    #[arg(long)]
    snapshots: bool,
    /// Carry the aggregator and output layer across weeks as well.
    #[arg(long)]
    carry_head: bool,
    /// Baseline vocabulary covers all weeks so far instead of the current week.
    #[arg(long)]
    baseline_global_vocab: bool,
}

#[derive(Debug, Subcommand)]
enum SnapshotAction {
    /// Print version, shape, metadata and row-norm summary.
    Inspect {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let mut builder = env_logger::Builder::new();
    builder
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr);
    if cli.json_logs {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    builder.init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    let result = match &cli.command {
        Command::Stats { clicks, buys } => commands::stats(clicks, buys.as_deref()),
        Command::Synth { config, out } => commands::synth(config.as_deref(), out, cli.seed),
        Command::Run(args) => commands::run(args, cli.seed, cli.jobs),
        Command::Snapshot {
            action: SnapshotAction::Inspect { path, json },
        } => commands::inspect(path, *json),
        Command::Chart { results, out } => commands::chart(results, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.code())
        }
    }
}
