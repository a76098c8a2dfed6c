use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use dynemb::data::{self, WeekSegment};
use dynemb::embedding_store::load_snapshot;
use dynemb::harness::{
    export_results, import_results_json, render_chart, run_experiment, CooccurrenceSimilarity, ExperimentConfig,
    ExportFormat, Observer, RunOptions, SnapshotWriter,
};
use dynemb::metrics::aggregate;

use crate::RunArgs;

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input, config or arguments.
    Input(String),
    /// The experiment itself failed.
    Experiment(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Experiment(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Experiment(m) => f.write_str(m),
        }
    }
}

fn input(e: impl fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn experiment(e: impl fmt::Display) -> CliError {
    CliError::Experiment(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let body = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn stdout_lines(lines: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    for l in lines {
        writeln!(out, "{l}").map_err(experiment)?;
    }
    Ok(())
}

/// Loads clicks (and buys, if given) and partitions them into weeks.
fn load_weeks(clicks: &Path, buys: Option<&Path>) -> Result<Vec<WeekSegment>, CliError> {
    let clicks = data::load_clicks(clicks).map_err(input)?;
    let buy_set: HashSet<String> = match buys {
        Some(p) => data::load_buys(p).map_err(input)?.records.into_iter().collect(),
        None => HashSet::new(),
    };
    let assembled = data::assemble_sessions(&clicks.records, &buy_set);
    if assembled.orphan_buys > 0 {
        log::warn!("{} purchases have no matching click session", assembled.orphan_buys);
    }
    data::partition_weeks(assembled.sessions).map_err(input)
}

pub fn stats(clicks: &Path, buys: Option<&Path>) -> Result<(), CliError> {
    let weeks = load_weeks(clicks, buys)?;
    let fresh = data::segment_new_items(&weeks);
    let mut lines = vec!["week,new_items,sessions,positive_rate".to_owned()];
    for (w, n) in weeks.iter().zip(fresh) {
        let rate = if buys.is_some() {
            w.positive_rate().to_string()
        } else {
            String::new()
        };
        lines.push(format!("{},{n},{},{rate}", w.index, w.sessions.len()));
    }
    if weeks.last().is_some_and(|w| w.partial) {
        log::info!(
            "week {} is partial: the data ends before its seven days do",
            weeks.len() - 1
        );
    }
    stdout_lines(lines)
}

pub fn synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: data::SyntheticConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let weeks = data::synth_generate(&cfg).map_err(input)?;
    fs::create_dir_all(out).map_err(|e| input(format!("{}: {e}", out.display())))?;
    let sessions = || weeks.iter().flat_map(|w| &w.sessions);
    data::write_clicks(out.join("clicks.csv"), sessions()).map_err(experiment)?;
    data::write_buys(out.join("buys.csv"), sessions()).map_err(experiment)?;
    log::info!(
        "wrote {} sessions over {} weeks to {}",
        sessions().count(),
        weeks.len(),
        out.display()
    );
    Ok(())
}

pub fn run(args: &RunArgs, seed: Option<u64>, jobs: Option<usize>) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = read_json(args.config.as_deref())?;
    if let Some(names) = &args.approaches {
        cfg.approaches = names
            .iter()
            .map(|n| n.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(input)?;
    }
    if let Some(base) = seed {
        let n = cfg.seeds.len() as u64;
        cfg.seeds = (base..base + n).collect();
    }
    cfg.carry_head |= args.carry_head;
    cfg.baseline_global_vocab |= args.baseline_global_vocab;
    cfg.validate().map_err(input)?;

    let weeks = load_weeks(&args.clicks, Some(&args.buys))?;
    fs::create_dir_all(&args.out).map_err(|e| input(format!("{}: {e}", args.out.display())))?;
    let writer = SnapshotWriter {
        dir: args.out.join("snapshots"),
    };
    if args.snapshots {
        fs::create_dir_all(&writer.dir).map_err(|e| input(format!("{}: {e}", writer.dir.display())))?;
    }
    let options = RunOptions::<f64> {
        similarity: Some(&CooccurrenceSimilarity),
        observer: args.snapshots.then_some(&writer as &dyn Observer<f64>),
        jobs,
    };
    let table = run_experiment(&cfg, &weeks, &options).map_err(experiment)?;
    for s in &table.skipped {
        log::warn!("{} seed {} week {} skipped: {}", s.approach, s.seed, s.week, s.reason);
    }
    export_results(&table, args.out.join("results.csv"), ExportFormat::Csv).map_err(experiment)?;
    export_results(&table, args.out.join("results.json"), ExportFormat::Json).map_err(experiment)?;
    render_chart(&table, args.out.join("chart.svg")).map_err(experiment)?;
    log::info!("finished in {:.1}s", table.metadata.wall_clock_secs);
    stdout_lines(
        aggregate(&table.rows)
            .into_iter()
            .map(|s| format!("{}: {:.3} ± {:.3}", s.approach, s.mean, s.std)),
    )
}

pub fn inspect(path: &Path, json: bool) -> Result<(), CliError> {
    let snap = load_snapshot(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let norms: Vec<f64> = snap
        .embedding
        .iter_rows()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let m = &snap.metadata;
    if json {
        let report = serde_json::json!({
            "version": snap.version,
            "vocab_size": snap.vocab.len(),
            "dim": snap.embedding.dim(),
            "metadata": m,
            "row_norms": { "min": min, "mean": mean, "max": max, "unk": norms[0] },
        });
        stdout_lines([serde_json::to_string_pretty(&report).map_err(experiment)?])
    } else {
        stdout_lines([
            format!("version={}", snap.version),
            format!("vocab_size={} dim={}", snap.vocab.len(), snap.embedding.dim()),
            format!("created_at={}", m.created_at),
            format!("strategy={}", m.strategy),
            format!("week={}", m.week.map_or("-".to_owned(), |w| w.to_string())),
            format!("row_norm min={min:.6} mean={mean:.6} max={max:.6} unk={:.6}", norms[0]),
        ])
    }
}

pub fn chart(results: &Path, out: &Path) -> Result<(), CliError> {
    let table = import_results_json(results).map_err(input)?;
    render_chart(&table, out).map_err(experiment)
}
