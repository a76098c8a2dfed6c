//! Weekly incremental-training experiments.
//!
//! For every seed and approach the model is trained on week `t` and scored
//! on week `t + 1`. The baseline starts from scratch each week; incremental
//! approaches extend the vocabulary and carry the trained embedding forward
//! through [`remap`], initializing new rows with their strategy.

mod export;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::WeekSegment;
use crate::embedding_store::{
    remap, save_snapshot, EmbeddingError, EmbeddingMatrix, InitStrategy, SimilarityTable, Snapshot, SnapshotError,
    SnapshotMetadata,
};
use crate::metrics::{auc, WeeklyAuc};
use crate::model::{
    score_sessions, train_segment, AggregatorKind, ClassifierParams, EncodedSession, ModelError, TrainConfig,
};
use crate::rng::{derive_seed, substream};
use crate::scalar::Scalar;
use crate::vocab::{Token, VocabError, VocabMap};

pub use export::{chart_svg, export_results, import_results_json, render_chart, results_csv, ExportFormat};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least 2 week segments, got {0}")]
    TooFewSegments(usize),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Approach {
    BaselineScratch,
    IncrementalRandom,
    IncrementalAverage,
    IncrementalUnknown,
    IncrementalCategory,
    IncrementalSimilar,
}

impl Approach {
    pub const ALL: [Approach; 6] = [
        Approach::BaselineScratch,
        Approach::IncrementalRandom,
        Approach::IncrementalAverage,
        Approach::IncrementalUnknown,
        Approach::IncrementalCategory,
        Approach::IncrementalSimilar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Approach::BaselineScratch => "baseline",
            Approach::IncrementalRandom => "random",
            Approach::IncrementalAverage => "average",
            Approach::IncrementalUnknown => "unknown",
            Approach::IncrementalCategory => "category",
            Approach::IncrementalSimilar => "similar",
        }
    }

    pub fn is_incremental(self) -> bool {
        self != Approach::BaselineScratch
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Approach::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            format!("unknown approach {s:?} (expected one of baseline, random, average, unknown, category, similar)")
        })
    }
}

impl TryFrom<String> for Approach {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Approach> for String {
    fn from(a: Approach) -> String {
        a.name().to_owned()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VocabPolicy {
    /// Every token ever seen stays in the vocabulary.
    #[default]
    Cumulative,
    /// Only tokens seen in the last `horizon` training weeks are kept.
    SlidingWindow { horizon: usize },
}

fn default_approaches() -> Vec<Approach> {
    vec![
        Approach::BaselineScratch,
        Approach::IncrementalRandom,
        Approach::IncrementalAverage,
        Approach::IncrementalUnknown,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub approaches: Vec<Approach>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub embedding_dim: usize,
    pub aggregator: AggregatorKind,
    /// Half-width of every uniform random init: fresh embeddings, the
    /// classifier head, and rows created by the random strategy.
    pub init_scale: f64,
    pub vocab_policy: VocabPolicy,
    /// Carry the aggregator and output layer across weeks as well.
    pub carry_head: bool,
    /// Baseline vocabulary covers all weeks so far instead of week `t` only.
    pub baseline_global_vocab: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            approaches: default_approaches(),
            seeds: (0..10).collect(),
            train: TrainConfig::default(),
            embedding_dim: 32,
            aggregator: AggregatorKind::MeanPool,
            init_scale: 0.1,
            vocab_policy: VocabPolicy::Cumulative,
            carry_head: false,
            baseline_global_vocab: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut bad = Vec::new();
        if self.approaches.is_empty() {
            bad.push("approaches must not be empty".to_owned());
        }
        if self.seeds.is_empty() {
            bad.push("seeds must not be empty".to_owned());
        }
        if self.embedding_dim == 0 {
            bad.push("embedding_dim must be at least 1".to_owned());
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            bad.push("init_scale must be positive".to_owned());
        }
        if let VocabPolicy::SlidingWindow { horizon: 0 } = self.vocab_policy {
            bad.push("vocab_policy.horizon must be at least 1".to_owned());
        }
        if let Err(e) = self.train.validate() {
            bad.push(format!("train: {e}"));
        }
        let mut seen = HashSet::new();
        for a in &self.approaches {
            if !seen.insert(a) {
                bad.push(format!("approach {a} listed twice"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(bad.join("; ")))
        }
    }
}

/// Ranks old tokens by similarity to tokens entering the vocabulary.
pub trait SimilarityProvider: Sync {
    fn rank(&self, new_tokens: &[Token], segment: &WeekSegment, old: &VocabMap) -> SimilarityTable;
}

/// Similarity by co-occurrence: an old token scores the number of
/// training-week sessions it shares with the new token.
#[derive(Clone, Copy, Debug, Default)]
pub struct CooccurrenceSimilarity;

impl SimilarityProvider for CooccurrenceSimilarity {
    fn rank(&self, new_tokens: &[Token], segment: &WeekSegment, old: &VocabMap) -> SimilarityTable {
        let wanted: HashSet<&str> = new_tokens.iter().map(Token::as_str).collect();
        let mut counts: HashMap<&str, HashMap<&str, f64>> = HashMap::new();
        for s in &segment.sessions {
            let uniq: HashSet<&str> = s.items.iter().map(Token::as_str).collect();
            let olds: Vec<&str> = uniq.iter().copied().filter(|t| old.contains(t)).collect();
            for &n in uniq.iter().filter(|t| wanted.contains(*t)) {
                let c = counts.entry(n).or_default();
                for &o in &olds {
                    *c.entry(o).or_default() += 1.0;
                }
            }
        }
        counts
            .into_iter()
            .map(|(n, c)| {
                let mut ranked: Vec<(Token, f64)> = c
                    .into_iter()
                    .map(|(t, s)| (old.token(old.lookup(t)).expect("present").clone(), s))
                    .collect();
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                (Token::new(n).expect("data token"), ranked)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Vocabulary and parameters built, before training on the week.
    Initialized,
    /// After training on the week.
    Trained,
}

/// Parameters of one run at one point of the weekly loop.
pub struct WeekState<'a, T> {
    pub approach: Approach,
    pub seed: u64,
    pub seed_index: usize,
    pub week: usize,
    pub stage: Stage,
    pub vocab: &'a VocabMap,
    pub params: &'a ClassifierParams<T>,
}

/// Read-only hook into the weekly loop; runs may call it concurrently.
pub trait Observer<T>: Sync {
    fn observe(&self, state: &WeekState<'_, T>) -> Result<(), HarnessError>;
}

/// Writes the trained embedding of the first seed's runs after every week.
pub struct SnapshotWriter {
    pub dir: PathBuf,
}

impl SnapshotWriter {
    pub fn path_for(&self, approach: Approach, seed: u64, week: usize) -> PathBuf {
        self.dir.join(format!("{approach}-seed{seed}-week{week:02}.lleb"))
    }
}

impl<T: Scalar> Observer<T> for SnapshotWriter {
    fn observe(&self, s: &WeekState<'_, T>) -> Result<(), HarnessError> {
        if s.stage != Stage::Trained || s.seed_index != 0 {
            return Ok(());
        }
        let emb: EmbeddingMatrix<f64> = s.params.emb.cast();
        let meta = SnapshotMetadata {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            strategy: s.approach.name().to_owned(),
            week: Some(s.week as u32),
        };
        let snap = Snapshot::new(s.vocab.clone(), emb, meta)?;
        save_snapshot(&snap, self.path_for(s.approach, s.seed, s.week))?;
        Ok(())
    }
}

#[derive(Default)]
pub struct RunOptions<'a, T> {
    pub similarity: Option<&'a dyn SimilarityProvider>,
    pub observer: Option<&'a dyn Observer<T>>,
    /// Worker threads; `None` uses every available processor.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedWeek {
    pub approach: String,
    pub week: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub data_fingerprint: String,
    pub weeks: usize,
    pub sessions: usize,
    /// What the `week` column means.
    pub week_convention: String,
    pub std_convention: String,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<WeeklyAuc>,
    pub skipped: Vec<SkippedWeek>,
    pub metadata: RunMetadata,
}

/// Stable hex digest of the partitioned data.
pub fn data_fingerprint(segments: &[WeekSegment]) -> String {
    let mut h = Sha256::new();
    for seg in segments {
        h.update((seg.index as u64).to_le_bytes());
        h.update((seg.sessions.len() as u64).to_le_bytes());
        for s in &seg.sessions {
            h.update(s.session_id.as_bytes());
            h.update([0, s.label as u8]);
            for (item, t) in s.items.iter().zip(&s.timestamps) {
                h.update(item.as_str().as_bytes());
                h.update([0]);
                h.update(t.timestamp_millis().to_le_bytes());
            }
        }
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Tokens of a week in first-occurrence order, plus their categories.
struct WeekTokens {
    tokens: Vec<String>,
    categories: HashMap<String, String>,
}

impl WeekTokens {
    fn of(seg: &WeekSegment) -> Self {
        let mut seen = HashSet::new();
        let tokens = seg
            .items()
            .filter(|t| seen.insert(t.as_str()))
            .map(|t| t.as_str().to_owned())
            .collect();
        WeekTokens {
            tokens,
            categories: seg.categories(),
        }
    }
}

fn encode_all(vocab: &VocabMap, seg: &WeekSegment, max_len: usize) -> Vec<EncodedSession> {
    seg.sessions
        .iter()
        .map(|s| EncodedSession::encode(vocab, &s.items, s.label, max_len))
        .collect()
}

struct RunContext<'a, T> {
    config: &'a ExperimentConfig,
    segments: &'a [WeekSegment],
    week_tokens: &'a [WeekTokens],
    options: &'a RunOptions<'a, T>,
}

#[derive(Default)]
struct RunOutput {
    rows: Vec<WeeklyAuc>,
    skipped: Vec<SkippedWeek>,
}

impl<T: Scalar> RunContext<'_, T> {
    fn fresh_vocab(&self, week: usize, global: bool) -> Result<VocabMap, HarnessError> {
        let from = if global { 0 } else { week };
        let mut v = VocabMap::unk_only();
        for wt in &self.week_tokens[from..=week] {
            v = v.union_extend(&wt.tokens, Some(&wt.categories))?;
        }
        Ok(v)
    }

    fn next_vocab(&self, prev: &VocabMap, week: usize) -> Result<VocabMap, HarnessError> {
        let wt = &self.week_tokens[week];
        let base = match self.config.vocab_policy {
            VocabPolicy::Cumulative => prev.clone(),
            VocabPolicy::SlidingWindow { horizon } => {
                let first = (week + 1).saturating_sub(horizon);
                let keep: HashSet<&str> = self.week_tokens[first..=week]
                    .iter()
                    .flat_map(|w| w.tokens.iter().map(String::as_str))
                    .collect();
                prev.prune(&keep)
            }
        };
        Ok(base.union_extend(&wt.tokens, Some(&wt.categories))?)
    }

    fn strategy(
        &self,
        approach: Approach,
        prev: &VocabMap,
        next: &VocabMap,
        week: usize,
    ) -> Result<InitStrategy, HarnessError> {
        Ok(match approach {
            Approach::BaselineScratch => unreachable!("baseline never remaps"),
            Approach::IncrementalRandom => InitStrategy::Random {
                scale: self.config.init_scale,
            },
            Approach::IncrementalAverage => InitStrategy::GlobalAverage,
            Approach::IncrementalUnknown => InitStrategy::UnknownCopy,
            Approach::IncrementalCategory => InitStrategy::CategoryAverage,
            Approach::IncrementalSimilar => {
                let provider = self
                    .options
                    .similarity
                    .ok_or_else(|| HarnessError::Config("approach similar needs a similarity provider".into()))?;
                let fresh: Vec<Token> = next
                    .tokens()
                    .iter()
                    .filter(|t| !prev.contains(t.as_str()))
                    .cloned()
                    .collect();
                InitStrategy::FeatureSimilar(provider.rank(&fresh, &self.segments[week], prev))
            }
        })
    }

    fn observe(&self, state: WeekState<'_, T>) -> Result<(), HarnessError> {
        match self.options.observer {
            Some(o) => o.observe(&state),
            None => Ok(()),
        }
    }

    fn run(&self, approach: Approach, seed: u64, seed_index: usize) -> Result<RunOutput, HarnessError> {
        let cfg = self.config;
        let mut out = RunOutput::default();
        let mut state: Option<(VocabMap, ClassifierParams<T>)> = None;
        let skip = |out: &mut RunOutput, week: usize, reason: String| {
            log::info!("{approach} seed {seed} week {week}: skipped ({reason})");
            out.skipped.push(SkippedWeek {
                approach: approach.name().to_owned(),
                week,
                seed,
                reason,
            });
        };

        for week in 0..self.segments.len() - 1 {
            let segment = &self.segments[week];
            if segment.sessions.is_empty() {
                skip(&mut out, week, "training week has no sessions".into());
                continue;
            }
            let (vocab, mut params) = match state.take() {
                Some((prev_vocab, prev)) if approach.is_incremental() => {
                    let vocab = self.next_vocab(&prev_vocab, week)?;
                    let strategy = self.strategy(approach, &prev_vocab, &vocab, week)?;
                    let mut rows = substream(seed, "new-rows", week as u64);
                    let emb = remap(&vocab, &prev_vocab, &prev.emb, &strategy, &mut rows)?;
                    let params = if cfg.carry_head {
                        ClassifierParams { emb, ..prev }
                    } else {
                        let mut head = substream(seed, "head", week as u64);
                        ClassifierParams::random_head(emb, cfg.aggregator, &mut head, cfg.init_scale)
                    };
                    (vocab, params)
                }
                _ => {
                    let global = approach == Approach::BaselineScratch && cfg.baseline_global_vocab;
                    let vocab = self.fresh_vocab(week, global)?;
                    let emb = EmbeddingMatrix::new_random(
                        &vocab,
                        cfg.embedding_dim,
                        derive_seed(seed, "embedding", week as u64),
                        cfg.init_scale,
                    )?;
                    let mut head = substream(seed, "head", week as u64);
                    (
                        vocab,
                        ClassifierParams::random_head(emb, cfg.aggregator, &mut head, cfg.init_scale),
                    )
                }
            };
            self.observe(WeekState {
                approach,
                seed,
                seed_index,
                week,
                stage: Stage::Initialized,
                vocab: &vocab,
                params: &params,
            })?;

            let train = encode_all(&vocab, segment, cfg.train.max_sequence_length);
            train_segment(
                &mut params,
                &train,
                &cfg.train,
                derive_seed(seed, "shuffle", week as u64),
            )?;
            self.observe(WeekState {
                approach,
                seed,
                seed_index,
                week,
                stage: Stage::Trained,
                vocab: &vocab,
                params: &params,
            })?;

            let eval = encode_all(&vocab, &self.segments[week + 1], cfg.train.max_sequence_length);
            let scored = score_sessions(&params, &eval)?;
            if !scored.skipped.is_empty() {
                log::warn!("week {}: {} empty sessions not scored", week + 1, scored.skipped.len());
            }
            let labels: Vec<bool> = scored.scored.iter().map(|&i| eval[i].label).collect();
            match auc(&scored.scores, &labels) {
                Ok(a) => out.rows.push(WeeklyAuc {
                    approach: approach.name().to_owned(),
                    week,
                    seed,
                    auc: a,
                }),
                Err(e) => skip(&mut out, week, format!("evaluation week {}: {e}", week + 1)),
            }
            state = Some((vocab, params));
        }
        Ok(out)
    }
}

/// Runs every (approach, seed) pair over `segments`.
///
/// Rows are sorted by approach (declaration order), week, then seed, so the
/// table does not depend on scheduling. `week` is the training week; its AUC
/// is measured on the following week.
pub fn run_experiment<T: Scalar>(
    config: &ExperimentConfig,
    segments: &[WeekSegment],
    options: &RunOptions<'_, T>,
) -> Result<ResultTable, HarnessError> {
    config.validate()?;
    if segments.len() < 2 {
        return Err(HarnessError::TooFewSegments(segments.len()));
    }
    if config.approaches.contains(&Approach::IncrementalSimilar) && options.similarity.is_none() {
        return Err(HarnessError::Config(
            "approach similar needs a similarity provider".into(),
        ));
    }
    let started = Instant::now();
    let week_tokens: Vec<WeekTokens> = segments.iter().map(WeekTokens::of).collect();
    let ctx = RunContext {
        config,
        segments,
        week_tokens: &week_tokens,
        options,
    };
    let jobs: Vec<(Approach, usize, u64)> = config
        .approaches
        .iter()
        .flat_map(|&a| config.seeds.iter().enumerate().map(move |(i, &s)| (a, i, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, i, s)| ctx.run(a, s, i))
            .collect::<Result<_, _>>()
    })?;

    let mut rows: Vec<WeeklyAuc> = Vec::new();
    let mut skipped = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        skipped.extend(o.skipped);
    }
    let rank = |name: &str| name.parse::<Approach>().map(|a| a as usize).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (rank(&r.approach), r.week, r.seed));
    skipped.sort_by_key(|r| (rank(&r.approach), r.week, r.seed));

    Ok(ResultTable {
        rows,
        skipped,
        metadata: RunMetadata {
            config: config.clone(),
            data_fingerprint: data_fingerprint(segments),
            weeks: segments.len(),
            sessions: segments.iter().map(|s| s.sessions.len()).sum(),
            week_convention: "training week t; AUC measured on week t+1".into(),
            std_convention: "sample standard deviation (n-1) over per-week seed means".into(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SyntheticConfig};

    fn tiny_data() -> Vec<WeekSegment> {
        synth_generate(&SyntheticConfig {
            weeks: 3,
            initial_catalog: 20,
            new_items_per_week: 5,
            sessions_per_week: 60,
            categories: 3,
            seed: 2,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    fn tiny_config(approaches: Vec<Approach>) -> ExperimentConfig {
        ExperimentConfig {
            approaches,
            seeds: vec![0],
            embedding_dim: 4,
            train: TrainConfig {
                epochs_per_segment: 1,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn approach_names_round_trip() {
        for a in Approach::ALL {
            assert_eq!(a.name().parse::<Approach>().unwrap(), a);
        }
        assert!("lstm".parse::<Approach>().is_err());
        let json = serde_json::to_string(&Approach::IncrementalUnknown).unwrap();
        assert_eq!(json, "\"unknown\"");
    }

    #[test]
    fn config_json_uses_defaults_and_rejects_unknown_fields() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"seeds":[1,2],"vocab_policy":{"kind":"sliding-window","horizon":3}}"#).unwrap();
        assert_eq!(c.seeds, vec![1, 2]);
        assert_eq!(c.embedding_dim, 32);
        assert_eq!(c.vocab_policy, VocabPolicy::SlidingWindow { horizon: 3 });
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"seedz":[1]}"#).is_err());
    }

    #[test]
    fn config_validation() {
        let c = ExperimentConfig {
            seeds: vec![],
            embedding_dim: 0,
            ..ExperimentConfig::default()
        };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("seeds") && msg.contains("embedding_dim"), "{msg}");
    }

    #[test]
    fn needs_two_segments() {
        let data = tiny_data();
        let r = run_experiment::<f64>(
            &tiny_config(vec![Approach::BaselineScratch]),
            &data[..1],
            &RunOptions::default(),
        );
        assert!(matches!(r, Err(HarnessError::TooFewSegments(1))));
    }

    #[test]
    fn similar_requires_provider() {
        let r = run_experiment::<f64>(
            &tiny_config(vec![Approach::IncrementalSimilar]),
            &tiny_data(),
            &RunOptions::default(),
        );
        assert!(matches!(r, Err(HarnessError::Config(_))));
    }

    #[test]
    fn two_segments_one_row() {
        let data = tiny_data();
        let t = run_experiment::<f64>(
            &tiny_config(vec![Approach::IncrementalUnknown]),
            &data[..2],
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].week, 0);
    }

    #[test]
    fn cooccurrence_ranks_by_shared_sessions() {
        let data = tiny_data();
        let old = VocabMap::build(data[0].items().map(Token::as_str), None).unwrap();
        let fresh: Vec<Token> = data[1].items().filter(|t| !old.contains(t.as_str())).cloned().collect();
        let table = CooccurrenceSimilarity.rank(&fresh, &data[1], &old);
        assert!(!table.is_empty());
        for ranked in table.values() {
            assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
            assert!(ranked.iter().all(|(t, _)| old.contains(t.as_str())));
        }
    }

    #[test]
    fn single_class_evaluation_week_is_skipped() {
        let mut data = tiny_data();
        for s in &mut data[1].sessions {
            s.label = true;
        }
        let t = run_experiment::<f64>(
            &tiny_config(vec![Approach::BaselineScratch]),
            &data[..2],
            &RunOptions::default(),
        )
        .unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.skipped.len(), 1);
        assert!(t.skipped[0].reason.contains("undefined"), "{}", t.skipped[0].reason);
    }
}
