//! Synthetic clickstreams with a controllable weekly inflow of new items.
//!
//! Every item has a latent quality `q = γ[category] + δ`, and a session's
//! purchase probability is `σ(α · mean q)` over its items. Items of one
//! category share `γ`, so category-level information genuinely transfers to
//! items that have never been seen.

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, Session, WeekSegment};
use crate::rng::substream;
use crate::vocab::Token;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub weeks: usize,
    pub initial_catalog: usize,
    pub new_items_per_week: usize,
    pub sessions_per_week: usize,
    /// Mean of the geometric session-length distribution.
    pub mean_session_length: f64,
    pub max_session_length: usize,
    pub categories: usize,
    /// α in the purchase model.
    pub label_sharpness: f64,
    pub seed: u64,
    /// RFC 3339 instant of the first session.
    pub start: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            weeks: 8,
            initial_catalog: 500,
            new_items_per_week: 50,
            sessions_per_week: 2000,
            mean_session_length: 5.0,
            max_session_length: 50,
            categories: 20,
            label_sharpness: 3.0,
            seed: 0,
            start: "2014-04-01T00:00:00.000Z".into(),
        }
    }
}

const ITEM_ID_BASE: usize = 1_000_000;

impl SyntheticConfig {
    pub fn validate(&self) -> Result<DateTime<Utc>, DataError> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("weeks", self.weeks),
            ("initial_catalog", self.initial_catalog),
            ("sessions_per_week", self.sessions_per_week),
            ("max_session_length", self.max_session_length),
            ("categories", self.categories),
        ] {
            if v == 0 {
                bad.push(format!("{name} must be at least 1"));
            }
        }
        if !(self.mean_session_length >= 1.0 && self.mean_session_length.is_finite()) {
            bad.push("mean_session_length must be a finite value >= 1".into());
        }
        if !(self.label_sharpness > 0.0 && self.label_sharpness.is_finite()) {
            bad.push("label_sharpness must be positive".into());
        }
        let capacity = self.sessions_per_week.saturating_mul(self.max_session_length);
        let biggest_week = self.initial_catalog.max(self.new_items_per_week);
        if self.sessions_per_week > 0 && biggest_week > capacity {
            bad.push(format!(
                "{biggest_week} items introduced in one week cannot all appear in {} sessions of at most {} items",
                self.sessions_per_week, self.max_session_length
            ));
        }
        let start = super::parse_timestamp(&self.start);
        if start.is_err() {
            bad.push(format!("start {:?} is not an RFC 3339 instant", self.start));
        }
        if bad.is_empty() {
            Ok(start.expect("checked"))
        } else {
            Err(DataError::InvalidConfig(bad.join("; ")))
        }
    }

    /// Ground-truth number of items introduced in each week.
    pub fn new_item_schedule(&self) -> Vec<usize> {
        (0..self.weeks)
            .map(|t| {
                if t == 0 {
                    self.initial_catalog
                } else {
                    self.new_items_per_week
                }
            })
            .collect()
    }

    fn introduced_by(&self, week: usize) -> usize {
        self.initial_catalog + week * self.new_items_per_week
    }

    fn intro_week(&self, item: usize) -> usize {
        if item < self.initial_catalog {
            0
        } else {
            1 + (item - self.initial_catalog) / self.new_items_per_week
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Latent quality `γ[i mod categories] + 0.5·δ_i` of the first `n` items.
fn catalog_quality(config: &SyntheticConfig, n: usize) -> Vec<f64> {
    let mut rng = substream(config.seed, "synth-catalog", 0);
    let gamma: Vec<f64> = (0..config.categories).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| {
            let delta: f64 = rng.sample(StandardNormal);
            gamma[i % config.categories] + 0.5 * delta
        })
        .collect()
}

fn purchase_probability(sharpness: f64, qualities: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = qualities.len() as f64;
    sigmoid(sharpness * qualities.sum::<f64>() / n)
}

/// Deterministic weekly segments for `config`.
///
/// Every item appears in the week it is introduced, so the weekly new-item
/// counts of the output equal [`SyntheticConfig::new_item_schedule`].
pub fn synth_generate(config: &SyntheticConfig) -> Result<Vec<WeekSegment>, DataError> {
    let start = config.validate()?;
    let total_items = config.introduced_by(config.weeks - 1);

    let quality = catalog_quality(config, total_items);
    let tokens: Vec<Token> = (0..total_items)
        .map(|i| Token::new((ITEM_ID_BASE + i).to_string()).expect("numeric id"))
        .collect();
    let category_names: Vec<String> = (0..config.categories).map(|c| (c + 1).to_string()).collect();

    let length_dist = Geometric::new(1.0 / config.mean_session_length).expect("mean >= 1");
    let week_ms = Duration::days(7).num_milliseconds();
    let n_sessions = config.sessions_per_week as i64;
    let mut next_session_id = 1u64;
    let mut segments = Vec::with_capacity(config.weeks);

    for week in 0..config.weeks {
        let mut rng = substream(config.seed, "synth-week", week as u64);
        let available = config.introduced_by(week);
        let first_new = if week == 0 { 0 } else { config.introduced_by(week - 1) };
        let weights = (0..available).map(|i| if config.intro_week(i) + 2 > week { 2u32 } else { 1 });
        let popularity = WeightedIndex::new(weights).expect("non-empty catalog");

        // Items introduced this week are dealt round-robin across sessions.
        let mut forced: Vec<Vec<usize>> = vec![Vec::new(); config.sessions_per_week];
        for (k, item) in (first_new..available).enumerate() {
            forced[k % config.sessions_per_week].push(item);
        }

        let week_start = start + Duration::days(7) * week as i32;
        let mut sessions = Vec::with_capacity(config.sessions_per_week);
        for (s, must) in forced.into_iter().enumerate() {
            let drawn = 1 + length_dist.sample(&mut rng) as usize;
            let len = drawn.clamp(1, config.max_session_length).max(must.len());
            let mut items = must;
            while items.len() < len {
                items.push(popularity.sample(&mut rng));
            }
            // Forced items would otherwise always lead the session.
            items.shuffle(&mut rng);
            let p = purchase_probability(config.label_sharpness, items.iter().map(|&i| quality[i]));
            let label = rng.random_bool(p);
            let session_start = week_start + Duration::milliseconds(week_ms * s as i64 / n_sessions);
            sessions.push(Session {
                session_id: next_session_id.to_string(),
                timestamps: (0..items.len())
                    .map(|k| session_start + Duration::seconds(k as i64))
                    .collect(),
                categories: items
                    .iter()
                    .map(|&i| Some(category_names[i % config.categories].clone()))
                    .collect(),
                items: items.iter().map(|&i| tokens[i].clone()).collect(),
                label,
            });
            next_session_id += 1;
        }
        segments.push(WeekSegment {
            index: week,
            start: week_start,
            end: week_start + Duration::days(7),
            sessions,
            partial: false,
        });
    }
    Ok(segments)
}
