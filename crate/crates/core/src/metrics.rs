//! Ranking metrics and result aggregation.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("AUC is undefined: {positives} positive and {negatives} negative labels")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score at index {0} is not finite")]
    NonFinite(usize),
}

/// Area under the ROC curve via the Mann–Whitney rank sum.
///
/// Tied scores receive their average rank, which counts every tied
/// positive/negative pair as one half.
pub fn auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass { positives, negatives });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Ranks are 1-based; doubled so tie averages stay integral.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let rank2 = (i + 1 + j) as u128;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        pos_rank_sum2 += rank2 * tied_pos;
        i = j;
    }
    let p = positives as u128;
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// One evaluated (approach, week, seed) cell. `week` is the training week;
/// the score was measured on the following week.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeeklyAuc {
    pub approach: String,
    pub week: usize,
    pub seed: u64,
    pub auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub approach: String,
    pub mean: f64,
    /// Sample (n−1) standard deviation over per-week means; 0 for one week.
    pub std: f64,
    /// `(week, mean over seeds)` in ascending week order.
    pub weekly_means: Vec<(usize, f64)>,
}

/// Per approach: average seeds within each week, then mean and sample
/// standard deviation across weeks. Approaches appear in first-seen order.
pub fn aggregate(results: &[WeeklyAuc]) -> Vec<ApproachSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in results {
        if !cells.contains_key(r.approach.as_str()) {
            order.push(&r.approach);
        }
        cells
            .entry(&r.approach)
            .or_default()
            .entry(r.week)
            .or_default()
            .push(r.auc);
    }
    order
        .into_iter()
        .map(|name| {
            let weekly_means: Vec<(usize, f64)> = cells[name]
                .iter()
                .map(|(&w, v)| (w, v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            let (mean, std) = mean_std(weekly_means.iter().map(|&(_, m)| m));
            ApproachSummary {
                approach: name.to_owned(),
                mean,
                std,
                weekly_means,
            }
        })
        .collect()
}

/// Mean and sample standard deviation; std is 0 below two values.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Count of items first seen in each week, weeks in order.
pub fn new_items_per_week<W, I, S>(weeks: W) -> Vec<usize>
where
    W: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen: HashSet<String> = HashSet::new();
    weeks
        .into_iter()
        .map(|items| {
            let mut fresh = 0;
            for item in items {
                let item = item.as_ref();
                if !seen.contains(item) {
                    seen.insert(item.to_owned());
                    fresh += 1;
                }
            }
            fresh
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(brute_force(&s, &l), 0.75);
        assert_eq!(auc(&s, &l).unwrap(), 0.75);
        assert_eq!(auc(&[0.5f32, 0.5], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn auc_errors() {
        assert_eq!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(MetricsError::SingleClass {
                positives: 2,
                negatives: 0
            })
        );
        assert!(matches!(
            auc(&[0.1], &[true, false]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(auc(&[f64::NAN, 0.2], &[true, false]), Err(MetricsError::NonFinite(0)));
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[WeeklyAuc {
            approach: "a".into(),
            week: 0,
            seed: 0,
            auc: 0.7,
        }]);
        assert_eq!((one[0].mean, one[0].std), (0.7, 0.0));

        let two = aggregate(&[
            WeeklyAuc {
                approach: "a".into(),
                week: 0,
                seed: 0,
                auc: 0.6,
            },
            WeeklyAuc {
                approach: "a".into(),
                week: 1,
                seed: 0,
                auc: 0.8,
            },
        ]);
        assert!((two[0].mean - 0.7).abs() < 1e-12);
        assert!((two[0].std - 0.141421356).abs() < 1e-6);
    }

    #[test]
    fn aggregate_averages_seeds_within_week_first() {
        let rows = [
            WeeklyAuc {
                approach: "b".into(),
                week: 0,
                seed: 0,
                auc: 0.5,
            },
            WeeklyAuc {
                approach: "b".into(),
                week: 0,
                seed: 1,
                auc: 0.7,
            },
            WeeklyAuc {
                approach: "b".into(),
                week: 1,
                seed: 0,
                auc: 0.8,
            },
            WeeklyAuc {
                approach: "a".into(),
                week: 0,
                seed: 0,
                auc: 0.9,
            },
        ];
        let s = aggregate(&rows);
        assert_eq!(s[0].approach, "b");
        assert_eq!(s[0].weekly_means.len(), 2);
        assert!((s[0].weekly_means[0].1 - 0.6).abs() < 1e-12);
        assert!((s[0].mean - 0.7).abs() < 1e-12);
        assert_eq!(s[1].approach, "a");
    }

    #[test]
    fn new_items_examples() {
        assert_eq!(new_items_per_week([vec!["a", "b"]]), vec![2]);
        assert_eq!(new_items_per_week([vec!["a", "b"], vec!["b", "c"]]), vec![2, 1]);
        assert_eq!(new_items_per_week([vec!["a"], vec!["a"], vec!["a"]]), vec![1, 0, 0]);
        assert_eq!(new_items_per_week([vec!["a", "a", "b"]]), vec![2]);
    }

    fn labeled() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..8).prop_map(|k| k as f64 / 8.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_with_ties((s, l) in labeled()) {
            let p = l.iter().filter(|&&x| x).count();
            prop_assume!(p > 0 && p < l.len());
            prop_assert!((auc(&s, &l).unwrap() - brute_force(&s, &l)).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_under_monotone_transform((s, l) in labeled()) {
            let p = l.iter().filter(|&&x| x).count();
            prop_assume!(p > 0 && p < l.len());
            let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 2.0).collect();
            prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
        }

        #[test]
        fn auc_complement((s, l) in labeled()) {
            let p = l.iter().filter(|&&x| x).count();
            prop_assume!(p > 0 && p < l.len());
            let flipped: Vec<bool> = l.iter().map(|x| !x).collect();
            prop_assert!((auc(&s, &l).unwrap() + auc(&s, &flipped).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn new_items_sum_to_distinct(weeks in prop::collection::vec(prop::collection::vec("[a-j]", 0..8), 1..6)) {
            let total: HashSet<&String> = weeks.iter().flatten().collect();
            prop_assert_eq!(new_items_per_week(&weeks).iter().sum::<usize>(), total.len());
        }
    }
}
