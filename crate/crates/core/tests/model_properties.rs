use proptest::prelude::*;

use dynemb::embedding_store::EmbeddingMatrix;
use dynemb::model::{
    batch_loss, segment_pos_weight, train_segment, AggregatorKind, ClassifierParams, EncodedSession, TrainConfig,
};
use dynemb::rng::seeded;
use dynemb::vocab::TokenId;
use rand::Rng;

/// Sessions whose label depends on whether they contain an even item.
fn learnable(seed: u64, n: usize, rows: usize) -> Vec<EncodedSession> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let ids: Vec<TokenId> = (0..rng.random_range(1..5))
                .map(|_| TokenId(rng.random_range(1..rows)))
                .collect();
            let label = ids.iter().any(|id| id.0 % 2 == 0);
            EncodedSession { ids, label }
        })
        .collect()
}

fn train_and_compare(seed: u64, kind: AggregatorKind) -> (f64, f64) {
    let rows = 12;
    let data = learnable(seed, 120, rows);
    let emb = EmbeddingMatrix::<f64>::random_with(rows, 6, &mut seeded(seed ^ 1), 0.1).unwrap();
    let mut p = ClassifierParams::random_head(emb, kind, &mut seeded(seed ^ 2), 0.1);
    let pw = segment_pos_weight(&data);
    let before = batch_loss(&p, &data, pw).unwrap();
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs_per_segment: 3,
        minibatch_size: 16,
        ..TrainConfig::default()
    };
    train_segment(&mut p, &data, &config, seed).unwrap();
    (before, batch_loss(&p, &data, pw).unwrap())
}

#[test]
fn training_lowers_segment_loss_for_most_seeds() {
    for kind in [AggregatorKind::MeanPool, AggregatorKind::Elman] {
        let improved = (0..100u64)
            .filter(|&s| {
                let (before, after) = train_and_compare(s, kind);
                after < before
            })
            .count();
        assert!(improved >= 95, "{kind:?}: loss decreased for {improved}/100 seeds");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn untouched_rows_survive_training(seed in any::<u64>(), elman in any::<bool>()) {
        let kind = if elman { AggregatorKind::Elman } else { AggregatorKind::MeanPool };
        let rows = 10;
        // Only rows below 6 appear in the data.
        let data = learnable(seed, 40, 6);
        let emb = EmbeddingMatrix::<f64>::random_with(rows, 4, &mut seeded(seed), 0.3).unwrap();
        let mut p = ClassifierParams::random_head(emb.clone(), kind, &mut seeded(seed ^ 7), 0.3);
        train_segment(&mut p, &data, &TrainConfig::default(), seed).unwrap();
        for r in 6..rows {
            prop_assert_eq!(p.emb.row(r), emb.row(r));
        }
        prop_assert!(p.is_finite());
    }

    #[test]
    fn pos_weight_is_bounded(labels in prop::collection::vec(any::<bool>(), 1..200)) {
        let data: Vec<EncodedSession> = labels.iter().map(|&label| EncodedSession { ids: vec![TokenId(1)], label }).collect();
        let w = segment_pos_weight(&data);
        prop_assert!((1.0..=50.0).contains(&w));
    }
}
