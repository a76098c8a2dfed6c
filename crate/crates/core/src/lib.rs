//! Extensible embedding vocabularies for e-commerce models.
//!
//! New products arrive every week, but an embedding layer has a fixed input
//! vocabulary. This crate rebuilds embedding tables against a changed
//! vocabulary without losing learned rows ([`embedding_store::remap`]),
//! offers cold-start initializations for the rows of new tokens, and runs a
//! train-on-week-t / evaluate-on-week-t+1 protocol comparing incremental
//! training against retraining from scratch.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, the precision snapshots are stored in.
//!
//! ```
//! use dynemb::embedding_store::{remap, EmbeddingMatrix, InitStrategy};
//! use dynemb::rng::seeded;
//! use dynemb::vocab::VocabMap;
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let old = VocabMap::build(["a", "b"], None)?;
//! let emb = EmbeddingMatrix::<f64>::new_random(&old, 32, 7, 0.1)?;
//!
//! // Next week: "b" disappears, "c" arrives.
//! let new = VocabMap::build(["a", "c"], None)?;
//! let next = remap(&new, &old, &emb, &InitStrategy::UnknownCopy, &mut seeded(0))?;
//! assert_eq!(next.row(1), emb.row(1));
//! assert_eq!(next.row(2), emb.row(0));
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod embedding_store;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rng;
mod scalar;
pub mod vocab;

pub use scalar::Scalar;

pub type Embedding = embedding_store::EmbeddingMatrix<f64>;
pub type Embedding32 = embedding_store::EmbeddingMatrix<f32>;
pub type Classifier = model::ClassifierParams<f64>;
pub type Classifier32 = model::ClassifierParams<f32>;
pub type Gradients = model::Gradients<f64>;
pub type AdamState = model::AdamState<f64>;
