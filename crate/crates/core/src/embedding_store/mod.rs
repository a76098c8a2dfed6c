//! Embedding weight tables and weight-preserving vocabulary remapping.
//!
//! An embedding over one-hot inputs is just one weight row per token, so a
//! table can be rebuilt against a different vocabulary by moving rows: tokens
//! present in both vocabularies keep their row bit for bit, tokens only in
//! the new vocabulary get a row from an [`InitStrategy`], and tokens only in
//! the old vocabulary are dropped.

mod snapshot;

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::rng::{seeded, SeededRng};
use crate::scalar::{mean_of_rows, Scalar};
use crate::vocab::{Token, TokenId, VocabMap};

pub use snapshot::{load_snapshot, save_snapshot, Snapshot, SnapshotError, SnapshotMetadata, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("random init scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("embedding has {rows} rows but its vocabulary has {vocab} tokens")]
    VocabMismatch { rows: usize, vocab: usize },
    #[error("weight buffer of length {len} does not fit {rows}x{dim}")]
    BadShape { rows: usize, dim: usize, len: usize },
    #[error("embedding has no rows")]
    Empty,
    #[error("similarity score for {0:?} is not finite")]
    NonFiniteScore(String),
}

/// Dense `rows × dim` weight table, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            data: vec![T::zero(); rows * dim],
        }
    }

    pub fn from_flat(rows: usize, dim: usize, data: Vec<T>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        if data.len() != rows * dim {
            return Err(EmbeddingError::BadShape {
                rows,
                dim,
                len: data.len(),
            });
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map(Vec::len).ok_or(EmbeddingError::Empty)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(EmbeddingError::BadShape {
                    rows: rows.len(),
                    dim,
                    len: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), dim, data)
    }

    /// Whole-table init with i.i.d. uniform draws on `[-scale, scale]`,
    /// row by row in ascending id order.
    pub fn new_random(vocab: &VocabMap, dim: usize, seed: u64, scale: f64) -> Result<Self, EmbeddingError> {
        let mut rng = seeded(seed);
        Self::random_with(vocab.len(), dim, &mut rng, scale)
    }

    pub fn random_with(rows: usize, dim: usize, rng: &mut SeededRng, scale: f64) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        check_scale(scale)?;
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows {
            data.extend(random_row::<T>(dim, rng, scale));
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, id: usize) -> &[T] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, id: usize) -> &mut [T] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingMatrix<U> {
        EmbeddingMatrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|x| U::of(x.to_f64_lossy())).collect(),
        }
    }

    /// Mean over every row, `<UNK>` included.
    pub fn global_average(&self) -> Result<Vec<T>, EmbeddingError> {
        mean_of_rows(self.dim, self.iter_rows()).ok_or(EmbeddingError::Empty)
    }
}

fn check_scale(scale: f64) -> Result<(), EmbeddingError> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(EmbeddingError::InvalidScale(scale))
    }
}

fn random_row<T: Scalar>(dim: usize, rng: &mut SeededRng, scale: f64) -> impl Iterator<Item = T> + '_ {
    (0..dim).map(move |_| T::of(rng.random_range(-scale..=scale)))
}

/// Externally supplied similarity ranking: new token → `(old token, score)`.
pub type SimilarityTable = HashMap<Token, Vec<(Token, f64)>>;

/// How rows are chosen for tokens that have no learned weights yet.
#[derive(Clone, Debug, PartialEq)]
pub enum InitStrategy {
    /// Fresh uniform draws on `[-scale, scale]`.
    Random { scale: f64 },
    /// Copy of the learned `<UNK>` row.
    UnknownCopy,
    /// Mean of all old rows, `<UNK>` included.
    GlobalAverage,
    /// Mean of old rows in the new token's category. Falls back to
    /// [`InitStrategy::GlobalAverage`], then to [`InitStrategy::UnknownCopy`].
    CategoryAverage,
    /// Row of the best-scored old token from the ranking. Tokens without a
    /// usable ranking fall back to [`InitStrategy::CategoryAverage`].
    FeatureSimilar(SimilarityTable),
}

impl InitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::Random { .. } => "random",
            InitStrategy::UnknownCopy => "unknown",
            InitStrategy::GlobalAverage => "average",
            InitStrategy::CategoryAverage => "category",
            InitStrategy::FeatureSimilar(_) => "similar",
        }
    }

    fn validate(&self) -> Result<(), EmbeddingError> {
        match self {
            InitStrategy::Random { scale } => check_scale(*scale),
            InitStrategy::FeatureSimilar(table) => {
                for (token, ranked) in table {
                    if ranked.iter().any(|(_, s)| !s.is_finite()) {
                        return Err(EmbeddingError::NonFiniteScore(token.to_string()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Memoizes averages over the old table during one remap.
struct OldTable<'a, T> {
    emb: &'a EmbeddingMatrix<T>,
    map: &'a VocabMap,
    global: Option<Vec<T>>,
    by_category: HashMap<String, Option<Vec<T>>>,
}

impl<'a, T: Scalar> OldTable<'a, T> {
    fn new(emb: &'a EmbeddingMatrix<T>, map: &'a VocabMap) -> Result<Self, EmbeddingError> {
        if emb.rows() == 0 {
            return Err(EmbeddingError::Empty);
        }
        if emb.rows() != map.len() {
            return Err(EmbeddingError::VocabMismatch {
                rows: emb.rows(),
                vocab: map.len(),
            });
        }
        Ok(OldTable {
            emb,
            map,
            global: None,
            by_category: HashMap::new(),
        })
    }

    fn unknown(&self) -> Vec<T> {
        self.emb.row(TokenId::UNK.index()).to_vec()
    }

    fn global(&mut self) -> Vec<T> {
        if self.global.is_none() {
            self.global = mean_of_rows(self.emb.dim(), self.emb.iter_rows());
        }
        match &self.global {
            Some(g) => g.clone(),
            None => self.unknown(),
        }
    }

    fn category(&mut self, category: Option<&str>) -> Vec<T> {
        let Some(cat) = category else {
            return self.global();
        };
        if !self.by_category.contains_key(cat) {
            let (emb, map) = (self.emb, self.map);
            let members = map
                .iter()
                .filter(|(t, _)| map.category(t.as_str()) == Some(cat))
                .map(|(_, id)| emb.row(id.index()));
            let mean = mean_of_rows(emb.dim(), members);
            self.by_category.insert(cat.to_owned(), mean);
        }
        match &self.by_category[cat] {
            Some(m) => m.clone(),
            None => self.global(),
        }
    }

    fn init(&mut self, strategy: &InitStrategy, token: &Token, category: Option<&str>, rng: &mut SeededRng) -> Vec<T> {
        match strategy {
            InitStrategy::Random { scale } => random_row(self.emb.dim(), rng, *scale).collect(),
            InitStrategy::UnknownCopy => self.unknown(),
            InitStrategy::GlobalAverage => self.global(),
            InitStrategy::CategoryAverage => self.category(category),
            InitStrategy::FeatureSimilar(table) => {
                let best = table.get(token).and_then(|ranked| {
                    ranked
                        .iter()
                        .filter_map(|(t, s)| self.map.get(t.as_str()).map(|id| (id, *s)))
                        .fold(None, |best: Option<(TokenId, f64)>, (id, s)| match best {
                            Some((_, bs)) if bs >= s => best,
                            _ => Some((id, s)),
                        })
                });
                match best {
                    Some((id, _)) => self.emb.row(id.index()).to_vec(),
                    None => self.category(category),
                }
            }
        }
    }
}

/// Initial weights for a single token absent from `old_map`.
///
/// `category` is the new token's category, consulted by the category and
/// similarity strategies. Only [`InitStrategy::Random`] draws from `rng`.
pub fn init_row<T: Scalar>(
    strategy: &InitStrategy,
    old_emb: &EmbeddingMatrix<T>,
    old_map: &VocabMap,
    token: &Token,
    category: Option<&str>,
    rng: &mut SeededRng,
) -> Result<Vec<T>, EmbeddingError> {
    strategy.validate()?;
    let mut old = OldTable::new(old_emb, old_map)?;
    Ok(old.init(strategy, token, category, rng))
}

/// Rebuilds `old_emb` against `new_map`.
///
/// Rows are filled in ascending new id. Tokens known to `old_map` copy their
/// old row exactly; the rest are initialized by `strategy`. Tokens missing
/// from `new_map` are dropped, so this both extends and reduces the table.
pub fn remap<T: Scalar>(
    new_map: &VocabMap,
    old_map: &VocabMap,
    old_emb: &EmbeddingMatrix<T>,
    strategy: &InitStrategy,
    rng: &mut SeededRng,
) -> Result<EmbeddingMatrix<T>, EmbeddingError> {
    strategy.validate()?;
    let mut old = OldTable::new(old_emb, old_map)?;
    let dim = old_emb.dim();
    let mut out = EmbeddingMatrix::zeros(new_map.len(), dim);
    for (token, id) in new_map.iter() {
        let dst = out.row_mut(id.index());
        match old_map.get(token.as_str()) {
            Some(old_id) => dst.copy_from_slice(old_emb.row(old_id.index())),
            None => {
                let row = old.init(strategy, token, new_map.category(token.as_str()), rng);
                dst.copy_from_slice(&row);
            }
        }
    }
    Ok(out)
}
