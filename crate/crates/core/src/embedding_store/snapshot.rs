//! Binary snapshot files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "LLEB" | version u32 | vocab_size u32 | dim u32
//! metadata: u32 byte length + UTF-8 JSON object
//! vocab_size × (u32 token length, token bytes, u32 id, u8 has_category,
//!               [u32 category length, category bytes])
//! vocab_size × dim f64 weights, row-major
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EmbeddingError, EmbeddingMatrix};
use crate::vocab::{Token, TokenId, VocabError, VocabMap, UNK};

pub const MAGIC: &[u8; 4] = b"LLEB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad magic: expected \"LLEB\", found {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported version {0} (this reader understands version 1)")]
    UnsupportedVersion(u32),
    #[error("unexpected end of {0}")]
    UnexpectedEof(&'static str),
    #[error("invalid UTF-8 in {0}")]
    BadUtf8(&'static str),
    #[error("invalid metadata JSON: {0}")]
    BadMetadata(#[source] serde_json::Error),
    #[error("invalid vocab table: {0}")]
    BadVocab(#[from] VocabError),
    #[error("invalid has-category flag {0} in vocab table")]
    BadCategoryFlag(u8),
    #[error("invalid weights: {0}")]
    BadWeights(#[from] EmbeddingError),
    #[error("non-finite weight at row {row}, column {col}")]
    NonFiniteWeight { row: usize, col: usize },
    #[error("{0} trailing bytes after weights")]
    TrailingBytes(usize),
    #[error("{field} {value} does not fit the u32 header field")]
    TooLarge { field: &'static str, value: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotMetadata {
    /// RFC 3339 creation instant.
    pub created_at: String,
    pub strategy: String,
    /// Training week the weights were produced by.
    pub week: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub version: u32,
    pub vocab: VocabMap,
    pub embedding: EmbeddingMatrix<f64>,
    pub metadata: SnapshotMetadata,
}

impl Snapshot {
    pub fn new(
        vocab: VocabMap,
        embedding: EmbeddingMatrix<f64>,
        metadata: SnapshotMetadata,
    ) -> Result<Self, EmbeddingError> {
        if embedding.rows() != vocab.len() {
            return Err(EmbeddingError::VocabMismatch {
                rows: embedding.rows(),
                vocab: vocab.len(),
            });
        }
        Ok(Snapshot {
            version: FORMAT_VERSION,
            vocab,
            embedding,
            metadata,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SnapshotError> {
        let mut out = Vec::with_capacity(64 + self.embedding.as_slice().len() * 8);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, self.version);
        put_len(&mut out, "vocab_size", self.vocab.len())?;
        put_len(&mut out, "dim", self.embedding.dim())?;
        let meta = serde_json::to_vec(&self.metadata).map_err(SnapshotError::BadMetadata)?;
        put_len(&mut out, "metadata length", meta.len())?;
        out.extend_from_slice(&meta);
        for (token, id) in self.vocab.iter() {
            put_str(&mut out, "token length", token.as_str())?;
            put_len(&mut out, "token id", id.index())?;
            match self.vocab.category(token.as_str()) {
                Some(cat) => {
                    out.push(1);
                    put_str(&mut out, "category length", cat)?;
                }
                None => out.push(0),
            }
        }
        for w in self.embedding.as_slice() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(SnapshotError::BadMagic(magic.to_vec()));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let vocab_size = r.u32("vocab_size")? as usize;
        let dim = r.u32("dim")? as usize;
        let meta_len = r.u32("metadata")? as usize;
        let meta = r.take(meta_len, "metadata")?;
        let metadata: SnapshotMetadata = serde_json::from_slice(meta).map_err(SnapshotError::BadMetadata)?;

        let mut entries = Vec::with_capacity(vocab_size.min(1 << 20));
        let mut categories = HashMap::new();
        for _ in 0..vocab_size {
            let token = r.string("vocab token")?;
            let id = r.u32("vocab id")? as usize;
            let token = if token == UNK { Token::unk() } else { Token::new(token)? };
            match r.u8("vocab category flag")? {
                0 => {}
                1 => {
                    let cat = r.string("vocab category")?;
                    categories.insert(token.clone(), cat);
                }
                other => return Err(SnapshotError::BadCategoryFlag(other)),
            }
            entries.push((token, TokenId(id)));
        }
        let vocab = VocabMap::from_ordered(entries, categories)?;

        let n = vocab_size
            .checked_mul(dim)
            .ok_or(SnapshotError::UnexpectedEof("weights"))?;
        let raw = r.take(
            n.checked_mul(8).ok_or(SnapshotError::UnexpectedEof("weights"))?,
            "weights",
        )?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if let Some(pos) = data.iter().position(|w| !w.is_finite()) {
            return Err(SnapshotError::NonFiniteWeight {
                row: pos / dim,
                col: pos % dim,
            });
        }
        if r.pos != bytes.len() {
            return Err(SnapshotError::TrailingBytes(bytes.len() - r.pos));
        }
        let embedding = EmbeddingMatrix::from_flat(vocab_size, dim, data)?;
        Ok(Snapshot {
            version,
            vocab,
            embedding,
            metadata,
        })
    }
}

pub fn save_snapshot(snapshot: &Snapshot, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    fs::write(path, snapshot.to_bytes()?)?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot, SnapshotError> {
    Snapshot::from_bytes(&fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_len(out: &mut Vec<u8>, field: &'static str, v: usize) -> Result<(), SnapshotError> {
    let v = u32::try_from(v).map_err(|_| SnapshotError::TooLarge { field, value: v })?;
    put_u32(out, v);
    Ok(())
}

fn put_str(out: &mut Vec<u8>, field: &'static str, s: &str) -> Result<(), SnapshotError> {
    put_len(out, field, s.len())?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(SnapshotError::UnexpectedEof(field))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, SnapshotError> {
        Ok(self.take(1, field)?[0])
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, SnapshotError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn string(&mut self, field: &'static str) -> Result<String, SnapshotError> {
        let len = self.u32(field)? as usize;
        let b = self.take(len, field)?;
        String::from_utf8(b.to_vec()).map_err(|_| SnapshotError::BadUtf8(field))
    }
}
