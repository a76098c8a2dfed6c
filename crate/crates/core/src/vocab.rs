//! Token vocabularies with a reserved unknown token.
//!
//! A [`VocabMap`] assigns contiguous ids to product tokens. The unknown token
//! `<UNK>` always sits at id 0 and absorbs every out-of-vocabulary lookup.
//! Vocabularies grow with [`VocabMap::union_extend`] (existing ids never move)
//! and shrink with [`VocabMap::prune`] (survivors keep their relative order).

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Literal value of the reserved unknown token.
pub const UNK: &str = "<UNK>";

/// A product identifier entering the embedding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Wraps an ordinary (non-reserved) product id.
    pub fn new(value: impl Into<String>) -> Result<Self, VocabError> {
        let value = value.into();
        if value.is_empty() {
            return Err(VocabError::EmptyToken);
        }
        if value == UNK {
            return Err(VocabError::ReservedToken);
        }
        Ok(Token(value))
    }

    pub fn unk() -> Self {
        Token(UNK.to_owned())
    }

    pub fn is_unk(&self) -> bool {
        self.0 == UNK
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Row index of a token inside its vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub usize);

impl TokenId {
    pub const UNK: TokenId = TokenId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("the reserved token \"<UNK>\" cannot be used as a product id")]
    ReservedToken,
    #[error("tokens must be non-empty")]
    EmptyToken,
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("token ids are not contiguous: expected id {expected}, found {found}")]
    NonContiguous { expected: usize, found: usize },
    #[error("\"<UNK>\" must be present at id 0")]
    MissingUnknown,
}

/// Bijective token ↔ id mapping with optional product categories.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabMap {
    tokens: Vec<Token>,
    index: HashMap<Token, TokenId>,
    categories: HashMap<Token, String>,
}

impl Default for VocabMap {
    fn default() -> Self {
        Self::unk_only()
    }
}

impl VocabMap {
    /// A vocabulary containing only `<UNK>`.
    pub fn unk_only() -> Self {
        let unk = Token::unk();
        let mut index = HashMap::new();
        index.insert(unk.clone(), TokenId::UNK);
        VocabMap {
            tokens: vec![unk],
            index,
            categories: HashMap::new(),
        }
    }

    /// Builds a vocabulary from raw token strings, assigning ids 1.. in order
    /// of first occurrence. Duplicates collapse.
    pub fn build<I, S>(tokens: I, categories: Option<&HashMap<String, String>>) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::unk_only().union_extend(tokens, categories)
    }

    /// Rebuilds a vocabulary from an explicit id-ordered token list, as stored
    /// in snapshots. Validates every invariant.
    pub fn from_ordered(
        entries: Vec<(Token, TokenId)>,
        categories: HashMap<Token, String>,
    ) -> Result<Self, VocabError> {
        let mut tokens = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (expected, (token, id)) in entries.into_iter().enumerate() {
            if id.0 != expected {
                return Err(VocabError::NonContiguous { expected, found: id.0 });
            }
            if token.as_str().is_empty() {
                return Err(VocabError::EmptyToken);
            }
            if expected == 0 && !token.is_unk() {
                return Err(VocabError::MissingUnknown);
            }
            if expected != 0 && token.is_unk() {
                return Err(VocabError::ReservedToken);
            }
            if index.insert(token.clone(), id).is_some() {
                return Err(VocabError::DuplicateToken(token.0));
            }
            tokens.push(token);
        }
        if tokens.is_empty() {
            return Err(VocabError::MissingUnknown);
        }
        let categories = categories
            .into_iter()
            .filter(|(t, _)| !t.is_unk() && index.contains_key(t))
            .collect();
        Ok(VocabMap {
            tokens,
            index,
            categories,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: `<UNK>` is present in every vocabulary.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `token`, or [`TokenId::UNK`] when absent. Never fails.
    pub fn lookup(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(TokenId::UNK)
    }

    /// Id of `token` if it is in the vocabulary.
    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: TokenId) -> Option<&Token> {
        self.tokens.get(id.0)
    }

    pub fn category(&self, token: &str) -> Option<&str> {
        self.categories.get(token).map(String::as_str)
    }

    pub fn categories(&self) -> &HashMap<Token, String> {
        &self.categories
    }

    /// `(token, id)` pairs in ascending id order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&Token, TokenId)> + '_ {
        self.tokens.iter().enumerate().map(|(i, t)| (t, TokenId(i)))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Appends unseen tokens with fresh ids in first-occurrence order. Every
    /// existing token keeps its id. Categories are merged, new values winning.
    pub fn union_extend<I, S>(
        &self,
        new_tokens: I,
        categories: Option<&HashMap<String, String>>,
    ) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = self.clone();
        for raw in new_tokens {
            let raw = raw.as_ref();
            if out.index.contains_key(raw) {
                if raw == UNK {
                    return Err(VocabError::ReservedToken);
                }
                continue;
            }
            let token = Token::new(raw)?;
            let id = TokenId(out.tokens.len());
            out.index.insert(token.clone(), id);
            out.tokens.push(token);
        }
        if let Some(cats) = categories {
            for (tok, cat) in cats {
                if let Some((token, _)) = out.index.get_key_value(tok.as_str()) {
                    if !token.is_unk() {
                        out.categories.insert(token.clone(), cat.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Keeps `<UNK>` plus the tokens of `keep` that are present, re-indexed
    /// contiguously in their previous relative order.
    pub fn prune<S: Borrow<str> + Eq + std::hash::Hash>(&self, keep: &HashSet<S>) -> Self {
        let mut out = Self::unk_only();
        for token in self.tokens.iter().skip(1) {
            if keep.contains(token.as_str()) {
                let id = TokenId(out.tokens.len());
                out.index.insert(token.clone(), id);
                out.tokens.push(token.clone());
                if let Some(cat) = self.categories.get(token) {
                    out.categories.insert(token.clone(), cat.clone());
                }
            }
        }
        out
    }
}
