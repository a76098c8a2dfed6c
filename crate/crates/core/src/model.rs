//! A small session classifier trained end to end with the embedding.
//!
//! `embedding → aggregator → affine → sigmoid`, with hand-derived gradients
//! and Adam. The aggregator is either a mean over item rows or an Elman
//! recurrence `h_t = tanh(W_h·h_{t−1} + W_x·x_t + b_h)`.
//!
//! Embedding gradients are sparse: only rows indexed by the minibatch get a
//! gradient, and Adam only ever touches rows that have received one, so rows
//! of tokens absent from a training segment come out bit-identical.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_store::EmbeddingMatrix;
use crate::rng::{seeded, SeededRng};
use crate::scalar::{mean_of_rows, Scalar};
use crate::vocab::{TokenId, VocabMap};

/// Lower probability clamp applied before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("session has no items")]
    EmptySequence,
    #[error("token id {id} out of range for an embedding with {rows} rows")]
    IdOutOfRange { id: usize, rows: usize },
    #[error("minibatch is empty")]
    EmptyBatch,
    #[error("training segment has no sessions")]
    EmptySegment,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorKind {
    #[default]
    MeanPool,
    Elman,
}

/// Elman recurrence weights, matrices row-major `n × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElmanParams<T> {
    pub n: usize,
    pub w_h: Vec<T>,
    pub w_x: Vec<T>,
    pub b_h: Vec<T>,
}

impl<T: Scalar> ElmanParams<T> {
    pub fn zeros(n: usize) -> Self {
        ElmanParams {
            n,
            w_h: vec![T::zero(); n * n],
            w_x: vec![T::zero(); n * n],
            b_h: vec![T::zero(); n],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Aggregator<T> {
    MeanPool,
    Elman(ElmanParams<T>),
}

impl<T> Aggregator<T> {
    pub fn kind(&self) -> AggregatorKind {
        match self {
            Aggregator::MeanPool => AggregatorKind::MeanPool,
            Aggregator::Elman(_) => AggregatorKind::Elman,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams<T> {
    pub emb: EmbeddingMatrix<T>,
    pub agg: Aggregator<T>,
    pub w_out: Vec<T>,
    pub b_out: T,
}

impl<T: Scalar> ClassifierParams<T> {
    /// All-zero head over an existing embedding.
    pub fn zero_head(emb: EmbeddingMatrix<T>, kind: AggregatorKind) -> Self {
        let n = emb.dim();
        let agg = match kind {
            AggregatorKind::MeanPool => Aggregator::MeanPool,
            AggregatorKind::Elman => Aggregator::Elman(ElmanParams::zeros(n)),
        };
        ClassifierParams {
            emb,
            agg,
            w_out: vec![T::zero(); n],
            b_out: T::zero(),
        }
    }

    /// Head weights uniform on `[-scale, scale]`, output bias zero.
    pub fn random_head(emb: EmbeddingMatrix<T>, kind: AggregatorKind, rng: &mut SeededRng, scale: f64) -> Self {
        let mut p = Self::zero_head(emb, kind);
        p.reinit_head(rng, scale);
        p
    }

    pub fn reinit_head(&mut self, rng: &mut SeededRng, scale: f64) {
        let mut draw = |v: &mut [T]| v.iter_mut().for_each(|x| *x = T::of(rng.random_range(-scale..=scale)));
        if let Aggregator::Elman(e) = &mut self.agg {
            draw(&mut e.w_h);
            draw(&mut e.w_x);
            draw(&mut e.b_h);
        }
        draw(&mut self.w_out);
        self.b_out = T::zero();
    }

    pub fn dim(&self) -> usize {
        self.emb.dim()
    }

    pub fn is_finite(&self) -> bool {
        let head = match &self.agg {
            Aggregator::MeanPool => true,
            Aggregator::Elman(e) => e.w_h.iter().chain(&e.w_x).chain(&e.b_h).all(|x| x.is_finite()),
        };
        head && self.emb.is_finite() && self.w_out.iter().all(|x| x.is_finite()) && self.b_out.is_finite()
    }
}

/// A session as the model sees it: embedding ids plus the purchase label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSession {
    pub ids: Vec<TokenId>,
    pub label: bool,
}

impl EncodedSession {
    /// Maps items through `vocab` (unknown items become `<UNK>`) and keeps
    /// the most recent `max_len`.
    pub fn encode<S: AsRef<str>>(vocab: &VocabMap, items: &[S], label: bool, max_len: usize) -> Self {
        let start = items.len().saturating_sub(max_len);
        EncodedSession {
            ids: items[start..].iter().map(|t| vocab.lookup(t.as_ref())).collect(),
            label,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosWeightMode {
    /// Negatives/positives ratio of the training segment, clamped to [1, 50].
    #[default]
    Automatic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs_per_segment: usize,
    pub minibatch_size: usize,
    pub max_sequence_length: usize,
    pub pos_weight_mode: PosWeightMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs_per_segment: 5,
            minibatch_size: 32,
            max_sequence_length: 50,
            pos_weight_mode: PosWeightMode::Automatic,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut bad = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad.push("learning_rate");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            bad.push("adam_beta1");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            bad.push("adam_beta2");
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            bad.push("adam_eps");
        }
        if self.minibatch_size == 0 {
            bad.push("minibatch_size");
        }
        if self.max_sequence_length == 0 {
            bad.push("max_sequence_length");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(bad.join(", ")))
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn prob_bounds<T: Scalar>() -> (T, T) {
    let lo = T::of(PROB_FLOOR);
    let hi = T::one() - lo.max(T::epsilon());
    (lo, hi)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `out = W·x` for row-major `n × n` W.
fn matvec<T: Scalar>(w: &[T], x: &[T], out: &mut [T]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&w[i * n..(i + 1) * n], x);
    }
}

/// `out += Wᵀ·x`.
fn matvec_t_acc<T: Scalar>(w: &[T], x: &[T], out: &mut [T]) {
    let n = x.len();
    for (i, &xi) in x.iter().enumerate() {
        for (o, &wij) in out.iter_mut().zip(&w[i * n..(i + 1) * n]) {
            *o = *o + wij * xi;
        }
    }
}

/// `acc += a ⊗ b`.
fn outer_acc<T: Scalar>(acc: &mut [T], a: &[T], b: &[T]) {
    let n = b.len();
    for (i, &ai) in a.iter().enumerate() {
        for (o, &bj) in acc[i * n..(i + 1) * n].iter_mut().zip(b) {
            *o = *o + ai * bj;
        }
    }
}

/// Forward activations kept for backpropagation.
struct Trace<T> {
    /// Elman hidden states `h_0..h_L` (empty for mean pooling).
    hidden: Vec<Vec<T>>,
    h: Vec<T>,
    z: T,
}

fn check_ids<T: Scalar>(params: &ClassifierParams<T>, ids: &[TokenId]) -> Result<(), ModelError> {
    if ids.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    let rows = params.emb.rows();
    match ids.iter().find(|id| id.index() >= rows) {
        Some(id) => Err(ModelError::IdOutOfRange { id: id.index(), rows }),
        None => Ok(()),
    }
}

fn run_forward<T: Scalar>(params: &ClassifierParams<T>, ids: &[TokenId]) -> Result<Trace<T>, ModelError> {
    check_ids(params, ids)?;
    let n = params.dim();
    let (hidden, h) = match &params.agg {
        Aggregator::MeanPool => {
            let h = mean_of_rows(n, ids.iter().map(|id| params.emb.row(id.index()))).expect("non-empty");
            (Vec::new(), h)
        }
        Aggregator::Elman(e) => {
            let mut hidden = Vec::with_capacity(ids.len() + 1);
            hidden.push(vec![T::zero(); n]);
            let mut a = vec![T::zero(); n];
            let mut ax = vec![T::zero(); n];
            for id in ids {
                let prev = hidden.last().expect("h_0 present");
                matvec(&e.w_h, prev, &mut a);
                matvec(&e.w_x, params.emb.row(id.index()), &mut ax);
                let next: Vec<T> = a
                    .iter()
                    .zip(&ax)
                    .zip(&e.b_h)
                    .map(|((&p, &q), &b)| (p + q + b).tanh())
                    .collect();
                hidden.push(next);
            }
            let h = hidden.last().expect("non-empty").clone();
            (hidden, h)
        }
    };
    let z = dot(&params.w_out, &h) + params.b_out;
    Ok(Trace { hidden, h, z })
}

/// Purchase probability for one session, clamped into `(0, 1)`.
pub fn forward<T: Scalar>(params: &ClassifierParams<T>, ids: &[TokenId]) -> Result<T, ModelError> {
    let trace = run_forward(params, ids)?;
    let (lo, hi) = prob_bounds();
    Ok(sigmoid(trace.z).max(lo).min(hi))
}

fn bce<T: Scalar>(p: T, label: bool, pos_weight: T) -> T {
    if label {
        -(pos_weight * p.ln())
    } else {
        -(T::one() - p).ln()
    }
}

/// Weighted binary cross-entropy of one session.
pub fn loss<T: Scalar>(
    params: &ClassifierParams<T>,
    ids: &[TokenId],
    label: bool,
    pos_weight: T,
) -> Result<T, ModelError> {
    Ok(bce(forward(params, ids)?, label, pos_weight))
}

/// Mean loss over a batch.
pub fn batch_loss<T: Scalar>(
    params: &ClassifierParams<T>,
    batch: &[EncodedSession],
    pos_weight: T,
) -> Result<T, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut total = T::zero();
    for s in batch {
        total = total + loss(params, &s.ids, s.label, pos_weight)?;
    }
    Ok(total / T::of(batch.len() as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElmanGrads<T> {
    pub w_h: Vec<T>,
    pub w_x: Vec<T>,
    pub b_h: Vec<T>,
}

/// Gradient of the mean minibatch loss. Embedding rows are sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub emb: BTreeMap<usize, Vec<T>>,
    pub elman: Option<ElmanGrads<T>>,
    pub w_out: Vec<T>,
    pub b_out: T,
}

impl<T: Scalar> Gradients<T> {
    fn zeros_like(params: &ClassifierParams<T>) -> Self {
        let n = params.dim();
        Gradients {
            emb: BTreeMap::new(),
            elman: match params.agg {
                Aggregator::MeanPool => None,
                Aggregator::Elman(_) => Some(ElmanGrads {
                    w_h: vec![T::zero(); n * n],
                    w_x: vec![T::zero(); n * n],
                    b_h: vec![T::zero(); n],
                }),
            },
            w_out: vec![T::zero(); n],
            b_out: T::zero(),
        }
    }

    /// Embedding gradient row, zero for rows outside the minibatch.
    pub fn emb_row(&self, id: usize, dim: usize) -> Vec<T> {
        self.emb.get(&id).cloned().unwrap_or_else(|| vec![T::zero(); dim])
    }

    fn scale(&mut self, k: T) {
        let s = |v: &mut Vec<T>| v.iter_mut().for_each(|x| *x = *x * k);
        self.emb.values_mut().for_each(s);
        if let Some(e) = &mut self.elman {
            s(&mut e.w_h);
            s(&mut e.w_x);
            s(&mut e.b_h);
        }
        s(&mut self.w_out);
        self.b_out = self.b_out * k;
    }
}

/// Exact analytic gradient of [`batch_loss`].
pub fn gradients<T: Scalar>(
    params: &ClassifierParams<T>,
    batch: &[EncodedSession],
    pos_weight: T,
) -> Result<Gradients<T>, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = params.dim();
    let (lo, hi) = prob_bounds::<T>();
    let mut g = Gradients::zeros_like(params);
    for session in batch {
        let trace = run_forward(params, &session.ids)?;
        let raw = sigmoid(trace.z);
        // The clamp is flat outside [lo, hi].
        let dz = if raw < lo || raw > hi {
            T::zero()
        } else if session.label {
            pos_weight * (raw - T::one())
        } else {
            raw
        };
        for (gw, &h) in g.w_out.iter_mut().zip(&trace.h) {
            *gw = *gw + dz * h;
        }
        g.b_out = g.b_out + dz;
        let mut dh: Vec<T> = params.w_out.iter().map(|&w| dz * w).collect();

        match &params.agg {
            Aggregator::MeanPool => {
                let inv_len = T::one() / T::of(session.ids.len() as f64);
                for id in &session.ids {
                    let row = g.emb.entry(id.index()).or_insert_with(|| vec![T::zero(); n]);
                    for (r, &d) in row.iter_mut().zip(&dh) {
                        *r = *r + d * inv_len;
                    }
                }
            }
            Aggregator::Elman(e) => {
                let ge = g.elman.as_mut().expect("elman grads allocated");
                let mut da = vec![T::zero(); n];
                for (t, id) in session.ids.iter().enumerate().rev() {
                    let h_t = &trace.hidden[t + 1];
                    let h_prev = &trace.hidden[t];
                    for ((a, &d), &h) in da.iter_mut().zip(&dh).zip(h_t) {
                        *a = d * (T::one() - h * h);
                    }
                    outer_acc(&mut ge.w_h, &da, h_prev);
                    outer_acc(&mut ge.w_x, &da, params.emb.row(id.index()));
                    for (b, &a) in ge.b_h.iter_mut().zip(&da) {
                        *b = *b + a;
                    }
                    let row = g.emb.entry(id.index()).or_insert_with(|| vec![T::zero(); n]);
                    matvec_t_acc(&e.w_x, &da, row);
                    dh.iter_mut().for_each(|x| *x = T::zero());
                    matvec_t_acc(&e.w_h, &da, &mut dh);
                }
            }
        }
    }
    g.scale(T::one() / T::of(batch.len() as f64));
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    fn zeros(len: usize) -> Self {
        Moments {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

/// Adam moment accumulators shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub t: u64,
    emb: Moments<T>,
    /// Embedding rows that have ever received a gradient, ascending.
    active_rows: Vec<usize>,
    is_active: Vec<bool>,
    elman: Option<[Moments<T>; 3]>,
    w_out: Moments<T>,
    b_out: Moments<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ClassifierParams<T>) -> Self {
        let n = params.dim();
        AdamState {
            t: 0,
            emb: Moments::zeros(params.emb.rows() * n),
            active_rows: Vec::new(),
            is_active: vec![false; params.emb.rows()],
            elman: match params.agg {
                Aggregator::MeanPool => None,
                Aggregator::Elman(_) => Some([Moments::zeros(n * n), Moments::zeros(n * n), Moments::zeros(n)]),
            },
            w_out: Moments::zeros(n),
            b_out: Moments::zeros(1),
        }
    }
}

struct AdamCoefs<T> {
    b1: T,
    b2: T,
    lr: T,
    eps: T,
    bc1: T,
    bc2: T,
}

impl<T: Scalar> AdamCoefs<T> {
    #[inline]
    fn update(&self, theta: &mut T, m: &mut T, v: &mut T, g: T) {
        *m = self.b1 * *m + (T::one() - self.b1) * g;
        *v = self.b2 * *v + (T::one() - self.b2) * g * g;
        let m_hat = *m / self.bc1;
        let v_hat = *v / self.bc2;
        *theta = *theta - self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }

    fn update_slice(&self, theta: &mut [T], mom: &mut Moments<T>, g: &[T]) {
        for (((th, m), v), &gi) in theta.iter_mut().zip(&mut mom.m).zip(&mut mom.v).zip(g) {
            self.update(th, m, v, gi);
        }
    }
}

/// One Adam update of every parameter.
pub fn adam_step<T: Scalar>(
    params: &mut ClassifierParams<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) {
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let b1 = T::of(config.adam_beta1);
    let b2 = T::of(config.adam_beta2);
    let c = AdamCoefs {
        b1,
        b2,
        lr: T::of(config.learning_rate),
        eps: T::of(config.adam_eps),
        bc1: T::one() - b1.powi(t),
        bc2: T::one() - b2.powi(t),
    };
    let n = params.dim();

    let mut newly_active = false;
    for &row in grads.emb.keys() {
        if !state.is_active[row] {
            state.is_active[row] = true;
            state.active_rows.push(row);
            newly_active = true;
        }
    }
    if newly_active {
        state.active_rows.sort_unstable();
    }
    let zero_row = vec![T::zero(); n];
    for &row in &state.active_rows {
        let g = grads.emb.get(&row).unwrap_or(&zero_row);
        let range = row * n..(row + 1) * n;
        let theta = params.emb.row_mut(row);
        let (m, v) = (&mut state.emb.m[range.clone()], &mut state.emb.v[range]);
        for (((th, mi), vi), &gi) in theta.iter_mut().zip(m).zip(v).zip(g) {
            c.update(th, mi, vi, gi);
        }
    }

    if let (Aggregator::Elman(e), Some(ge), Some([mh, mx, mb])) = (&mut params.agg, &grads.elman, &mut state.elman) {
        c.update_slice(&mut e.w_h, mh, &ge.w_h);
        c.update_slice(&mut e.w_x, mx, &ge.w_x);
        c.update_slice(&mut e.b_h, mb, &ge.b_h);
    }
    c.update_slice(&mut params.w_out, &mut state.w_out, &grads.w_out);
    c.update(
        &mut params.b_out,
        &mut state.b_out.m[0],
        &mut state.b_out.v[0],
        grads.b_out,
    );
}

/// Negatives/positives ratio clamped to `[1, 50]`.
pub fn segment_pos_weight(sessions: &[EncodedSession]) -> f64 {
    let pos = sessions.iter().filter(|s| s.label).count();
    let neg = sessions.len() - pos;
    if pos == 0 {
        return 50.0;
    }
    (neg as f64 / pos as f64).clamp(1.0, 50.0)
}

/// Trains on one segment with a fresh optimizer state.
///
/// Each epoch shuffles session order with a generator seeded from `seed`,
/// then steps Adam once per minibatch.
pub fn train_segment<T: Scalar>(
    params: &mut ClassifierParams<T>,
    sessions: &[EncodedSession],
    config: &TrainConfig,
    seed: u64,
) -> Result<(), ModelError> {
    config.validate()?;
    if sessions.is_empty() {
        return Err(ModelError::EmptySegment);
    }
    if sessions.iter().any(|s| s.ids.is_empty()) {
        return Err(ModelError::EmptySequence);
    }
    let pos_weight = match config.pos_weight_mode {
        PosWeightMode::Automatic => T::of(segment_pos_weight(sessions)),
    };
    let mut state = AdamState::new(params);
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    let mut batch = Vec::with_capacity(config.minibatch_size);
    for _ in 0..config.epochs_per_segment {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| sessions[i].clone()));
            let g = gradients(params, &batch, pos_weight)?;
            adam_step(params, &g, &mut state, config);
        }
    }
    Ok(())
}

/// Scores in input order; sessions without items are skipped and listed.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionScores<T> {
    pub scores: Vec<T>,
    /// Input index of each entry of `scores`.
    pub scored: Vec<usize>,
    pub skipped: Vec<usize>,
}

pub fn score_sessions<T: Scalar>(
    params: &ClassifierParams<T>,
    sessions: &[EncodedSession],
) -> Result<SessionScores<T>, ModelError> {
    let mut out = SessionScores {
        scores: Vec::with_capacity(sessions.len()),
        scored: Vec::with_capacity(sessions.len()),
        skipped: Vec::new(),
    };
    for (i, s) in sessions.iter().enumerate() {
        if s.ids.is_empty() {
            out.skipped.push(i);
            continue;
        }
        out.scores.push(forward(params, &s.ids)?);
        out.scored.push(i);
    }
    Ok(out)
}
