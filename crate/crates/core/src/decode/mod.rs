//! Greedy decoding and length-normalized beam search.
//!
//! Both searches run against the [`Decoder`] trait, so they work with the
//! trained GRU models and with hand-built table models alike. Sequence
//! length counts every emitted token including EOS and excludes BOS. A
//! hypothesis that reaches `max_len` tokens without EOS is returned only when
//! no hypothesis ended with EOS, so a beam of width one matches greedy
//! decoding.

mod beam;

pub use beam::{beam_search, beam_search_reference};

use crate::autodiff::Tensor;
use crate::corpus::{TokenId, Vocabulary, BOS, EOS};
use crate::{Error, Result};

/// Recurrent decoder state for a batch: one hidden row and one
/// conditioning index (e.g. target language) per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub hidden: Tensor,
    pub cond: Vec<usize>,
}

impl DecoderState {
    pub fn batch_size(&self) -> usize {
        self.hidden.rows()
    }

    /// Gather rows (with repetition) into a new state.
    pub fn select(&self, rows: &[usize]) -> DecoderState {
        let cols = self.hidden.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            data.extend_from_slice(self.hidden.row(r));
        }
        DecoderState {
            hidden: Tensor::from_vec(rows.len(), cols, data).expect("row gather keeps shape"),
            cond: rows.iter().map(|&r| self.cond[r]).collect(),
        }
    }
}

/// An autoregressive model that can be searched.
pub trait Decoder {
    /// Width of the log-probability rows returned by [`Decoder::step`].
    fn output_size(&self) -> usize;

    fn encode(&self, inputs: &[&[TokenId]]) -> Result<DecoderState>;

    /// Advance every row by one token; returns the new state and `[B, V]`
    /// natural-log probabilities for the next token.
    fn step(&self, state: &DecoderState, prev: &[TokenId]) -> Result<(DecoderState, Tensor)>;
}

/// A decoder over a known vocabulary with a fixed decode cap.
pub trait TokenDecoder: Decoder {
    fn vocabulary(&self) -> &Vocabulary;
    fn max_len(&self) -> usize;
}

impl<D: Decoder + ?Sized> Decoder for &D {
    fn output_size(&self) -> usize {
        (**self).output_size()
    }
    fn encode(&self, inputs: &[&[TokenId]]) -> Result<DecoderState> {
        (**self).encode(inputs)
    }
    fn step(&self, state: &DecoderState, prev: &[TokenId]) -> Result<(DecoderState, Tensor)> {
        (**self).step(state, prev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub k: usize,
    pub alpha: f64,
    pub max_len: usize,
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_len == 0 {
            return Err(Error::Config("beam size and max length must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha {} must be >= 0", self.alpha)));
        }
        Ok(())
    }
}

/// A completed hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Emitted tokens with the trailing EOS removed.
    pub ids: Vec<TokenId>,
    /// Sum of per-step natural-log probabilities, EOS included.
    pub log_prob: f64,
    /// Number of emitted tokens including EOS.
    pub len: usize,
    /// `log_prob / len^alpha`.
    pub m: f64,
    /// False when the hypothesis hit `max_len` without emitting EOS.
    pub finished: bool,
}

pub fn normalized_score(log_prob: f64, len: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        log_prob
    } else {
        log_prob / (len as f64).powf(alpha)
    }
}

/// Index of the largest finite entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in row.iter().enumerate() {
        if v == f64::NEG_INFINITY || v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > row[b]) {
            best = Some(i);
        }
    }
    best
}

/// Greedy decoding of one input; EOS is not included in the output.
pub fn greedy_decode<D: Decoder + ?Sized>(model: &D, input: &[TokenId], max_len: usize) -> Result<Vec<TokenId>> {
    Ok(greedy_decode_batch(model, &[input], max_len)?.pop().unwrap())
}

/// Greedy decoding of a batch, stepping all unfinished rows together.
pub fn greedy_decode_batch<D: Decoder + ?Sized>(
    model: &D,
    inputs: &[&[TokenId]],
    max_len: usize,
) -> Result<Vec<Vec<TokenId>>> {
    let mut out = vec![Vec::new(); inputs.len()];
    if inputs.is_empty() {
        return Ok(out);
    }
    let mut state = model.encode(inputs)?;
    let mut active: Vec<usize> = (0..inputs.len()).collect();
    let mut prev = vec![BOS; inputs.len()];
    for _ in 0..max_len {
        let (next, logp) = model.step(&state, &prev)?;
        let mut keep = Vec::with_capacity(active.len());
        let mut keep_prev = Vec::with_capacity(active.len());
        for (row, &item) in active.iter().enumerate() {
            let tok = argmax(logp.row(row)).ok_or_else(|| {
                Error::Contract("decoder assigned zero probability to every token".into())
            })?;
            if tok != EOS {
                out[item].push(tok);
                keep.push(row);
                keep_prev.push(tok);
            }
        }
        if keep.is_empty() {
            break;
        }
        active = keep.iter().map(|&r| active[r]).collect();
        state = if keep.len() == next.batch_size() {
            next
        } else {
            next.select(&keep)
        };
        prev = keep_prev;
    }
    Ok(out)
}
