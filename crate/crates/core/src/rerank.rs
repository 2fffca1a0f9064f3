//! Reflex-prediction reranking of beam candidates.
//!
//! Every candidate protoform is fed to the reflex model once per attested
//! daughter language. The fraction of exact reflex matches is the
//! reranker score `r`, and candidates are re-sorted by `s = m + λ·r`.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::corpus::{CognateSet, TokenId};
use crate::decode::{beam_search, greedy_decode_batch, BeamConfig, Candidate, TokenDecoder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    pub lambda: f64,
    pub k: usize,
    pub alpha: f64,
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankedCandidate {
    pub ids: Vec<TokenId>,
    pub m: f64,
    pub r: f64,
    pub s: f64,
    pub beam_rank: usize,
    pub rerank_rank: usize,
}

/// `s = m + λ·r`, stably sorted by descending `s`.
pub fn rerank(candidates: &[Candidate], r_values: &[f64], lambda: f64) -> Result<Vec<RerankedCandidate>> {
    if candidates.len() != r_values.len() {
        return Err(Error::Contract(format!(
            "{} reranker scores for {} candidates",
            r_values.len(),
            candidates.len()
        )));
    }
    let mut out: Vec<RerankedCandidate> = candidates
        .iter()
        .zip(r_values)
        .enumerate()
        .map(|(i, (c, &r))| RerankedCandidate {
            ids: c.ids.clone(),
            m: c.m,
            r,
            s: c.m + lambda * r,
            beam_rank: i,
            rerank_rank: 0,
        })
        .collect();
    out.sort_by(|a, b| b.s.partial_cmp(&a.s).unwrap_or(std::cmp::Ordering::Equal));
    for (i, c) in out.iter_mut().enumerate() {
        c.rerank_rank = i;
    }
    Ok(out)
}

/// Candidate tokens and target language index.
type CacheKey = (Vec<String>, usize);

/// Reflex predictions keyed by (candidate tokens, language index), shared
/// across threads.
#[derive(Debug, Default)]
pub struct PredictionCache {
    map: Mutex<HashMap<CacheKey, Vec<String>>>,
}

impl PredictionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &(Vec<String>, usize)) -> Option<Vec<String>> {
        self.map.lock().unwrap().get(key).cloned()
    }

    fn insert(&self, key: (Vec<String>, usize), value: Vec<String>) {
        self.map.lock().unwrap().insert(key, value);
    }
}

/// Reranker score for one candidate plus what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflexScore {
    pub r: f64,
    pub correct: usize,
    pub present: usize,
    /// `(language, prediction)` per present reflex, in canonical order.
    /// `None` when the candidate could not be fed to the reflex model.
    pub predictions: Vec<(String, Option<Vec<String>>)>,
    pub warning: Option<String>,
}

/// Score each candidate (given as tokens) against the set's reflexes.
/// Reflex predictions are greedy and are decoded in one batch per call.
pub fn reflex_accuracies<F: TokenDecoder + ?Sized>(
    reflex: &F,
    candidates: &[Vec<String>],
    set: &CognateSet,
    languages: &[String],
    cache: &PredictionCache,
) -> Result<Vec<ReflexScore>> {
    let present: Vec<(&str, &[String])> = set.reflexes_in_order(languages).collect();
    if present.is_empty() {
        return Err(Error::Data(format!("set `{}` has no reflexes", set.id)));
    }
    let vocab = reflex.vocabulary();
    let mut langs = Vec::with_capacity(present.len());
    for (lang, _) in &present {
        langs.push(vocab.language_index(lang)?);
    }
    // encode candidates; None marks tokens the reflex vocabulary lacks
    let encoded: Vec<Option<Vec<TokenId>>> = candidates
        .iter()
        .map(|c| c.iter().map(|t| vocab.lookup(t).filter(|&id| vocab.is_phoneme(id))).collect())
        .collect();
    let mut pending_keys = Vec::new();
    let mut pending_inputs = Vec::new();
    for (cand, enc) in candidates.iter().zip(&encoded) {
        let Some(enc) = enc else { continue };
        for (&l, (lang, _)) in langs.iter().zip(&present) {
            let key = (cand.clone(), l);
            if cache.get(&key).is_none() && !pending_keys.contains(&key) {
                let mut input = vec![vocab.language_id(lang)?];
                input.extend_from_slice(enc);
                pending_keys.push(key);
                pending_inputs.push(input);
            }
        }
    }
    if !pending_inputs.is_empty() {
        let refs: Vec<&[TokenId]> = pending_inputs.iter().map(Vec::as_slice).collect();
        let preds = greedy_decode_batch(reflex, &refs, reflex.max_len())?;
        for (key, pred) in pending_keys.into_iter().zip(preds) {
            cache.insert(key, vocab.decode(&pred));
        }
    }
    let mut out = Vec::with_capacity(candidates.len());
    for (cand, enc) in candidates.iter().zip(&encoded) {
        let mut predictions = Vec::with_capacity(present.len());
        let mut correct = 0;
        for (&l, (lang, gold)) in langs.iter().zip(&present) {
            let pred = enc.as_ref().map(|_| cache.get(&(cand.clone(), l)).expect("decoded above"));
            if pred.as_deref() == Some(&gold[..]) {
                correct += 1;
            }
            predictions.push((lang.to_string(), pred));
        }
        let warning = enc.is_none().then(|| {
            format!(
                "set `{}`: candidate `{}` has tokens unknown to the reflex model",
                set.id,
                cand.join(" ")
            )
        });
        out.push(ReflexScore {
            r: correct as f64 / present.len() as f64,
            correct,
            present: present.len(),
            predictions,
            warning,
        });
    }
    Ok(out)
}

/// Reranker score of a single candidate.
pub fn reflex_accuracy<F: TokenDecoder + ?Sized>(
    reflex: &F,
    candidate: &[String],
    set: &CognateSet,
    languages: &[String],
    cache: &PredictionCache,
) -> Result<ReflexScore> {
    Ok(reflex_accuracies(reflex, &[candidate.to_vec()], set, languages, cache)?
        .pop()
        .unwrap())
}

/// Full result of reranked reconstruction for one set.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub beam: Vec<Candidate>,
    pub scores: Vec<ReflexScore>,
    pub reranked: Vec<RerankedCandidate>,
}

impl RerankOutcome {
    pub fn top(&self) -> &RerankedCandidate {
        &self.reranked[0]
    }
}

/// Beam search, reflex scoring and reranking for one cognate set. The
/// reconstruction input is assembled from `languages` order.
pub fn reconstruct_reranked<R, F>(
    recon: &R,
    reflex: &F,
    input: &[TokenId],
    set: &CognateSet,
    languages: &[String],
    config: RerankConfig,
    cache: &PredictionCache,
) -> Result<RerankOutcome>
where
    R: TokenDecoder + ?Sized,
    F: TokenDecoder + ?Sized,
{
    config.validate()?;
    let beam = beam_search(
        recon,
        input,
        BeamConfig {
            k: config.k,
            alpha: config.alpha,
            max_len: recon.max_len(),
        },
    )?;
    rerank_beam(recon, reflex, beam, set, languages, config.lambda, cache)
}

/// Score and rerank an existing beam list.
pub fn rerank_beam<R, F>(
    recon: &R,
    reflex: &F,
    beam: Vec<Candidate>,
    set: &CognateSet,
    languages: &[String],
    lambda: f64,
    cache: &PredictionCache,
) -> Result<RerankOutcome>
where
    R: TokenDecoder + ?Sized,
    F: TokenDecoder + ?Sized,
{
    let tokens: Vec<Vec<String>> = beam.iter().map(|c| recon.vocabulary().decode(&c.ids)).collect();
    let scores = reflex_accuracies(reflex, &tokens, set, languages, cache)?;
    let r: Vec<f64> = scores.iter().map(|s| s.r).collect();
    let reranked = rerank(&beam, &r, lambda)?;
    Ok(RerankOutcome { beam, scores, reranked })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(ids: Vec<TokenId>, m: f64) -> Candidate {
        Candidate { len: ids.len() + 1, log_prob: m, ids, m, finished: true }
    }

    #[test]
    fn lambda_zero_keeps_beam_order() {
        let c = vec![cand(vec![6], -0.1), cand(vec![7], -0.2), cand(vec![8], -0.3)];
        let out = rerank(&c, &[0.0, 1.0, 0.5], 0.0).unwrap();
        assert_eq!(out.iter().map(|x| x.beam_rank).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn equal_r_keeps_beam_order() {
        let c = vec![cand(vec![6], -0.1), cand(vec![7], -0.2), cand(vec![8], -0.3)];
        let out = rerank(&c, &[0.5; 3], 7.0).unwrap();
        assert_eq!(out.iter().map(|x| x.beam_rank).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn ties_in_s_keep_beam_order() {
        let c = vec![cand(vec![6], -1.0), cand(vec![7], 0.0)];
        let out = rerank(&c, &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(out[0].beam_rank, 0);
        assert_eq!(out[0].s, out[1].s);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(rerank(&[cand(vec![6], -0.1)], &[], 1.0).is_err());
        assert!(RerankConfig { lambda: -1.0, k: 2, alpha: 0.0 }.validate().is_err());
    }
}
