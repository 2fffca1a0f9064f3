use std::cmp::Ordering;

use super::{normalized_score, BeamConfig, Candidate, Decoder, DecoderState};
use crate::corpus::{TokenId, BOS, EOS};
use crate::Result;

/// Partial hypothesis on the frontier.
#[derive(Debug, Clone)]
struct Hyp {
    ids: Vec<TokenId>,
    log_prob: f64,
}

/// One scored extension of a frontier hypothesis.
struct Extension {
    parent: usize,
    token: TokenId,
    log_prob: f64,
}

/// Raw score descending, then token sequence ascending.
fn rank_extensions(frontier: &[Hyp], a: &Extension, b: &Extension) -> Ordering {
    b.log_prob
        .partial_cmp(&a.log_prob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            let pa = &frontier[a.parent].ids;
            let pb = &frontier[b.parent].ids;
            pa.iter()
                .chain(std::iter::once(&a.token))
                .cmp(pb.iter().chain(std::iter::once(&b.token)))
        })
}

struct Search {
    config: BeamConfig,
    completed: Vec<Candidate>,
    /// Hypotheses cut off at `max_len`; used only if nothing emitted EOS.
    truncated: Vec<Candidate>,
}

impl Search {
    fn complete(&mut self, ids: Vec<TokenId>, log_prob: f64, finished: bool) {
        let len = ids.len() + usize::from(finished);
        let c = Candidate {
            m: normalized_score(log_prob, len, self.config.alpha),
            ids,
            log_prob,
            len,
            finished,
        };
        if finished {
            self.completed.push(c);
        } else {
            self.truncated.push(c);
        }
    }

    /// True once no frontier hypothesis can reach the k-th best completed
    /// score. Log-probabilities only fall as tokens are added, and for a
    /// non-positive raw score the normalized score is largest at `max_len`.
    fn settled(&self, frontier: &[Hyp]) -> bool {
        let k = self.config.k;
        if self.completed.len() < k {
            return false;
        }
        let mut ms: Vec<f64> = self.completed.iter().map(|c| c.m).collect();
        ms.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        let kth = ms[k - 1];
        frontier
            .iter()
            .all(|h| kth >= normalized_score(h.log_prob, self.config.max_len, self.config.alpha))
    }

    /// Keep the best `k` extensions; EOS ones complete, the rest form the
    /// next frontier. Returns the kept extensions that continue.
    fn advance(&mut self, frontier: &[Hyp], mut ext: Vec<Extension>, last_step: bool) -> Vec<Extension> {
        ext.sort_by(|a, b| rank_extensions(frontier, a, b));
        ext.truncate(self.config.k);
        let mut next = Vec::with_capacity(ext.len());
        for e in ext {
            let mut ids = frontier[e.parent].ids.clone();
            if e.token == EOS {
                self.complete(ids, e.log_prob, true);
            } else if last_step {
                ids.push(e.token);
                self.complete(ids, e.log_prob, false);
            } else {
                next.push(e);
            }
        }
        next
    }

    fn finish(mut self) -> Vec<Candidate> {
        if self.completed.is_empty() {
            self.completed = std::mem::take(&mut self.truncated);
        }
        // stable: equal m keeps completion order
        self.completed
            .sort_by(|a, b| b.m.partial_cmp(&a.m).unwrap_or(Ordering::Equal));
        self.completed.truncate(self.config.k);
        self.completed
    }
}

/// Beam search stepping the whole frontier as one batch.
pub fn beam_search<D: Decoder + ?Sized>(model: &D, input: &[TokenId], config: BeamConfig) -> Result<Vec<Candidate>> {
    config.validate()?;
    let mut search = Search { config, completed: Vec::new(), truncated: Vec::new() };
    let mut frontier = vec![Hyp { ids: Vec::new(), log_prob: 0.0 }];
    let mut state = model.encode(&[input])?;
    let mut prev = vec![BOS];
    for step in 0..config.max_len {
        let (next_state, logp) = model.step(&state, &prev)?;
        let mut ext = Vec::new();
        for (parent, h) in frontier.iter().enumerate() {
            for (token, &lp) in logp.row(parent).iter().enumerate() {
                if lp != f64::NEG_INFINITY && !lp.is_nan() {
                    ext.push(Extension { parent, token, log_prob: h.log_prob + lp });
                }
            }
        }
        let kept = search.advance(&frontier, ext, step + 1 == config.max_len);
        let rows: Vec<usize> = kept.iter().map(|e| e.parent).collect();
        frontier = kept
            .iter()
            .map(|e| {
                let mut ids = frontier[e.parent].ids.clone();
                ids.push(e.token);
                Hyp { ids, log_prob: e.log_prob }
            })
            .collect();
        if frontier.is_empty() || search.settled(&frontier) {
            break;
        }
        state = next_state.select(&rows);
        prev = kept.iter().map(|e| e.token).collect();
    }
    Ok(search.finish())
}

/// Beam search stepping one hypothesis at a time. Reference for
/// [`beam_search`].
pub fn beam_search_reference<D: Decoder + ?Sized>(
    model: &D,
    input: &[TokenId],
    config: BeamConfig,
) -> Result<Vec<Candidate>> {
    config.validate()?;
    let mut search = Search { config, completed: Vec::new(), truncated: Vec::new() };
    let init = model.encode(&[input])?;
    let mut frontier: Vec<(Hyp, DecoderState, TokenId)> =
        vec![(Hyp { ids: Vec::new(), log_prob: 0.0 }, init, BOS)];
    for step in 0..config.max_len {
        let mut hyps = Vec::with_capacity(frontier.len());
        let mut states = Vec::with_capacity(frontier.len());
        let mut ext = Vec::new();
        for (parent, (h, state, prev)) in frontier.iter().enumerate() {
            let (next, logp) = model.step(state, &[*prev])?;
            for token in 0..logp.cols() {
                let lp = logp.get(0, token);
                if lp != f64::NEG_INFINITY && !lp.is_nan() {
                    ext.push(Extension { parent, token, log_prob: h.log_prob + lp });
                }
            }
            hyps.push(h.clone());
            states.push(next);
        }
        let kept = search.advance(&hyps, ext, step + 1 == config.max_len);
        frontier = kept
            .iter()
            .map(|e| {
                let mut ids = hyps[e.parent].ids.clone();
                ids.push(e.token);
                (Hyp { ids, log_prob: e.log_prob }, states[e.parent].clone(), e.token)
            })
            .collect();
        let live: Vec<Hyp> = frontier.iter().map(|f| f.0.clone()).collect();
        if live.is_empty() || search.settled(&live) {
            break;
        }
    }
    Ok(search.finish())
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;

    const A: TokenId = 6;
    const B: TokenId = 7;

    fn uniform() -> Constant {
        let third = (1.0f64 / 3.0).ln();
        Constant { vocab: 8, log_probs: vec![(A, third), (B, third), (EOS, third)] }
    }

    #[test]
    fn forced_path_gives_single_zero_candidate() {
        let m = Scripted { vocab: 8, script: vec![A, B, EOS] };
        let out = beam_search(&m, &[], BeamConfig { k: 4, alpha: 0.7, max_len: 10 }).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].ids, vec![A, B]);
        assert_eq!(out[0].m, 0.0);
        assert_eq!(out[0].len, 3);
    }

    #[test]
    fn uniform_three_token_example() {
        let out = beam_search(&uniform(), &[], BeamConfig { k: 2, alpha: 0.0, max_len: 2 }).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[0].ids.is_empty() && out[0].finished);
        assert!((out[0].m - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((out[0].m + 1.0986).abs() < 1e-4);
        assert_eq!(out[1].ids, vec![A]);
        assert!(out[1].finished);
        assert!((out[1].m + 2.1972).abs() < 1e-4);
    }

    #[test]
    fn scalar_and_batched_agree_on_uniform() {
        for k in 1..6 {
            for max_len in 1..4 {
                let cfg = BeamConfig { k, alpha: 0.6, max_len };
                let a = beam_search(&uniform(), &[], cfg).unwrap();
                let b = beam_search_reference(&uniform(), &[], cfg).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn truncated_hypotheses_count_max_len() {
        let m = Constant { vocab: 8, log_probs: vec![(A, -0.01), (EOS, -9.0)] };
        let out = beam_search(&m, &[], BeamConfig { k: 1, alpha: 1.0, max_len: 3 }).unwrap();
        assert_eq!(out[0].ids, vec![A; 3]);
        assert!(!out[0].finished);
        assert_eq!(out[0].len, 3);
    }

    #[test]
    fn truncated_hypotheses_yield_to_finished_ones() {
        let m = Constant { vocab: 8, log_probs: vec![(A, -0.01), (EOS, -9.0)] };
        let out = beam_search(&m, &[], BeamConfig { k: 3, alpha: 1.0, max_len: 3 }).unwrap();
        assert!(out.iter().all(|c| c.finished));
        assert_eq!(out[0].ids, vec![A, A]);
    }
}
