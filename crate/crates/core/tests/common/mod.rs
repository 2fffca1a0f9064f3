#![allow(dead_code)]

use std::cmp::Ordering;

use protorecon::autodiff::Tensor;
use protorecon::corpus::{TokenId, BOS, EOS};
use protorecon::decode::{normalized_score, Decoder, DecoderState};
use protorecon::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First id after the structural tokens in these toy models.
pub const FIRST: TokenId = 6;

/// Deterministic random decoder: the next-token distribution is a fixed
/// random function of the prefix. Only EOS and `phonemes` get mass.
pub struct TableDecoder {
    pub phonemes: usize,
    pub seed: u64,
}

impl TableDecoder {
    pub fn new(phonemes: usize, seed: u64) -> Self {
        TableDecoder { phonemes, seed }
    }

    pub fn tokens(&self) -> Vec<TokenId> {
        (FIRST..FIRST + self.phonemes).collect()
    }

    fn row(&self, code: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (code as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut row = vec![f64::NEG_INFINITY; FIRST + self.phonemes];
        let mut allowed = vec![EOS];
        allowed.extend(self.tokens());
        let logits: Vec<f64> = allowed.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
        for (&t, l) in allowed.iter().zip(&logits) {
            row[t] = l - z;
        }
        row
    }
}

impl Decoder for TableDecoder {
    fn output_size(&self) -> usize {
        FIRST + self.phonemes
    }

    fn encode(&self, inputs: &[&[TokenId]]) -> Result<DecoderState> {
        Ok(DecoderState { hidden: Tensor::zeros(inputs.len(), 1), cond: vec![0; inputs.len()] })
    }

    fn step(&self, state: &DecoderState, prev: &[TokenId]) -> Result<(DecoderState, Tensor)> {
        let b = state.batch_size();
        let mut next = state.clone();
        let mut out = Tensor::zeros(b, self.output_size());
        for (r, &p) in prev.iter().enumerate().take(b) {
            // prefix code in base 16; exact in f64 for the lengths used here
            let code = state.hidden.get(r, 0) * 16.0 + (p + 1) as f64;
            next.hidden.set(r, 0, code);
            out.row_mut(r).copy_from_slice(&self.row(code));
        }
        Ok((next, out))
    }
}

/// Every EOS-terminated sequence of length at most `max_len` (EOS counted),
/// scored by stepping the model along it.
pub fn enumerate(model: &TableDecoder, max_len: usize, alpha: f64) -> Vec<(Vec<TokenId>, f64, f64)> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<TokenId>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() + 1 > max_len {
            continue;
        }
        let lp = score(model, &prefix, true);
        out.push((prefix.clone(), lp, normalized_score(lp, prefix.len() + 1, alpha)));
        for t in model.tokens() {
            let mut p = prefix.clone();
            p.push(t);
            stack.push(p);
        }
    }
    // completion order of an exhaustive beam: shorter first, then raw score,
    // then tokens; the final sort by m is stable
    out.sort_by(|a, b| {
        a.0.len()
            .cmp(&b.0.len())
            .then(b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal))
            .then(a.0.cmp(&b.0))
    });
    out.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal));
    out
}

/// Log-probability of `ids`, followed by EOS when `with_eos`.
pub fn score(model: &TableDecoder, ids: &[TokenId], with_eos: bool) -> f64 {
    let mut state = model.encode(&[&[]]).unwrap();
    let mut prev = BOS;
    let mut total = 0.0;
    let mut path = ids.to_vec();
    if with_eos {
        path.push(EOS);
    }
    for t in path {
        let (next, lp) = model.step(&state, &[prev]).unwrap();
        total += lp.get(0, t);
        state = next;
        prev = t;
    }
    total
}

/// Unit-cost edit distance by plain recursion.
pub fn brute_ted<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a, b) {
        ([], _) => b.len(),
        (_, []) => a.len(),
        ([x, ra @ ..], [y, rb @ ..]) => {
            if x == y {
                return brute_ted(ra, rb);
            }
            1 + brute_ted(ra, rb).min(brute_ted(ra, b)).min(brute_ted(a, rb))
        }
    }
}

/// Minimum over every alignment, each costed column by column.
pub fn brute_weighted(a: &[String], b: &[String], sub: &dyn Fn(&str, &str) -> f64) -> f64 {
    fn walk(a: &[String], b: &[String], sub: &dyn Fn(&str, &str) -> f64, cost: f64, best: &mut f64) {
        if a.is_empty() && b.is_empty() {
            *best = best.min(cost);
            return;
        }
        if let (Some(x), Some(y)) = (a.first(), b.first()) {
            walk(&a[1..], &b[1..], sub, cost + sub(x, y), best);
        }
        if !a.is_empty() {
            walk(&a[1..], b, sub, cost + 1.0, best);
        }
        if !b.is_empty() {
            walk(a, &b[1..], sub, cost + 1.0, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, sub, 0.0, &mut best);
    best
}

/// B-Cubed F from a minimum alignment traced back from the end with
/// substitution, then deletion, then insertion preferred, and clusters
/// counted over all column pairs.
pub fn brute_bcubed<T: PartialEq>(pred: &[T], gold: &[T]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut cols: Vec<(Option<&T>, Option<&T>)> = Vec::new();
    let (mut i, mut j) = (pred.len(), gold.len());
    while i > 0 || j > 0 {
        let here = brute_ted(&pred[..i], &gold[..j]);
        if i > 0 && j > 0 && here == brute_ted(&pred[..i - 1], &gold[..j - 1]) + usize::from(pred[i - 1] != gold[j - 1]) {
            cols.push((Some(&pred[i - 1]), Some(&gold[j - 1])));
            i -= 1;
            j -= 1;
        } else if i > 0 && here == brute_ted(&pred[..i - 1], &gold[..j]) + 1 {
            cols.push((Some(&pred[i - 1]), None));
            i -= 1;
        } else {
            cols.push((None, Some(&gold[j - 1])));
            j -= 1;
        }
    }
    let n = cols.len() as f64;
    let (mut p, mut r) = (0.0, 0.0);
    for c in &cols {
        let same_pred = cols.iter().filter(|d| d.0 == c.0).count() as f64;
        let same_gold = cols.iter().filter(|d| d.1 == c.1).count() as f64;
        let same_both = cols.iter().filter(|d| d.0 == c.0 && d.1 == c.1).count() as f64;
        p += same_both / same_pred;
        r += same_both / same_gold;
    }
    let (p, r) = (p / n, r / n);
    2.0 * p * r / (p + r)
}

/// Tokens present in the bundled feature table.
pub const IPA: [&str; 16] = ["p", "b", "t", "d", "k", "m", "n", "s", "l", "a", "e", "i", "o", "u", "ŋ", "ʃ"];

pub fn random_seq(rng: &mut ChaCha8Rng, alphabet: &[&str], max_len: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string()).collect()
}
