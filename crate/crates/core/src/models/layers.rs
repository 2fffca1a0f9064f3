use rand::Rng;

use crate::autodiff::{Bound, Graph, GruParams, ParamId, ParamStore, Var};
use crate::corpus::Vocabulary;
use crate::Result;

/// `tanh(x W1 + b1) W2 + b2`, optionally with one output block per
/// target language.
#[derive(Debug, Clone, Copy)]
pub struct Classifier {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    blocks: usize,
}

impl Classifier {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
        blocks: usize,
        rng: &mut R,
    ) -> Self {
        let b_in = 1.0 / (input as f64).sqrt();
        let b_hid = 1.0 / (hidden as f64).sqrt();
        Classifier {
            w1: store.add_uniform(format!("{prefix}.w1"), input, hidden, b_in, rng),
            b1: store.add_uniform(format!("{prefix}.b1"), 1, hidden, b_in, rng),
            w2: store.add_uniform(format!("{prefix}.w2"), hidden * blocks.max(1), output, b_hid, rng),
            b2: store.add_uniform(format!("{prefix}.b2"), 1, output, b_hid, rng),
            blocks: blocks.max(1),
        }
    }

    /// `block_of` picks the output block per row when the classifier is gated.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var, block_of: Option<&[usize]>) -> Result<Var> {
        let h = g.matmul(x, p[self.w1])?;
        let h = g.add_row(h, p[self.b1])?;
        let mut h = g.tanh(h);
        if self.blocks > 1 {
            let block_of = block_of.expect("gated classifier needs a block per row");
            h = g.block_expand(h, block_of, self.blocks)?;
        }
        let out = g.matmul(h, p[self.w2])?;
        g.add_row(out, p[self.b2])
    }
}

/// Additive logit mask: `0` for EOS and phonemes, `-inf` elsewhere.
pub fn output_mask(vocab: &Vocabulary) -> Vec<f64> {
    vocab
        .output_allowed()
        .into_iter()
        .map(|ok| if ok { 0.0 } else { f64::NEG_INFINITY })
        .collect()
}

/// Run a GRU over a padded batch. `inputs[t]` is the `[B, in]` input at
/// step `t`; rows with `t >= lengths[b]` keep their previous state.
/// Returns the per-step states in input order.
pub fn run_gru(
    g: &mut Graph,
    p: &Bound,
    cell: &GruParams,
    inputs: &[Var],
    lengths: &[usize],
    h0: Var,
    reverse: bool,
) -> Result<Vec<Var>> {
    let steps = inputs.len();
    let mut h = h0;
    let mut states = vec![h0; steps];
    let order: Vec<usize> = if reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    };
    for t in order {
        let valid: Vec<bool> = lengths.iter().map(|&len| t < len).collect();
        let next = cell.step(g, p, inputs[t], h)?;
        h = if valid.iter().all(|&v| v) {
            next
        } else {
            g.select_rows(&valid, next, h)?
        };
        states[t] = h;
    }
    Ok(states)
}

pub fn init_bound(size: usize) -> f64 {
    1.0 / (size as f64).sqrt()
}
