//! The reconstruction model, the reflex-prediction model and their shared
//! training loop.

pub mod config;
mod layers;
mod recon;
mod reflex;
mod train;

#[cfg(test)]
mod tests;

use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

pub use config::{
    parse_config, preset_names, preset_text, recon_preset, reflex_preset, to_toml, ReconModelConfig,
    ReflexModelConfig, TrainingConfig,
};
pub use recon::ReconModel;
pub use reflex::ReflexModel;
pub use train::{max_decode_len_for, train, train_with_data, validation_ted};

use crate::autodiff::{Bound, Checkpoint, DType, Graph, NamedArray, ParamStore, Tensor, Var};
use crate::corpus::{CognateSet, TokenId, Vocabulary, BOS, EOS, PAD};
use crate::decode::{Decoder, TokenDecoder};
use crate::{Error, Result};

/// One supervised sequence pair. `target` excludes EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub input: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    /// Mean token loss per completed epoch.
    pub epoch_loss: Vec<f64>,
    /// `(epoch, mean greedy TED)` for each validation.
    pub validation: Vec<(usize, f64)>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Behavior shared by both trainable models.
pub trait SequenceModel: Decoder + Clone + Send + Sync {
    /// Checkpoint kind tag.
    const KIND: &'static str;

    fn vocab(&self) -> &Arc<Vocabulary>;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn training(&self) -> &TrainingConfig;
    fn history(&self) -> &History;
    fn history_mut(&mut self) -> &mut History;
    fn max_decode_len(&self) -> usize;
    fn set_max_decode_len(&mut self, len: usize);
    fn config_toml(&self) -> String;
    fn from_config_toml(text: &str, vocab: Arc<Vocabulary>) -> Result<Self>;

    /// Training pairs contributed by one cognate set.
    fn examples(&self, set: &CognateSet) -> Result<Vec<Example>>;

    /// Masked logits for every teacher-forced decoder step. Step `t` feeds
    /// BOS then `target[t-1]`, and predicts `target[t]` then EOS.
    fn teacher_forced(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &[Example],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Var>>;
}

macro_rules! token_decoder {
    ($t:ty) => {
        impl TokenDecoder for $t {
            fn vocabulary(&self) -> &Vocabulary {
                &self.vocab
            }
            fn max_len(&self) -> usize {
                self.max_decode_len
            }
        }
    };
}

token_decoder!(ReconModel);
token_decoder!(ReflexModel);

/// Previous-token inputs and gold outputs for each teacher-forced step.
pub(crate) fn teacher_forcing_schedule(batch: &[Example]) -> (Vec<Vec<TokenId>>, Vec<Vec<Option<usize>>>) {
    let steps = batch.iter().map(|e| e.target.len() + 1).max().unwrap_or(0);
    let mut prevs = Vec::with_capacity(steps);
    let mut golds = Vec::with_capacity(steps);
    for t in 0..steps {
        prevs.push(
            batch
                .iter()
                .map(|e| match t {
                    0 => BOS,
                    _ => e.target.get(t - 1).copied().unwrap_or(PAD),
                })
                .collect(),
        );
        golds.push(
            batch
                .iter()
                .map(|e| match t.cmp(&e.target.len()) {
                    std::cmp::Ordering::Less => Some(e.target[t]),
                    std::cmp::Ordering::Equal => Some(EOS),
                    std::cmp::Ordering::Greater => None,
                })
                .collect(),
        );
    }
    (prevs, golds)
}

/// Mean cross-entropy over all gold tokens (EOS included) in the batch.
pub fn loss<M: SequenceModel>(
    model: &M,
    g: &mut Graph,
    p: &Bound,
    batch: &[Example],
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let logits = model.teacher_forced(g, p, batch, dropout)?;
    let (_, golds) = teacher_forcing_schedule(batch);
    let count: usize = batch.iter().map(|e| e.target.len() + 1).sum();
    let mut parts = Vec::with_capacity(logits.len());
    for (l, gold) in logits.iter().zip(&golds) {
        parts.push(g.cross_entropy_sum(*l, gold)?);
    }
    let total = g.sum(&parts)?;
    Ok(g.scale(total, 1.0 / count.max(1) as f64))
}

/// Teacher-forced log-probabilities per step for one example, and the
/// mean token loss.
pub fn forward<M: SequenceModel>(model: &M, example: &Example) -> Result<(Vec<Tensor>, f64)> {
    let mut g = Graph::new();
    let p = model.params().bind_frozen(&mut g);
    let batch = std::slice::from_ref(example);
    let logits = model.teacher_forced(&mut g, &p, batch, None)?;
    let rows = logits.iter().map(|&l| g.value(l).log_softmax_rows()).collect();
    let l = loss(model, &mut g, &p, batch, None)?;
    Ok((rows, g.value(l).get(0, 0)))
}

fn join_f64(xs: impl Iterator<Item = f64>) -> String {
    xs.map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn split_f64(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Checkpoint(format!("bad number `{x}` in history")))
        })
        .collect()
}

pub fn to_checkpoint<M: SequenceModel>(model: &M, dtype: DType) -> Checkpoint {
    let h = model.history();
    let mut meta = vec![
        ("max_decode_len".to_string(), model.max_decode_len().to_string()),
        ("epoch_loss".to_string(), join_f64(h.epoch_loss.iter().copied())),
        (
            "validation_epochs".to_string(),
            h.validation.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(","),
        ),
        ("validation_ted".to_string(), join_f64(h.validation.iter().map(|v| v.1))),
        ("stopped_early".to_string(), h.stopped_early.to_string()),
    ];
    if let Some(b) = h.best_epoch {
        meta.push(("best_epoch".to_string(), b.to_string()));
    }
    let vocab = model.vocab();
    Checkpoint {
        kind: M::KIND.to_string(),
        config: model.config_toml(),
        vocab_hash: vocab.hash(),
        languages: vocab.languages().to_vec(),
        phonemes: vocab.phonemes().to_vec(),
        seed: model.training().seed,
        meta,
        arrays: model
            .params()
            .iter()
            .map(|(name, t)| NamedArray::from_tensor(name, t, dtype))
            .collect(),
    }
}

/// Rebuild a model. When `expected_vocab_hash` is given it must match the
/// stored vocabulary.
pub fn from_checkpoint<M: SequenceModel>(ckpt: &Checkpoint, expected_vocab_hash: Option<&str>) -> Result<M> {
    if ckpt.kind != M::KIND {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a `{}` model, expected `{}`",
            ckpt.kind,
            M::KIND
        )));
    }
    let vocab = Vocabulary::from_parts(ckpt.languages.clone(), ckpt.phonemes.clone())?;
    if vocab.hash() != ckpt.vocab_hash {
        return Err(Error::Checkpoint("stored vocabulary does not match its hash".into()));
    }
    if let Some(expected) = expected_vocab_hash {
        if expected != ckpt.vocab_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: checkpoint {}, expected {expected}",
                ckpt.vocab_hash
            )));
        }
    }
    let mut model = M::from_config_toml(&ckpt.config, Arc::new(vocab))?;
    if ckpt.arrays.len() != model.params().len() {
        return Err(Error::Checkpoint(format!(
            "{} arrays for {} parameters",
            ckpt.arrays.len(),
            model.params().len()
        )));
    }
    let mut values = Vec::with_capacity(ckpt.arrays.len());
    for (arr, (name, t)) in ckpt.arrays.iter().zip(model.params().iter()) {
        let v = arr.to_tensor()?;
        if arr.name != name || v.shape() != t.shape() {
            return Err(Error::Checkpoint(format!(
                "array `{}` {:?} does not fit parameter `{name}` {:?}",
                arr.name,
                v.shape(),
                t.shape()
            )));
        }
        values.push(v);
    }
    model.params_mut().replace_values(values);
    let meta = |k: &str| ckpt.meta(k).unwrap_or("");
    model.set_max_decode_len(
        meta("max_decode_len")
            .parse()
            .map_err(|_| Error::Checkpoint("missing max_decode_len".into()))?,
    );
    let epochs: Vec<usize> = split_f64(meta("validation_epochs"))?
        .into_iter()
        .map(|e| e as usize)
        .collect();
    let teds = split_f64(meta("validation_ted"))?;
    *model.history_mut() = History {
        epoch_loss: split_f64(meta("epoch_loss"))?,
        validation: epochs.into_iter().zip(teds).collect(),
        best_epoch: ckpt.meta("best_epoch").and_then(|b| b.parse().ok()),
        stopped_early: meta("stopped_early") == "true",
    };
    Ok(model)
}

pub fn save_checkpoint<M: SequenceModel>(model: &M, path: &Path, dtype: DType) -> Result<()> {
    to_checkpoint(model, dtype).save(path)
}

pub fn load_checkpoint<M: SequenceModel>(path: &Path, expected_vocab_hash: Option<&str>) -> Result<M> {
    from_checkpoint(&Checkpoint::load(path)?, expected_vocab_hash)
}

/// Kind tag stored in a checkpoint file, without building a model.
pub fn checkpoint_kind(path: &Path) -> Result<String> {
    Ok(Checkpoint::load(path)?.kind)
}
