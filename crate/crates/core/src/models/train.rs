use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss, Example, SequenceModel};
use crate::autodiff::{warmup_factor, AdamState, Graph};
use crate::corpus::{Dataset, Split, TokenId};
use crate::decode::greedy_decode_batch;
use crate::metrics::token_edit_distance;
use crate::{Error, Result};

const VALIDATION_BATCH: usize = 256;

/// Decode cap: twice the longest training target plus five.
pub fn max_decode_len_for(examples: &[Vec<Example>]) -> usize {
    2 * examples
        .iter()
        .flatten()
        .map(|e| e.target.len())
        .max()
        .unwrap_or(0)
        + 5
}

/// Train on the dataset's train split, validating on its val split.
pub fn train<M: SequenceModel>(model: M, dataset: &Dataset) -> Result<M> {
    if dataset.split_tags.is_none() {
        return Err(Error::Data("dataset has no split assignment".into()));
    }
    let train_sets = dataset.split(Split::Train);
    let val_sets = dataset.split(Split::Val);
    let train_ex = train_sets
        .iter()
        .map(|s| model.examples(s))
        .collect::<Result<Vec<_>>>()?;
    let val_ex = val_sets
        .iter()
        .map(|s| model.examples(s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    train_with_data(model, &train_ex, &val_ex)
}

/// Mean token edit distance of greedy decodes against targets.
pub fn validation_ted<M: SequenceModel>(model: &M, examples: &[Example]) -> Result<f64> {
    let mut total = 0usize;
    for chunk in examples.chunks(VALIDATION_BATCH) {
        let inputs: Vec<&[TokenId]> = chunk.iter().map(|e| e.input.as_slice()).collect();
        let preds = greedy_decode_batch(model, &inputs, model.max_decode_len())?;
        total += preds
            .iter()
            .zip(chunk)
            .map(|(p, e)| token_edit_distance(p, &e.target))
            .sum::<usize>();
    }
    Ok(total as f64 / examples.len().max(1) as f64)
}

/// Mini-batch Adam over `train` (one inner vector per cognate set, so a
/// batch holds `batch_size` sets). Validation runs every
/// `validate_every` epochs when `val` is non-empty; the best parameters
/// are kept and training stops after `patience` validations without
/// improvement.
pub fn train_with_data<M: SequenceModel>(mut model: M, train: &[Vec<Example>], val: &[Example]) -> Result<M> {
    if train.iter().all(Vec::is_empty) {
        return Err(Error::Training("empty training split".into()));
    }
    let cfg = model.training().clone();
    cfg.validate()?;
    model.set_max_decode_len(max_decode_len_for(train));
    let mut adam = AdamState::new(cfg.adam(), model.params());
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
    let use_dropout = cfg.dropout > 0.0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, crate::autodiff::ParamStore)> = None;
    let mut bad = 0usize;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut order_rng);
        let lr = cfg.learning_rate * warmup_factor(epoch, cfg.warmup_epochs);
        let (mut loss_sum, mut tokens) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().flat_map(|&i| train[i].iter().cloned()).collect();
            if batch.is_empty() {
                continue;
            }
            let mut g = Graph::new();
            let p = model.params().bind(&mut g);
            let l = loss(&model, &mut g, &p, &batch, use_dropout.then_some(&mut drop_rng))?;
            let value = g.value(l).get(0, 0);
            if !value.is_finite() {
                return Err(Error::Training(format!("non-finite loss {value} in epoch {epoch}")));
            }
            let n: usize = batch.iter().map(|e| e.target.len() + 1).sum();
            loss_sum += value * n as f64;
            tokens += n;
            g.backward(l)?;
            let grads = model.params().collect_grads(&mut g, &p);
            adam.step(model.params_mut(), &grads, lr)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        model.history_mut().epoch_loss.push(loss_sum / tokens.max(1) as f64);
        if !val.is_empty() && (epoch + 1) % cfg.validate_every == 0 {
            let ted = validation_ted(&model, val)?;
            model.history_mut().validation.push((epoch, ted));
            if best.as_ref().is_none_or(|(b, _)| ted < *b) {
                best = Some((ted, model.params().clone()));
                model.history_mut().best_epoch = Some(epoch);
                bad = 0;
            } else {
                bad += 1;
                if bad >= cfg.patience {
                    model.history_mut().stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok(model)
}
