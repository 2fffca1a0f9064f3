use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{parse_config, to_toml, ReflexModelConfig, TrainingConfig};
use super::layers::{init_bound, output_mask, run_gru, Classifier};
use super::{teacher_forcing_schedule, Example, History, SequenceModel};
use crate::autodiff::{Bound, Graph, GruParams, ParamId, ParamStore, Tensor, Var};
use crate::corpus::{assemble_reflex_input, CognateSet, TokenId, Vocabulary, PAD};
use crate::decode::{Decoder, DecoderState};
use crate::{Error, Result};

/// Encoder-decoder GRU predicting one daughter reflex from a protoform
/// prefixed with the target language tag.
///
/// The encoder may be bidirectional and stacked; the decoder state is the
/// concatenation of the last layer's final forward and backward states.
/// Target conditioning follows the config flags.
#[derive(Debug, Clone)]
pub struct ReflexModel {
    pub config: ReflexModelConfig,
    pub vocab: Arc<Vocabulary>,
    pub params: ParamStore,
    pub history: History,
    pub max_decode_len: usize,
    layout: ReflexLayout,
    mask: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ReflexLayout {
    tok_emb: ParamId,
    lang_emb: Option<ParamId>,
    /// `(forward, backward)` cell per layer.
    encoder: Vec<(GruParams, Option<GruParams>)>,
    decoder: GruParams,
    classifier: Classifier,
}

impl ReflexModel {
    pub fn new(config: ReflexModelConfig, vocab: Arc<Vocabulary>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.training.seed);
        let mut params = ParamStore::new();
        let (e, h) = (config.embedding_size, config.hidden_size);
        let dirs = config.encoder_directions();
        let langs = vocab.num_languages();
        let tok_emb = params.add_uniform("tok_emb", vocab.len(), e, 0.5, &mut rng);
        let lang_emb = config
            .decode_with_language_embedding
            .then(|| params.add_uniform("lang_emb", langs, e, 0.5, &mut rng));
        let mut encoder = Vec::with_capacity(config.num_encoder_layers);
        for layer in 0..config.num_encoder_layers {
            let input = if layer == 0 { e } else { h * dirs };
            let fwd = GruParams::new(&mut params, &format!("encoder{layer}.fwd"), input, h, init_bound(h), &mut rng);
            let bwd = config.bidirectional_encoder.then(|| {
                GruParams::new(&mut params, &format!("encoder{layer}.bwd"), input, h, init_bound(h), &mut rng)
            });
            encoder.push((fwd, bwd));
        }
        let dec_hidden = h * dirs;
        let dec_input = if config.decode_with_language_embedding { 2 * e } else { e };
        let decoder = GruParams::new(&mut params, "decoder", dec_input, dec_hidden, init_bound(dec_hidden), &mut rng);
        let cls_input = dec_hidden + if config.one_hot_target_encoding { langs } else { 0 };
        let blocks = if config.target_gated_classifier { langs } else { 1 };
        let classifier = Classifier::new(
            &mut params,
            "classifier",
            cls_input,
            config.feedforward_size,
            vocab.len(),
            blocks,
            &mut rng,
        );
        Ok(ReflexModel {
            mask: output_mask(&vocab),
            config,
            vocab,
            params,
            history: History::default(),
            max_decode_len: 0,
            layout: ReflexLayout {
                tok_emb,
                lang_emb,
                encoder,
                decoder,
                classifier,
            },
        })
    }

    fn target_language(&self, input: &[TokenId]) -> Result<usize> {
        input
            .first()
            .and_then(|&id| self.vocab.language_of_id(id))
            .ok_or_else(|| Error::Vocabulary("reflex input must start with a known language tag".into()))
    }

    fn encode_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        inputs: &[&[TokenId]],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let lay = &self.layout;
        let drop = self.config.training.dropout;
        let lengths: Vec<usize> = inputs.iter().map(|i| i.len()).collect();
        let steps = lengths.iter().copied().max().unwrap_or(0);
        let h = self.config.hidden_size;
        let mut xs = Vec::with_capacity(steps);
        for t in 0..steps {
            let ids: Vec<usize> = inputs.iter().map(|i| i.get(t).copied().unwrap_or(PAD)).collect();
            let mut x = g.gather(p[lay.tok_emb], &ids)?;
            if let Some(rng) = dropout.as_deref_mut() {
                x = g.dropout(x, drop, rng)?;
            }
            xs.push(x);
        }
        let h0 = g.constant(Tensor::zeros(inputs.len(), h));
        let mut finals = (h0, None);
        for (layer, (fwd, bwd)) in lay.encoder.iter().enumerate() {
            let f_states = run_gru(g, p, fwd, &xs, &lengths, h0, false)?;
            let mut outputs = f_states.clone();
            finals = (f_states.last().copied().unwrap_or(h0), None);
            if let Some(bwd) = bwd {
                let b_states = run_gru(g, p, bwd, &xs, &lengths, h0, true)?;
                finals.1 = Some(b_states.first().copied().unwrap_or(h0));
                for (o, b) in outputs.iter_mut().zip(&b_states) {
                    *o = g.concat_cols(&[*o, *b])?;
                }
            }
            if layer + 1 < lay.encoder.len() {
                if let Some(rng) = dropout.as_deref_mut() {
                    for o in outputs.iter_mut() {
                        *o = g.dropout(*o, drop, rng)?;
                    }
                }
            }
            xs = outputs;
        }
        match finals {
            (f, Some(b)) => g.concat_cols(&[f, b]),
            (f, None) => Ok(f),
        }
    }

    fn decode_step_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        h: Var,
        prev: &[TokenId],
        langs: &[usize],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Var)> {
        let lay = &self.layout;
        let drop = self.config.training.dropout;
        let mut x = g.gather(p[lay.tok_emb], prev)?;
        if let Some(le) = lay.lang_emb {
            let l = g.gather(p[le], langs)?;
            x = g.concat_cols(&[x, l])?;
        }
        if let Some(rng) = dropout.as_deref_mut() {
            x = g.dropout(x, drop, rng)?;
        }
        let h = lay.decoder.step(g, p, x, h)?;
        let mut c_in = h;
        if let Some(rng) = dropout {
            c_in = g.dropout(c_in, drop, rng)?;
        }
        if self.config.one_hot_target_encoding {
            let n = self.vocab.num_languages();
            let mut one_hot = Tensor::zeros(langs.len(), n);
            for (r, &l) in langs.iter().enumerate() {
                one_hot.set(r, l, 1.0);
            }
            let oh = g.constant(one_hot);
            c_in = g.concat_cols(&[c_in, oh])?;
        }
        let gate = self.config.target_gated_classifier.then_some(langs);
        let logits = lay.classifier.forward(g, p, c_in, gate)?;
        let logits = g.add_const_row(logits, &self.mask)?;
        Ok((h, logits))
    }
}

impl Decoder for ReflexModel {
    fn output_size(&self) -> usize {
        self.vocab.len()
    }

    fn encode(&self, inputs: &[&[TokenId]]) -> Result<DecoderState> {
        let cond = inputs
            .iter()
            .map(|i| self.target_language(i))
            .collect::<Result<Vec<_>>>()?;
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let h = self.encode_graph(&mut g, &p, inputs, None)?;
        Ok(DecoderState {
            hidden: g.value(h).clone(),
            cond,
        })
    }

    fn step(&self, state: &DecoderState, prev: &[TokenId]) -> Result<(DecoderState, Tensor)> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let h = g.constant(state.hidden.clone());
        let (h, logits) = self.decode_step_graph(&mut g, &p, h, prev, &state.cond, None)?;
        Ok((
            DecoderState {
                hidden: g.value(h).clone(),
                cond: state.cond.clone(),
            },
            g.value(logits).log_softmax_rows(),
        ))
    }
}

impl SequenceModel for ReflexModel {
    const KIND: &'static str = "reflex";

    fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn training(&self) -> &TrainingConfig {
        &self.config.training
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn history_mut(&mut self) -> &mut History {
        &mut self.history
    }

    fn max_decode_len(&self) -> usize {
        self.max_decode_len
    }

    fn set_max_decode_len(&mut self, len: usize) {
        self.max_decode_len = len;
    }

    fn config_toml(&self) -> String {
        to_toml(&self.config)
    }

    fn from_config_toml(text: &str, vocab: Arc<Vocabulary>) -> Result<Self> {
        ReflexModel::new(parse_config(text)?, vocab)
    }

    /// One example per present reflex.
    fn examples(&self, set: &CognateSet) -> Result<Vec<Example>> {
        let proto = set.protoform.as_ref().ok_or_else(|| {
            Error::Data(format!("training set `{}` has no protoform", set.id))
        })?;
        set.reflexes_in_order(self.vocab.languages())
            .map(|(lang, reflex)| {
                Ok(Example {
                    input: assemble_reflex_input(proto, lang, &self.vocab, false)?,
                    target: self.vocab.encode(reflex, false)?,
                })
            })
            .collect()
    }

    fn teacher_forced(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &[Example],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Var>> {
        let langs = batch
            .iter()
            .map(|e| self.target_language(&e.input))
            .collect::<Result<Vec<_>>>()?;
        let inputs: Vec<&[TokenId]> = batch.iter().map(|e| e.input.as_slice()).collect();
        let mut h = self.encode_graph(g, p, &inputs, dropout.as_deref_mut())?;
        let (prevs, _) = teacher_forcing_schedule(batch);
        let mut out = Vec::with_capacity(prevs.len());
        for prev in &prevs {
            let (nh, logits) = self.decode_step_graph(g, p, h, prev, &langs, dropout.as_deref_mut())?;
            h = nh;
            out.push(logits);
        }
        Ok(out)
    }
}
