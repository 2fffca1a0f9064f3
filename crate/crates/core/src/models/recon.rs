use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{init_bound, output_mask, run_gru, Classifier};
use super::config::{parse_config, to_toml, ReconModelConfig, TrainingConfig};
use super::{teacher_forcing_schedule, Example, History, SequenceModel};
use crate::autodiff::{Bound, Graph, GruParams, ParamId, ParamStore, Tensor, Var};
use crate::corpus::{assemble_reconstruction_input, CognateSet, TokenId, Vocabulary, DELIM, PAD, SEP};
use crate::decode::{Decoder, DecoderState};
use crate::{Error, Result};

/// Encoder-decoder GRU mapping a concatenated cognate set to a protoform.
///
/// Every encoder input is the token embedding concatenated with the
/// embedding of the language whose segment the token sits in; separators
/// use a reserved structural language slot. The encoder's final state
/// seeds the decoder, whose inputs carry a dedicated protolanguage slot.
#[derive(Debug, Clone)]
pub struct ReconModel {
    pub config: ReconModelConfig,
    pub vocab: Arc<Vocabulary>,
    pub params: ParamStore,
    pub history: History,
    pub max_decode_len: usize,
    layout: ReconLayout,
    mask: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct ReconLayout {
    tok_emb: ParamId,
    lang_emb: ParamId,
    encoder: GruParams,
    decoder: GruParams,
    classifier: Classifier,
}

impl ReconModel {
    pub fn new(config: ReconModelConfig, vocab: Arc<Vocabulary>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.training.seed);
        let mut params = ParamStore::new();
        let (e, h) = (config.embedding_size, config.hidden_size);
        let langs = vocab.num_languages() + 2;
        let tok_emb = params.add_uniform("tok_emb", vocab.len(), e, 0.5, &mut rng);
        let lang_emb = params.add_uniform("lang_emb", langs, e, 0.5, &mut rng);
        let encoder = GruParams::new(&mut params, "encoder", 2 * e, h, init_bound(h), &mut rng);
        let decoder = GruParams::new(&mut params, "decoder", 2 * e, h, init_bound(h), &mut rng);
        let classifier = Classifier::new(
            &mut params,
            "classifier",
            h,
            config.feedforward_size,
            vocab.len(),
            1,
            &mut rng,
        );
        Ok(ReconModel {
            mask: output_mask(&vocab),
            config,
            vocab,
            params,
            history: History::default(),
            max_decode_len: 0,
            layout: ReconLayout {
                tok_emb,
                lang_emb,
                encoder,
                decoder,
                classifier,
            },
        })
    }

    fn structural_slot(&self) -> usize {
        self.vocab.num_languages()
    }

    fn proto_slot(&self) -> usize {
        self.vocab.num_languages() + 1
    }

    /// Language slot for every position of a framed input.
    fn segments(&self, input: &[TokenId]) -> Result<Vec<usize>> {
        if input.len() < 2 || input[0] != SEP || *input.last().unwrap() != SEP {
            return Err(Error::Contract(
                "reconstruction input must begin and end with the separator".into(),
            ));
        }
        let mut current = self.structural_slot();
        Ok(input
            .iter()
            .map(|&id| {
                if let Some(l) = self.vocab.language_of_id(id) {
                    current = l;
                    l
                } else if id == SEP || id == DELIM {
                    self.structural_slot()
                } else {
                    current
                }
            })
            .collect())
    }

    fn encode_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        inputs: &[&[TokenId]],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let lay = &self.layout;
        let lengths: Vec<usize> = inputs.iter().map(|i| i.len()).collect();
        let steps = lengths.iter().copied().max().unwrap_or(0);
        let segs: Vec<Vec<usize>> = inputs
            .iter()
            .map(|i| self.segments(i))
            .collect::<Result<_>>()?;
        let mut xs = Vec::with_capacity(steps);
        for t in 0..steps {
            let ids: Vec<usize> = inputs.iter().map(|i| i.get(t).copied().unwrap_or(PAD)).collect();
            let seg: Vec<usize> = segs
                .iter()
                .map(|s| s.get(t).copied().unwrap_or(self.structural_slot()))
                .collect();
            let te = g.gather(p[lay.tok_emb], &ids)?;
            let le = g.gather(p[lay.lang_emb], &seg)?;
            let mut x = g.concat_cols(&[te, le])?;
            if let Some(rng) = dropout.as_deref_mut() {
                x = g.dropout(x, self.config.training.dropout, rng)?;
            }
            xs.push(x);
        }
        let h0 = g.constant(Tensor::zeros(inputs.len(), self.config.hidden_size));
        let states = run_gru(g, p, &lay.encoder, &xs, &lengths, h0, false)?;
        Ok(states.last().copied().unwrap_or(h0))
    }

    fn decode_step_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        h: Var,
        prev: &[TokenId],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Var)> {
        let lay = &self.layout;
        let te = g.gather(p[lay.tok_emb], prev)?;
        let le = g.gather(p[lay.lang_emb], &vec![self.proto_slot(); prev.len()])?;
        let mut x = g.concat_cols(&[te, le])?;
        if let Some(rng) = dropout.as_deref_mut() {
            x = g.dropout(x, self.config.training.dropout, rng)?;
        }
        let h = lay.decoder.step(g, p, x, h)?;
        let mut c_in = h;
        if let Some(rng) = dropout {
            c_in = g.dropout(c_in, self.config.training.dropout, rng)?;
        }
        let logits = lay.classifier.forward(g, p, c_in, None)?;
        let logits = g.add_const_row(logits, &self.mask)?;
        Ok((h, logits))
    }
}

impl Decoder for ReconModel {
    fn output_size(&self) -> usize {
        self.vocab.len()
    }

    fn encode(&self, inputs: &[&[TokenId]]) -> Result<DecoderState> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let h = self.encode_graph(&mut g, &p, inputs, None)?;
        Ok(DecoderState {
            hidden: g.value(h).clone(),
            cond: vec![0; inputs.len()],
        })
    }

    fn step(&self, state: &DecoderState, prev: &[TokenId]) -> Result<(DecoderState, Tensor)> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let h = g.constant(state.hidden.clone());
        let (h, logits) = self.decode_step_graph(&mut g, &p, h, prev, None)?;
        Ok((
            DecoderState {
                hidden: g.value(h).clone(),
                cond: state.cond.clone(),
            },
            g.value(logits).log_softmax_rows(),
        ))
    }
}

impl SequenceModel for ReconModel {
    const KIND: &'static str = "recon";

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
        ReconModel::new(parse_config(text)?, vocab)
    }

    fn examples(&self, set: &CognateSet) -> Result<Vec<Example>> {
        let proto = set.protoform.as_ref().ok_or_else(|| {
            Error::Data(format!("training set `{}` has no protoform", set.id))
        })?;
        Ok(vec![Example {
            input: assemble_reconstruction_input(set, self.vocab.languages(), &self.vocab, false)?,
            target: self.vocab.encode(proto, false)?,
        }])
    }

    fn teacher_forced(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &[Example],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Var>> {
        let inputs: Vec<&[TokenId]> = batch.iter().map(|e| e.input.as_slice()).collect();
        let mut h = self.encode_graph(g, p, &inputs, dropout.as_deref_mut())?;
        let (prevs, _) = teacher_forcing_schedule(batch);
        let mut out = Vec::with_capacity(prevs.len());
        for prev in &prevs {
            let (nh, logits) = self.decode_step_graph(g, p, h, prev, dropout.as_deref_mut())?;
            h = nh;
            out.push(logits);
        }
        Ok(out)
    }
}
