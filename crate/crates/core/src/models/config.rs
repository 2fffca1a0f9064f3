use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::{Error, Result};

fn default_patience() -> usize {
    5
}

fn default_validate_every() -> usize {
    3
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

/// Optimization settings shared by both model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Number of cognate sets per batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub warmup_epochs: usize,
    pub dropout: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Validations without improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_validate_every")]
    pub validate_every: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("learning rate and weight decay must be >= 0".into()));
        }
        if self.validate_every == 0 {
            return Err(Error::Config("validate_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// GRU encoder-decoder reconstruction model (daughters to protoform).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconModelConfig {
    pub embedding_size: usize,
    pub hidden_size: usize,
    pub feedforward_size: usize,
    /// Length normalization exponent for beam search.
    pub beam_alpha: f64,
    #[serde(flatten)]
    pub training: TrainingConfig,
}

impl ReconModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_size == 0 || self.hidden_size == 0 || self.feedforward_size == 0 {
            return Err(Error::Config("model sizes must be at least 1".into()));
        }
        if !(self.beam_alpha >= 0.0) {
            return Err(Error::Config(format!("beam_alpha {} must be >= 0", self.beam_alpha)));
        }
        self.training.validate()
    }
}

/// GRU reflex-prediction model (protoform plus target language to reflex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflexModelConfig {
    pub embedding_size: usize,
    pub hidden_size: usize,
    pub feedforward_size: usize,
    pub bidirectional_encoder: bool,
    pub num_encoder_layers: usize,
    /// Concatenate a one-hot target-language vector to the classifier input.
    pub one_hot_target_encoding: bool,
    /// Give every target language its own output-layer weights.
    pub target_gated_classifier: bool,
    /// Concatenate the target-language embedding to each decoder input.
    pub decode_with_language_embedding: bool,
    #[serde(flatten)]
    pub training: TrainingConfig,
}

impl ReflexModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_size == 0
            || self.hidden_size == 0
            || self.feedforward_size == 0
            || self.num_encoder_layers == 0
        {
            return Err(Error::Config("model sizes and layer count must be at least 1".into()));
        }
        if !(self.one_hot_target_encoding
            || self.target_gated_classifier
            || self.decode_with_language_embedding)
        {
            return Err(Error::Config(
                "reflex model needs at least one target-language conditioning flag".into(),
            ));
        }
        self.training.validate()
    }

    pub fn encoder_directions(&self) -> usize {
        if self.bidirectional_encoder {
            2
        } else {
            1
        }
    }
}

const PRESETS: [(&str, &str); 12] = [
    ("gru-bs/wikihan", include_str!("../../presets/gru-bs-wikihan.toml")),
    ("gru-bs/wikihan-aug", include_str!("../../presets/gru-bs-wikihan-aug.toml")),
    ("gru-bs/hou", include_str!("../../presets/gru-bs-hou.toml")),
    ("gru-bs/rom-phon", include_str!("../../presets/gru-bs-rom-phon.toml")),
    ("gru-bs/rom-orth", include_str!("../../presets/gru-bs-rom-orth.toml")),
    ("gru-bs/synthetic", include_str!("../../presets/gru-bs-synthetic.toml")),
    ("gru-reflex/wikihan", include_str!("../../presets/gru-reflex-wikihan.toml")),
    ("gru-reflex/wikihan-aug", include_str!("../../presets/gru-reflex-wikihan-aug.toml")),
    ("gru-reflex/hou", include_str!("../../presets/gru-reflex-hou.toml")),
    ("gru-reflex/rom-phon", include_str!("../../presets/gru-reflex-rom-phon.toml")),
    ("gru-reflex/rom-orth", include_str!("../../presets/gru-reflex-rom-orth.toml")),
    ("gru-reflex/synthetic", include_str!("../../presets/gru-reflex-synthetic.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown preset `{name}` (known: {})",
                preset_names().collect::<Vec<_>>().join(", ")
            ))
        })
}

pub fn parse_config<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("model configs serialize to TOML")
}

pub fn recon_preset(name: &str) -> Result<ReconModelConfig> {
    let cfg: ReconModelConfig = parse_config(preset_text(name)?)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn reflex_preset(name: &str) -> Result<ReflexModelConfig> {
    let cfg: ReflexModelConfig = parse_config(preset_text(name)?)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            if name.starts_with("gru-bs/") {
                recon_preset(name).unwrap();
            } else {
                reflex_preset(name).unwrap();
            }
        }
    }

    #[test]
    fn wikihan_presets_hold_expected_values() {
        let r = recon_preset("gru-bs/wikihan").unwrap();
        assert_eq!(r.training.batch_size, 128);
        assert_eq!(r.beam_alpha, 0.912598);
        assert_eq!((r.embedding_size, r.feedforward_size, r.hidden_size), (509, 218, 81));
        assert_eq!(r.training.learning_rate, 0.000629980);
        assert_eq!((r.training.max_epochs, r.training.warmup_epochs), (576, 19));
        assert_eq!((r.training.beta1, r.training.beta2, r.training.eps), (0.9, 0.999, 1e-8));

        let f = reflex_preset("gru-reflex/wikihan").unwrap();
        assert!(f.target_gated_classifier && f.one_hot_target_encoding && f.bidirectional_encoder);
        assert!(!f.decode_with_language_embedding);
        assert_eq!((f.hidden_size, f.num_encoder_layers), (46, 2));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let r = reflex_preset("gru-reflex/hou").unwrap();
        let back: ReflexModelConfig = parse_config(&to_toml(&r)).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn rejects_unconditioned_reflex_model() {
        let mut r = reflex_preset("gru-reflex/rom-phon").unwrap();
        r.one_hot_target_encoding = false;
        r.target_gated_classifier = false;
        r.decode_with_language_embedding = false;
        assert!(matches!(r.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_dropout() {
        let mut r = recon_preset("gru-bs/hou").unwrap();
        r.training.dropout = 1.0;
        assert!(r.validate().is_err());
    }
}
