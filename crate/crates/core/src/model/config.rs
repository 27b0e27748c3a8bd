use serde::{Deserialize, Serialize};

use crate::analyzer::OovPolicy;
use crate::error::{Error, Result};

/// Layer sizes and architectural switches. Defaults follow the published
/// setup; desk-scale runs shrink the sizes through config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub char_dim: usize,
    pub word_dim: usize,
    pub char_hidden: usize,
    pub char_layers: usize,
    /// Width of each candidate-tag embedding (per feature value).
    pub tag_dim: usize,
    pub tagger_hidden: usize,
    pub tagger_layers: usize,
    pub head_hidden: usize,
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub decoder_hidden: usize,
    pub decoder_layers: usize,
    pub dropout: f64,
    pub peephole: bool,
    /// Feed candidate tags from the dictionary into the tagger input.
    pub use_analyzer: bool,
    /// Condition the decoders on the predicted tags.
    pub tag_conditioning: bool,
    /// Inject the tag vector at every decoder step rather than only the first.
    pub tag_every_step: bool,
    /// Characters of context on each side of the target word.
    pub window: usize,
    pub oov_policy: OovPolicy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            char_dim: 50,
            word_dim: 250,
            char_hidden: 100,
            char_layers: 2,
            tag_dim: 50,
            tagger_hidden: 800,
            tagger_layers: 2,
            head_hidden: 100,
            encoder_hidden: 400,
            encoder_layers: 2,
            decoder_hidden: 400,
            decoder_layers: 2,
            dropout: 0.4,
            peephole: true,
            use_analyzer: true,
            tag_conditioning: true,
            tag_every_step: true,
            window: 10,
            oov_policy: OovPolicy::AllValues,
        }
    }
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

pub(crate) fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl ModelConfig {
    /// Sets one `key=value` entry. Returns `Ok(false)` for keys this struct
    /// does not own.
    pub fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "char_dim" => self.char_dim = parse_num(key, v)?,
            "word_dim" => self.word_dim = parse_num(key, v)?,
            "char_hidden" => self.char_hidden = parse_num(key, v)?,
            "char_layers" => self.char_layers = parse_num(key, v)?,
            "tag_dim" => self.tag_dim = parse_num(key, v)?,
            "tagger_hidden" => self.tagger_hidden = parse_num(key, v)?,
            "tagger_layers" => self.tagger_layers = parse_num(key, v)?,
            "head_hidden" => self.head_hidden = parse_num(key, v)?,
            "encoder_hidden" => self.encoder_hidden = parse_num(key, v)?,
            "encoder_layers" => self.encoder_layers = parse_num(key, v)?,
            "decoder_hidden" => self.decoder_hidden = parse_num(key, v)?,
            "decoder_layers" => self.decoder_layers = parse_num(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "peephole" => self.peephole = parse_bool(key, v)?,
            "use_analyzer" => self.use_analyzer = parse_bool(key, v)?,
            "tag_conditioning" => self.tag_conditioning = parse_bool(key, v)?,
            "tag_every_step" => self.tag_every_step = parse_bool(key, v)?,
            "window" => self.window = parse_num(key, v)?,
            "oov_policy" => {
                self.oov_policy = OovPolicy::parse(v)
                    .ok_or_else(|| Error::Config(format!("oov_policy: unknown policy {v:?}")))?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("char_dim", self.char_dim.to_string()),
            ("word_dim", self.word_dim.to_string()),
            ("char_hidden", self.char_hidden.to_string()),
            ("char_layers", self.char_layers.to_string()),
            ("tag_dim", self.tag_dim.to_string()),
            ("tagger_hidden", self.tagger_hidden.to_string()),
            ("tagger_layers", self.tagger_layers.to_string()),
            ("head_hidden", self.head_hidden.to_string()),
            ("encoder_hidden", self.encoder_hidden.to_string()),
            ("encoder_layers", self.encoder_layers.to_string()),
            ("decoder_hidden", self.decoder_hidden.to_string()),
            ("decoder_layers", self.decoder_layers.to_string()),
            ("dropout", self.dropout.to_string()),
            ("peephole", self.peephole.to_string()),
            ("use_analyzer", self.use_analyzer.to_string()),
            ("tag_conditioning", self.tag_conditioning.to_string()),
            ("tag_every_step", self.tag_every_step.to_string()),
            ("window", self.window.to_string()),
            ("oov_policy", self.oov_policy.name().to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("char_dim", self.char_dim),
            ("word_dim", self.word_dim),
            ("char_hidden", self.char_hidden),
            ("char_layers", self.char_layers),
            ("tag_dim", self.tag_dim),
            ("tagger_hidden", self.tagger_hidden),
            ("tagger_layers", self.tagger_layers),
            ("head_hidden", self.head_hidden),
            ("encoder_hidden", self.encoder_hidden),
            ("encoder_layers", self.encoder_layers),
            ("decoder_hidden", self.decoder_hidden),
            ("decoder_layers", self.decoder_layers),
        ];
        if let Some((k, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        // decoder layers start from the encoder's final states
        if self.decoder_hidden != self.encoder_hidden || self.decoder_layers != self.encoder_layers {
            return Err(Error::Config(
                "decoder_hidden/decoder_layers must equal encoder_hidden/encoder_layers".into(),
            ));
        }
        Ok(())
    }
}
