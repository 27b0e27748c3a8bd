//! The full model: shared embeddings, tagger, encoder and both decoders,
//! plus the averaged joint loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::lexdec::{Decoded, DecodeConfig, Decoder, Encoder};
use super::prepared::{prepare_sentence, PreparedSentence};
use super::tagger::{stop_gradient, TagPrediction, Tagger};
use crate::analyzer::MorphDictionary;
use crate::corpus::schema::{Analysis, N_FEATURES, N_TAGS};
use crate::corpus::vocab::{LexTask, Vocab};
use crate::error::{Error, Result};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::layers::Embedding;
use crate::nn::params::{ParamId, ParamStore};

#[derive(Debug, Clone)]
pub struct JointModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    pub char_emb: Embedding,
    pub word_emb: Embedding,
    pub tagger: Tagger,
    pub encoder: Encoder,
    pub decoders: [Decoder; 2],
}

/// Knobs of one training-loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossOptions {
    pub sampling_probability: f64,
    /// Condition decoders on gold tags instead of the tagger's argmax.
    pub gold_tag_conditioning: bool,
    /// Cut the gradient path from the decoders into the tag vector.
    pub detach_tags: bool,
    /// Per-feature loss weights in canonical order; `None` = plain mean.
    pub weights: Option<[f64; N_FEATURES]>,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            sampling_probability: 0.0,
            gold_tag_conditioning: false,
            detach_tags: true,
            weights: None,
        }
    }
}

/// Loss nodes of one sentence.
#[derive(Debug, Clone)]
pub struct SentenceLoss {
    /// 14 tag losses, then lemma, then diac; each averaged over tokens.
    pub components: [NodeId; N_FEATURES],
    pub total: NodeId,
    /// The tag part of `total` alone, with the same scaling.
    pub tagger_part: NodeId,
    /// The lemma and diac part of `total` alone, with the same scaling.
    pub decoder_part: NodeId,
    pub predictions: Vec<TagPrediction>,
}

impl SentenceLoss {
    pub fn component_values(&self, g: &Graph) -> [f64; N_FEATURES] {
        std::array::from_fn(|i| g.scalar(self.components[i]))
    }
}

/// Raw model output for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPrediction {
    pub tags: TagPrediction,
    pub lemma: Decoded,
    pub diac: Decoded,
    pub oov: bool,
}

impl TokenPrediction {
    pub fn decoded(&self, task: LexTask) -> &Decoded {
        match task {
            LexTask::Lemma => &self.lemma,
            LexTask::Diac => &self.diac,
        }
    }

    /// The analysis assembled from argmax tags and decoded strings.
    pub fn analysis(&self) -> Analysis {
        Analysis {
            diac: self.diac.text.clone(),
            lemma: self.lemma.text.clone(),
            tags: std::array::from_fn(|f| self.tags.values[f].clone()),
        }
    }
}

impl JointModel {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let char_emb = Embedding::new(&mut store, "shared.char_emb", vocab.n_chars(), config.char_dim, &mut rng);
        let word_emb = Embedding::new(&mut store, "shared.word_emb", vocab.n_words(), config.word_dim, &mut rng);
        let tagger = Tagger::new(&mut store, &config, &vocab, &mut rng);
        let encoder = Encoder::new(&mut store, &config, &mut rng);
        let tag_dim = tagger.tag_vector_dim();
        let decoders = [
            Decoder::new(&mut store, &config, LexTask::Lemma, &vocab, tag_dim, &mut rng),
            Decoder::new(&mut store, &config, LexTask::Diac, &vocab, tag_dim, &mut rng),
        ];
        Ok(JointModel {
            config,
            vocab,
            store,
            char_emb,
            word_emb,
            tagger,
            encoder,
            decoders,
        })
    }

    pub fn decoder(&self, task: LexTask) -> &Decoder {
        &self.decoders[task as usize]
    }

    pub fn shared_params(&self) -> Vec<ParamId> {
        vec![self.char_emb.table, self.word_emb.table]
    }

    pub fn tagger_params(&self) -> Vec<ParamId> {
        self.tagger.params()
    }

    pub fn encoder_params(&self) -> Vec<ParamId> {
        self.encoder.params()
    }

    pub fn decoder_params(&self, task: LexTask) -> Vec<ParamId> {
        self.decoder(task).params()
    }

    pub fn prepare(
        &self,
        surfaces: &[&str],
        gold: Option<&[Analysis]>,
        dict: Option<&MorphDictionary>,
    ) -> Result<PreparedSentence> {
        prepare_sentence(&self.vocab, &self.config, surfaces, gold, dict)
    }

    fn word_nodes(&self, g: &mut Graph, sent: &PreparedSentence) -> Vec<NodeId> {
        sent.tokens.iter().map(|t| self.word_emb.lookup(g, t.word)).collect()
    }

    /// Builds the joint loss of one sentence on `g`.
    pub fn sentence_loss(&self, g: &mut Graph, sent: &PreparedSentence, opts: &LossOptions) -> Result<SentenceLoss> {
        if !sent.has_gold() {
            return Err(Error::Invalid("sentence_loss needs gold annotations".into()));
        }
        let words = self.word_nodes(g, sent);
        let tagged = self.tagger.tag_sentence(g, &self.char_emb, &words, sent, &self.vocab)?;

        let mut per_feature: Vec<Vec<NodeId>> = (0..N_FEATURES).map(|_| Vec::with_capacity(sent.len())).collect();
        for (j, tok) in sent.tokens.iter().enumerate() {
            let gold = tok.gold.as_ref().expect("checked above");
            for f in 0..N_TAGS {
                per_feature[f].push(g.cross_entropy(tagged.logits[j][f], gold.tags[f]));
            }
            let tags = if self.config.tag_conditioning {
                let ids = if opts.gold_tag_conditioning { &gold.tags } else { &tagged.predictions[j].ids };
                let t_hat = self.tagger.tag_vector(g, ids);
                Some(if opts.detach_tags { stop_gradient(g, t_hat) } else { t_hat })
            } else {
                None
            };
            let enc = self.encoder.encode(g, &self.char_emb, &words, &tok.window)?;
            for task in LexTask::ALL {
                let loss = self.decoder(task).decode_train(
                    g,
                    &enc,
                    tags,
                    gold.target(task),
                    opts.sampling_probability,
                )?;
                per_feature[N_TAGS + task as usize].push(loss);
            }
        }
        let components: [NodeId; N_FEATURES] = std::array::from_fn(|f| g.mean(&per_feature[f]));
        let (total, tagger_part, decoder_part) = joint_loss(g, &components, opts.weights.as_ref());
        Ok(SentenceLoss {
            components,
            total,
            tagger_part,
            decoder_part,
            predictions: tagged.predictions,
        })
    }

    /// Tagger plus decoding for every token, in evaluation mode.
    pub fn predict(&self, sent: &PreparedSentence, decode: &DecodeConfig) -> Result<Vec<TokenPrediction>> {
        let mut g = Graph::new(&self.store);
        let words = self.word_nodes(&mut g, sent);
        let tagged = self.tagger.tag_sentence(&mut g, &self.char_emb, &words, sent, &self.vocab)?;
        let mut out = Vec::with_capacity(sent.len());
        for (tok, tags) in sent.tokens.iter().zip(tagged.predictions) {
            let t_hat = if self.config.tag_conditioning {
                let t = self.tagger.tag_vector(&mut g, &tags.ids);
                Some(stop_gradient(&mut g, t))
            } else {
                None
            };
            let enc = self.encoder.encode(&mut g, &self.char_emb, &words, &tok.window)?;
            let max_len = decode.max_len(tok.surface.chars().count());
            let mut run = |task: LexTask| {
                self.decoder(task)
                    .decode_beam(&mut g, &enc, t_hat, max_len, decode.beam_width, &self.vocab)
            };
            let lemma = run(LexTask::Lemma);
            let diac = run(LexTask::Diac);
            out.push(TokenPrediction {
                tags,
                lemma,
                diac,
                oov: tok.oov,
            });
        }
        Ok(out)
    }
}

/// Averages the component losses: `total = sum_f w_f L_f / sum_f w_f`
/// (unit weights by default). Also returns the tag-only and
/// lexical-only parts under the same normalization.
pub fn joint_loss(
    g: &mut Graph,
    components: &[NodeId; N_FEATURES],
    weights: Option<&[f64; N_FEATURES]>,
) -> (NodeId, NodeId, NodeId) {
    let weighted: Vec<NodeId> = match weights {
        None => components.to_vec(),
        Some(w) => components.iter().zip(w).map(|(&c, &wf)| g.scale(c, wf)).collect(),
    };
    let norm = weights.map_or(N_FEATURES as f64, |w| w.iter().sum());
    let all = g.sum(&weighted, 1);
    let total = g.scale(all, 1.0 / norm);
    let tags = g.sum(&weighted[..N_TAGS], 1);
    let tagger_part = g.scale(tags, 1.0 / norm);
    let lex = g.sum(&weighted[N_TAGS..], 1);
    let decoder_part = g.scale(lex, 1.0 / norm);
    (total, tagger_part, decoder_part)
}

/// Checks a reported loss vector: every component finite, and the total
/// equal to their (weighted) mean within `tol`.
pub fn verify_joint_loss(components: &[f64; N_FEATURES], total: f64, weights: Option<&[f64; N_FEATURES]>, tol: f64) -> Result<f64> {
    for (i, c) in components.iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::Numeric(format!(
                "loss component {} is not finite",
                crate::corpus::schema::Feature::all().nth(i).unwrap().name()
            )));
        }
    }
    let expected = match weights {
        None => components.iter().sum::<f64>() / N_FEATURES as f64,
        Some(w) => components.iter().zip(w).map(|(c, w)| c * w).sum::<f64>() / w.iter().sum::<f64>(),
    };
    let dev = (expected - total).abs();
    if dev > tol {
        return Err(Error::Numeric(format!("joint loss {total} differs from component mean {expected}")));
    }
    Ok(dev)
}
