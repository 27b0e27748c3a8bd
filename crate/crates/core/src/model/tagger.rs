//! Word-level multitask tagger for the closed-class features.

use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::prepared::PreparedSentence;
use crate::corpus::schema::{N_TAGS, TAG_FEATURES};
use crate::corpus::vocab::Vocab;
use crate::error::Result;
use crate::nn::graph::{Graph, NodeId};
use crate::nn::layers::{BiLstm, Embedding, Linear, StackedLstm};
use crate::nn::params::{ParamId, ParamStore};
use crate::nn::tensor::{argmax, softmax};

/// Non-linearity, output layer and softmax for one feature.
#[derive(Debug, Clone)]
pub struct Head {
    pub hidden: Linear,
    pub out: Linear,
}

impl Head {
    fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let h = self.hidden.forward(g, x);
        let h = g.tanh(h);
        self.out.forward(g, h)
    }
}

#[derive(Debug, Clone)]
pub struct Tagger {
    /// Character LSTM producing the per-word summary `s_j`.
    pub char_lstm: StackedLstm,
    /// One embedding table per feature, used for both the candidate vector
    /// and the predicted-tag vector.
    pub tag_embeddings: Vec<Embedding>,
    pub context: BiLstm,
    pub heads: Vec<Head>,
    pub use_candidates: bool,
    pub dropout: f64,
}

/// Per-token tagger result.
#[derive(Debug, Clone, PartialEq)]
pub struct TagPrediction {
    /// Per feature, the full distribution over that feature's values.
    pub distributions: Vec<Vec<f64>>,
    pub ids: [usize; N_TAGS],
    pub values: Vec<String>,
}

impl TagPrediction {
    pub fn value(&self, feature: usize) -> &str {
        &self.values[feature]
    }
}

/// Graph nodes of a tagger pass.
#[derive(Debug, Clone)]
pub struct TaggerOutput {
    /// `[token][feature]` logits.
    pub logits: Vec<Vec<NodeId>>,
    pub predictions: Vec<TagPrediction>,
}

impl Tagger {
    pub fn new(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        vocab: &Vocab,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let char_lstm = StackedLstm::new(store, "tagger.char_lstm", cfg.char_dim, cfg.char_hidden, cfg.char_layers, rng);
        let tag_embeddings: Vec<Embedding> = (0..N_TAGS)
            .map(|f| {
                Embedding::new(
                    store,
                    &format!("tagger.tag_emb.{}", TAG_FEATURES[f]),
                    vocab.n_tag_values(f),
                    cfg.tag_dim,
                    rng,
                )
            })
            .collect();
        let cand_dim = if cfg.use_analyzer { N_TAGS * cfg.tag_dim } else { 0 };
        let input = cfg.word_dim + cfg.char_hidden + cand_dim;
        let context = BiLstm::new(store, "tagger.context", input, cfg.tagger_hidden, cfg.tagger_layers, cfg.peephole, rng);
        let heads = (0..N_TAGS)
            .map(|f| {
                let name = format!("tagger.head.{}", TAG_FEATURES[f]);
                Head {
                    hidden: Linear::new(store, &format!("{name}.hidden"), 2 * cfg.tagger_hidden, cfg.head_hidden, rng),
                    out: Linear::new(store, &format!("{name}.out"), cfg.head_hidden, vocab.n_tag_values(f), rng),
                }
            })
            .collect();
        Tagger {
            char_lstm,
            tag_embeddings,
            context,
            heads,
            use_candidates: cfg.use_analyzer,
            dropout: cfg.dropout,
        }
    }

    /// Parameters owned by the tagger alone (the shared character and word
    /// tables are not included).
    pub fn params(&self) -> Vec<ParamId> {
        let mut out = Vec::new();
        for cell in &self.char_lstm.layers {
            out.extend(cell_params(cell));
        }
        out.extend(self.tag_embeddings.iter().map(|e| e.table));
        for (f, b) in &self.context.layers {
            out.extend(cell_params(f));
            out.extend(cell_params(b));
        }
        for h in &self.heads {
            out.extend([h.hidden.w, h.hidden.b, h.out.w, h.out.b]);
        }
        out
    }

    pub fn tag_vector_dim(&self) -> usize {
        self.tag_embeddings.iter().map(|e| e.dim).sum()
    }

    /// Final hidden state of the character LSTM over one word.
    pub fn char_summary(&self, g: &mut Graph, char_emb: &Embedding, chars: &[usize]) -> NodeId {
        assert!(!chars.is_empty(), "character summary of an empty word");
        let inputs: Vec<NodeId> = chars.iter().map(|&c| char_emb.lookup(g, c)).collect();
        let state = self.char_lstm.run(g, &inputs, 0.0);
        state.last().expect("at least one layer").h
    }

    /// Sum of value embeddings per feature, concatenated in schema order.
    pub fn candidate_embedding(&self, g: &mut Graph, candidates: &[Vec<usize>]) -> NodeId {
        let parts: Vec<NodeId> = self
            .tag_embeddings
            .iter()
            .zip(candidates)
            .map(|(emb, ids)| {
                let rows: Vec<NodeId> = ids.iter().map(|&v| emb.lookup(g, v)).collect();
                g.sum(&rows, emb.dim)
            })
            .collect();
        g.concat(&parts)
    }

    /// Runs the tagger over a sentence. `word_nodes[j]` is the word
    /// embedding node of token `j`.
    pub fn tag_sentence(
        &self,
        g: &mut Graph,
        char_emb: &Embedding,
        word_nodes: &[NodeId],
        sent: &PreparedSentence,
        vocab: &Vocab,
    ) -> Result<TaggerOutput> {
        let mut inputs = Vec::with_capacity(sent.len());
        for (j, tok) in sent.tokens.iter().enumerate() {
            let s = self.char_summary(g, char_emb, &tok.chars);
            let mut parts = vec![word_nodes[j], s];
            if self.use_candidates {
                parts.push(self.candidate_embedding(g, &tok.candidates));
            }
            inputs.push(g.concat(&parts));
        }
        let ctx = self.context.forward(g, &inputs, self.dropout)?;
        let mut logits = Vec::with_capacity(sent.len());
        let mut predictions = Vec::with_capacity(sent.len());
        for &h in &ctx.outputs {
            let per_feature: Vec<NodeId> = self.heads.iter().map(|head| head.forward(g, h)).collect();
            let distributions: Vec<Vec<f64>> = per_feature.iter().map(|&l| softmax(g.value(l))).collect();
            let ids: [usize; N_TAGS] = std::array::from_fn(|f| argmax(&distributions[f]));
            let values = (0..N_TAGS).map(|f| vocab.tag_value(f, ids[f]).to_string()).collect();
            predictions.push(TagPrediction {
                distributions,
                ids,
                values,
            });
            logits.push(per_feature);
        }
        Ok(TaggerOutput { logits, predictions })
    }

    /// Concatenated embeddings of the given tag ids (`t_hat`), still attached
    /// to the tag tables.
    pub fn tag_vector(&self, g: &mut Graph, ids: &[usize; N_TAGS]) -> NodeId {
        let rows: Vec<NodeId> = self
            .tag_embeddings
            .iter()
            .zip(ids)
            .map(|(emb, &id)| emb.lookup(g, id))
            .collect();
        g.concat(&rows)
    }
}

pub(crate) fn cell_params(cell: &crate::nn::layers::LstmCell) -> Vec<ParamId> {
    let mut v = vec![cell.w_ih, cell.w_hh, cell.bias];
    if let Some(p) = cell.peepholes {
        v.extend(p);
    }
    v
}

/// Detaches `t_hat` from the graph: same forward value, no gradient path
/// back into the tagger.
pub fn stop_gradient(g: &mut Graph, t_hat: NodeId) -> NodeId {
    g.detach(t_hat)
}
