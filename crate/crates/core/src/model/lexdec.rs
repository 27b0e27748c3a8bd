//! Shared character encoder and the two attention decoders.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::tagger::cell_params;
use crate::corpus::vocab::{LexTask, Vocab, OUT_EOS};
use crate::corpus::window::CharWindow;
use crate::error::{Error, Result};
use crate::nn::attention::{AttentionMemory, LuongAttention};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::layers::{BiLstm, Embedding, Linear, LstmState, StackedLstm};
use crate::nn::params::{ParamId, ParamStore};
use crate::nn::tensor::{argmax, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Output length cap is `max_len_factor * |target word| + max_len_offset`.
    pub max_len_factor: usize,
    pub max_len_offset: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 5,
            max_len_factor: 4,
            max_len_offset: 8,
        }
    }
}

impl DecodeConfig {
    pub fn max_len(&self, target_chars: usize) -> usize {
        self.max_len_factor * target_chars + self.max_len_offset
    }

    pub fn with_beam(self, beam_width: usize) -> Self {
        DecodeConfig { beam_width, ..self }
    }
}

/// Bidirectional character encoder over `[c_i; w_j]`.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub bilstm: BiLstm,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub outputs: Vec<NodeId>,
    /// Decoder initial state per layer: forward final plus backward final.
    pub init: Vec<LstmState>,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        Encoder {
            bilstm: BiLstm::new(
                store,
                "encoder",
                cfg.char_dim + cfg.word_dim,
                cfg.encoder_hidden,
                cfg.encoder_layers,
                false,
                rng,
            ),
            dropout: cfg.dropout,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.bilstm
            .layers
            .iter()
            .flat_map(|(f, b)| cell_params(f).into_iter().chain(cell_params(b)))
            .collect()
    }

    pub fn output_size(&self) -> usize {
        self.bilstm.output_size()
    }

    /// `word_nodes[j]` is the embedding node of sentence token `j`.
    pub fn encode(
        &self,
        g: &mut Graph,
        char_emb: &Embedding,
        word_nodes: &[NodeId],
        window: &CharWindow,
    ) -> Result<EncoderOutput> {
        let inputs: Vec<NodeId> = window
            .chars
            .iter()
            .zip(&window.tokens)
            .map(|(&c, &t)| {
                let ce = char_emb.lookup(g, c);
                g.concat(&[ce, word_nodes[t]])
            })
            .collect();
        let out = self.bilstm.forward(g, &inputs, self.dropout)?;
        let init = out
            .finals
            .iter()
            .map(|(f, b)| LstmState {
                h: g.add(f.h, b.h),
                c: g.add(f.c, b.c),
            })
            .collect();
        Ok(EncoderOutput {
            outputs: out.outputs,
            init,
        })
    }
}

/// One attention decoder. The two decoders share no parameters.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub task: LexTask,
    /// Output-character embeddings; the extra last row is BOS.
    pub embed: Embedding,
    pub lstm: StackedLstm,
    pub attention: LuongAttention,
    pub combine: Linear,
    pub out: Linear,
    pub d_voc: usize,
    pub tag_dim: usize,
    pub tag_every_step: bool,
    pub dropout: f64,
}

/// State carried between decoder steps.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub lstm: Vec<LstmState>,
    pub context: NodeId,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub logits: NodeId,
    pub attention: NodeId,
    pub state: DecoderState,
}

/// A decoded output string.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Output ids, EOS excluded.
    pub ids: Vec<usize>,
    pub text: String,
    /// Length-normalized log-probability (length counts EOS when emitted).
    pub score: f64,
    pub truncated: bool,
}

impl Decoder {
    pub fn new(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        task: LexTask,
        vocab: &Vocab,
        tag_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let name = format!("decoder.{}", task.name());
        let d_voc = vocab.d_voc(task);
        let enc_out = 2 * cfg.encoder_hidden;
        let tag_dim = if cfg.tag_conditioning { tag_dim } else { 0 };
        Decoder {
            task,
            embed: Embedding::new(store, &format!("{name}.embed"), d_voc + 1, cfg.char_dim, rng),
            lstm: StackedLstm::new(
                store,
                &format!("{name}.lstm"),
                cfg.char_dim + enc_out + tag_dim,
                cfg.decoder_hidden,
                cfg.decoder_layers,
                rng,
            ),
            attention: LuongAttention::new(store, &format!("{name}.attn"), cfg.decoder_hidden, enc_out, rng),
            combine: Linear::new(store, &format!("{name}.combine"), cfg.decoder_hidden + enc_out, cfg.decoder_hidden, rng),
            out: Linear::new(store, &format!("{name}.out"), cfg.decoder_hidden, d_voc, rng),
            d_voc,
            tag_dim,
            tag_every_step: cfg.tag_every_step,
            dropout: cfg.dropout,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = vec![self.embed.table];
        for cell in &self.lstm.layers {
            v.extend(cell_params(cell));
        }
        v.extend([
            self.attention.w_a,
            self.combine.w,
            self.combine.b,
            self.out.w,
            self.out.b,
        ]);
        v
    }

    pub fn bos(&self) -> usize {
        self.d_voc
    }

    pub fn memory(&self, g: &mut Graph, enc: &EncoderOutput) -> AttentionMemory {
        self.attention.memory(g, &enc.outputs)
    }

    pub fn initial_state(&self, g: &mut Graph, enc: &EncoderOutput) -> DecoderState {
        let context = g.zeros(self.attention.memory_size);
        DecoderState {
            lstm: enc.init.clone(),
            context,
        }
    }

    /// Feeds `prev` (an output id, or BOS) and returns next-character logits.
    /// `tags` is the detached tag vector, `None` when conditioning is off or
    /// suppressed for this step.
    pub fn step(
        &self,
        g: &mut Graph,
        prev: usize,
        state: &DecoderState,
        tags: Option<NodeId>,
        memory: &AttentionMemory,
    ) -> StepOutput {
        let emb = self.embed.lookup(g, prev);
        let mut parts = vec![emb, state.context];
        if self.tag_dim > 0 {
            parts.push(tags.unwrap_or_else(|| g.zeros(self.tag_dim)));
        }
        let x = g.concat(&parts);
        let lstm = self.lstm.step(g, x, &state.lstm, self.dropout);
        let top = lstm.last().expect("decoder has layers").h;
        let (weights, context) = self.attention.attend(g, top, memory);
        let joined = g.concat(&[top, context]);
        let comb = self.combine.forward(g, joined);
        let comb = g.tanh(comb);
        let comb = g.dropout(comb, self.dropout);
        let logits = self.out.forward(g, comb);
        StepOutput {
            logits,
            attention: weights,
            state: DecoderState { lstm, context },
        }
    }

    fn tags_for_step(&self, tags: Option<NodeId>, t: usize) -> Option<NodeId> {
        if t == 0 || self.tag_every_step {
            tags
        } else {
            None
        }
    }

    /// Mean per-step cross-entropy over `gold` followed by EOS. With
    /// probability `sampling_probability` a step is fed the previous
    /// argmax prediction instead of the gold character.
    pub fn decode_train(
        &self,
        g: &mut Graph,
        enc: &EncoderOutput,
        tags: Option<NodeId>,
        gold: &[usize],
        sampling_probability: f64,
    ) -> Result<NodeId> {
        if let Some(&bad) = gold.iter().find(|&&c| c == OUT_EOS || c >= self.d_voc) {
            return Err(Error::Vocab(format!("{} target id {bad} outside the output vocabulary", self.task.name())));
        }
        let memory = self.memory(g, enc);
        let mut state = self.initial_state(g, enc);
        let mut prev = self.bos();
        let mut losses = Vec::with_capacity(gold.len() + 1);
        let targets = gold.iter().copied().chain(std::iter::once(OUT_EOS));
        for (t, target) in targets.enumerate() {
            let step = self.step(g, prev, &state, self.tags_for_step(tags, t), &memory);
            losses.push(g.cross_entropy(step.logits, target));
            let sample = if sampling_probability >= 1.0 {
                true
            } else if sampling_probability <= 0.0 {
                false
            } else {
                g.rng().is_some_and(|r| r.gen::<f64>() < sampling_probability)
            };
            prev = if sample { argmax(g.value(step.logits)) } else { target };
            state = step.state;
        }
        Ok(g.mean(&losses))
    }

    /// Greedy argmax decoding (lowest id on ties).
    pub fn decode_greedy(
        &self,
        g: &mut Graph,
        enc: &EncoderOutput,
        tags: Option<NodeId>,
        max_len: usize,
        vocab: &Vocab,
    ) -> Decoded {
        let memory = self.memory(g, enc);
        let mut state = self.initial_state(g, enc);
        let mut prev = self.bos();
        let mut ids = Vec::new();
        let mut sum = 0.0;
        let mut steps = 0;
        let mut truncated = true;
        while ids.len() < max_len {
            let step = self.step(g, prev, &state, self.tags_for_step(tags, steps), &memory);
            let logp = log_softmax(g.value(step.logits));
            let best = argmax(&logp);
            sum += logp[best];
            steps += 1;
            if best == OUT_EOS {
                truncated = false;
                break;
            }
            ids.push(best);
            prev = best;
            state = step.state;
        }
        Decoded {
            text: vocab.decode_output(self.task, &ids),
            score: if steps == 0 { 0.0 } else { sum / steps as f64 },
            ids,
            truncated,
        }
    }

    /// Length-normalized beam search. Candidates are ranked by normalized
    /// score, then by the log-probability of their last step, then by their
    /// output ids. For widths above one the greedy path also competes in the
    /// final selection, so a wider beam never returns a lower score.
    pub fn decode_beam(
        &self,
        g: &mut Graph,
        enc: &EncoderOutput,
        tags: Option<NodeId>,
        max_len: usize,
        beam_width: usize,
        vocab: &Vocab,
    ) -> Decoded {
        let width = beam_width.max(1);
        if max_len == 0 {
            return Decoded {
                ids: Vec::new(),
                text: String::new(),
                score: 0.0,
                truncated: true,
            };
        }
        let memory = self.memory(g, enc);
        let init = self.initial_state(g, enc);

        struct Hyp {
            ids: Vec<usize>,
            sum: f64,
            steps: usize,
            state: DecoderState,
            prev: usize,
        }
        let mut live = vec![Hyp {
            ids: Vec::new(),
            sum: 0.0,
            steps: 0,
            state: init,
            prev: self.bos(),
        }];
        let mut finished: Vec<Decoded> = Vec::new();

        while !live.is_empty() {
            // (parent, token, sum, last logp)
            let mut cands: Vec<(usize, usize, f64, f64)> = Vec::new();
            let mut stepped = Vec::with_capacity(live.len());
            for (hi, h) in live.iter().enumerate() {
                let step = self.step(g, h.prev, &h.state, self.tags_for_step(tags, h.steps), &memory);
                let logp = log_softmax(g.value(step.logits));
                for (tok, &lp) in logp.iter().enumerate() {
                    cands.push((hi, tok, h.sum + lp, lp));
                }
                stepped.push(step.state);
            }
            let steps_after = live[0].steps + 1;
            let key_ids = |c: &(usize, usize, f64, f64)| -> Vec<usize> {
                let mut v = live[c.0].ids.clone();
                v.push(c.1);
                v
            };
            cands.sort_by(|a, b| {
                let na = a.2 / steps_after as f64;
                let nb = b.2 / steps_after as f64;
                nb.total_cmp(&na)
                    .then(b.3.total_cmp(&a.3))
                    .then_with(|| key_ids(a).cmp(&key_ids(b)))
            });
            let mut next = Vec::new();
            for c in cands.into_iter().take(width) {
                let (hi, tok, sum, _) = c;
                let parent = &live[hi];
                let score = sum / steps_after as f64;
                if tok == OUT_EOS {
                    finished.push(Decoded {
                        text: vocab.decode_output(self.task, &parent.ids),
                        ids: parent.ids.clone(),
                        score,
                        truncated: false,
                    });
                    continue;
                }
                let mut ids = parent.ids.clone();
                ids.push(tok);
                if ids.len() >= max_len {
                    finished.push(Decoded {
                        text: vocab.decode_output(self.task, &ids),
                        ids,
                        score,
                        truncated: true,
                    });
                    continue;
                }
                next.push(Hyp {
                    ids,
                    sum,
                    steps: steps_after,
                    state: stepped[hi].clone(),
                    prev: tok,
                });
            }
            live = next;
        }
        if width > 1 {
            finished.push(self.decode_greedy(g, enc, tags, max_len, vocab));
        }
        finished
            .into_iter()
            .min_by(compare_decoded)
            .expect("beam search yields at least one hypothesis")
    }
}

/// Better hypotheses order first: higher score, then smaller ids.
fn compare_decoded(a: &Decoded, b: &Decoded) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.ids.cmp(&b.ids))
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| l - lse).collect()
}
