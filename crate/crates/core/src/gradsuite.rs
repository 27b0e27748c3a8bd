//! Finite-difference checks of every building block and of the two model
//! losses on a fixed three-token sentence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::normalize::Normalizer;
use crate::corpus::schema::{AnnotatedToken, Analysis, Sentence};
use crate::corpus::vocab::Vocab;
use crate::error::Result;
use crate::model::{JointModel, LossOptions, ModelConfig};
use crate::nn::attention::LuongAttention;
use crate::nn::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::layers::{BiLstm, Embedding, Linear, LstmCell};
use crate::nn::params::{ParamId, ParamStore};

/// Result of one checked component.
#[derive(Debug, Clone)]
pub struct ComponentCheck {
    pub component: &'static str,
    pub report: GradCheckReport,
}

/// Small architecture used when no sizes are given: every code path of the
/// full model, at a size the checker gets through in seconds.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        char_dim: 6,
        word_dim: 5,
        char_hidden: 5,
        char_layers: 2,
        tag_dim: 2,
        tagger_hidden: 6,
        tagger_layers: 2,
        head_hidden: 4,
        encoder_hidden: 5,
        encoder_layers: 2,
        decoder_hidden: 5,
        decoder_layers: 2,
        dropout: 0.4,
        window: 3,
        ..ModelConfig::default()
    }
}

fn analysis(diac: &str, lemma: &str, tags: [&str; 14]) -> Analysis {
    Analysis {
        diac: diac.into(),
        lemma: lemma.into(),
        tags: tags.map(String::from),
    }
}

/// The three-token sentence the model losses are checked on.
pub fn fixture_sentence() -> Sentence {
    let verb = ["verb", "0", "0", "0", "0", "3", "p", "a", "i", "f", "s", "na", "na", "dobj_3mp"];
    let prep = ["prep", "0", "0", "0", "0", "na", "na", "na", "na", "na", "na", "na", "na", "0"];
    let noun = ["noun", "0", "0", "0", "Al_det", "na", "na", "na", "na", "f", "s", "d", "g", "0"];
    vec![
        AnnotatedToken {
            surface: "lmthm".into(),
            gold: analysis("lam~atohum", "lam~", verb),
        },
        AnnotatedToken {
            surface: "fy".into(),
            gold: analysis("fiy", "fiy", prep),
        },
        AnnotatedToken {
            surface: "Almdrsh".into(),
            gold: analysis("Almadrasapi", "madrasap", noun),
        },
    ]
}

/// Moves every parameter away from its structured initial value (zero
/// biases, zero peepholes) so that all terms of the gradient are exercised.
fn jitter(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    for p in store.params_mut() {
        for v in p.value.data_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
}

fn random_input(g: &mut Graph, rng: &mut ChaCha8Rng, n: usize) -> NodeId {
    let v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    g.input(v)
}

fn all_ids(store: &ParamStore) -> Vec<ParamId> {
    store.iter().map(|(id, _)| id).collect()
}

fn check_layer<F>(name: &'static str, store: &mut ParamStore, opts: &GradCheckOptions, loss: F) -> Result<ComponentCheck>
where
    F: Fn(&mut Graph) -> NodeId,
{
    let ids = all_ids(store);
    let report = grad_check(store, &ids, loss, opts)?;
    Ok(ComponentCheck { component: name, report })
}

/// Runs the whole suite. `config` gives the model sizes; dropout is off
/// throughout.
pub fn run_suite(config: &ModelConfig, seed: u64, opts: &GradCheckOptions) -> Result<Vec<ComponentCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    {
        let mut store = ParamStore::new();
        let emb = Embedding::new(&mut store, "emb", 5, 4, &mut rng);
        jitter(&mut store, &mut rng);
        out.push(check_layer("embedding", &mut store, opts, |g| {
            let a = emb.lookup(g, 1);
            let b = emb.lookup(g, 3);
            let both = g.concat(&[a, b]);
            let t = g.tanh(both);
            g.cross_entropy(t, 2)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "linear", 4, 3, &mut rng);
        jitter(&mut store, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        out.push(check_layer("linear", &mut store, opts, |g| {
            let xi = g.input(x.clone());
            let y = lin.forward(g, xi);
            g.cross_entropy(y, 1)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "lstm", 3, 4, true, &mut rng);
        jitter(&mut store, &mut rng);
        let seed_inputs = rng.gen::<u64>();
        out.push(check_layer("lstm_step", &mut store, opts, |g| {
            let mut r = ChaCha8Rng::seed_from_u64(seed_inputs);
            let x = random_input(g, &mut r, 3);
            let h = random_input(g, &mut r, 4);
            let c = random_input(g, &mut r, 4);
            let (h2, c2) = cell.step(g, x, h, c);
            let both = g.concat(&[h2, c2]);
            g.cross_entropy(both, 5)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let bi = BiLstm::new(&mut store, "bilstm", 3, 4, 2, true, &mut rng);
        jitter(&mut store, &mut rng);
        let seed_inputs = rng.gen::<u64>();
        out.push(check_layer("bilstm_2layer", &mut store, opts, |g| {
            let mut r = ChaCha8Rng::seed_from_u64(seed_inputs);
            let xs: Vec<NodeId> = (0..3).map(|_| random_input(g, &mut r, 3)).collect();
            let o = bi.forward(g, &xs, 0.0).expect("fixture shapes agree");
            let losses: Vec<NodeId> = o
                .outputs
                .iter()
                .enumerate()
                .map(|(i, &h)| g.cross_entropy(h, i))
                .collect();
            g.sum(&losses, 1)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let att = LuongAttention::new(&mut store, "attention", 4, 4, &mut rng);
        let proj = Linear::new(&mut store, "attention.proj", 5, 4, &mut rng);
        jitter(&mut store, &mut rng);
        let seed_inputs = rng.gen::<u64>();
        out.push(check_layer("attention", &mut store, opts, |g| {
            let mut r = ChaCha8Rng::seed_from_u64(seed_inputs);
            // memory goes through a parameterized layer so its gradient is checked too
            let mem: Vec<NodeId> = (0..3)
                .map(|_| {
                    let m = random_input(g, &mut r, 5);
                    let p = proj.forward(g, m);
                    g.tanh(p)
                })
                .collect();
            let state = random_input(g, &mut r, 4);
            let memory = att.memory(g, &mem);
            let (w, ctx) = att.attend(g, state, &memory);
            let both = g.concat(&[w, ctx]);
            g.cross_entropy(both, 4)
        })?);
    }

    let sentence = fixture_sentence();
    let (vocab, _) = Vocab::build(std::slice::from_ref(&sentence), std::iter::empty(), Normalizer::identity());
    let mut cfg = config.clone();
    cfg.dropout = 0.0;
    let mut model = JointModel::new(cfg, vocab, seed)?;
    jitter(&mut model.store, &mut rng);
    let surfaces: Vec<&str> = sentence.iter().map(|t| t.surface.as_str()).collect();
    let gold: Vec<Analysis> = sentence.iter().map(|t| t.gold.clone()).collect();
    let prepared = model.prepare(&surfaces, Some(&gold), None)?;
    let opts_loss = LossOptions::default();

    let mut tagger_ids = model.shared_params();
    tagger_ids.extend(model.tagger_params());
    let mut decoder_ids = model.shared_params();
    decoder_ids.extend(model.encoder_params());
    for task in crate::corpus::LexTask::ALL {
        decoder_ids.extend(model.decoder_params(task));
    }

    let JointModel { store, .. } = &mut model;
    let mut store = std::mem::take(store);
    let view = model.clone();
    let tagger_report = grad_check(
        &mut store,
        &tagger_ids,
        |g| view.sentence_loss(g, &prepared, &opts_loss).expect("fixture prepared").tagger_part,
        opts,
    );
    let decoder_report = grad_check(
        &mut store,
        &decoder_ids,
        |g| view.sentence_loss(g, &prepared, &opts_loss).expect("fixture prepared").decoder_part,
        opts,
    );
    out.push(ComponentCheck {
        component: "tagger_loss",
        report: tagger_report?,
    });
    out.push(ComponentCheck {
        component: "decoder_loss",
        report: decoder_report?,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_small_model() {
        let checks = run_suite(&small_config(), 3, &GradCheckOptions::default()).unwrap();
        assert_eq!(checks.len(), 7);
        for c in &checks {
            assert!(c.report.passed(), "{} max rel error {}", c.component, c.report.max_rel_error);
        }
    }
}
