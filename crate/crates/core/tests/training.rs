mod common;

use morphdis::checkpoint::{Checkpoint, FORMAT_VERSION};
use morphdis::corpus::{Normalizer, N_FEATURES};
use morphdis::model::{joint_loss, verify_joint_loss};
use morphdis::nn::graph::Graph;
use morphdis::nn::params::ParamStore;
use morphdis::train::{train, TrainConfig, Trainer};

use common::*;

fn short_config(epochs: usize) -> TrainConfig {
    let mut cfg = micro_config();
    cfg.epochs = epochs;
    cfg
}

#[test]
fn joint_loss_examples() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let same: [_; N_FEATURES] = std::array::from_fn(|_| g.input(vec![0.7]));
    let (t, tags, lex) = joint_loss(&mut g, &same, None);
    assert!((g.scalar(t) - 0.7).abs() < 1e-12);
    assert!((g.scalar(tags) + g.scalar(lex) - g.scalar(t)).abs() < 1e-12);

    let one: [_; N_FEATURES] = std::array::from_fn(|f| g.input(vec![if f == 15 { 1.6 } else { 0.0 }]));
    let (t, _, _) = joint_loss(&mut g, &one, None);
    assert!((g.scalar(t) - 0.1).abs() < 1e-12);

    // uniform weights of any size give the plain mean
    let (t, _, _) = joint_loss(&mut g, &one, Some(&[3.0; N_FEATURES]));
    assert!((g.scalar(t) - 0.1).abs() < 1e-12);

    let comps = [0.7; N_FEATURES];
    assert!(verify_joint_loss(&comps, 0.7, None, 1e-12).is_ok());
    assert!(verify_joint_loss(&comps, 0.7 + 1e-9, None, 1e-12).is_err());
    let mut nan = comps;
    nan[2] = f64::NAN;
    assert!(verify_joint_loss(&nan, 0.7, None, 1e-12).is_err());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let (ckpt, report) = train(short_config(2), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    assert_eq!(report.epochs.len(), 2);
    let bytes = ckpt.to_bytes();
    let again = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(again.to_bytes(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(Checkpoint::load(&path).unwrap().to_bytes(), bytes);

    // the inference model carries the selected epoch's weights
    let model = again.inference_model().unwrap();
    assert_eq!(model.store.len(), again.params.len());
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let corpus = micro_corpus();
    let (ckpt, _) = train(short_config(0), &corpus, None, Normalizer::identity(), None).unwrap();
    let bytes = ckpt.to_bytes();

    let mut wrong_version = bytes.clone();
    wrong_version[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    let err = Checkpoint::from_bytes(&wrong_version).unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad_magic).is_err());
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(Checkpoint::from_bytes(&trailing).is_err());
}

#[test]
fn zero_epochs_gives_untrained_checkpoint() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let (ckpt, report) = train(short_config(0), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(report.best_epoch, None);
    assert_eq!(report.final_tune, None);
    assert_eq!(ckpt.state.epochs_completed, 0);
    assert!(ckpt.params.iter().all(|p| p.step_count == 0));
}

#[test]
fn same_seed_same_bytes() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let a = train(short_config(2), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    let b = train(short_config(2), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    assert_eq!(a.0.to_bytes(), b.0.to_bytes());
    assert_eq!(a.1.log_text(), b.1.log_text());

    let mut other = short_config(2);
    other.seed += 1;
    let c = train(other, &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    assert_ne!(a.0.to_bytes(), c.0.to_bytes());
}

#[test]
fn resume_matches_uninterrupted_run() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let (full, full_report) = train(short_config(4), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();

    let (half, _) = train(short_config(2), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    let restored = Checkpoint::from_bytes(&half.to_bytes()).unwrap();
    let mut t = Trainer::resume(restored, short_config(4), &corpus, Some(&dict)).unwrap();
    assert_eq!(t.epochs_completed(), 2);
    let report = t.train().unwrap();
    assert_eq!(report.log_text(), full_report.log_text());
    // the echoed settings come from the first run, which asked for 2 epochs
    let mut resumed = t.checkpoint();
    resumed.train_config = full.train_config.clone();
    assert_eq!(resumed.to_bytes(), full.to_bytes());
}

#[test]
fn resuming_a_finished_run_is_a_no_op() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let (done, _) = train(short_config(1), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    let bytes = done.to_bytes();
    let mut t = Trainer::resume(done, short_config(1), &corpus, Some(&dict)).unwrap();
    let report = t.train().unwrap();
    assert_eq!(report.epochs.len(), 1);
    assert_eq!(t.checkpoint().to_bytes(), bytes);
}

#[test]
fn resume_rejects_other_model_settings() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let (ckpt, _) = train(short_config(0), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    let mut cfg = short_config(1);
    cfg.model.char_dim += 1;
    assert!(Trainer::resume(ckpt.clone(), cfg, &corpus, Some(&dict)).is_err());

    // a corpus with other characters yields an incompatible vocabulary
    let mut changed = corpus.clone();
    for s in &mut changed {
        s[0].surface.push('Q');
    }
    assert!(Trainer::resume(ckpt, short_config(1), &changed, Some(&dict)).is_err());
}

#[test]
fn every_step_passes_the_loss_check() {
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let (_, report) = train(short_config(2), &corpus, Some(&dict), Normalizer::identity(), None).unwrap();
    for e in &report.epochs {
        assert!(e.loss_check_max_deviation <= 1e-12);
        let mean: f64 = e.feature_losses.iter().sum::<f64>() / N_FEATURES as f64;
        assert!((mean - e.loss).abs() < 1e-9, "epoch {}: {} vs {}", e.epoch, mean, e.loss);
    }
}
