//! Joint training: one Adam optimizer over the averaged 16-feature loss,
//! per-epoch tune evaluation and best-epoch selection.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analyzer::MorphDictionary;
use crate::checkpoint::{AuxMoments, Checkpoint, TrainState};
use crate::corpus::embeddings::{apply_embeddings, Pretrained};
use crate::corpus::schema::{Feature, Sentence, N_FEATURES};
use crate::corpus::split::split_train_tune;
use crate::corpus::vocab::{LexTask, Vocab};
use crate::corpus::Normalizer;
use crate::disambig::{choose, Mode, RankingWeights};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, Tally};
use crate::model::config::{parse_bool, parse_num};
use crate::model::{verify_joint_loss, DecodeConfig, JointModel, LossOptions, ModelConfig, PreparedSentence};
use crate::nn::adam::{adam_step, AdamConfig};
use crate::nn::graph::Graph;
use crate::nn::params::{Grads, ParamId};
use crate::nn::tensor::Tensor;

/// Largest tolerated gap between the reported total loss and the mean of
/// its components.
pub const LOSS_CHECK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub tune_fraction: f64,
    pub seed: u64,
    pub sampling_probability: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Sentences per parameter update.
    pub batch_size: usize,
    /// Beam width for final metrics.
    pub beam_width: usize,
    /// Beam width for the per-epoch tune evaluation.
    pub tune_beam_width: usize,
    /// Rank dictionary analyses during evaluation (when a dictionary exists).
    pub rank_with_analyzer: bool,
    /// Ablation: fixed per-feature loss weights instead of the plain mean.
    pub loss_weights: Option<[f64; N_FEATURES]>,
    /// Ablation: separate optimizers for the tagger and decoder losses.
    pub dual_optimizer: bool,
    /// Ablation: condition decoders on gold tags during training.
    pub gold_tag_conditioning: bool,
    /// Block decoder gradients from reaching the tagger through the tags.
    pub stop_gradient: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            epochs: 50,
            learning_rate: 0.0005,
            tune_fraction: 0.05,
            seed: 1,
            sampling_probability: 0.4,
            clip_norm: 5.0,
            batch_size: 1,
            beam_width: 5,
            tune_beam_width: 1,
            rank_with_analyzer: true,
            loss_weights: None,
            dual_optimizer: false,
            gold_tag_conditioning: false,
            stop_gradient: true,
        }
    }
}

fn parse_weights(v: &str) -> Result<Option<[f64; N_FEATURES]>> {
    if v == "none" {
        return Ok(None);
    }
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != N_FEATURES {
        return Err(Error::Config(format!(
            "loss_weights: expected {N_FEATURES} comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut w = [0.0f64; N_FEATURES];
    for (dst, p) in w.iter_mut().zip(parts) {
        *dst = parse_num("loss_weights", p)?;
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config("loss_weights must be non-negative with a positive sum".into()));
    }
    Ok(Some(w))
}

impl TrainConfig {
    /// Applies one `key=value` setting; unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if self.model.set(key, v)? {
            return Ok(());
        }
        match key {
            "epochs" => self.epochs = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "tune_fraction" => self.tune_fraction = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "sampling_probability" => self.sampling_probability = parse_num(key, v)?,
            "clip_norm" => self.clip_norm = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "beam_width" => self.beam_width = parse_num(key, v)?,
            "tune_beam_width" => self.tune_beam_width = parse_num(key, v)?,
            "rank_with_analyzer" => self.rank_with_analyzer = parse_bool(key, v)?,
            "loss_weights" => self.loss_weights = parse_weights(v)?,
            "dual_optimizer" => self.dual_optimizer = parse_bool(key, v)?,
            "gold_tag_conditioning" => self.gold_tag_conditioning = parse_bool(key, v)?,
            "stop_gradient" => self.stop_gradient = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, model settings first.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .model
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let weights = match &self.loss_weights {
            None => "none".to_string(),
            Some(w) => w.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        };
        out.extend(
            [
                ("epochs", self.epochs.to_string()),
                ("learning_rate", self.learning_rate.to_string()),
                ("tune_fraction", self.tune_fraction.to_string()),
                ("seed", self.seed.to_string()),
                ("sampling_probability", self.sampling_probability.to_string()),
                ("clip_norm", self.clip_norm.to_string()),
                ("batch_size", self.batch_size.to_string()),
                ("beam_width", self.beam_width.to_string()),
                ("tune_beam_width", self.tune_beam_width.to_string()),
                ("rank_with_analyzer", self.rank_with_analyzer.to_string()),
                ("loss_weights", weights),
                ("dual_optimizer", self.dual_optimizer.to_string()),
                ("gold_tag_conditioning", self.gold_tag_conditioning.to_string()),
                ("stop_gradient", self.stop_gradient.to_string()),
            ]
            .map(|(k, v)| (k.to_string(), v)),
        );
        out
    }

    /// Parses `key=value` lines (`#` comments and blank lines allowed).
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{source}:{}: expected key=value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{source}:{}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.adam().validate()?;
        if !(self.tune_fraction > 0.0 && self.tune_fraction < 1.0) {
            return Err(Error::Config(format!("tune_fraction must lie in (0, 1), got {}", self.tune_fraction)));
        }
        if !(0.0..=1.0).contains(&self.sampling_probability) {
            return Err(Error::Config("sampling_probability must lie in [0, 1]".into()));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::Config("clip_norm must be non-negative".into()));
        }
        for (k, v) in [
            ("batch_size", self.batch_size),
            ("beam_width", self.beam_width),
            ("tune_beam_width", self.tune_beam_width),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    fn loss_options(&self) -> LossOptions {
        LossOptions {
            sampling_probability: self.sampling_probability,
            gold_tag_conditioning: self.gold_tag_conditioning,
            detach_tags: self.stop_gradient,
            weights: self.loss_weights,
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        e => e.to_string(),
    }
}

/// Statistics of one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub steps: usize,
    /// Mean total loss per sentence.
    pub loss: f64,
    /// Mean per-feature loss per sentence, canonical order.
    pub feature_losses: [f64; N_FEATURES],
    /// Largest |total - mean(components)| seen in this epoch.
    pub loss_check_max_deviation: f64,
    pub tune: MetricsReport,
}

impl EpochRecord {
    /// One line of the epoch log. Floats use their shortest exact form.
    pub fn log_line(&self) -> String {
        let mut s = format!(
            "epoch={} steps={} loss={} tune_pos={} tune_tags={} tune_lex={} tune_diac={} tune_full={}",
            self.epoch,
            self.steps,
            self.loss,
            self.tune.pos,
            self.tune.tags,
            self.tune.lex,
            self.tune.diac,
            self.tune.full
        );
        for (f, l) in Feature::all().zip(&self.feature_losses) {
            s.push_str(&format!(" loss_{}={}", f.name(), l));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the highest tune Full accuracy (earliest on ties).
    pub best_epoch: Option<usize>,
    pub best_tune_full: Option<f64>,
    /// Tune metrics of the selected model with the configured beam.
    pub final_tune: Option<MetricsReport>,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn log_text(&self) -> String {
        self.epochs.iter().map(|e| e.log_line() + "\n").collect()
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Index of the largest value, earliest on ties. `None` for an empty list.
pub fn select_best(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Scores `model` on `gold` sentences through the disambiguation pipeline.
pub fn evaluate_model(
    model: &JointModel,
    prepared: &[PreparedSentence],
    gold: &[Sentence],
    dict: Option<&MorphDictionary>,
    mode: Mode,
    beam_width: usize,
) -> Result<MetricsReport> {
    let decode = DecodeConfig::default().with_beam(beam_width);
    let weights = RankingWeights::default();
    let mut tally = Tally::default();
    for (sent, gs) in prepared.iter().zip(gold) {
        let preds = model.predict(sent, &decode)?;
        let surfaces: Vec<&str> = sent.tokens.iter().map(|t| t.surface.as_str()).collect();
        let chosen = choose(&preds, &surfaces, dict, &weights, mode)?;
        for (d, gt) in chosen.iter().zip(gs) {
            tally.add(&gt.gold, &d.analysis);
        }
    }
    Ok(tally.report(gold.len()))
}

/// Builds the vocabulary from the training portion and dictionary.
pub fn build_vocab(train: &[Sentence], dict: Option<&MorphDictionary>, normalizer: Normalizer) -> Vocab {
    let extra: Vec<_> = dict.map(|d| d.analyses().collect()).unwrap_or_default();
    Vocab::build(train, extra, normalizer).0
}

fn prepare_all(model: &JointModel, sentences: &[Sentence], gold: bool, dict: Option<&MorphDictionary>) -> Result<Vec<PreparedSentence>> {
    sentences
        .iter()
        .map(|s| {
            let surfaces: Vec<&str> = s.iter().map(|t| t.surface.as_str()).collect();
            let analyses: Vec<_> = s.iter().map(|t| t.gold.clone()).collect();
            model.prepare(&surfaces, gold.then_some(&analyses[..]), dict)
        })
        .collect()
}

/// Training loop state. Holds the live model plus everything needed to
/// checkpoint and resume exactly.
pub struct Trainer<'d> {
    pub config: TrainConfig,
    pub model: JointModel,
    dict: Option<&'d MorphDictionary>,
    train: Vec<PreparedSentence>,
    tune: Vec<Sentence>,
    tune_prepared: Vec<PreparedSentence>,
    state: TrainState,
    best_values: Option<Vec<Tensor>>,
    aux: Option<Vec<AuxMoments>>,
    config_echo: Vec<(String, String)>,
}

impl<'d> Trainer<'d> {
    /// Fresh model initialized from `config.seed`.
    pub fn new(
        config: TrainConfig,
        corpus: &[Sentence],
        dict: Option<&'d MorphDictionary>,
        normalizer: Normalizer,
        embeddings: Option<&Pretrained>,
    ) -> Result<Self> {
        config.validate()?;
        let (train, tune) = split_train_tune(corpus, config.tune_fraction, config.seed)?;
        let vocab = build_vocab(&train, dict, normalizer);
        let mut model = JointModel::new(config.model.clone(), vocab, config.seed)?;
        if let Some(pre) = embeddings {
            let id = model.word_emb.table;
            let mut table = model.store.value(id).clone();
            apply_embeddings(pre, &model.vocab, &mut table)?;
            model.store.get_mut(id).value = table;
        }
        Self::assemble(config, model, dict, &train, tune, TrainState::default(), None, None, None)
    }

    /// Continues training from a checkpoint. The model settings must match
    /// and the corpus must produce the same vocabulary.
    pub fn resume(
        checkpoint: Checkpoint,
        config: TrainConfig,
        corpus: &[Sentence],
        dict: Option<&'d MorphDictionary>,
    ) -> Result<Self> {
        config.validate()?;
        if checkpoint.model_config != config.model {
            return Err(Error::Checkpoint("model settings differ from the checkpoint".into()));
        }
        let (train, tune) = split_train_tune(corpus, config.tune_fraction, config.seed)?;
        let vocab = build_vocab(&train, dict, checkpoint.vocab.normalizer().clone());
        checkpoint.vocab.ensure_compatible(&vocab)?;
        let echo = checkpoint.train_config.clone();
        let state = checkpoint.state.clone();
        let best = checkpoint.best_values.clone();
        let aux = checkpoint.aux_moments.clone();
        let model = checkpoint.into_model()?;
        Self::assemble(config, model, dict, &train, tune, state, best, aux, Some(echo))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: TrainConfig,
        model: JointModel,
        dict: Option<&'d MorphDictionary>,
        train: &[Sentence],
        tune: Vec<Sentence>,
        state: TrainState,
        best_values: Option<Vec<Tensor>>,
        aux: Option<Vec<AuxMoments>>,
        echo: Option<Vec<(String, String)>>,
    ) -> Result<Self> {
        let train = prepare_all(&model, train, true, dict)?;
        let tune_prepared = prepare_all(&model, &tune, false, dict)?;
        let config_echo = echo.unwrap_or_else(|| config.entries());
        Ok(Trainer {
            config,
            model,
            dict,
            train,
            tune,
            tune_prepared,
            state,
            best_values,
            aux,
            config_echo,
        })
    }

    pub fn epochs_completed(&self) -> usize {
        self.state.epochs_completed
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.state.history
    }

    pub fn tune_set(&self) -> &[Sentence] {
        &self.tune
    }

    fn mode(&self) -> Mode {
        if self.config.rank_with_analyzer && self.dict.is_some() {
            Mode::Analyzer
        } else {
            Mode::Model
        }
    }

    fn epoch_rng(&self, epoch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch as u64);
        rng
    }

    /// Runs one epoch over the shuffled training set and evaluates on tune.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.state.epochs_completed + 1;
        let mut rng = self.epoch_rng(epoch);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut rng);

        let opts = self.config.loss_options();
        let n_params = self.model.store.len();
        let mut loss_sum = 0.0;
        let mut feature_sums = [0.0; N_FEATURES];
        let mut max_dev: f64 = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let mut joint = Grads::new(n_params);
            let mut tag_part = Grads::new(n_params);
            let mut lex_part = Grads::new(n_params);
            for &i in batch {
                let sent = &self.train[i];
                let mut g = Graph::training(&self.model.store, rng);
                let loss = self.model.sentence_loss(&mut g, sent, &opts)?;
                let comps = loss.component_values(&g);
                let total = g.scalar(loss.total);
                let dev = verify_joint_loss(&comps, total, opts.weights.as_ref(), LOSS_CHECK_TOLERANCE)?;
                max_dev = max_dev.max(dev);
                loss_sum += total;
                for (s, c) in feature_sums.iter_mut().zip(comps) {
                    *s += c;
                }
                if self.config.dual_optimizer {
                    tag_part.add_assign(&g.backward(loss.tagger_part));
                    lex_part.add_assign(&g.backward(loss.decoder_part));
                } else {
                    joint.add_assign(&g.backward(loss.total));
                }
                rng = g.into_rng().expect("training graph owns an rng");
            }
            let scale = 1.0 / batch.len() as f64;
            if self.config.dual_optimizer {
                self.dual_update(&tag_part, &lex_part, scale)?;
            } else {
                let all: Vec<ParamId> = self.model.store.iter().map(|(id, _)| id).collect();
                self.apply_update(&joint, scale, &all)?;
            }
        }

        let n = self.train.len().max(1) as f64;
        let tune = evaluate_model(
            &self.model,
            &self.tune_prepared,
            &self.tune,
            self.dict,
            self.mode(),
            self.config.tune_beam_width,
        )?;
        let record = EpochRecord {
            epoch,
            steps: self.train.len(),
            loss: loss_sum / n,
            feature_losses: feature_sums.map(|s| s / n),
            loss_check_max_deviation: max_dev,
            tune,
        };
        if self.state.best_full.is_none_or(|b| record.tune.full > b) {
            self.state.best_full = Some(record.tune.full);
            self.state.best_epoch = Some(epoch);
            self.best_values = Some(self.model.store.values());
        }
        self.state.epochs_completed = epoch;
        self.state.history.push(record.clone());
        self.config_echo = self.config.entries();
        Ok(record)
    }

    /// Accumulates `grads * scale`, clips, and takes an Adam step on `ids`.
    fn apply_update(&mut self, grads: &Grads, scale: f64, ids: &[ParamId]) -> Result<()> {
        let store = &mut self.model.store;
        store.zero_grads();
        store.accumulate(grads);
        if scale != 1.0 {
            for p in store.params_mut() {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
            }
        }
        store.check_finite_grads()?;
        if self.config.clip_norm > 0.0 {
            store.clip_grad_norm(self.config.clip_norm);
        }
        let adam = self.config.adam();
        for &id in ids {
            adam_step(store.get_mut(id), &adam)?;
        }
        store.zero_grads();
        Ok(())
    }

    /// Ablation path: the tagger loss and the lexical loss each drive their
    /// own Adam optimizer. Shared embeddings keep a second set of moments
    /// for the lexical optimizer.
    fn dual_update(&mut self, tag: &Grads, lex: &Grads, scale: f64) -> Result<()> {
        let shared = self.model.shared_params();
        let mut tagger_side = shared.clone();
        tagger_side.extend(self.model.tagger_params());
        let mut lex_side = self.model.encoder_params();
        for task in LexTask::ALL {
            lex_side.extend(self.model.decoder_params(task));
        }
        self.apply_update(tag, scale, &tagger_side)?;

        let aux = self.aux.get_or_insert_with(|| {
            shared
                .iter()
                .map(|&id| AuxMoments::zeros(self.model.store.get(id).value.shape()))
                .collect()
        });
        for (&id, a) in shared.iter().zip(aux.iter_mut()) {
            a.swap_into(self.model.store.get_mut(id));
        }
        lex_side.extend(shared.iter().copied());
        let result = self.apply_update(lex, scale, &lex_side);
        let aux = self.aux.as_mut().expect("initialized above");
        for (&id, a) in shared.iter().zip(aux.iter_mut()) {
            a.swap_into(self.model.store.get_mut(id));
        }
        result
    }

    /// Trains until `config.epochs` epochs are done or `observer` returns
    /// false. Then restores the best epoch's weights into a copy of the model
    /// and scores it on tune with the configured beam.
    pub fn train_with<F>(&mut self, mut observer: F) -> Result<TrainReport>
    where
        F: FnMut(&EpochRecord, &JointModel) -> bool,
    {
        let start = Instant::now();
        while self.state.epochs_completed < self.config.epochs {
            let rec = self.run_epoch()?;
            if !observer(&rec, &self.model) {
                break;
            }
        }
        let best = self.best_model()?;
        let final_tune = if self.state.epochs_completed > 0 {
            Some(evaluate_model(
                &best,
                &self.tune_prepared,
                &self.tune,
                self.dict,
                self.mode(),
                self.config.beam_width,
            )?)
        } else {
            None
        };
        Ok(TrainReport {
            epochs: self.state.history.clone(),
            best_epoch: self.state.best_epoch,
            best_tune_full: self.state.best_full,
            final_tune,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        })
    }

    pub fn train(&mut self) -> Result<TrainReport> {
        self.train_with(|_, _| true)
    }

    /// The model with the selected epoch's weights (the current weights
    /// before any epoch has run).
    pub fn best_model(&self) -> Result<JointModel> {
        let mut m = self.model.clone();
        if let Some(v) = &self.best_values {
            m.store.set_values(v);
        }
        Ok(m)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model_config: self.model.config.clone(),
            train_config: self.config_echo.clone(),
            vocab: self.model.vocab.clone(),
            params: self.model.store.iter().map(|(_, p)| p.clone()).collect(),
            best_values: self.best_values.clone(),
            aux_moments: self.aux.clone(),
            state: self.state.clone(),
        }
    }
}

/// Trains from scratch and returns the final checkpoint with the report.
pub fn train(
    config: TrainConfig,
    corpus: &[Sentence],
    dict: Option<&MorphDictionary>,
    normalizer: Normalizer,
    embeddings: Option<&Pretrained>,
) -> Result<(Checkpoint, TrainReport)> {
    let mut t = Trainer::new(config, corpus, dict, normalizer, embeddings)?;
    let report = t.train()?;
    Ok((t.checkpoint(), report))
}
