//! Binary checkpoint files.
//!
//! Layout: the magic bytes `MDCK`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a UTF-8 JSON header, then every tensor
//! listed in the header as little-endian `f64` values in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};
use crate::model::{JointModel, ModelConfig};
use crate::nn::params::Parameter;
use crate::nn::tensor::Tensor;
use crate::train::EpochRecord;

pub const MAGIC: &[u8; 4] = b"MDCK";
pub const FORMAT_VERSION: u32 = 1;

/// Progress needed to continue a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epochs_completed: usize,
    pub best_epoch: Option<usize>,
    pub best_full: Option<f64>,
    pub history: Vec<EpochRecord>,
}

/// A second set of Adam moments for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxMoments {
    pub m: Tensor,
    pub v: Tensor,
    pub step_count: u64,
}

impl AuxMoments {
    pub fn zeros(shape: &[usize]) -> Self {
        AuxMoments {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            step_count: 0,
        }
    }

    /// Exchanges these moments with the parameter's own.
    pub fn swap_into(&mut self, p: &mut Parameter) {
        std::mem::swap(&mut self.m, &mut p.adam_m);
        std::mem::swap(&mut self.v, &mut p.adam_v);
        std::mem::swap(&mut self.step_count, &mut p.step_count);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    /// Resolved training settings of the run that wrote the file.
    pub train_config: Vec<(String, String)>,
    pub vocab: Vocab,
    /// Current weights with their Adam state.
    pub params: Vec<Parameter>,
    /// Weights of the selected epoch, if any epoch has run.
    pub best_values: Option<Vec<Tensor>>,
    pub aux_moments: Option<Vec<AuxMoments>>,
    pub state: TrainState,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    step_count: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_config: ModelConfig,
    train_config: Vec<(String, String)>,
    vocab: Vocab,
    state: TrainState,
    params: Vec<ParamEntry>,
    has_best: bool,
    aux_steps: Option<Vec<u64>>,
    /// Every tensor in data order, for inspection tools.
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn from_model(model: &JointModel) -> Self {
        Checkpoint {
            model_config: model.config.clone(),
            train_config: Vec::new(),
            vocab: model.vocab.clone(),
            params: model.store.iter().map(|(_, p)| p.clone()).collect(),
            best_values: None,
            aux_moments: None,
            state: TrainState::default(),
        }
    }

    fn data_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for p in &self.params {
            out.push((p.name.clone(), &p.value));
            out.push((format!("{}#adam_m", p.name), &p.adam_m));
            out.push((format!("{}#adam_v", p.name), &p.adam_v));
        }
        if let Some(best) = &self.best_values {
            for (p, t) in self.params.iter().zip(best) {
                out.push((format!("{}#best", p.name), t));
            }
        }
        if let Some(aux) = &self.aux_moments {
            for (i, a) in aux.iter().enumerate() {
                out.push((format!("aux{i}#adam_m"), &a.m));
                out.push((format!("aux{i}#adam_v"), &a.v));
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.data_tensors();
        let header = Header {
            model_config: self.model_config.clone(),
            train_config: self.train_config.clone(),
            vocab: self.vocab.clone(),
            state: self.state.clone(),
            params: self
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    step_count: p.step_count,
                })
                .collect(),
            has_best: self.best_values.is_some(),
            aux_steps: self.aux_moments.as_ref().map(|a| a.iter().map(|m| m.step_count).collect()),
            tensors: tensors
                .iter()
                .map(|(n, t)| TensorEntry {
                    name: n.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + tensors.iter().map(|(_, t)| t.len() * 8).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let mut data = &body[hlen..];
        let mut take = |shape: &[usize]| -> Result<Tensor> {
            let n: usize = shape.iter().product();
            if data.len() < n * 8 {
                return Err(bad("truncated tensor data"));
            }
            let vals = data[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            data = &data[n * 8..];
            Tensor::new(shape.to_vec(), vals)
        };
        let mut params = Vec::with_capacity(header.params.len());
        for e in &header.params {
            let value = take(&e.shape)?;
            let adam_m = take(&e.shape)?;
            let adam_v = take(&e.shape)?;
            params.push(Parameter {
                name: e.name.clone(),
                grad: Tensor::zeros(&e.shape),
                value,
                adam_m,
                adam_v,
                step_count: e.step_count,
            });
        }
        let best_values = if header.has_best {
            Some(header.params.iter().map(|e| take(&e.shape)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let aux_moments = match &header.aux_steps {
            None => None,
            Some(steps) => {
                let shapes: Vec<Vec<usize>> = header
                    .tensors
                    .iter()
                    .filter(|t| t.name.starts_with("aux") && t.name.ends_with("#adam_m"))
                    .map(|t| t.shape.clone())
                    .collect();
                if shapes.len() != steps.len() {
                    return Err(bad("auxiliary moment count mismatch"));
                }
                let mut out = Vec::new();
                for (shape, &step_count) in shapes.iter().zip(steps) {
                    let m = take(shape)?;
                    let v = take(shape)?;
                    out.push(AuxMoments { m, v, step_count });
                }
                Some(out)
            }
        };
        if !data.is_empty() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            model_config: header.model_config,
            train_config: header.train_config,
            vocab: header.vocab,
            params,
            best_values,
            aux_moments,
            state: header.state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Rebuilds the model with the current (training-state) weights.
    pub fn into_model(self) -> Result<JointModel> {
        let mut model = JointModel::new(self.model_config, self.vocab, 0)?;
        if model.store.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, model expects {}",
                self.params.len(),
                model.store.len()
            )));
        }
        for (slot, p) in model.store.params_mut().iter_mut().zip(self.params) {
            if slot.name != p.name || slot.value.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match model parameter {} {:?}",
                    p.name,
                    p.value.shape(),
                    slot.name,
                    slot.value.shape()
                )));
            }
            *slot = p;
        }
        Ok(model)
    }

    /// The model with the selected epoch's weights, for inference.
    pub fn inference_model(&self) -> Result<JointModel> {
        let best = self.best_values.clone();
        let mut model = self.clone().into_model()?;
        if let Some(v) = best {
            model.store.set_values(&v);
        }
        Ok(model)
    }

    /// Human-readable listing of settings and tensor shapes.
    pub fn describe(&self) -> String {
        let mut s = format!("format_version={FORMAT_VERSION}\n");
        s.push_str(&format!(
            "epochs_completed={} best_epoch={} best_tune_full={}\n",
            self.state.epochs_completed,
            self.state.best_epoch.map_or("none".into(), |e| e.to_string()),
            self.state.best_full.map_or("none".into(), |f| f.to_string())
        ));
        for (k, v) in self.model_config.entries() {
            s.push_str(&format!("model.{k}={v}\n"));
        }
        for (k, v) in &self.train_config {
            s.push_str(&format!("train.{k}={v}\n"));
        }
        s.push_str(&format!(
            "vocab chars={} words={} lemma_out={} diac_out={}\n",
            self.vocab.n_chars(),
            self.vocab.n_words(),
            self.vocab.d_voc(crate::corpus::LexTask::Lemma),
            self.vocab.d_voc(crate::corpus::LexTask::Diac)
        ));
        let mut total = 0;
        for p in &self.params {
            total += p.value.len();
            let dims: Vec<String> = p.value.shape().iter().map(usize::to_string).collect();
            s.push_str(&format!("param {} {}\n", p.name, dims.join("x")));
        }
        s.push_str(&format!("total_parameters={total}\n"));
        s
    }
}
