use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore};
use super::tensor::{softmax, Tensor};
use crate::error::{Error, Result};

/// Multiplicative ("general") attention: `score_i = s^T W_a h_i`.
#[derive(Debug, Clone)]
pub struct LuongAttention {
    pub w_a: ParamId,
    pub state_size: usize,
    pub memory_size: usize,
}

/// Encoder outputs with their attention projections precomputed, so repeated
/// decoder steps only pay for the dot products.
#[derive(Debug, Clone)]
pub struct AttentionMemory {
    pub values: Vec<NodeId>,
    pub keys: Vec<NodeId>,
}

impl LuongAttention {
    pub fn new(store: &mut ParamStore, name: &str, state_size: usize, memory_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let w_a = store.add_glorot(format!("{name}.w_a"), state_size, memory_size, rng);
        LuongAttention {
            w_a,
            state_size,
            memory_size,
        }
    }

    pub fn memory(&self, g: &mut Graph, outputs: &[NodeId]) -> AttentionMemory {
        let keys = outputs.iter().map(|&h| g.matvec(self.w_a, h)).collect();
        AttentionMemory {
            values: outputs.to_vec(),
            keys,
        }
    }

    /// Returns `(weights, context)`.
    pub fn attend(&self, g: &mut Graph, state: NodeId, memory: &AttentionMemory) -> (NodeId, NodeId) {
        let scores: Vec<NodeId> = memory.keys.iter().map(|&k| g.dot(state, k)).collect();
        let scores = g.concat(&scores);
        let weights = g.softmax(scores);
        let context = g.weighted_sum(weights, &memory.values);
        (weights, context)
    }
}

/// Attention weights for plain tensors.
pub fn luong_score(w_a: &Tensor, decoder_state: &Tensor, encoder_outputs: &[Tensor]) -> Result<Tensor> {
    if encoder_outputs.is_empty() {
        return Err(Error::Invalid("attention over zero encoder outputs".into()));
    }
    if w_a.shape().len() != 2 {
        return Err(Error::shape("luong_score", "score matrix must be 2-dimensional"));
    }
    let (rows, cols) = (w_a.rows(), w_a.cols());
    if decoder_state.len() != rows {
        return Err(Error::shape(
            "luong_score",
            format!("decoder state has {} entries, score matrix has {} rows", decoder_state.len(), rows),
        ));
    }
    let mut scores = Vec::with_capacity(encoder_outputs.len());
    for (i, h) in encoder_outputs.iter().enumerate() {
        if h.len() != cols {
            return Err(Error::shape(
                "luong_score",
                format!("encoder output {} has {} entries, score matrix has {} columns", i, h.len(), cols),
            ));
        }
        let mut s = 0.0;
        for r in 0..rows {
            let wh: f64 = w_a.row(r).iter().zip(h.data()).map(|(a, b)| a * b).sum();
            s += decoder_state.data()[r] * wh;
        }
        scores.push(s);
    }
    Ok(Tensor::vector(softmax(&scores)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.row_mut(i)[i] = 1.0;
        }
        t
    }

    #[test]
    fn single_position_gets_all_weight() {
        let w = identity(2);
        let a = luong_score(&w, &Tensor::vector(vec![3.0, -1.0]), &[Tensor::vector(vec![0.2, 0.1])]).unwrap();
        assert_eq!(a.data(), &[1.0]);
    }

    #[test]
    fn aligned_position_wins() {
        let w = identity(3);
        let outputs: Vec<Tensor> = (0..3)
            .map(|k| {
                let mut v = vec![0.0; 3];
                v[k] = 1.0;
                Tensor::vector(v)
            })
            .collect();
        for k in 0..3 {
            let mut s = vec![0.1; 3];
            s[k] = 2.0;
            let state = Tensor::vector(s);
            // brute force dot products
            let dots: Vec<f64> = outputs
                .iter()
                .map(|o| o.data().iter().zip(state.data()).map(|(a, b)| a * b).sum())
                .collect();
            let a = luong_score(&w, &state, &outputs).unwrap();
            assert_eq!(a.argmax(), crate::nn::tensor::argmax(&dots));
            assert_eq!(a.argmax(), k);
            assert!((a.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_invariance() {
        let base = softmax(&[0.3, -1.0, 2.0]);
        let shifted = softmax(&[5.3, 4.0, 7.0]);
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let w = identity(2);
        assert!(luong_score(&w, &Tensor::vector(vec![1.0, 0.0, 0.0]), &[Tensor::vector(vec![1.0, 0.0])]).is_err());
        assert!(luong_score(&w, &Tensor::vector(vec![1.0, 0.0]), &[Tensor::vector(vec![1.0])]).is_err());
        assert!(luong_score(&w, &Tensor::vector(vec![1.0, 0.0]), &[]).is_err());
    }
}
