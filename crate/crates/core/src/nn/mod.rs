//! Small deterministic neural substrate: tensors, a reverse-mode tape,
//! recurrent layers, attention, Adam and a finite-difference checker.

pub mod adam;
pub mod attention;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use attention::{luong_score, AttentionMemory, LuongAttention};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, NodeId};
pub use layers::{bilstm_forward, lstm_step, BiLstm, Embedding, Linear, LstmCell, LstmState, StackedLstm};
pub use loss::softmax_xent;
pub use params::{Grads, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
