//! Tagger, shared character encoder and the lemma/diac decoders.

pub mod config;
pub mod joint;
pub mod lexdec;
pub mod prepared;
pub mod tagger;

pub use config::ModelConfig;
pub use joint::{joint_loss, verify_joint_loss, JointModel, LossOptions, SentenceLoss, TokenPrediction};
pub use lexdec::{Decoded, DecodeConfig, Decoder, Encoder, EncoderOutput};
pub use prepared::{prepare_sentence, GoldIds, PreparedSentence, PreparedToken};
pub use tagger::{stop_gradient, TagPrediction, Tagger, TaggerOutput};
