//! Joint morphological disambiguation: a multitask tagger for closed-class
//! features and a shared character encoder with lemma and diacritization
//! decoders, plus analyzer-backed ranking of candidate analyses.

pub mod analyzer;
pub mod checkpoint;
pub mod corpus;
pub mod disambig;
pub mod error;
pub mod gradsuite;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod train;

pub use error::{Error, ErrorKind, Result};
