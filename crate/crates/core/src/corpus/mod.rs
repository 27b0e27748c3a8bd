//! Corpus data model and I/O.

pub mod embeddings;
pub mod normalize;
pub mod schema;
pub mod split;
pub mod tsv;
pub mod vocab;
pub mod window;

pub use embeddings::{load_embeddings, parse_embeddings, Pretrained};
pub use normalize::{normalize_orthography, Normalizer};
pub use schema::{AnnotatedToken, Analysis, Feature, FeatureSchema, Sentence, N_FEATURES, N_TAGS, TAG_FEATURES};
pub use split::split_train_tune;
pub use tsv::{parse_corpus, parse_corpus_str, serialize_corpus};
pub use vocab::{LexTask, Vocab};
pub use window::{build_window, CharWindow};
