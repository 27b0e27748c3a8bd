//! File-backed morphological dictionary standing in for an analyzer.

pub mod dictionary;
pub mod rules;

pub use dictionary::{load_dictionary, oov_candidates, CandidateTagSets, MorphDictionary, OovPolicy};
pub use rules::{check_consistency, default_rules, load_rules, parse_rules, ConsistencyRule, Violation};
