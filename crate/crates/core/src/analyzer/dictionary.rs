use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::normalize::Normalizer;
use crate::corpus::schema::{Analysis, N_TAGS};
use crate::corpus::tsv::{read_rows, CORPUS_COLUMNS};
use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};

/// What `candidates` returns for a word the dictionary does not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OovPolicy {
    /// Every value of every feature is a candidate.
    #[default]
    AllValues,
    /// No candidates at all.
    Closed,
}

impl OovPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all-values" | "all" => Some(OovPolicy::AllValues),
            "closed" => Some(OovPolicy::Closed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OovPolicy::AllValues => "all-values",
            OovPolicy::Closed => "closed",
        }
    }
}

/// Candidate values of each closed-class feature for one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateTagSets {
    /// Per feature, distinct values in first-seen order.
    pub sets: Vec<Vec<String>>,
    pub oov: bool,
}

impl CandidateTagSets {
    pub fn get(&self, feature: usize) -> &[String] {
        &self.sets[feature]
    }

    pub fn size(&self, feature: usize) -> usize {
        self.sets[feature].len()
    }
}

/// Extensional morphological analyzer: surface form to candidate analyses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MorphDictionary {
    pub name: String,
    entries: HashMap<String, Vec<Analysis>>,
    entry_count: usize,
}

impl MorphDictionary {
    /// Number of analyses (lines) stored.
    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    pub fn surface_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Analyses of a normalized surface, in file order.
    pub fn lookup(&self, surface: &str) -> Option<&[Analysis]> {
        self.entries.get(surface).map(Vec::as_slice)
    }

    pub fn insert(&mut self, surface: String, analysis: Analysis) {
        self.entries.entry(surface).or_default().push(analysis);
        self.entry_count += 1;
    }

    pub fn analyses(&self) -> impl Iterator<Item = &Analysis> {
        self.entries.values().flatten()
    }

    pub fn parse(text: &str, source: &str, normalizer: &Normalizer) -> Result<Self> {
        let mut dict = MorphDictionary {
            name: source.to_string(),
            ..Default::default()
        };
        // blank lines carry no meaning here; strip them before row parsing
        let cleaned: String = text
            .lines()
            .map(|l| if l.trim().is_empty() { "#" } else { l })
            .collect::<Vec<_>>()
            .join("\n");
        for row in read_rows(&cleaned, source)?.into_iter().flatten() {
            if row.cols.len() != CORPUS_COLUMNS {
                return Err(Error::parse(
                    source,
                    row.line,
                    format!("incomplete analysis: expected {} columns, found {}", CORPUS_COLUMNS, row.cols.len()),
                ));
            }
            if row.cols.iter().any(String::is_empty) {
                return Err(Error::parse(source, row.line, "empty column in analysis"));
            }
            let cols: Vec<&str> = row.cols[1..].iter().map(String::as_str).collect();
            let analysis = Analysis::from_columns(&cols).expect("column count checked");
            dict.insert(normalizer.normalize(&row.cols[0]), analysis);
        }
        Ok(dict)
    }

    pub fn candidates(&self, surface: &str, policy: OovPolicy, vocab: &Vocab) -> CandidateTagSets {
        match self.lookup(surface) {
            Some(list) if !list.is_empty() => {
                let mut sets: Vec<Vec<String>> = vec![Vec::new(); N_TAGS];
                for a in list {
                    for (f, v) in a.tags.iter().enumerate() {
                        if !sets[f].contains(v) {
                            sets[f].push(v.clone());
                        }
                    }
                }
                CandidateTagSets { sets, oov: false }
            }
            _ => oov_candidates(policy, vocab),
        }
    }
}

pub fn oov_candidates(policy: OovPolicy, vocab: &Vocab) -> CandidateTagSets {
    let sets = (0..N_TAGS)
        .map(|f| match policy {
            OovPolicy::AllValues => vocab.tag_values(f).to_vec(),
            OovPolicy::Closed => Vec::new(),
        })
        .collect();
    CandidateTagSets { sets, oov: true }
}

pub fn load_dictionary(path: &Path, normalizer: &Normalizer) -> Result<MorphDictionary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MorphDictionary::parse(&text, &path.display().to_string(), normalizer)
}
