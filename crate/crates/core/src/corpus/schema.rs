use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The closed-class features, in column order.
pub const TAG_FEATURES: [&str; 14] = [
    "pos", "prc3", "prc2", "prc1", "prc0", "per", "asp", "vox", "mod", "gen", "num", "stt", "cas", "enc0",
];

pub const N_TAGS: usize = TAG_FEATURES.len();

/// Tags plus the two lexicalized features.
pub const N_FEATURES: usize = N_TAGS + 2;

/// Index of `pos` in [`TAG_FEATURES`].
pub const POS: usize = 0;

/// Values every feature accepts regardless of data.
pub const BASE_VALUES: [&str; 2] = ["na", "0"];

pub fn tag_index(name: &str) -> Option<usize> {
    TAG_FEATURES.iter().position(|f| *f == name)
}

/// One of the sixteen features a full analysis is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Tag(usize),
    Lex,
    Diac,
}

impl Feature {
    pub fn all() -> impl Iterator<Item = Feature> {
        (0..N_TAGS).map(Feature::Tag).chain([Feature::Lex, Feature::Diac])
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Tag(i) => TAG_FEATURES[i],
            Feature::Lex => "lex",
            Feature::Diac => "diac",
        }
    }

    /// Position in the canonical 16-feature order (14 tags, lex, diac).
    pub fn index(self) -> usize {
        match self {
            Feature::Tag(i) => i,
            Feature::Lex => N_TAGS,
            Feature::Diac => N_TAGS + 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        match name {
            "lex" | "lemma" => Some(Feature::Lex),
            "diac" => Some(Feature::Diac),
            _ => tag_index(name).map(Feature::Tag),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One candidate reading of a surface word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Analysis {
    pub diac: String,
    pub lemma: String,
    pub tags: [String; N_TAGS],
}

impl Analysis {
    pub fn tag(&self, name: &str) -> Option<&str> {
        tag_index(name).map(|i| self.tags[i].as_str())
    }

    /// Value of any of the sixteen features.
    pub fn feature(&self, f: Feature) -> &str {
        match f {
            Feature::Tag(i) => &self.tags[i],
            Feature::Lex => &self.lemma,
            Feature::Diac => &self.diac,
        }
    }

    /// Builds an analysis from `diac, lemma, tag...` columns.
    pub fn from_columns(cols: &[&str]) -> Option<Analysis> {
        if cols.len() != N_FEATURES {
            return None;
        }
        let tags = std::array::from_fn(|i| cols[2 + i].to_string());
        Some(Analysis {
            diac: cols[0].to_string(),
            lemma: cols[1].to_string(),
            tags,
        })
    }

    pub fn columns(&self) -> Vec<&str> {
        let mut out = vec![self.diac.as_str(), self.lemma.as_str()];
        out.extend(self.tags.iter().map(String::as_str));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub surface: String,
    pub gold: Analysis,
}

pub type Sentence = Vec<AnnotatedToken>;

/// Value inventory of each closed-class feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    values: Vec<BTreeSet<String>>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        let base: BTreeSet<String> = BASE_VALUES.iter().map(|s| s.to_string()).collect();
        FeatureSchema {
            values: vec![base; N_TAGS],
        }
    }
}

impl FeatureSchema {
    pub fn names(&self) -> &'static [&'static str; N_TAGS] {
        &TAG_FEATURES
    }

    pub fn values(&self, feature: usize) -> impl Iterator<Item = &str> {
        self.values[feature].iter().map(String::as_str)
    }

    pub fn contains(&self, feature: usize, value: &str) -> bool {
        self.values[feature].contains(value)
    }

    /// Adds every tag value of `a`; returns the `(feature, value)` pairs that
    /// were new.
    pub fn observe(&mut self, a: &Analysis) -> Vec<(usize, String)> {
        let mut added = Vec::new();
        for (i, v) in a.tags.iter().enumerate() {
            if self.values[i].insert(v.clone()) {
                added.push((i, v.clone()));
            }
        }
        added
    }
}
