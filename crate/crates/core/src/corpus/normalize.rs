use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Character-folding table applied to input surfaces.
///
/// The default folds the Alif variants (madda, hamza above, hamza below) to
/// bare Alif and Alif maqsura to Ya. Characters not in the table pass through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalizer {
    table: BTreeMap<char, String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        let table = [
            ('\u{0622}', "\u{0627}"),
            ('\u{0623}', "\u{0627}"),
            ('\u{0625}', "\u{0627}"),
            ('\u{0649}', "\u{064A}"),
        ]
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect();
        Normalizer { table }
    }
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer {
            table: BTreeMap::new(),
        }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (char, S)>,
        S: Into<String>,
    {
        let table: BTreeMap<char, String> = pairs.into_iter().map(|(k, v)| (k, v.into())).collect();
        // outputs must be fixed points, otherwise folding is not idempotent
        for (k, v) in &table {
            if let Some(c) = v.chars().find(|c| table.contains_key(c)) {
                return Err(Error::Invalid(format!(
                    "normalization of {k:?} produces {c:?}, which is itself folded"
                )));
            }
        }
        Ok(Normalizer { table })
    }

    /// Parses a two-column `from<TAB>to` table; `from` must be one character.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::parse(source, n + 1, format!("expected 2 columns, found {}", cols.len())));
            }
            let mut chars = cols[0].chars();
            let (Some(from), None) = (chars.next(), chars.next()) else {
                return Err(Error::parse(source, n + 1, "first column must be a single character"));
            };
            pairs.push((from, cols[1].to_string()));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn normalize(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        for c in text.chars() {
            match self.table.get(&c) {
                Some(r) => out.push_str(r),
                None => out.push(c),
            }
        }
        out
    }

    pub fn pairs(&self) -> impl Iterator<Item = (char, &str)> {
        self.table.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

/// Applies the default folding table.
pub fn normalize_orthography(text: &str) -> String {
    Normalizer::default().normalize(text)
}
