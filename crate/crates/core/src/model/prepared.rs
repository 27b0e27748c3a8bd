use crate::analyzer::{oov_candidates, CandidateTagSets, MorphDictionary};
use crate::corpus::schema::{Analysis, N_TAGS, TAG_FEATURES};
use crate::corpus::vocab::{LexTask, Vocab};
use crate::corpus::window::{build_window, CharWindow};
use crate::error::{Error, Result};

use super::config::ModelConfig;

/// Gold targets of one token as ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldIds {
    pub tags: [usize; N_TAGS],
    pub lemma: Vec<usize>,
    pub diac: Vec<usize>,
}

impl GoldIds {
    pub fn target(&self, task: LexTask) -> &[usize] {
        match task {
            LexTask::Lemma => &self.lemma,
            LexTask::Diac => &self.diac,
        }
    }
}

/// Everything the model reads about one token.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedToken {
    /// Normalized surface.
    pub surface: String,
    pub chars: Vec<usize>,
    pub word: usize,
    /// Candidate tag ids per feature (empty lists when the analyzer is off).
    pub candidates: Vec<Vec<usize>>,
    pub oov: bool,
    pub window: CharWindow,
    pub gold: Option<GoldIds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSentence {
    pub tokens: Vec<PreparedToken>,
}

impl PreparedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn has_gold(&self) -> bool {
        self.tokens.iter().all(|t| t.gold.is_some())
    }
}

fn candidate_ids(sets: &CandidateTagSets, vocab: &Vocab) -> Vec<Vec<usize>> {
    (0..N_TAGS)
        .map(|f| sets.get(f).iter().filter_map(|v| vocab.tag_id(f, v)).collect())
        .collect()
}

/// Converts raw surfaces (and optional gold analyses) into model inputs.
pub fn prepare_sentence(
    vocab: &Vocab,
    cfg: &ModelConfig,
    surfaces: &[&str],
    gold: Option<&[Analysis]>,
    dict: Option<&MorphDictionary>,
) -> Result<PreparedSentence> {
    if surfaces.is_empty() {
        return Err(Error::Invalid("empty sentence".into()));
    }
    let normalized: Vec<String> = surfaces.iter().map(|s| vocab.normalize(s)).collect();
    let mut tokens = Vec::with_capacity(surfaces.len());
    for (j, surface) in normalized.iter().enumerate() {
        if surface.is_empty() {
            return Err(Error::Invalid(format!("token {} has an empty surface", j + 1)));
        }
        let (candidates, oov) = if cfg.use_analyzer {
            let sets = match dict {
                Some(d) => d.candidates(surface, cfg.oov_policy, vocab),
                None => oov_candidates(cfg.oov_policy, vocab),
            };
            (candidate_ids(&sets, vocab), sets.oov)
        } else {
            (vec![Vec::new(); N_TAGS], dict.is_none_or(|d| d.lookup(surface).is_none()))
        };
        let gold_ids = match gold {
            Some(g) => Some(gold_ids(vocab, &g[j], surface)?),
            None => None,
        };
        tokens.push(PreparedToken {
            surface: surface.clone(),
            chars: surface.chars().map(|c| vocab.char_id(c)).collect(),
            word: vocab.word_id(surface),
            candidates,
            oov,
            window: build_window(&normalized, j, cfg.window, vocab),
            gold: gold_ids,
        });
    }
    Ok(PreparedSentence { tokens })
}

fn gold_ids(vocab: &Vocab, a: &Analysis, surface: &str) -> Result<GoldIds> {
    let mut tags = [0; N_TAGS];
    for f in 0..N_TAGS {
        tags[f] = vocab.tag_id(f, &a.tags[f]).ok_or_else(|| {
            Error::Vocab(format!(
                "gold value {:?} of feature {} (token {surface:?}) is not in the tag vocabulary",
                a.tags[f], TAG_FEATURES[f]
            ))
        })?;
    }
    Ok(GoldIds {
        tags,
        lemma: vocab.encode_target(LexTask::Lemma, &a.lemma)?,
        diac: vocab.encode_target(LexTask::Diac, &a.diac)?,
    })
}
