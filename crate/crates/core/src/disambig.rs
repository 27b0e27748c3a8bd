//! Choosing a full analysis per token, either straight from the model or by
//! ranking the dictionary's candidates against the model's predictions.

use std::path::Path;

use crate::analyzer::MorphDictionary;
use crate::corpus::schema::{AnnotatedToken, Analysis, Feature, N_FEATURES, N_TAGS};
use crate::corpus::tsv::token_line;
use crate::error::{Error, Result};
use crate::model::{DecodeConfig, JointModel, TokenPrediction};

/// Non-negative weight per feature, in canonical order (14 tags, lex, diac).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingWeights {
    weights: [f64; N_FEATURES],
}

impl Default for RankingWeights {
    fn default() -> Self {
        RankingWeights {
            weights: [1.0; N_FEATURES],
        }
    }
}

impl RankingWeights {
    pub fn new(weights: [f64; N_FEATURES]) -> Result<Self> {
        if let Some((f, w)) = Feature::all().zip(weights).find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("weight of {} must be a finite non-negative number, got {w}", f.name())));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Config("at least one ranking weight must be positive".into()));
        }
        Ok(RankingWeights { weights })
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.weights[feature.index()]
    }

    pub fn as_array(&self) -> &[f64; N_FEATURES] {
        &self.weights
    }

    /// Parses `feature<TAB>weight` lines. Features not listed keep weight 1.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut weights = [1.0; N_FEATURES];
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::parse(source, n + 1, format!("expected 2 columns, found {}", cols.len())));
            }
            let f = Feature::from_name(cols[0].trim())
                .ok_or_else(|| Error::parse(source, n + 1, format!("unknown feature {:?}", cols[0])))?;
            weights[f.index()] = cols[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, n + 1, format!("bad weight {:?}", cols[1])))?;
        }
        RankingWeights::new(weights).map_err(|e| match e {
            Error::Config(m) => Error::parse(source, 0, m),
            e => e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Analyzer,
    Model,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Analyzer => "analyzer",
            Source::Model => "model",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "analyzer" => Some(Source::Analyzer),
            "model" => Some(Source::Model),
            _ => None,
        }
    }
}

/// The analysis chosen for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct Disambiguation {
    pub analysis: Analysis,
    pub score: f64,
    pub source: Source,
    /// Whether each feature of `analysis` agrees with the raw prediction.
    pub matches: [bool; N_FEATURES],
    /// Index into the dictionary entry when `source` is the analyzer.
    pub candidate: Option<usize>,
    pub oov: bool,
}

/// Per-feature agreement between two analyses.
pub fn feature_matches(a: &Analysis, b: &Analysis) -> [bool; N_FEATURES] {
    std::array::from_fn(|f| match f {
        f if f < N_TAGS => a.tags[f] == b.tags[f],
        f if f == N_TAGS => a.lemma == b.lemma,
        _ => a.diac == b.diac,
    })
}

pub fn match_score(predicted: &Analysis, candidate: &Analysis, weights: &RankingWeights) -> f64 {
    feature_matches(predicted, candidate)
        .iter()
        .zip(weights.as_array())
        .filter(|(m, _)| **m)
        .map(|(_, w)| w)
        .sum()
}

/// Picks the candidate with the highest weighted number of feature matches;
/// ties go to the earliest candidate.
pub fn rank_analyses(predicted: &Analysis, candidates: &[Analysis], weights: &RankingWeights) -> Result<Disambiguation> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let s = match_score(predicted, c, weights);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (i, score) = best.ok_or_else(|| Error::Invalid("no candidate analyses to rank".into()))?;
    Ok(Disambiguation {
        analysis: candidates[i].clone(),
        score,
        source: Source::Analyzer,
        matches: feature_matches(predicted, &candidates[i]),
        candidate: Some(i),
        oov: false,
    })
}

/// Confidence-weighted score of a raw prediction: tag probabilities and
/// per-step decoder probabilities, weighted like the ranking features.
fn model_score(pred: &TokenPrediction, weights: &RankingWeights) -> f64 {
    let w = weights.as_array();
    let tags: f64 = (0..N_TAGS)
        .map(|f| w[f] * pred.tags.distributions[f][pred.tags.ids[f]])
        .sum();
    tags + w[N_TAGS] * pred.lemma.score.exp() + w[N_TAGS + 1] * pred.diac.score.exp()
}

/// Model-mode result: the raw prediction, verbatim.
pub fn from_prediction(pred: &TokenPrediction, weights: &RankingWeights, oov: bool) -> Disambiguation {
    Disambiguation {
        analysis: pred.analysis(),
        score: model_score(pred, weights),
        source: Source::Model,
        matches: [true; N_FEATURES],
        candidate: None,
        oov,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Rank dictionary analyses; unknown words fall back to the model.
    Analyzer,
    /// Report the model's predictions directly.
    Model,
}

/// Combines raw predictions with the dictionary according to `mode`.
/// `surfaces` are the normalized surfaces the predictions belong to.
pub fn choose(
    predictions: &[TokenPrediction],
    surfaces: &[&str],
    dict: Option<&MorphDictionary>,
    weights: &RankingWeights,
    mode: Mode,
) -> Result<Vec<Disambiguation>> {
    predictions
        .iter()
        .zip(surfaces)
        .map(|(pred, surface)| {
            let entry = dict.and_then(|d| d.lookup(surface)).filter(|a| !a.is_empty());
            let oov = dict.is_some() && entry.is_none();
            match (mode, entry) {
                (Mode::Analyzer, Some(cands)) => rank_analyses(&pred.analysis(), cands, weights),
                _ => Ok(from_prediction(pred, weights, oov)),
            }
        })
        .collect()
}

/// Runs the model over one sentence and selects an analysis per token.
pub fn disambiguate(
    model: &JointModel,
    dict: Option<&MorphDictionary>,
    weights: &RankingWeights,
    mode: Mode,
    surfaces: &[&str],
    decode: &DecodeConfig,
) -> Result<Vec<Disambiguation>> {
    let sent = model.prepare(surfaces, None, dict)?;
    let predictions = model.predict(&sent, decode)?;
    let normalized: Vec<&str> = sent.tokens.iter().map(|t| t.surface.as_str()).collect();
    choose(&predictions, &normalized, dict, weights, mode)
}

/// One output line: the corpus columns followed by score, source and OOV flag.
pub fn output_line(surface: &str, d: &Disambiguation) -> String {
    let tok = AnnotatedToken {
        surface: surface.to_string(),
        gold: d.analysis.clone(),
    };
    format!(
        "{}\t{:.6}\t{}\t{}",
        token_line(&tok),
        d.score,
        d.source.name(),
        if d.oov { "oov" } else { "iv" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analysis(lemma: &str, diac: &str, pos: &str) -> Analysis {
        let mut tags: [String; N_TAGS] = std::array::from_fn(|_| "na".to_string());
        tags[0] = pos.into();
        Analysis {
            diac: diac.into(),
            lemma: lemma.into(),
            tags,
        }
    }

    #[test]
    fn exact_match_scores_sum_of_weights() {
        let a = analysis("l", "d", "noun");
        let w = RankingWeights::default();
        assert_eq!(match_score(&a, &a, &w), 16.0);
        let b = analysis("x", "d", "verb");
        assert_eq!(match_score(&a, &b, &w), 14.0);
    }

    #[test]
    fn ties_prefer_dictionary_order() {
        let pred = analysis("l", "d", "noun");
        let c = vec![analysis("l", "x", "noun"), analysis("y", "d", "noun")];
        let d = rank_analyses(&pred, &c, &RankingWeights::default()).unwrap();
        assert_eq!(d.candidate, Some(0));
        assert_eq!(d.source, Source::Analyzer);
    }

    #[test]
    fn single_candidate_always_selected() {
        let pred = analysis("l", "d", "noun");
        let c = vec![analysis("q", "r", "verb")];
        let d = rank_analyses(&pred, &c, &RankingWeights::default()).unwrap();
        assert_eq!(d.analysis, c[0]);
        assert!(rank_analyses(&pred, &[], &RankingWeights::default()).is_err());
    }

    #[test]
    fn weights_file_round_trip() {
        let w = RankingWeights::parse("# comment\nlex\t2.5\ndiac\t0\npos\t3\n", "w").unwrap();
        assert_eq!(w.get(Feature::Lex), 2.5);
        assert_eq!(w.get(Feature::Diac), 0.0);
        assert_eq!(w.get(Feature::Tag(0)), 3.0);
        assert_eq!(w.get(Feature::Tag(5)), 1.0);
        assert!(RankingWeights::parse("bogus\t1\n", "w").is_err());
        assert!(RankingWeights::parse("pos\t-1\n", "w").is_err());
        assert!(RankingWeights::parse("pos\tx\n", "w").is_err());
        let zeros: String = Feature::all().map(|f| format!("{}\t0\n", f.name())).collect();
        assert!(RankingWeights::parse(&zeros, "w").is_err());
    }
}
