//! Token-level accuracy metrics over aligned gold and system corpora.

use serde::{Deserialize, Serialize};

use crate::corpus::normalize::Normalizer;
use crate::corpus::schema::{Analysis, Feature, Sentence, N_FEATURES, N_TAGS, POS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tokens: usize,
    pub sentences: usize,
    pub pos: f64,
    pub tags: f64,
    pub lex: f64,
    pub diac: f64,
    pub full: f64,
    /// Accuracy per feature, in canonical order (14 tags, lex, diac).
    pub per_feature: Vec<(String, f64)>,
}

impl MetricsReport {
    /// `name=value` pairs for the five headline metrics.
    pub fn summary_line(&self) -> String {
        format!(
            "tokens={} pos={:.4} tags={:.4} lex={:.4} diac={:.4} full={:.4}",
            self.tokens, self.pos, self.tags, self.lex, self.diac, self.full
        )
    }
}

/// Running counts for one evaluation.
#[derive(Debug, Clone, Default)]
pub struct Tally {
    tokens: usize,
    pos: usize,
    tags: usize,
    lex: usize,
    diac: usize,
    full: usize,
    per_feature: [usize; N_FEATURES],
}

impl Tally {
    pub fn add(&mut self, gold: &Analysis, system: &Analysis) {
        let matches: [bool; N_FEATURES] = std::array::from_fn(|f| match f {
            f if f < N_TAGS => gold.tags[f] == system.tags[f],
            f if f == N_TAGS => gold.lemma == system.lemma,
            _ => gold.diac == system.diac,
        });
        self.tokens += 1;
        for (c, &m) in self.per_feature.iter_mut().zip(&matches) {
            *c += m as usize;
        }
        let tags = matches[..N_TAGS].iter().all(|&m| m);
        self.pos += matches[POS] as usize;
        self.tags += tags as usize;
        self.lex += matches[N_TAGS] as usize;
        self.diac += matches[N_TAGS + 1] as usize;
        self.full += (tags && matches[N_TAGS] && matches[N_TAGS + 1]) as usize;
    }

    pub fn report(&self, sentences: usize) -> MetricsReport {
        let acc = |c: usize| if self.tokens == 0 { 0.0 } else { c as f64 / self.tokens as f64 };
        MetricsReport {
            tokens: self.tokens,
            sentences,
            pos: acc(self.pos),
            tags: acc(self.tags),
            lex: acc(self.lex),
            diac: acc(self.diac),
            full: acc(self.full),
            per_feature: Feature::all()
                .zip(&self.per_feature)
                .map(|(f, &c)| (f.name().to_string(), acc(c)))
                .collect(),
        }
    }
}

/// Scores `system` against `gold`. Sentences and tokens must align one to
/// one, with equal surfaces after `normalizer`; the first divergence is
/// reported otherwise.
pub fn evaluate(gold: &[Sentence], system: &[Sentence], normalizer: &Normalizer) -> Result<MetricsReport> {
    if gold.len() != system.len() {
        return Err(Error::Invalid(format!(
            "misaligned corpora: gold has {} sentences, system has {}",
            gold.len(),
            system.len()
        )));
    }
    let mut tally = Tally::default();
    for (s, (gs, ss)) in gold.iter().zip(system).enumerate() {
        if gs.len() != ss.len() {
            return Err(Error::Invalid(format!(
                "misaligned corpora at sentence {}: gold has {} tokens, system has {}",
                s + 1,
                gs.len(),
                ss.len()
            )));
        }
        for (t, (gt, st)) in gs.iter().zip(ss).enumerate() {
            if normalizer.normalize(&gt.surface) != normalizer.normalize(&st.surface) {
                return Err(Error::Invalid(format!(
                    "misaligned corpora at sentence {} token {}: gold {:?}, system {:?}",
                    s + 1,
                    t + 1,
                    gt.surface,
                    st.surface
                )));
            }
            tally.add(&gt.gold, &st.gold);
        }
    }
    Ok(tally.report(gold.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::schema::AnnotatedToken;

    fn token(surface: &str, diac: &str) -> AnnotatedToken {
        AnnotatedToken {
            surface: surface.into(),
            gold: Analysis {
                diac: diac.into(),
                lemma: surface.into(),
                tags: std::array::from_fn(|_| "na".to_string()),
            },
        }
    }

    #[test]
    fn identity_scores_one() {
        let c = vec![vec![token("a", "a1"), token("b", "b1")]];
        let r = evaluate(&c, &c, &Normalizer::identity()).unwrap();
        assert_eq!((r.pos, r.tags, r.lex, r.diac, r.full), (1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.tokens, 2);
    }

    #[test]
    fn diac_error_only_hits_diac_and_full() {
        let gold = vec![vec![token("a", "a1"), token("b", "b1")]];
        let mut sys = gold.clone();
        sys[0][1].gold.diac = "b2".into();
        let r = evaluate(&gold, &sys, &Normalizer::identity()).unwrap();
        assert_eq!((r.tags, r.lex, r.diac, r.full), (1.0, 1.0, 0.5, 0.5));
    }

    #[test]
    fn reports_first_divergence() {
        let gold = vec![vec![token("a", "x"), token("b", "x")]];
        let sys = vec![vec![token("a", "x"), token("c", "x")]];
        let err = evaluate(&gold, &sys, &Normalizer::identity()).unwrap_err().to_string();
        assert!(err.contains("sentence 1 token 2"), "{err}");
        let short = vec![vec![token("a", "x")]];
        assert!(evaluate(&gold, &short, &Normalizer::identity()).is_err());
        assert!(evaluate(&gold, &[], &Normalizer::identity()).is_err());
    }

    #[test]
    fn surfaces_compared_after_normalization() {
        let gold = vec![vec![token("\u{0623}", "x")]];
        let sys = vec![vec![token("\u{0627}", "x")]];
        assert!(evaluate(&gold, &sys, &Normalizer::default()).is_ok());
    }
}
