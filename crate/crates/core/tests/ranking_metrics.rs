mod common;

use morphdis::corpus::{parse_corpus, AnnotatedToken, Analysis, Normalizer, N_FEATURES};
use morphdis::disambig::{disambiguate, match_score, output_line, rank_analyses, Mode, RankingWeights, Source};
use morphdis::metrics::evaluate;
use morphdis::model::{DecodeConfig, JointModel};
use morphdis::train::build_vocab;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn exact_table_row_scores_sixteen() {
    let rows = table1_rows();
    let d = rank_analyses(&rows[0], &rows, &RankingWeights::default()).unwrap();
    assert_eq!(d.candidate, Some(0));
    assert_eq!(d.score, 16.0);
    assert!(d.matches.iter().all(|&m| m));
    assert_eq!(d.source, Source::Analyzer);
}

#[test]
fn lemma_alone_separates_rows_six_and_seven() {
    let rows = table1_rows();
    let mut pred = rows[6].clone();
    pred.diac = "?".into();
    let d = rank_analyses(&pred, &rows, &RankingWeights::default()).unwrap();
    assert_eq!(d.analysis.lemma, "mut~ahim");
    pred.lemma = "mut~aham".into();
    let d = rank_analyses(&pred, &rows, &RankingWeights::default()).unwrap();
    assert_eq!(d.analysis.lemma, "mut~aham");
    assert_eq!(d.score, 15.0);
}

#[test]
fn empty_candidate_list_is_an_error() {
    let rows = table1_rows();
    assert!(rank_analyses(&rows[0], &[], &RankingWeights::default()).is_err());
}

fn triple() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1usize..10)
}

proptest! {
    #[test]
    fn ranked_analysis_is_a_stored_candidate((seed, n) in triple()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = random_analysis(&mut rng, 3);
        let cands: Vec<Analysis> = (0..n).map(|_| perturb(&mut rng, &pred, 0.5, 3)).collect();
        let d = rank_analyses(&pred, &cands, &RankingWeights::default()).unwrap();
        let i = d.candidate.unwrap();
        prop_assert_eq!(&d.analysis, &cands[i]);
        // nothing earlier ties it, nothing scores higher
        let w = RankingWeights::default();
        for (j, c) in cands.iter().enumerate() {
            let s = match_score(&pred, c, &w);
            prop_assert!(s < d.score || (s == d.score && j >= i));
        }
    }

    #[test]
    fn scaling_weights_keeps_the_choice((seed, n) in triple(), k in 0u32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = random_analysis(&mut rng, 3);
        let cands: Vec<Analysis> = (0..n).map(|_| perturb(&mut rng, &pred, 0.5, 3)).collect();
        let base: [f64; N_FEATURES] = std::array::from_fn(|f| (f % 4) as f64 * 0.5 + 0.25);
        let scale = 2f64.powi(k as i32);
        let scaled = base.map(|w| w * scale);
        let a = rank_analyses(&pred, &cands, &RankingWeights::new(base).unwrap()).unwrap();
        let b = rank_analyses(&pred, &cands, &RankingWeights::new(scaled).unwrap()).unwrap();
        prop_assert_eq!(a.candidate, b.candidate);
        prop_assert_eq!(a.score * scale, b.score);
    }

    #[test]
    fn full_never_exceeds_its_parts(seed in any::<u64>(), n in 1usize..30, p in 0.0f64..0.7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gold = Vec::new();
        let mut system = Vec::new();
        for t in 0..n {
            let a = random_analysis(&mut rng, 3);
            let b = perturb(&mut rng, &a, p, 3);
            gold.push(AnnotatedToken { surface: format!("w{t}"), gold: a });
            system.push(AnnotatedToken { surface: format!("w{t}"), gold: b });
        }
        let r = evaluate(&[gold], &[system], &Normalizer::identity()).unwrap();
        prop_assert!(r.full <= r.tags.min(r.lex).min(r.diac).min(r.pos));
        prop_assert!(r.tags <= r.pos);
    }
}

#[test]
fn hand_scored_fixture() {
    let gold = parse_corpus(&fixture("eval_gold.tsv")).unwrap();
    let system = parse_corpus(&fixture("eval_system.tsv")).unwrap();
    let r = evaluate(&gold, &system, &Normalizer::identity()).unwrap();
    assert_eq!(r.tokens, 10);
    assert_eq!((r.pos, r.tags, r.lex, r.diac, r.full), (1.0, 0.9, 1.0, 1.0, 0.9));
    let cas = r.per_feature.iter().find(|(n, _)| n == "cas").unwrap();
    assert_eq!(cas.1, 0.9);
}

#[test]
fn lemma_error_hits_lex_and_full_only() {
    let gold = parse_corpus(&fixture("eval_gold.tsv")).unwrap();
    let mut system = gold.clone();
    system[0][0].gold.lemma = "other".into();
    let r = evaluate(&gold, &system, &Normalizer::identity()).unwrap();
    assert_eq!((r.pos, r.tags, r.diac), (1.0, 1.0, 1.0));
    assert_eq!((r.lex, r.full), (0.9, 0.9));
}

#[test]
fn analyzer_mode_returns_dictionary_analyses() {
    let cfg = micro_config();
    let corpus = micro_corpus();
    let dict = micro_dictionary();
    let vocab = build_vocab(&corpus, Some(&dict), Normalizer::identity());
    let model = JointModel::new(cfg.model, vocab, 2).unwrap();
    let decode = DecodeConfig::default().with_beam(1);
    let w = RankingWeights::default();
    let surfaces = ["ktbt", "AlmElmh", "unseen"];
    let out = disambiguate(&model, Some(&dict), &w, Mode::Analyzer, &surfaces, &decode).unwrap();
    for (s, d) in surfaces.iter().zip(&out[..2]) {
        assert_eq!(d.source, Source::Analyzer);
        assert!(dict.lookup(s).unwrap().contains(&d.analysis));
        assert!(!d.oov);
    }
    assert_eq!(out[2].source, Source::Model);
    assert!(out[2].oov);
    let line = output_line("unseen", &out[2]);
    let cols: Vec<&str> = line.split('\t').collect();
    assert_eq!(cols.len(), 1 + N_FEATURES + 3);
    assert_eq!(&cols[cols.len() - 2..], ["model", "oov"]);

    let raw = disambiguate(&model, Some(&dict), &w, Mode::Model, &surfaces, &decode).unwrap();
    assert!(raw.iter().all(|d| d.source == Source::Model));
}
