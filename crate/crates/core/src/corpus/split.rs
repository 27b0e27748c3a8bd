use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::schema::Sentence;
use crate::error::{Error, Result};

/// Sentence-level train/tune split. The tune set gets
/// `max(1, floor(n * tune_fraction))` sentences, picked by a seeded shuffle;
/// both parts keep corpus order.
pub fn split_train_tune(corpus: &[Sentence], tune_fraction: f64, seed: u64) -> Result<(Vec<Sentence>, Vec<Sentence>)> {
    if !(tune_fraction > 0.0 && tune_fraction < 1.0) {
        return Err(Error::Config(format!("tune_fraction must lie in (0, 1), got {tune_fraction}")));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(Error::Invalid(format!("need at least 2 sentences to split, got {n}")));
    }
    let n_tune = ((n as f64 * tune_fraction).floor() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_tune = vec![false; n];
    for &i in &idx[..n_tune] {
        is_tune[i] = true;
    }
    let (mut train, mut tune) = (Vec::new(), Vec::new());
    for (s, t) in corpus.iter().zip(is_tune) {
        if t {
            tune.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, tune))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::schema::{AnnotatedToken, Analysis};

    fn corpus(n: usize) -> Vec<Sentence> {
        (0..n)
            .map(|i| {
                vec![AnnotatedToken {
                    surface: format!("w{i}"),
                    gold: Analysis {
                        diac: "x".into(),
                        lemma: "x".into(),
                        tags: std::array::from_fn(|_| "na".to_string()),
                    },
                }]
            })
            .collect()
    }

    #[test]
    fn five_percent_of_hundred() {
        let (train, tune) = split_train_tune(&corpus(100), 0.05, 1).unwrap();
        assert_eq!(tune.len(), 5);
        assert_eq!(train.len(), 95);
    }

    #[test]
    fn deterministic_under_seed() {
        let c = corpus(40);
        assert_eq!(split_train_tune(&c, 0.1, 9).unwrap(), split_train_tune(&c, 0.1, 9).unwrap());
    }

    #[test]
    fn floor_with_minimum_one() {
        let (train, tune) = split_train_tune(&corpus(3), 0.5, 0).unwrap();
        assert_eq!((tune.len(), train.len()), (1, 2));
        let (_, tune) = split_train_tune(&corpus(10), 0.01, 0).unwrap();
        assert_eq!(tune.len(), 1);
    }

    #[test]
    fn rejects_tiny_corpus_and_bad_fraction() {
        assert!(split_train_tune(&corpus(1), 0.5, 0).is_err());
        assert!(split_train_tune(&corpus(10), 1.0, 0).is_err());
        assert!(split_train_tune(&corpus(10), 0.0, 0).is_err());
    }
}
