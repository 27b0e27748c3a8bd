#![allow(dead_code)]

use std::path::{Path, PathBuf};

use morphdis::analyzer::{load_dictionary, MorphDictionary};
use morphdis::corpus::{parse_corpus, Analysis, Normalizer, Sentence, N_TAGS};
use morphdis::train::TrainConfig;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The seven analyses of `lmthm` from the worked example, in printed order.
pub const TABLE1: &str = "\
lmthm\tlam~atohum\tlam~\tverb\t0\t0\t0\t0\t3\tp\ta\ti\tf\ts\tna\tna\tdobj_3mp
lmthm\tlumotahum\tlAm\tverb\t0\t0\t0\t0\t2\tp\ta\ti\tm\ts\tna\tna\tdobj_3mp
lmthm\tlumotihim\tlAm\tverb\t0\t0\t0\t0\t2\tp\ta\ti\tf\ts\tna\tna\tdobj_3mp
lmthm\tlumotuhum\tlAm\tverb\t0\t0\t0\t0\t1\tp\ta\ti\tm\ts\tna\tna\tdobj_3mp
lmthm\tlam~atuhum\tlam~ap\tnoun\t0\t0\t0\t0\tna\tna\tna\tna\tf\ts\tc\tn\tposs_3mp
lmthm\tlimut~ahamK\tmut~aham\tnoun\t0\t0\tli\t0\tna\tna\tna\tna\tm\ts\ti\tg\t0
lmthm\tlimut~ahimK\tmut~ahim\tnoun\t0\t0\tli\t0\tna\tna\tna\tna\tm\ts\ti\tg\t0
";

pub fn table1() -> MorphDictionary {
    MorphDictionary::parse(TABLE1, "table1", &Normalizer::identity()).unwrap()
}

pub fn table1_rows() -> Vec<Analysis> {
    table1().lookup("lmthm").unwrap().to_vec()
}

pub fn micro_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/micro")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The shipped micro settings, minus the file paths.
pub fn micro_config() -> TrainConfig {
    let text = std::fs::read_to_string(micro_dir().join("micro.cfg")).unwrap();
    let kept: String = text
        .lines()
        .filter(|l| {
            let key = l.split('=').next().unwrap_or("").trim();
            key != "corpus" && key != "dictionary"
        })
        .map(|l| format!("{l}\n"))
        .collect();
    let mut cfg = TrainConfig::default();
    cfg.apply_text(&kept, "micro.cfg").unwrap();
    cfg
}

pub fn micro_corpus() -> Vec<Sentence> {
    parse_corpus(&micro_dir().join("corpus.tsv")).unwrap()
}

pub fn micro_dictionary() -> MorphDictionary {
    load_dictionary(&micro_dir().join("dictionary.tsv"), &Normalizer::identity()).unwrap()
}

/// Random analysis over small value pools, so that agreements are common.
pub fn random_analysis(rng: &mut ChaCha8Rng, pool: usize) -> Analysis {
    let pick = |rng: &mut ChaCha8Rng, prefix: &str| format!("{prefix}{}", rng.gen_range(0..pool));
    Analysis {
        diac: pick(rng, "d"),
        lemma: pick(rng, "l"),
        tags: std::array::from_fn(|_| pick(rng, "v")),
    }
}

/// A copy of `a` with a random subset of its features replaced.
pub fn perturb(rng: &mut ChaCha8Rng, a: &Analysis, p: f64, pool: usize) -> Analysis {
    let mut b = a.clone();
    let other = random_analysis(rng, pool);
    for f in 0..N_TAGS {
        if rng.gen_bool(p) {
            b.tags[f] = other.tags[f].clone();
        }
    }
    if rng.gen_bool(p) {
        b.lemma = other.lemma;
    }
    if rng.gen_bool(p) {
        b.diac = other.diac;
    }
    b
}

/// Random surface built from `alphabet`.
pub fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
}
