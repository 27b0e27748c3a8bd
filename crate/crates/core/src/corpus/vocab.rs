use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::normalize::Normalizer;
use super::schema::{Analysis, FeatureSchema, Sentence, N_TAGS, TAG_FEATURES};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const WS: usize = 4;
pub const LEFT: usize = 5;
pub const RIGHT: usize = 6;

const CHAR_RESERVED: [&str; 7] = ["<pad>", "<unk>", "<bos>", "<eos>", "<ws>", "<L>", "<R>"];
const WORD_RESERVED: [&str; 2] = ["<pad>", "<unk>"];

/// Index 0 of every output vocabulary.
pub const OUT_EOS: usize = 0;

/// The two character-level outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LexTask {
    Lemma,
    Diac,
}

impl LexTask {
    pub const ALL: [LexTask; 2] = [LexTask::Lemma, LexTask::Diac];

    pub fn name(self) -> &'static str {
        match self {
            LexTask::Lemma => "lemma",
            LexTask::Diac => "diac",
        }
    }

    pub fn target(self, a: &Analysis) -> &str {
        match self {
            LexTask::Lemma => &a.lemma,
            LexTask::Diac => &a.diac,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VocabData {
    normalizer: Normalizer,
    chars: Vec<String>,
    words: Vec<String>,
    tags: Vec<Vec<String>>,
    lemma_out: Vec<String>,
    diac_out: Vec<String>,
}

/// Id maps for characters, words, tag values and the two output alphabets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabData", into = "VocabData")]
pub struct Vocab {
    data: VocabData,
    char_ids: HashMap<char, usize>,
    word_ids: HashMap<String, usize>,
    tag_ids: Vec<HashMap<String, usize>>,
    out_ids: [HashMap<char, usize>; 2],
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.data.normalizer == other.data.normalizer
            && self.data.chars == other.data.chars
            && self.data.words == other.data.words
            && self.data.tags == other.data.tags
            && self.data.lemma_out == other.data.lemma_out
            && self.data.diac_out == other.data.diac_out
    }
}

impl From<VocabData> for Vocab {
    fn from(data: VocabData) -> Self {
        let char_ids = data
            .chars
            .iter()
            .enumerate()
            .skip(CHAR_RESERVED.len())
            .filter_map(|(i, s)| s.chars().next().map(|c| (c, i)))
            .collect();
        let word_ids = data
            .words
            .iter()
            .enumerate()
            .skip(WORD_RESERVED.len())
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let tag_ids = data
            .tags
            .iter()
            .map(|vals| vals.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect())
            .collect();
        let out_map = |list: &[String]| -> HashMap<char, usize> {
            list.iter()
                .enumerate()
                .skip(1)
                .filter_map(|(i, s)| s.chars().next().map(|c| (c, i)))
                .collect()
        };
        let out_ids = [out_map(&data.lemma_out), out_map(&data.diac_out)];
        Vocab {
            data,
            char_ids,
            word_ids,
            tag_ids,
            out_ids,
        }
    }
}

impl From<Vocab> for VocabData {
    fn from(v: Vocab) -> Self {
        v.data
    }
}

/// Build-time notes, such as tag values that only the dictionary knew.
#[derive(Debug, Clone, Default)]
pub struct VocabWarnings {
    pub added_tag_values: Vec<(String, String)>,
}

impl Vocab {
    /// Collects every vocabulary from the training corpus. Tag values seen
    /// only in `extra` (e.g. dictionary analyses) are added and reported.
    pub fn build<'a, I>(train: &[Sentence], extra: I, normalizer: Normalizer) -> (Vocab, VocabWarnings)
    where
        I: IntoIterator<Item = &'a Analysis>,
    {
        let mut chars = BTreeSet::new();
        let mut words = BTreeSet::new();
        let mut lemma = BTreeSet::new();
        let mut diac = BTreeSet::new();
        let mut schema = FeatureSchema::default();
        for tok in train.iter().flatten() {
            let surf = normalizer.normalize(&tok.surface);
            chars.extend(surf.chars());
            words.insert(surf);
            lemma.extend(tok.gold.lemma.chars());
            diac.extend(tok.gold.diac.chars());
            schema.observe(&tok.gold);
        }
        let mut warnings = VocabWarnings::default();
        for a in extra {
            for (f, v) in schema.observe(a) {
                warnings.added_tag_values.push((TAG_FEATURES[f].to_string(), v));
            }
        }
        let with_reserved = |reserved: &[&str], items: Vec<String>| -> Vec<String> {
            reserved.iter().map(|s| s.to_string()).chain(items).collect()
        };
        let out_list = |set: BTreeSet<char>| -> Vec<String> {
            std::iter::once("<eos>".to_string())
                .chain(set.into_iter().map(String::from))
                .collect()
        };
        let data = VocabData {
            normalizer,
            chars: with_reserved(&CHAR_RESERVED, chars.into_iter().map(String::from).collect()),
            words: with_reserved(&WORD_RESERVED, words.into_iter().collect()),
            tags: (0..N_TAGS)
                .map(|f| schema.values(f).map(str::to_string).collect())
                .collect(),
            lemma_out: out_list(lemma),
            diac_out: out_list(diac),
        };
        (Vocab::from(data), warnings)
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.data.normalizer
    }

    pub fn normalize(&self, surface: &str) -> String {
        self.data.normalizer.normalize(surface)
    }

    pub fn n_chars(&self) -> usize {
        self.data.chars.len()
    }

    pub fn n_words(&self) -> usize {
        self.data.words.len()
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(UNK)
    }

    pub fn char_name(&self, id: usize) -> &str {
        &self.data.chars[id]
    }

    /// Word id of an already normalized surface.
    pub fn word_id(&self, w: &str) -> usize {
        self.word_ids.get(w).copied().unwrap_or(UNK)
    }

    pub fn words(&self) -> &[String] {
        &self.data.words
    }

    pub fn n_tag_values(&self, feature: usize) -> usize {
        self.data.tags[feature].len()
    }

    pub fn tag_values(&self, feature: usize) -> &[String] {
        &self.data.tags[feature]
    }

    pub fn tag_id(&self, feature: usize, value: &str) -> Option<usize> {
        self.tag_ids[feature].get(value).copied()
    }

    pub fn tag_value(&self, feature: usize, id: usize) -> &str {
        &self.data.tags[feature][id]
    }

    fn out_list(&self, task: LexTask) -> &[String] {
        match task {
            LexTask::Lemma => &self.data.lemma_out,
            LexTask::Diac => &self.data.diac_out,
        }
    }

    /// Output alphabet size including EOS.
    pub fn d_voc(&self, task: LexTask) -> usize {
        self.out_list(task).len()
    }

    pub fn out_id(&self, task: LexTask, c: char) -> Option<usize> {
        self.out_ids[task as usize].get(&c).copied()
    }

    /// Output ids of `target` (without EOS); errors on characters the
    /// decoder cannot produce.
    pub fn encode_target(&self, task: LexTask, target: &str) -> Result<Vec<usize>> {
        target
            .chars()
            .map(|c| {
                self.out_id(task, c).ok_or_else(|| {
                    Error::Vocab(format!("character {c:?} of {} target {target:?} is not in the output vocabulary", task.name()))
                })
            })
            .collect()
    }

    pub fn decode_output(&self, task: LexTask, ids: &[usize]) -> String {
        let list = self.out_list(task);
        ids.iter()
            .filter(|&&i| i != OUT_EOS)
            .map(|&i| list[i].as_str())
            .collect()
    }

    /// Fails unless both vocabularies assign identical ids.
    pub fn ensure_compatible(&self, other: &Vocab) -> Result<()> {
        if self != other {
            return Err(Error::Vocab("vocabularies differ from the checkpoint's".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tsv::parse_corpus_str;

    fn corpus() -> Vec<Sentence> {
        parse_corpus_str(
            "ab\tAab\tAb\tnoun\t0\t0\t0\t0\tna\tna\tna\tna\tm\ts\ti\tn\t0\n\
             cd\tcud\tcd\tverb\t0\t0\t0\t0\t3\tp\ta\ti\tm\ts\tna\tna\t0\n",
            "t",
        )
        .unwrap()
    }

    #[test]
    fn reserved_ids_are_stable() {
        let (v, _) = Vocab::build(&corpus(), [], Normalizer::identity());
        assert_eq!(v.char_name(BOS), "<bos>");
        assert_eq!(v.char_name(RIGHT), "<R>");
        assert_eq!(v.char_id('a'), 7);
        assert_eq!(v.char_id('z'), UNK);
        assert_eq!(v.word_id("zz"), UNK);
        // eos + {A, b, c, d}
        assert_eq!(v.d_voc(LexTask::Lemma), 5);
    }

    #[test]
    fn tag_values_include_base_values() {
        let (v, _) = Vocab::build(&corpus(), [], Normalizer::identity());
        let pos = v.tag_values(0);
        assert!(pos.contains(&"na".to_string()) && pos.contains(&"0".to_string()));
        assert!(v.tag_id(0, "verb").is_some());
    }

    #[test]
    fn extra_tag_values_are_reported() {
        let c = corpus();
        let mut extra = c[0][0].gold.clone();
        extra.tags[0] = "adj".into();
        let (v, w) = Vocab::build(&c, [&extra], Normalizer::identity());
        assert!(v.tag_id(0, "adj").is_some());
        assert_eq!(w.added_tag_values, vec![("pos".to_string(), "adj".to_string())]);
    }

    #[test]
    fn unknown_target_char_is_an_error() {
        let (v, _) = Vocab::build(&corpus(), [], Normalizer::identity());
        assert!(v.encode_target(LexTask::Diac, "cud").is_ok());
        assert!(v.encode_target(LexTask::Diac, "xyz").is_err());
    }

    #[test]
    fn serde_round_trip_keeps_ids() {
        let (v, _) = Vocab::build(&corpus(), [], Normalizer::default());
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.char_id('d'), v.char_id('d'));
        assert_eq!(back.out_id(LexTask::Diac, 'u'), v.out_id(LexTask::Diac, 'u'));
    }
}
