//! Writes the synthetic micro-corpus and its dictionary.
//!
//! The language is a toy Buckwalter-style transliteration: verbs agree with
//! their subject in person and gender, nouns carry unwritten case vowels,
//! and every feminine `p` is written `h` in the surface while the gold
//! diacritized form keeps `p`.
//!
//! Usage: `cargo run -p morphdis --example make_micro_corpus -- <out_dir>`

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Noun {
    surface: &'static str,
    stem: &'static str,
    gen: &'static str,
}

struct Verb {
    surface: &'static str,
    stem: &'static str,
}

const SUBJECTS: &[Noun] = &[
    Noun { surface: "wld", stem: "walad", gen: "m" },
    Noun { surface: "bnt", stem: "bint", gen: "f" },
    Noun { surface: "mElm", stem: "muEal~im", gen: "m" },
    Noun { surface: "mElmh", stem: "muEal~imap", gen: "f" },
];

const OBJECTS: &[Noun] = &[
    Noun { surface: "ktAb", stem: "kitAb", gen: "m" },
    Noun { surface: "drs", stem: "dars", gen: "m" },
    Noun { surface: "qSh", stem: "qiS~ap", gen: "f" },
    Noun { surface: "rsAlh", stem: "risAlap", gen: "f" },
];

const PLACES: &[Noun] = &[
    Noun { surface: "mdrsh", stem: "madrasap", gen: "f" },
    Noun { surface: "byt", stem: "bayt", gen: "m" },
];

const TOOLS: &[Noun] = &[
    Noun { surface: "qlm", stem: "qalam", gen: "m" },
    Noun { surface: "wrqh", stem: "waraqap", gen: "f" },
];

const VERBS: &[Verb] = &[
    Verb { surface: "ktb", stem: "katab" },
    Verb { surface: "drs", stem: "daras" },
    Verb { surface: "fhm", stem: "fahim" },
    Verb { surface: "nsx", stem: "nasax" },
];

#[derive(Clone, Copy, PartialEq)]
enum Subj {
    ThirdMasc,
    ThirdFem,
    SecondMasc,
    SecondFem,
    First,
}

/// Surface followed by the 16 analysis columns.
fn row(surface: &str, diac: &str, lemma: &str, tags: [&str; 14]) -> String {
    let mut cols = vec![surface, diac, lemma];
    cols.extend(tags);
    cols.join("\t")
}

fn noun_row(n: &Noun, case: &str, definite: bool, bi: bool, wa: bool) -> String {
    let vowel = match (case, definite) {
        ("n", true) => "u",
        ("a", true) => "a",
        ("g", true) => "i",
        ("n", false) => "N",
        ("a", false) => "F",
        _ => "K",
    };
    let mut surface = String::new();
    let mut diac = String::new();
    if wa {
        surface.push('w');
        diac.push_str("wa");
    }
    if bi {
        surface.push('b');
        diac.push_str("bi");
    }
    if definite {
        surface.push_str("Al");
        diac.push_str("Al");
    }
    surface.push_str(n.surface);
    diac.push_str(n.stem);
    diac.push_str(vowel);
    let tags = [
        "noun",
        "0",
        if wa { "wa_conj" } else { "0" },
        if bi { "bi_prep" } else { "0" },
        if definite { "Al_det" } else { "0" },
        "na",
        "na",
        "na",
        "na",
        n.gen,
        "s",
        if definite { "d" } else { "i" },
        case,
        "0",
    ];
    row(&surface, &diac, n.stem, tags)
}

fn verb_row(v: &Verb, subj: Subj, wa: bool) -> String {
    let (suffix_surface, suffix_diac, per, gen) = match subj {
        Subj::ThirdMasc => ("", "a", "3", "m"),
        Subj::ThirdFem => ("t", "at", "3", "f"),
        Subj::SecondMasc => ("t", "ota", "2", "m"),
        Subj::SecondFem => ("t", "oti", "2", "f"),
        Subj::First => ("t", "otu", "1", "m"),
    };
    let w = if wa { "w" } else { "" };
    let wa_d = if wa { "wa" } else { "" };
    let surface = format!("{w}{}{suffix_surface}", v.surface);
    let diac = format!("{wa_d}{}{suffix_diac}", v.stem);
    let lemma = format!("{}a", v.stem);
    let tags = [
        "verb",
        "0",
        if wa { "wa_conj" } else { "0" },
        "0",
        "0",
        per,
        "p",
        "a",
        "i",
        gen,
        "s",
        "na",
        "na",
        "0",
    ];
    row(&surface, &diac, &lemma, tags)
}

fn prep_row() -> String {
    let tags = ["prep", "0", "0", "0", "0", "na", "na", "na", "na", "na", "na", "na", "na", "0"];
    row("fy", "fiy", "fiy", tags)
}

fn subj_of(n: &Noun) -> Subj {
    if n.gen == "f" {
        Subj::ThirdFem
    } else {
        Subj::ThirdMasc
    }
}

fn sentence(rng: &mut ChaCha8Rng, template: usize) -> Vec<String> {
    let v = VERBS.choose(rng).unwrap();
    let s = SUBJECTS.choose(rng).unwrap();
    let o = OBJECTS.choose(rng).unwrap();
    match template {
        // V S O
        0 => vec![verb_row(v, subj_of(s), false), noun_row(s, "n", true, false, false), noun_row(o, "a", true, false, false)],
        // V(1s) O
        1 => vec![verb_row(v, Subj::First, false), noun_row(o, "a", true, false, false)],
        // V S fy PLACE
        2 => {
            let p = PLACES.choose(rng).unwrap();
            vec![
                verb_row(v, subj_of(s), false),
                noun_row(s, "n", true, false, false),
                prep_row(),
                noun_row(p, "g", true, false, false),
            ]
        }
        // V S O b-TOOL
        3 => {
            let t = TOOLS.choose(rng).unwrap();
            vec![
                verb_row(v, subj_of(s), false),
                noun_row(s, "n", true, false, false),
                noun_row(o, "a", true, false, false),
                noun_row(t, "g", true, true, false),
            ]
        }
        // V(1s) O w-V S O
        _ => {
            let v2 = VERBS.choose(rng).unwrap();
            let s2 = SUBJECTS.choose(rng).unwrap();
            let o2 = OBJECTS.choose(rng).unwrap();
            let first = if rng.gen_bool(0.5) { Subj::First } else { subj_of(s) };
            let mut out = vec![verb_row(v, first, false)];
            if first != Subj::First {
                out.push(noun_row(s, "n", true, false, false));
            }
            out.push(noun_row(o, "a", true, false, false));
            out.push(verb_row(v2, subj_of(s2), true));
            out.push(noun_row(s2, "n", true, false, false));
            out.push(noun_row(o2, "a", true, false, false));
            out
        }
    }
}

/// Every analysis the toy analyzer knows, grouped by surface in a fixed order.
fn dictionary() -> Vec<String> {
    let mut lines = Vec::new();
    let all_nouns = SUBJECTS.iter().chain(OBJECTS).chain(PLACES).chain(TOOLS);
    for n in all_nouns {
        for definite in [true, false] {
            for case in ["n", "a", "g"] {
                lines.push(noun_row(n, case, definite, false, false));
            }
        }
        lines.push(noun_row(n, "g", true, true, false));
        for case in ["n", "a"] {
            lines.push(noun_row(n, case, true, false, true));
        }
    }
    for v in VERBS {
        for wa in [false, true] {
            for subj in [Subj::ThirdMasc, Subj::ThirdFem, Subj::SecondMasc, Subj::SecondFem, Subj::First] {
                lines.push(verb_row(v, subj, wa));
            }
        }
    }
    lines.push(prep_row());
    // group by surface, keeping first-seen order of surfaces
    let mut order: Vec<String> = Vec::new();
    for l in &lines {
        let s = l.split('\t').next().unwrap().to_string();
        if !order.contains(&s) {
            order.push(s);
        }
    }
    let mut out = Vec::new();
    for s in order {
        out.extend(lines.iter().filter(|l| l.split('\t').next() == Some(s.as_str())).cloned());
    }
    out
}

fn main() {
    let out_dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "data/micro".into()).into();
    let n_sentences = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(20_190_717);
    let mut seen = BTreeSet::new();
    let mut corpus = String::new();
    let mut count = 0;
    while count < n_sentences {
        let s = sentence(&mut rng, count % 5);
        if !seen.insert(s.clone()) {
            continue;
        }
        for line in s {
            corpus.push_str(&line);
            corpus.push('\n');
        }
        corpus.push('\n');
        count += 1;
    }
    let mut dict = String::new();
    for l in dictionary() {
        writeln!(dict, "{l}").unwrap();
    }
    std::fs::create_dir_all(&out_dir).expect("create output directory");
    std::fs::write(out_dir.join("corpus.tsv"), corpus).expect("write corpus");
    std::fs::write(out_dir.join("dictionary.tsv"), dict).expect("write dictionary");
    eprintln!("wrote {n_sentences} sentences to {}", out_dir.display());
}
