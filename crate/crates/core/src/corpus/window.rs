use super::vocab::{Vocab, LEFT, RIGHT, WS};

/// Character context around one target word, as fed to the encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharWindow {
    /// Character ids including whitespace and boundary markers.
    pub chars: Vec<usize>,
    /// Word id of the word each position belongs to.
    pub words: Vec<usize>,
    /// Sentence index of the word each position belongs to.
    pub tokens: Vec<usize>,
}

impl CharWindow {
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Pos {
    ch: usize,
    token: usize,
}

/// Builds the window for `sentence[target]`: up to `width` characters on
/// each side (a whitespace marker counts as one), the target wrapped in
/// boundary markers. `sentence` holds normalized surfaces.
///
/// Whitespace markers belong to the word that follows them; boundary
/// markers belong to the target.
pub fn build_window(sentence: &[String], target: usize, width: usize, vocab: &Vocab) -> CharWindow {
    let mut left: Vec<Pos> = Vec::new();
    for (j, w) in sentence[..target].iter().enumerate() {
        left.extend(w.chars().map(|c| Pos { ch: vocab.char_id(c), token: j }));
        left.push(Pos { ch: WS, token: j + 1 });
    }
    let left = &left[left.len().saturating_sub(width)..];

    let mut right: Vec<Pos> = Vec::new();
    for (j, w) in sentence.iter().enumerate().skip(target + 1) {
        if right.len() >= width {
            break;
        }
        right.push(Pos { ch: WS, token: j });
        right.extend(w.chars().map(|c| Pos { ch: vocab.char_id(c), token: j }));
    }
    right.truncate(width);

    let mut seq: Vec<Pos> = left.to_vec();
    seq.push(Pos { ch: LEFT, token: target });
    seq.extend(sentence[target].chars().map(|c| Pos { ch: vocab.char_id(c), token: target }));
    seq.push(Pos { ch: RIGHT, token: target });
    seq.extend(right);

    CharWindow {
        chars: seq.iter().map(|p| p.ch).collect(),
        words: seq.iter().map(|p| vocab.word_id(&sentence[p.token])).collect(),
        tokens: seq.iter().map(|p| p.token).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize::Normalizer;
    use crate::corpus::tsv::parse_corpus_str;

    fn vocab() -> Vocab {
        let line = |s: &str| format!("{s}\t{s}\t{s}\tnoun\t0\t0\t0\t0\tna\tna\tna\tna\tm\ts\ti\tn\t0\n");
        let text = format!("{}{}{}", line("ab"), line("cd"), line("ef"));
        let c = parse_corpus_str(&text, "t").unwrap();
        Vocab::build(&c, [], Normalizer::identity()).0
    }

    fn sent(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_word_sentence() {
        let v = vocab();
        let w = build_window(&sent(&["ab", "cd"]), 1, 10, &v);
        let id = |c| v.char_id(c);
        assert_eq!(w.chars, vec![id('a'), id('b'), WS, LEFT, id('c'), id('d'), RIGHT]);
        assert_eq!(w.tokens, vec![0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(w.words.len(), w.chars.len());
        assert_eq!(w.words[0], v.word_id("ab"));
        assert_eq!(w.words[2], v.word_id("cd"));
    }

    #[test]
    fn zero_width_is_target_only() {
        let v = vocab();
        let w = build_window(&sent(&["ab", "cd", "ef"]), 1, 0, &v);
        assert_eq!(w.chars, vec![LEFT, v.char_id('c'), v.char_id('d'), RIGHT]);
    }

    #[test]
    fn single_word_has_no_whitespace() {
        let v = vocab();
        let w = build_window(&sent(&["ab"]), 0, 10, &v);
        assert!(!w.chars.contains(&WS));
        assert_eq!(w.len(), 4);
    }

    #[test]
    fn truncates_context_to_width() {
        let v = vocab();
        let w = build_window(&sent(&["ab", "cd", "ef"]), 1, 2, &v);
        let id = |c| v.char_id(c);
        assert_eq!(w.chars, vec![id('b'), WS, LEFT, id('c'), id('d'), RIGHT, WS, id('e')]);
        assert_eq!(w.tokens, vec![0, 1, 1, 1, 1, 1, 2, 2]);
    }
}
