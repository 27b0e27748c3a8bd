//! Token-per-line corpus files.
//!
//! Columns: `surface, diac, lemma, pos, prc3, prc2, prc1, prc0, per, asp,
//! vox, mod, gen, num, stt, cas, enc0`. A blank line ends a sentence and
//! lines starting with `#` are comments.

use std::path::Path;

use super::schema::{AnnotatedToken, Analysis, Sentence, N_FEATURES};
use crate::error::{Error, Result};

pub const CORPUS_COLUMNS: usize = 1 + N_FEATURES;

/// One non-comment line split on tabs.
#[derive(Debug, Clone)]
pub struct Row {
    pub line: usize,
    pub cols: Vec<String>,
}

/// Splits `text` into sentences of rows, rejecting stray blank lines.
pub fn read_rows(text: &str, source: &str) -> Result<Vec<Vec<Row>>> {
    let mut sentences = Vec::new();
    let mut current: Vec<Row> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = n + 1;
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if current.is_empty() {
                return Err(Error::parse(source, lineno, "blank line outside a sentence"));
            }
            sentences.push(std::mem::take(&mut current));
            continue;
        }
        current.push(Row {
            line: lineno,
            cols: line.split('\t').map(str::to_string).collect(),
        });
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Parses a row with exactly the corpus columns.
pub fn token_from_row(row: &Row, source: &str) -> Result<AnnotatedToken> {
    if row.cols.len() != CORPUS_COLUMNS {
        return Err(Error::parse(
            source,
            row.line,
            format!("expected {} columns, found {}", CORPUS_COLUMNS, row.cols.len()),
        ));
    }
    analysis_token(&row.cols[..CORPUS_COLUMNS], row.line, source)
}

fn analysis_token(cols: &[String], line: usize, source: &str) -> Result<AnnotatedToken> {
    if cols[0].is_empty() {
        return Err(Error::parse(source, line, "empty surface form"));
    }
    let rest: Vec<&str> = cols[1..].iter().map(String::as_str).collect();
    if let Some(k) = rest.iter().position(|c| c.is_empty()) {
        return Err(Error::parse(source, line, format!("empty value in column {}", k + 2)));
    }
    let gold = Analysis::from_columns(&rest).expect("column count checked");
    Ok(AnnotatedToken {
        surface: cols[0].clone(),
        gold,
    })
}

/// Like [`token_from_row`] but ignores columns past the corpus schema (as in
/// the disambiguation output format).
pub fn token_from_wide_row(row: &Row, source: &str) -> Result<AnnotatedToken> {
    if row.cols.len() < CORPUS_COLUMNS {
        return Err(Error::parse(
            source,
            row.line,
            format!("expected at least {} columns, found {}", CORPUS_COLUMNS, row.cols.len()),
        ));
    }
    analysis_token(&row.cols[..CORPUS_COLUMNS], row.line, source)
}

pub fn parse_corpus_str(text: &str, source: &str) -> Result<Vec<Sentence>> {
    read_rows(text, source)?
        .iter()
        .map(|rows| rows.iter().map(|r| token_from_row(r, source)).collect())
        .collect()
}

pub fn parse_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_str(&text, &path.display().to_string())
}

pub fn token_line(t: &AnnotatedToken) -> String {
    let mut cols = vec![t.surface.as_str()];
    cols.extend(t.gold.columns());
    cols.join("\t")
}

pub fn serialize_corpus(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for t in s {
            out.push_str(&token_line(t));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW1: &str = "lmthm\tlam~atohum\tlam~\tverb\t0\t0\t0\t0\t3\tp\ta\ti\tf\ts\tna\tna\tdobj_3mp";

    #[test]
    fn parses_table_one_first_row() {
        let s = parse_corpus_str(&format!("{ROW1}\n"), "t").unwrap();
        let a = &s[0][0].gold;
        assert_eq!(s[0][0].surface, "lmthm");
        assert_eq!(a.diac, "lam~atohum");
        assert_eq!(a.lemma, "lam~");
        assert_eq!(a.tag("pos"), Some("verb"));
        assert_eq!(a.tag("per"), Some("3"));
        assert_eq!(a.tag("asp"), Some("p"));
        assert_eq!(a.tag("gen"), Some("f"));
        assert_eq!(a.tag("num"), Some("s"));
        assert_eq!(a.tag("enc0"), Some("dobj_3mp"));
    }

    #[test]
    fn two_sentences_five_tokens() {
        let text = format!("# fixture\n{ROW1}\n{ROW1}\n\n{ROW1}\n{ROW1}\n{ROW1}\n\n");
        let s = parse_corpus_str(&text, "t").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].len(), 2);
        assert_eq!(s[1].len(), 3);
    }

    #[test]
    fn short_row_names_line() {
        let short = ROW1.rsplit_once('\t').unwrap().0;
        let err = parse_corpus_str(&format!("{ROW1}\n{short}\n"), "f.tsv").unwrap_err();
        assert_eq!(err.to_string(), "f.tsv:2: expected 17 columns, found 16");
    }

    #[test]
    fn duplicate_blank_lines_rejected() {
        let err = parse_corpus_str(&format!("{ROW1}\n\n\n{ROW1}\n"), "f").unwrap_err();
        assert!(err.to_string().starts_with("f:3:"), "{err}");
    }

    #[test]
    fn empty_surface_rejected() {
        let row = ROW1.replacen("lmthm", "", 1);
        assert!(parse_corpus_str(&row, "f").is_err());
    }
}
