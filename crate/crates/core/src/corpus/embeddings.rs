use std::path::Path;

use super::vocab::Vocab;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Pretrained vectors in the plain-text `word v1 v2 ...` format, with an
/// optional `count dim` header line.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub dim: usize,
    pub vectors: Vec<(String, Vec<f64>)>,
}

pub fn parse_embeddings(text: &str, dim: usize, source: &str) -> Result<Pretrained> {
    let mut vectors = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if n == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            let header_dim: usize = fields[1].parse().unwrap();
            if header_dim != dim {
                return Err(Error::parse(source, lineno, format!("header declares dimension {header_dim}, expected {dim}")));
            }
            continue;
        }
        if fields.len() != dim + 1 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected a word and {} values, found {} values", dim, fields.len().saturating_sub(1)),
            ));
        }
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(source, lineno, format!("malformed number {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        vectors.push((fields[0].to_string(), values));
    }
    Ok(Pretrained { dim, vectors })
}

/// Overwrites rows of `table` for vocabulary words found in `pretrained`.
/// File words are normalized like surfaces; the first occurrence wins.
/// Returns the number of rows replaced.
pub fn apply_embeddings(pretrained: &Pretrained, vocab: &Vocab, table: &mut Tensor) -> Result<usize> {
    if table.cols() != pretrained.dim {
        return Err(Error::shape(
            "load_embeddings",
            format!("table has dimension {}, file has {}", table.cols(), pretrained.dim),
        ));
    }
    let mut done = vec![false; table.rows()];
    let mut replaced = 0;
    for (word, values) in &pretrained.vectors {
        let id = vocab.word_id(&vocab.normalize(word));
        if id < 2 || done[id] {
            continue;
        }
        table.row_mut(id).copy_from_slice(values);
        done[id] = true;
        replaced += 1;
    }
    Ok(replaced)
}

/// Reads an embedding file and writes its vectors into `table`.
pub fn load_embeddings(path: &Path, vocab: &Vocab, dim: usize, table: &mut Tensor) -> Result<usize> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pre = parse_embeddings(&text, dim, &path.display().to_string())?;
    apply_embeddings(&pre, vocab, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize::Normalizer;
    use crate::corpus::tsv::parse_corpus_str;

    fn vocab() -> Vocab {
        let text: String = ["a", "b", "c", "d", "e"]
            .iter()
            .map(|w| format!("{w}\t{w}\t{w}\tnoun\t0\t0\t0\t0\tna\tna\tna\tna\tm\ts\ti\tn\t0\n"))
            .collect();
        let c = parse_corpus_str(&text, "t").unwrap();
        Vocab::build(&c, [], Normalizer::identity()).0
    }

    #[test]
    fn replaces_only_covered_rows() {
        let v = vocab();
        let mut table = Tensor::zeros(&[v.n_words(), 2]);
        let pre = parse_embeddings("a 1 2\nc 3 4\nzz 5 6\ne 7 8\n", 2, "e").unwrap();
        assert_eq!(apply_embeddings(&pre, &v, &mut table).unwrap(), 3);
        assert_eq!(table.row(v.word_id("c")), &[3.0, 4.0]);
        assert_eq!(table.row(v.word_id("b")), &[0.0, 0.0]);
    }

    #[test]
    fn accepts_header() {
        let pre = parse_embeddings("2 4\na 1 2 3 4\nb 1 2 3 4\n", 4, "e").unwrap();
        assert_eq!(pre.vectors.len(), 2);
    }

    #[test]
    fn short_row_names_line() {
        let err = parse_embeddings("a 1 2 3 4\nb 1 2 3\n", 4, "e").unwrap_err();
        assert!(err.to_string().starts_with("e:2:"), "{err}");
    }

    #[test]
    fn malformed_float_names_line() {
        let err = parse_embeddings("a 1 x\n", 2, "e").unwrap_err();
        assert!(err.to_string().starts_with("e:1:"), "{err}");
    }
}
