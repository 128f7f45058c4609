use std::path::Path;

use crate::error::{Error, Result};
use crate::features::Vocab;
use crate::model::EmbeddingMatrix;

/// Pre-trained word vectors with a zero row 0 for unknown words.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocab,
    pub matrix: EmbeddingMatrix,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Vector of `word`, or the unknown row.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.matrix.row(self.vocab.get(word).unwrap_or(0))
    }

    /// Parses the text format: a `count dim` header, then one word per line
    /// followed by `dim` numbers, separated by spaces.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing `count dim` header"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let parsed = match head.as_slice() {
            [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        let (count, dim) = parsed
            .filter(|&(_, d)| d > 0)
            .ok_or_else(|| Error::parse(path, 1, format!("bad header `{header}`")))?;
        let mut vocab = Vocab::with_unk();
        let mut data = vec![0.0; dim];
        data.reserve(count * dim);
        for (i, line) in lines {
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("line is not blank");
            let start = data.len();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad number `{f}`")))?;
                data.push(v);
            }
            let found = data.len() - start;
            if found != dim {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {dim} values, found {found}"),
                ));
            }
            vocab
                .insert_new(word)
                .map_err(|_| Error::parse(path, i + 1, format!("duplicate word `{word}`")))?;
        }
        if vocab.len() - 1 != count {
            return Err(Error::parse(
                path,
                1,
                format!("header announces {count} words, file has {}", vocab.len() - 1),
            ));
        }
        vocab.freeze();
        let matrix = EmbeddingMatrix::new(vocab.len(), dim, data)?;
        Ok(EmbeddingTable { vocab, matrix })
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text, &path.display().to_string())
}
