//! Model files: a text header with vocabularies and tensor descriptors,
//! followed by every parameter as a little-endian `f64`.
//!
//! ```text
//! LRFR-MODEL 1
//! task classify | task rank
//! ngram-mode multi-tensor | ngram-mode cluster
//! candidate-bias 0|1
//! cluster-prefix none|N
//! fine-tune 0|1
//! words one-hot | words embedded DIM
//! config N            (then N lines `key<TAB>value`)
//! templates N         (then N template lines)
//! labels N            (then N lines)
//! properties N        (then N lines, the first is the unknown entry)
//! vocab N             (then N lines, the first is the unknown entry)
//! tensor ARITY FORM ROLE:DIM:RANK …   (FORM is tucker or cp; one entry per view)
//! …
//! data COUNT
//! <COUNT × 8 bytes>
//! ```
//!
//! Roles are `label`, `property` and `word0`, `word1`, …; a CP tensor
//! repeats its single rank in every view. Strings escape `\`, newline, tab and carriage return. Blocks are stored
//! in a fixed order per tensor (core, then factors by view), then the
//! embedding table. Saving is deterministic.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureSpace, Vocab};
use crate::model::{
    view_layout, CpModel, EmbeddingMatrix, FactorMatrix, LowRankTensor, Model, Task, TuckerModel,
    ViewRole, WordEncoding,
};
use crate::pipeline::{ModelBundle, NgramMode};
use crate::tensor::DenseTensor;

pub const MAGIC: &str = "LRFR-MODEL";
pub const FORMAT_VERSION: &str = "1";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::ModelFormat(format!(
                    "bad escape `\\{}`",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

fn role_name(role: ViewRole) -> String {
    match role {
        ViewRole::Label => "label".into(),
        ViewRole::Property => "property".into(),
        ViewRole::Word(k) => format!("word{k}"),
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn push_list<'a>(out: &mut String, name: &str, items: impl ExactSizeIterator<Item = &'a String>) {
    out.push_str(&format!("{name} {}\n", items.len()));
    for s in items {
        out.push_str(&escape(s));
        out.push('\n');
    }
}

/// Serializes a bundle.
pub fn to_bytes(bundle: &ModelBundle) -> Vec<u8> {
    let m = &bundle.model;
    let mut h = String::new();
    h.push_str(&format!("{MAGIC} {FORMAT_VERSION}\n"));
    match m.task() {
        Task::Classify { .. } => h.push_str("task classify\n"),
        Task::Rank => h.push_str("task rank\n"),
    }
    h.push_str(&format!("ngram-mode {}\n", bundle.ngram_mode.name()));
    h.push_str(&format!("candidate-bias {}\n", flag(bundle.candidate_bias)));
    match bundle.cluster_prefix {
        Some(p) => h.push_str(&format!("cluster-prefix {p}\n")),
        None => h.push_str("cluster-prefix none\n"),
    }
    h.push_str(&format!("fine-tune {}\n", flag(m.fine_tune())));
    match m.words() {
        WordEncoding::OneHot { .. } => h.push_str("words one-hot\n"),
        WordEncoding::Embedded(e) => h.push_str(&format!("words embedded {}\n", e.dim())),
    }
    h.push_str(&format!("config {}\n", bundle.config.len()));
    for (k, v) in &bundle.config {
        h.push_str(&format!("{}\t{}\n", escape(k), escape(v)));
    }
    let template_lines: Vec<String> = bundle.templates.lines().map(str::to_string).collect();
    push_list(&mut h, "templates", template_lines.iter());
    push_list(&mut h, "labels", bundle.space.labels.items().iter());
    push_list(&mut h, "properties", bundle.space.properties.items().iter());
    push_list(&mut h, "vocab", bundle.space.words.items().iter());
    for (n, t) in m.tensors() {
        let views: Vec<String> = t
            .roles()
            .iter()
            .zip(t.dims())
            .zip(t.ranks())
            .map(|((&role, d), r)| format!("{}:{d}:{r}", role_name(role)))
            .collect();
        h.push_str(&format!("tensor {n} {} {}\n", t.form().name(), views.join(" ")));
    }
    let ids = m.stored_block_ids();
    let count: usize = ids.iter().map(|&id| m.block(id).map_or(0, <[f64]>::len)).sum();
    h.push_str(&format!("data {count}\n"));

    let mut out = h.into_bytes();
    out.reserve(count * 8);
    for id in ids {
        for v in m.block(id).unwrap_or(&[]) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelFormat("truncated header".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::ModelFormat("header is not UTF-8".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::ModelFormat(format!("expected `{key}`, found `{line}`")))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| Error::ModelFormat(format!("bad count `{v}` for `{key}`")))
    }

    fn list(&mut self, key: &str) -> Result<Vec<String>> {
        let n = self.count(key)?;
        (0..n).map(|_| unescape(self.line()?)).collect()
    }

    fn flag(&mut self, key: &str) -> Result<bool> {
        match self.keyed(key)? {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(Error::ModelFormat(format!("bad flag `{v}` for `{key}`"))),
        }
    }
}

fn vocab(items: Vec<String>, has_unk: bool, what: &str) -> Result<Vocab> {
    Vocab::from_items(items, has_unk)
        .ok_or_else(|| Error::ModelFormat(format!("duplicate entry in {what}")))
}

/// Parses a serialized bundle.
pub fn from_bytes(bytes: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader { bytes, pos: 0 };
    let first = r.line()?;
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|v| v.strip_prefix(' '))
        .ok_or_else(|| Error::ModelFormat("not a model file".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let task_kind = r.keyed("task")?.to_string();
    let ngram_mode: NgramMode = r
        .keyed("ngram-mode")?
        .parse()
        .map_err(|e: Error| Error::ModelFormat(e.to_string()))?;
    let candidate_bias = r.flag("candidate-bias")?;
    let cluster_prefix = match r.keyed("cluster-prefix")? {
        "none" => None,
        v => Some(
            v.parse()
                .map_err(|_| Error::ModelFormat(format!("bad cluster prefix `{v}`")))?,
        ),
    };
    let fine_tune = r.flag("fine-tune")?;
    let words_kind = r.keyed("words")?.to_string();
    let n_config = r.count("config")?;
    let mut config = BTreeMap::new();
    for _ in 0..n_config {
        let line = r.line()?;
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::ModelFormat(format!("bad config line `{line}`")))?;
        config.insert(unescape(k)?, unescape(v)?);
    }
    let mut templates = r.list("templates")?.join("\n");
    if !templates.is_empty() {
        templates.push('\n');
    }
    let labels = vocab(r.list("labels")?, false, "labels")?;
    let properties = vocab(r.list("properties")?, true, "properties")?;
    let words = vocab(r.list("vocab")?, true, "vocabulary")?;

    let task = match task_kind.as_str() {
        "classify" => Task::Classify {
            labels: labels.len(),
        },
        "rank" => Task::Rank,
        other => return Err(Error::ModelFormat(format!("unknown task `{other}`"))),
    };
    let embed_dim = match words_kind.split_once(' ') {
        None if words_kind == "one-hot" => None,
        Some(("embedded", d)) => Some(
            d.parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::ModelFormat(format!("bad embedding dimension `{d}`")))?,
        ),
        _ => return Err(Error::ModelFormat(format!("bad words line `{words_kind}`"))),
    };
    let shape_words = match embed_dim {
        None => WordEncoding::OneHot { vocab: words.len() },
        Some(d) => WordEncoding::Embedded(EmbeddingMatrix::new(words.len(), d, vec![0.0; words.len() * d])?),
    };

    let mut specs = Vec::new();
    let count = loop {
        let line = r.line()?;
        if let Some(c) = line.strip_prefix("data ") {
            break c
                .parse::<usize>()
                .map_err(|_| Error::ModelFormat(format!("bad data count `{c}`")))?;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        let parse = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::ModelFormat(format!("bad number `{s}` in `{line}`")))
        };
        match fields.as_slice() {
            ["tensor", n, form, views @ ..] if !views.is_empty() => {
                let n = parse(n)?;
                let views = views
                    .iter()
                    .map(|v| match v.split(':').collect::<Vec<_>>().as_slice() {
                        [role, d, r] => Ok((role.to_string(), parse(d)?, parse(r)?)),
                        _ => Err(Error::ModelFormat(format!("bad view `{v}` in `{line}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                specs.push((n, form.to_string(), views));
            }
            _ => return Err(Error::ModelFormat(format!("unexpected line `{line}`"))),
        }
    };
    let data = &bytes[r.pos..];
    if data.len() != count * 8 {
        return Err(Error::ModelFormat(format!(
            "expected {count} parameters, found {} bytes",
            data.len()
        )));
    }
    let mut values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let mut take = |n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = values.by_ref().take(n).collect();
        if v.len() != n {
            return Err(Error::ModelFormat("parameter data ends early".into()));
        }
        Ok(v)
    };

    let mut tensors = Vec::new();
    for (n, form, views) in specs {
        let layout = view_layout(task, properties.len(), &shape_words, n);
        let expected: Vec<(String, usize)> = layout.iter().map(|&(role, d)| (role_name(role), d)).collect();
        let found: Vec<(String, usize)> = views.iter().map(|(role, d, _)| (role.clone(), *d)).collect();
        if expected != found {
            return Err(Error::ModelFormat(format!(
                "tensor {n}: views {found:?} do not match the vocabularies, expected {expected:?}"
            )));
        }
        let ranks: Vec<usize> = views.iter().map(|v| v.2).collect();
        let (roles, dims): (Vec<ViewRole>, Vec<usize>) = layout.into_iter().unzip();
        let t = match form.as_str() {
            "tucker" => {
                let core_len = ranks.iter().product();
                let core = DenseTensor::new(ranks.clone(), take(core_len)?)?;
                let factors = ranks
                    .iter()
                    .zip(&dims)
                    .map(|(&r, &d)| FactorMatrix::from_column_major(r, d, take(r * d)?))
                    .collect::<Result<Vec<_>>>()?;
                LowRankTensor::Tucker(TuckerModel::new(core, factors, roles)?)
            }
            "cp" => {
                let r = ranks[0];
                if ranks.iter().any(|&k| k != r) {
                    return Err(Error::ModelFormat(format!("tensor {n}: cp views differ in rank")));
                }
                let factors = dims
                    .iter()
                    .map(|&d| FactorMatrix::from_column_major(r, d, take(r * d)?))
                    .collect::<Result<Vec<_>>>()?;
                LowRankTensor::Cp(CpModel::new(factors, roles)?)
            }
            other => return Err(Error::ModelFormat(format!("unknown tensor form `{other}`"))),
        };
        tensors.push(t);
    }
    let words_enc = match embed_dim {
        None => shape_words,
        Some(d) => WordEncoding::Embedded(EmbeddingMatrix::new(words.len(), d, take(words.len() * d)?)?),
    };
    let model = Model::new(task, properties.len(), words_enc, tensors, fine_tune)?;
    let mut space = FeatureSpace {
        labels,
        properties,
        words,
    };
    space.freeze();
    Ok(ModelBundle {
        model,
        space,
        templates,
        candidate_bias,
        ngram_mode,
        cluster_prefix,
        config,
    })
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(bundle)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_round_trips() {
        for s in ["plain", "tab\there", "a\\nb", "line\nbreak\r", "∧0110"] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
            assert!(!escape(s).contains('\n'));
        }
        assert!(unescape("bad\\q").is_err());
    }

    #[test]
    fn rejects_other_versions_and_garbage() {
        match from_bytes(b"LRFR-MODEL 7\ntask rank\n") {
            Err(Error::Version { found, expected }) => {
                assert_eq!(found, "7");
                assert_eq!(expected, FORMAT_VERSION);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(from_bytes(b"hello\n"), Err(Error::ModelFormat(_))));
        assert!(matches!(from_bytes(b"LRFR-MODEL 1\n"), Err(Error::ModelFormat(_))));
    }
}
