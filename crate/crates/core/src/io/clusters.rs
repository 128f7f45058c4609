use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Cluster id returned for words absent from the map.
pub const UNK_CLUSTER: &str = "<UNK>";

/// Word to hierarchical-cluster bit string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterMap {
    map: HashMap<String, String>,
    prefix: Option<usize>,
}

impl ClusterMap {
    /// Empty map; bit strings inserted later are cut to `prefix` characters.
    pub fn new(prefix: Option<usize>) -> Self {
        ClusterMap {
            map: HashMap::new(),
            prefix,
        }
    }

    pub fn prefix(&self) -> Option<usize> {
        self.prefix
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Adds a word; rejects empty or non-binary paths and repeated words.
    pub fn insert(&mut self, word: &str, bits: &str) -> std::result::Result<(), String> {
        if bits.is_empty() || !bits.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(format!("cluster path `{bits}` is not a bit string"));
        }
        let cut = match self.prefix {
            Some(p) => &bits[..p.min(bits.len())],
            None => bits,
        };
        if self.map.insert(word.to_string(), cut.to_string()).is_some() {
            return Err(format!("word `{word}` listed twice"));
        }
        Ok(())
    }

    /// Cluster of `word`, or [`UNK_CLUSTER`].
    pub fn cluster(&self, word: &str) -> &str {
        self.map.get(word).map_or(UNK_CLUSTER, String::as_str)
    }

    /// Parses `bits<TAB>word[<TAB>count]` lines. Blank lines are skipped.
    pub fn parse(text: &str, path: &str, prefix: Option<usize>) -> Result<Self> {
        let mut m = ClusterMap::new(prefix);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) || fields[1].is_empty() {
                return Err(Error::parse(path, i + 1, "expected `bits<TAB>word[<TAB>count]`"));
            }
            if let Some(c) = fields.get(2) {
                c.parse::<u64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad count `{c}`")))?;
            }
            m.insert(fields[1], fields[0])
                .map_err(|msg| Error::parse(path, i + 1, msg))?;
        }
        Ok(m)
    }
}

pub fn load_clusters(path: impl AsRef<Path>, prefix: Option<usize>) -> Result<ClusterMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ClusterMap::parse(&text, &path.display().to_string(), prefix)
}
