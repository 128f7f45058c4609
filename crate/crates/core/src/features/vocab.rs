use std::collections::HashMap;

/// Display name of the reserved unknown entry.
pub const UNK: &str = "<UNK>";

/// Dense string ↔ index map. Optionally reserves index 0 for unknowns; once
/// frozen, unseen strings map to that index instead of growing the map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
    has_unk: bool,
    frozen: bool,
}

pub type LabelVocab = Vocab;
pub type PropertyVocab = Vocab;
pub type WordVocab = Vocab;

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_unk() -> Self {
        Vocab {
            items: vec![UNK.to_string()],
            index: HashMap::new(),
            has_unk: true,
            frozen: false,
        }
    }

    /// Rebuilds a vocabulary from its items in index order.
    pub fn from_items(items: Vec<String>, has_unk: bool) -> Option<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, s) in items.iter().enumerate() {
            if has_unk && i == 0 {
                continue;
            }
            if index.insert(s.clone(), i).is_some() {
                return None;
            }
        }
        Some(Vocab {
            items,
            index,
            has_unk,
            frozen: true,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_unk(&self) -> bool {
        self.has_unk
    }

    pub fn unk(&self) -> Option<usize> {
        self.has_unk.then_some(0)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn item(&self, i: usize) -> Option<&str> {
        self.items.get(i).map(String::as_str)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// Index of `s`; grows the map unless frozen. A frozen map answers with
    /// the unknown index, or `None` when it has none.
    pub fn intern(&mut self, s: &str) -> Option<usize> {
        if let Some(i) = self.get(s) {
            return Some(i);
        }
        if self.frozen {
            return self.unk();
        }
        let i = self.items.len();
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), i);
        Some(i)
    }

    pub fn lookup_or_unk(&self, s: &str) -> Option<usize> {
        self.get(s).or(self.unk())
    }

    /// Inserts a new entry, failing on duplicates.
    pub fn insert_new(&mut self, s: &str) -> Result<usize, usize> {
        if let Some(i) = self.get(s) {
            return Err(i);
        }
        let i = self.items.len();
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), i);
        Ok(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable_and_freezable() {
        let mut v = Vocab::with_unk();
        let a = v.intern("a").unwrap();
        let b = v.intern("b").unwrap();
        assert_eq!((a, b), (1, 2));
        assert_eq!(v.intern("a"), Some(1));
        v.freeze();
        assert_eq!(v.intern("zzz"), Some(0));
        assert_eq!(v.len(), 3);

        let mut labels = Vocab::new();
        labels.intern("x");
        labels.freeze();
        assert_eq!(labels.intern("y"), None);
    }

    #[test]
    fn unk_name_is_not_a_key() {
        let mut v = Vocab::with_unk();
        assert_eq!(v.get(UNK), None);
        assert_eq!(v.intern(UNK), Some(1));
        let rebuilt = Vocab::from_items(v.items().to_vec(), true).unwrap();
        assert_eq!(rebuilt.get(UNK), Some(1));
        assert!(Vocab::from_items(vec!["a".into(), "a".into()], false).is_none());
    }
}
