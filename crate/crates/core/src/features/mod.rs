//! Conjunctive lexical features and their extraction.
//!
//! A feature is a non-lexical property conjoined with `n` words. Atoms are
//! stored without the label; classification scores every atom against every
//! label.

mod space;
mod template;
mod vocab;

use std::collections::BTreeMap;

pub use space::{
    cluster_reduce, conjoin, reduce_instance, Extractor, FeatureSpace, RawChoices, RawInstance,
    BIAS_PROPERTY,
};
pub use template::{distance_bucket, parse_templates, RawAtom, Template};
pub use vocab::{LabelVocab, PropertyVocab, Vocab, WordVocab, UNK};

use crate::error::{Error, Result};

/// One interned feature: a property index and `n` word indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureAtom {
    pub property: usize,
    pub words: Vec<usize>,
}

impl FeatureAtom {
    pub fn new(property: usize, words: Vec<usize>) -> Self {
        FeatureAtom { property, words }
    }

    pub fn arity(&self) -> usize {
        self.words.len()
    }
}

/// Feature atoms partitioned by arity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureSet {
    by_arity: Vec<Vec<FeatureAtom>>,
}

/// How instance scoring visits atoms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Grouping {
    /// Atoms sharing a word tuple are scored together, their properties
    /// summed into one input.
    #[default]
    ByWord,
    /// Every atom on its own.
    PerFeature,
}

/// A word tuple and the multiset of properties it occurs with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub words: Vec<usize>,
    pub properties: Vec<(usize, u32)>,
}

impl FeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = FeatureAtom>) -> Result<Self> {
        let mut s = FeatureSet::new();
        for a in atoms {
            s.push(a)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, atom: FeatureAtom) -> Result<()> {
        let n = atom.arity();
        if n == 0 {
            return Err(Error::Arity {
                expected: 1,
                found: 0,
            });
        }
        if self.by_arity.len() < n {
            self.by_arity.resize(n, Vec::new());
        }
        self.by_arity[n - 1].push(atom);
        Ok(())
    }

    /// Atoms of the given arity.
    pub fn atoms(&self, arity: usize) -> &[FeatureAtom] {
        arity
            .checked_sub(1)
            .and_then(|i| self.by_arity.get(i))
            .map_or(&[], Vec::as_slice)
    }

    /// Nonempty `(arity, atoms)` partitions in increasing arity.
    pub fn partitions(&self) -> impl Iterator<Item = (usize, &[FeatureAtom])> {
        self.by_arity
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(i, v)| (i + 1, v.as_slice()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureAtom> {
        self.by_arity.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_arity.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_arity(&self) -> usize {
        self.partitions().last().map_or(0, |(n, _)| n)
    }

    /// Scoring units for one arity, in a deterministic order.
    pub fn units(&self, arity: usize, grouping: Grouping) -> Vec<Unit> {
        let atoms = self.atoms(arity);
        match grouping {
            Grouping::PerFeature => atoms
                .iter()
                .map(|a| Unit {
                    words: a.words.clone(),
                    properties: vec![(a.property, 1)],
                })
                .collect(),
            Grouping::ByWord => {
                let mut groups: BTreeMap<&[usize], BTreeMap<usize, u32>> = BTreeMap::new();
                for a in atoms {
                    *groups
                        .entry(a.words.as_slice())
                        .or_default()
                        .entry(a.property)
                        .or_default() += 1;
                }
                groups
                    .into_iter()
                    .map(|(w, props)| Unit {
                        words: w.to_vec(),
                        properties: props.into_iter().collect(),
                    })
                    .collect()
            }
        }
    }
}

/// What an instance chooses among.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choices {
    /// Classification: one label-independent set scored against each label.
    Labels(FeatureSet),
    /// Ranking: one set per candidate.
    Candidates(Vec<FeatureSet>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureInstance {
    pub choices: Choices,
    /// Gold label or candidate index.
    pub gold: Option<usize>,
}

impl FeatureInstance {
    pub fn classify(features: FeatureSet, gold: Option<usize>) -> Self {
        FeatureInstance {
            choices: Choices::Labels(features),
            gold,
        }
    }

    pub fn rank(candidates: Vec<FeatureSet>, gold: Option<usize>) -> Self {
        FeatureInstance {
            choices: Choices::Candidates(candidates),
            gold,
        }
    }

    pub fn feature_sets(&self) -> &[FeatureSet] {
        match &self.choices {
            Choices::Labels(s) => std::slice::from_ref(s),
            Choices::Candidates(c) => c,
        }
    }

    /// Largest arity present in any feature set.
    pub fn max_arity(&self) -> usize {
        self.feature_sets()
            .iter()
            .map(FeatureSet::max_arity)
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: usize, w: &[usize]) -> FeatureAtom {
        FeatureAtom::new(p, w.to_vec())
    }

    #[test]
    fn partitions_by_arity() {
        let s = FeatureSet::from_atoms([atom(0, &[1]), atom(1, &[1, 2]), atom(2, &[3])]).unwrap();
        assert_eq!(s.atoms(1).len(), 2);
        assert_eq!(s.atoms(2).len(), 1);
        assert!(s.atoms(3).is_empty());
        assert_eq!(s.len(), 3);
        assert_eq!(s.max_arity(), 2);
        assert!(FeatureSet::new().push(atom(0, &[])).is_err());
    }

    #[test]
    fn grouping_by_word_counts_properties() {
        let s = FeatureSet::from_atoms([
            atom(3, &[5]),
            atom(1, &[2]),
            atom(3, &[5]),
            atom(0, &[5]),
        ])
        .unwrap();
        let units = s.units(1, Grouping::ByWord);
        assert_eq!(
            units,
            vec![
                Unit {
                    words: vec![2],
                    properties: vec![(1, 1)]
                },
                Unit {
                    words: vec![5],
                    properties: vec![(0, 1), (3, 2)]
                },
            ]
        );
        assert_eq!(s.units(1, Grouping::PerFeature).len(), 4);
    }
}
