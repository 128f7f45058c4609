use super::template::{RawAtom, Template};
use super::vocab::Vocab;
use super::{FeatureAtom, FeatureInstance, FeatureSet};
use crate::error::{Error, Result};
use crate::io::clusters::ClusterMap;
use crate::io::instances::AnnotatedInstance;

/// Property of the per-candidate bias atom added to ranking instances.
pub const BIAS_PROPERTY: &str = "BIAS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawChoices {
    Labels(Vec<RawAtom>),
    Candidates(Vec<Vec<RawAtom>>),
}

/// Extracted features before interning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInstance {
    pub choices: RawChoices,
    pub label: Option<String>,
    pub gold: Option<usize>,
}

impl RawInstance {
    pub fn is_ranking(&self) -> bool {
        matches!(self.choices, RawChoices::Candidates(_))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &RawAtom> {
        let sets: Vec<&Vec<RawAtom>> = match &self.choices {
            RawChoices::Labels(a) => vec![a],
            RawChoices::Candidates(c) => c.iter().collect(),
        };
        sets.into_iter().flatten()
    }
}

/// Applies a template set to annotated instances.
#[derive(Debug, Clone)]
pub struct Extractor {
    templates: Vec<Template>,
    candidate_bias: bool,
}

impl Extractor {
    /// `candidate_bias` adds a `BIAS` atom over each candidate's word.
    pub fn new(templates: Vec<Template>, candidate_bias: bool) -> Self {
        Extractor {
            templates,
            candidate_bias,
        }
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn extract(&self, inst: &AnnotatedInstance) -> Result<RawInstance> {
        let choices = match &inst.candidates {
            None => {
                let mut atoms = Vec::new();
                for t in &self.templates {
                    t.apply(inst, None, &mut atoms)?;
                }
                RawChoices::Labels(atoms)
            }
            Some(cands) => {
                let mut sets = Vec::with_capacity(cands.len());
                for &c in cands {
                    let mut atoms = Vec::new();
                    if self.candidate_bias {
                        atoms.push(RawAtom {
                            property: BIAS_PROPERTY.to_string(),
                            words: vec![inst.tokens[c].clone()],
                        });
                    }
                    for t in &self.templates {
                        t.apply(inst, Some(c), &mut atoms)?;
                    }
                    sets.push(atoms);
                }
                RawChoices::Candidates(sets)
            }
        };
        Ok(RawInstance {
            choices,
            label: inst.label.clone(),
            gold: inst.gold,
        })
    }
}

/// Property conjoined with a cluster id.
pub fn conjoin(property: &str, cluster: &str) -> String {
    format!("{property}∧{cluster}")
}

/// Rewrites a bigram atom as two unigram atoms whose properties carry the
/// cluster of the dropped word: `(u∧c(w1), w2)` and `(u∧c(w2), w1)`.
pub fn cluster_reduce(atom: &RawAtom, clusters: &ClusterMap) -> Result<[RawAtom; 2]> {
    let [w1, w2] = atom.words.as_slice() else {
        return Err(Error::Arity {
            expected: 2,
            found: atom.arity(),
        });
    };
    Ok([
        RawAtom {
            property: conjoin(&atom.property, clusters.cluster(w1)),
            words: vec![w2.clone()],
        },
        RawAtom {
            property: conjoin(&atom.property, clusters.cluster(w2)),
            words: vec![w1.clone()],
        },
    ])
}

/// Replaces every bigram atom by its two-unigram reduction.
pub fn reduce_instance(raw: &RawInstance, clusters: &ClusterMap) -> Result<RawInstance> {
    let reduce = |atoms: &[RawAtom]| -> Result<Vec<RawAtom>> {
        let mut out = Vec::with_capacity(atoms.len());
        for a in atoms {
            match a.arity() {
                1 => out.push(a.clone()),
                2 => out.extend(cluster_reduce(a, clusters)?),
                n => {
                    return Err(Error::Config(format!(
                        "cluster mode handles features of at most two words, found {n}"
                    )))
                }
            }
        }
        Ok(out)
    };
    let choices = match &raw.choices {
        RawChoices::Labels(a) => RawChoices::Labels(reduce(a)?),
        RawChoices::Candidates(c) => {
            RawChoices::Candidates(c.iter().map(|a| reduce(a)).collect::<Result<_>>()?)
        }
    };
    Ok(RawInstance {
        choices,
        label: raw.label.clone(),
        gold: raw.gold,
    })
}

/// Label, property and word vocabularies shared by a model and its data.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    pub labels: Vocab,
    pub properties: Vocab,
    pub words: Vocab,
}

impl Default for FeatureSpace {
    fn default() -> Self {
        FeatureSpace::new(Vocab::with_unk())
    }
}

impl FeatureSpace {
    /// Fresh label and property vocabularies over the given words. A frozen
    /// word vocabulary (from embeddings) maps unseen words to its unknown row.
    pub fn new(words: Vocab) -> Self {
        FeatureSpace {
            labels: Vocab::new(),
            properties: Vocab::with_unk(),
            words,
        }
    }

    pub fn freeze(&mut self) {
        self.labels.freeze();
        self.properties.freeze();
        self.words.freeze();
    }

    fn intern_set(&mut self, atoms: &[RawAtom]) -> Result<FeatureSet> {
        let mut set = FeatureSet::new();
        for a in atoms {
            let property = self
                .properties
                .intern(&a.property)
                .expect("property vocabulary has an unknown entry");
            let words = a
                .words
                .iter()
                .map(|w| self.words.intern(w).expect("word vocabulary has an unknown entry"))
                .collect();
            set.push(FeatureAtom { property, words })?;
        }
        Ok(set)
    }

    fn intern_features(&mut self, raw: &RawInstance, gold: Option<usize>) -> Result<FeatureInstance> {
        Ok(match &raw.choices {
            RawChoices::Labels(a) => FeatureInstance::classify(self.intern_set(a)?, gold),
            RawChoices::Candidates(c) => {
                let sets = c.iter().map(|a| self.intern_set(a)).collect::<Result<_>>()?;
                FeatureInstance::rank(sets, gold)
            }
        })
    }

    /// Interns features and the gold annotation. A label unseen by a frozen
    /// label vocabulary is an error.
    pub fn intern(&mut self, raw: &RawInstance) -> Result<FeatureInstance> {
        let gold = match (&raw.choices, &raw.label) {
            (RawChoices::Labels(_), Some(l)) => Some(
                self.labels
                    .intern(l)
                    .ok_or_else(|| Error::UnknownLabel(l.clone()))?,
            ),
            (RawChoices::Labels(_), None) => None,
            (RawChoices::Candidates(_), _) => raw.gold,
        };
        self.intern_features(raw, gold)
    }

    /// Interns features only, leaving the gold annotation empty.
    pub fn intern_unlabeled(&mut self, raw: &RawInstance) -> Result<FeatureInstance> {
        self.intern_features(raw, None)
    }

    /// Index of `u∧c(w)` for interned `u` and `w`, without growing the
    /// property vocabulary.
    pub fn conjoined_property(&self, property: usize, word: usize, clusters: &ClusterMap) -> usize {
        let u = self.properties.item(property).unwrap_or(super::UNK);
        let w = self.words.item(word).unwrap_or(super::UNK);
        let key = conjoin(u, clusters.cluster(w));
        self.properties.lookup_or_unk(&key).unwrap_or(0)
    }

    /// Interned form of [`cluster_reduce`] over a frozen space.
    pub fn reduce_atom(&self, atom: &FeatureAtom, clusters: &ClusterMap) -> Result<[FeatureAtom; 2]> {
        let [w1, w2] = *atom.words.as_slice() else {
            return Err(Error::Arity {
                expected: 2,
                found: atom.arity(),
            });
        };
        Ok([
            FeatureAtom::new(self.conjoined_property(atom.property, w1, clusters), vec![w2]),
            FeatureAtom::new(self.conjoined_property(atom.property, w2, clusters), vec![w1]),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::parse_templates;

    fn clusters() -> ClusterMap {
        ClusterMap::parse("0110\tapple\n0111\tbranch\n0110\tpear\n", "c", None).unwrap()
    }

    #[test]
    fn reduction_conjoins_partner_clusters() {
        let atom = RawAtom::new("PREP:on", &["apple", "branch"]);
        let [a, b] = cluster_reduce(&atom, &clusters()).unwrap();
        assert_eq!(a, RawAtom::new("PREP:on∧0110", &["branch"]));
        assert_eq!(b, RawAtom::new("PREP:on∧0111", &["apple"]));

        let [a, b] = cluster_reduce(&RawAtom::new("P", &["apple", "pear"]), &clusters()).unwrap();
        assert_eq!(a.property, b.property);
        assert_ne!(a.words, b.words);

        let [a, _] = cluster_reduce(&RawAtom::new("P", &["kiwi", "pear"]), &clusters()).unwrap();
        assert_eq!(a.property, "P∧<UNK>");
        assert!(cluster_reduce(&RawAtom::new("P", &["a"]), &clusters()).is_err());
    }

    #[test]
    fn reduced_instances_are_unigram_only() {
        let raw = RawInstance {
            choices: RawChoices::Labels(vec![
                RawAtom::new("A", &["apple"]),
                RawAtom::new("B", &["apple", "branch"]),
            ]),
            label: Some("x".into()),
            gold: None,
        };
        let r = reduce_instance(&raw, &clusters()).unwrap();
        assert_eq!(r.atoms().count(), 3);
        assert!(r.atoms().all(|a| a.arity() == 1));
    }

    #[test]
    fn interning_is_stable_and_unknowns_collapse() {
        let templates = parse_templates("bias\tBIAS\ti\npair\tD={dist:i,j}\ti,j\n", "t").unwrap();
        let ex = Extractor::new(templates, true);
        let inst = AnnotatedInstance {
            tokens: ["a", "b", "c"].iter().map(|s| s.to_string()).collect(),
            label: Some("L".into()),
            ..Default::default()
        };
        let raw = ex.extract(&inst).unwrap();
        let mut space = FeatureSpace::default();
        let x = space.intern(&raw).unwrap();
        let y = space.intern(&raw).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.gold, Some(0));
        let set = &x.feature_sets()[0];
        assert_eq!(set.atoms(1).len(), 3);
        assert_eq!(set.atoms(2).len(), 3);
        assert!(set.atoms(1).iter().all(|a| a.property == set.atoms(1)[0].property));

        space.freeze();
        let mut other = inst.clone();
        other.tokens = vec!["zzz".into()];
        let z = space.intern(&ex.extract(&other).unwrap()).unwrap();
        assert_eq!(z.feature_sets()[0].atoms(1)[0].words, vec![0]);
        other.label = Some("unseen".into());
        let err = space.intern(&ex.extract(&other).unwrap()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel(_)));
        assert!(space.intern_unlabeled(&ex.extract(&other).unwrap()).is_ok());
    }

    #[test]
    fn ranking_candidates_carry_bias_atoms() {
        let templates = parse_templates("c\tHEAD={tok:@cand}\t@child\n", "t").unwrap();
        let ex = Extractor::new(templates, true);
        let mut inst = AnnotatedInstance {
            tokens: ["ate", "pizza", "with", "fork"].iter().map(|s| s.to_string()).collect(),
            candidates: Some(vec![0, 1]),
            gold: Some(0),
            ..Default::default()
        };
        inst.roles.insert("child".into(), 3);
        let raw = ex.extract(&inst).unwrap();
        let RawChoices::Candidates(c) = &raw.choices else { panic!() };
        assert_eq!(c[1], vec![RawAtom::new("BIAS", &["pizza"]), RawAtom::new("HEAD=pizza", &["fork"])]);
        assert_eq!(ex.templates().len(), 1);
    }

    #[test]
    fn empty_template_set_gives_empty_features() {
        let ex = Extractor::new(Vec::new(), false);
        let inst = AnnotatedInstance {
            tokens: vec!["a".into()],
            ..Default::default()
        };
        let mut space = FeatureSpace::default();
        let x = space.intern(&ex.extract(&inst).unwrap()).unwrap();
        assert!(x.feature_sets()[0].is_empty());
    }
}
