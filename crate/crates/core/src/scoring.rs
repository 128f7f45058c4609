//! Factored scoring of features, instances and candidate lists.
//!
//! Label and property hidden vectors are factor columns. Word hidden
//! vectors are factor columns for one-hot words and `W · e_w` for embedded
//! words; a [`Scorer`] can precompute the latter for the whole vocabulary.
//!
//! For classification every tensor first contracts all non-label views of a
//! unit into a vector over the label rank; those are summed per tensor and
//! dotted with each label's hidden vector at the end.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::features::{FeatureAtom, FeatureInstance, FeatureSet, FeatureSpace, Grouping, Choices};
use crate::flops::Tally;
use crate::io::clusters::ClusterMap;
use crate::model::{LowRankTensor, Model, Task, ViewInput, WordEncoding};
use crate::par::{self, Execution};
use crate::tensor::dot;

/// Precomputed `W_k · e_w` for every tensor, lexical view and word.
#[derive(Debug, Clone, Default)]
pub struct HiddenReps {
    /// `tables[arity - 1][slot]` is a `vocab × rank` row-major table.
    tables: Vec<Vec<Vec<f64>>>,
}

impl HiddenReps {
    pub fn build(model: &Model, exec: Execution) -> Self {
        let WordEncoding::Embedded(emb) = model.words() else {
            return HiddenReps::default();
        };
        let max_arity = model.tensors().map(|(n, _)| n).max().unwrap_or(0);
        let mut tables = vec![Vec::new(); max_arity];
        for (n, t) in model.tensors() {
            let first = model.property_view() + 1;
            tables[n - 1] = t.factors()[first..]
                .iter()
                .map(|f| {
                    par::map_range(exec, emb.rows(), |w| f.mul_vec(emb.row(w)))
                        .into_iter()
                        .flatten()
                        .collect()
                })
                .collect();
        }
        HiddenReps { tables }
    }

    fn get(&self, arity: usize, slot: usize, rank: usize, w: usize) -> Option<&[f64]> {
        let t = self.tables.get(arity - 1)?.get(slot)?;
        t.get(w * rank..(w + 1) * rank)
    }
}

/// Read-only scorer over a model, optionally with cached word vectors.
#[derive(Debug, Clone)]
pub struct Scorer<'m> {
    model: &'m Model,
    cache: Option<HiddenReps>,
}

/// A prediction and its posterior over the choices.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub choice: usize,
    pub posterior: Vec<f64>,
}

impl<'m> Scorer<'m> {
    /// Computes word vectors on the fly.
    pub fn new(model: &'m Model) -> Self {
        Scorer { model, cache: None }
    }

    /// Precomputes word vectors of embedded vocabularies.
    pub fn cached(model: &'m Model, exec: Execution) -> Self {
        let cache = matches!(model.words(), WordEncoding::Embedded(_))
            .then(|| HiddenReps::build(model, exec));
        Scorer { model, cache }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    fn tensor(&self, arity: usize) -> Result<&'m LowRankTensor> {
        self.model
            .tensor(arity)
            .ok_or(Error::MissingTensor(arity))
    }

    /// Hidden vector of word `w` in lexical slot `slot` of a tensor.
    pub(crate) fn word_hidden(&self, t: &'m LowRankTensor, arity: usize, slot: usize, w: usize) -> Result<Cow<'_, [f64]>> {
        let f = &t.factors()[self.model.property_view() + 1 + slot];
        if let Some(h) = self
            .cache
            .as_ref()
            .and_then(|c| c.get(arity, slot, f.rank(), w))
        {
            return Ok(Cow::Borrowed(h));
        }
        if let WordEncoding::Embedded(e) = self.model.words() {
            if w >= e.rows() {
                return Err(Error::Dimension {
                    mode: self.model.property_view() + 2 + slot,
                    expected: e.rows(),
                    found: w,
                });
            }
        }
        f.apply(self.model.word_input(w))
    }

    fn label_count(&self) -> Result<usize> {
        self.model
            .labels()
            .ok_or_else(|| Error::Config("ranking model used for classification".into()))
    }

    /// Score of a single feature, conjoined with `label` for classification.
    pub fn score_feature(&self, label: Option<usize>, atom: &FeatureAtom) -> Result<f64> {
        self.score_feature_counted(label, atom, &mut ())
    }

    pub fn score_feature_counted<T: Tally>(
        &self,
        label: Option<usize>,
        atom: &FeatureAtom,
        tally: &mut T,
    ) -> Result<f64> {
        let n = atom.arity();
        let t = self.tensor(n)?;
        let pv = self.model.property_view();
        let mut hidden: Vec<Cow<'_, [f64]>> = Vec::with_capacity(n + 2);
        match (self.model.task(), label) {
            (Task::Classify { .. }, Some(y)) => hidden.push(t.factors()[0].apply(ViewInput::Index(y))?),
            (Task::Classify { .. }, None) => {
                return Err(Error::Config("classification feature needs a label".into()))
            }
            (Task::Rank, Some(_)) => {
                return Err(Error::Config("ranking model has no label view".into()))
            }
            (Task::Rank, None) => {}
        }
        hidden.push(t.factors()[pv].apply(ViewInput::Index(atom.property))?);
        for (slot, &w) in atom.words.iter().enumerate() {
            hidden.push(self.word_hidden(t, n, slot, w)?);
        }
        let refs: Vec<&[f64]> = hidden.iter().map(|h| h.as_ref()).collect();
        Ok(t.score_hidden(&refs, tally))
    }

    /// Non-label hidden vectors of one unit: the property multiset then the
    /// words.
    pub(crate) fn unit_hidden(
        &self,
        t: &'m LowRankTensor,
        arity: usize,
        words: &[usize],
        properties: &[(usize, u32)],
    ) -> Result<Vec<Cow<'_, [f64]>>> {
        let pv = self.model.property_view();
        let mut hidden = Vec::with_capacity(arity + 1);
        hidden.push(t.factors()[pv].apply_multiset(properties)?);
        for (slot, &w) in words.iter().enumerate() {
            hidden.push(self.word_hidden(t, arity, slot, w)?);
        }
        Ok(hidden)
    }

    /// Score of every label for a label-independent feature set.
    pub fn class_scores(&self, set: &FeatureSet, grouping: Grouping) -> Result<Vec<f64>> {
        self.class_scores_counted(set, grouping, &mut ())
    }

    pub fn class_scores_counted<T: Tally>(
        &self,
        set: &FeatureSet,
        grouping: Grouping,
        tally: &mut T,
    ) -> Result<Vec<f64>> {
        let labels = self.label_count()?;
        let mut scores = vec![0.0; labels];
        for (n, _) in set.partitions() {
            let t = self.tensor(n)?;
            let label_factor = &t.factors()[0];
            let mut acc = vec![0.0; label_factor.rank()];
            for unit in set.units(n, grouping) {
                let hidden = self.unit_hidden(t, n, &unit.words, &unit.properties)?;
                let refs: Vec<&[f64]> = hidden.iter().map(|h| h.as_ref()).collect();
                let lead = t.leading_vector(&refs, tally);
                for (a, b) in acc.iter_mut().zip(&lead) {
                    *a += b;
                }
            }
            for (y, s) in scores.iter_mut().enumerate() {
                *s += dot(label_factor.column(y), &acc);
            }
        }
        Ok(scores)
    }

    /// Score of one candidate's feature set under a ranking model.
    pub fn candidate_score(&self, set: &FeatureSet, grouping: Grouping) -> Result<f64> {
        if self.model.task() != Task::Rank {
            return Err(Error::Config("classification model used for ranking".into()));
        }
        let mut total = 0.0;
        for (n, _) in set.partitions() {
            let t = self.tensor(n)?;
            for unit in set.units(n, grouping) {
                let hidden = self.unit_hidden(t, n, &unit.words, &unit.properties)?;
                let refs: Vec<&[f64]> = hidden.iter().map(|h| h.as_ref()).collect();
                total += t.score_hidden(&refs, &mut ());
            }
        }
        Ok(total)
    }

    /// One score per candidate.
    pub fn rank_candidates(&self, candidates: &[FeatureSet], grouping: Grouping) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        candidates
            .iter()
            .map(|c| self.candidate_score(c, grouping))
            .collect()
    }

    /// Scores of every choice of an instance: labels or candidates.
    pub fn scores(&self, inst: &FeatureInstance, grouping: Grouping) -> Result<Vec<f64>> {
        match &inst.choices {
            Choices::Labels(set) => self.class_scores(set, grouping),
            Choices::Candidates(c) => self.rank_candidates(c, grouping),
        }
    }

    /// Score of a single choice.
    pub fn score_instance(&self, inst: &FeatureInstance, choice: usize) -> Result<f64> {
        let s = self.scores(inst, Grouping::ByWord)?;
        s.get(choice).copied().ok_or(Error::GoldMissing {
            what: choice_name(inst),
            index: choice,
            size: s.len(),
        })
    }

    /// Per-label scores where every bigram atom `(u, w1, w2)` is scored as
    /// `s(u∧c(w1), w2) + s(u∧c(w2), w1)` with the unigram tensor.
    pub fn class_scores_clustered(
        &self,
        set: &FeatureSet,
        space: &FeatureSpace,
        clusters: &ClusterMap,
    ) -> Result<Vec<f64>> {
        let labels = self.label_count()?;
        (0..labels)
            .map(|y| self.clustered_total(Some(y), set, space, clusters))
            .collect()
    }

    /// Ranking counterpart of [`Scorer::class_scores_clustered`].
    pub fn candidate_score_clustered(
        &self,
        set: &FeatureSet,
        space: &FeatureSpace,
        clusters: &ClusterMap,
    ) -> Result<f64> {
        self.clustered_total(None, set, space, clusters)
    }

    fn clustered_total(
        &self,
        label: Option<usize>,
        set: &FeatureSet,
        space: &FeatureSpace,
        clusters: &ClusterMap,
    ) -> Result<f64> {
        let mut total = 0.0;
        for atom in set.iter() {
            total += self.score_clustered_atom(label, atom, space, clusters)?;
        }
        Ok(total)
    }

    /// Cluster-form score of one atom; unigram atoms are scored directly.
    pub fn score_clustered_atom(
        &self,
        label: Option<usize>,
        atom: &FeatureAtom,
        space: &FeatureSpace,
        clusters: &ClusterMap,
    ) -> Result<f64> {
        match *atom.words.as_slice() {
            [_] => self.score_feature(label, atom),
            [w1, w2] => {
                let u1 = space.conjoined_property(atom.property, w1, clusters);
                let u2 = space.conjoined_property(atom.property, w2, clusters);
                let a = self.score_feature(label, &FeatureAtom::new(u1, vec![w2]))?;
                let b = self.score_feature(label, &FeatureAtom::new(u2, vec![w1]))?;
                Ok(a + b)
            }
            _ => Err(Error::Arity {
                expected: 2,
                found: atom.arity(),
            }),
        }
    }

    /// Prediction and posterior for one instance.
    pub fn predict(&self, inst: &FeatureInstance) -> Result<Prediction> {
        let scores = self.scores(inst, Grouping::ByWord)?;
        let posterior = softmax(&scores, choice_name(inst))?;
        Ok(Prediction {
            choice: argmax(&scores),
            posterior,
        })
    }

    /// Predictions for a batch, in input order.
    pub fn predict_batch(&self, insts: &[FeatureInstance], exec: Execution) -> Result<Vec<Prediction>> {
        par::try_map(exec, insts, |inst| self.predict(inst))
    }
}

pub(crate) fn choice_name(inst: &FeatureInstance) -> &'static str {
    match inst.choices {
        Choices::Labels(_) => "label",
        Choices::Candidates(_) => "candidate",
    }
}

/// Softmax with max subtraction. A non-finite score is reported with the
/// index of its choice.
pub fn softmax(scores: &[f64], what: &'static str) -> Result<Vec<f64>> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what, index: i });
    }
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// `log Σ exp(s)`, stable for large magnitudes.
pub fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_closed_forms() {
        let p = softmax(&[0.0, 3f64.ln()], "label").unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = softmax(&[1.5; 4], "label").unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let err = softmax(&[0.0, f64::NAN, 1.0], "label").unwrap_err();
        assert!(matches!(err, Error::NonFinite { what: "label", index: 1 }));
        assert_eq!(softmax(&[7.0], "candidate").unwrap(), vec![1.0]);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
        assert!((log_sum_exp(&[1e6, 1e6]) - (1e6 + 2f64.ln())).abs() < 1e-9);
    }
}
