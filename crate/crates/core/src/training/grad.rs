use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{Choices, FeatureInstance, FeatureSet, Grouping};
use crate::model::{BlockId, LowRankTensor, Model, Task, WordEncoding};
use crate::scoring::{choice_name, log_sum_exp, softmax, Scorer};

/// Gradient of one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockGrad {
    Dense(Vec<f64>),
    /// Touched columns only; column `c` covers `c * col_len .. (c + 1) * col_len`.
    Columns {
        col_len: usize,
        cols: BTreeMap<usize, Vec<f64>>,
    },
}

impl BlockGrad {
    /// Writes the gradient into a dense array of the block's full length.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        match self {
            BlockGrad::Dense(v) => v.clone(),
            BlockGrad::Columns { col_len, cols } => {
                let mut out = vec![0.0; len];
                for (&c, v) in cols {
                    out[c * col_len..(c + 1) * col_len].copy_from_slice(v);
                }
                out
            }
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            BlockGrad::Dense(v) => Box::new(v.iter().copied()),
            BlockGrad::Columns { cols, .. } => Box::new(cols.values().flatten().copied()),
        }
    }
}

/// Sparse loss gradient over a model's parameter blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientSet {
    blocks: BTreeMap<BlockId, BlockGrad>,
}

impl GradientSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: BlockId) -> Option<&BlockGrad> {
        self.blocks.get(&id)
    }

    pub fn get_mut(&mut self, id: BlockId) -> Option<&mut BlockGrad> {
        self.blocks.get_mut(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &BlockGrad)> {
        self.blocks.iter().map(|(&k, v)| (k, v))
    }

    pub fn insert(&mut self, id: BlockId, g: BlockGrad) {
        self.blocks.insert(id, g);
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.blocks
            .values()
            .flat_map(BlockGrad::values)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn dense(&mut self, id: BlockId, len: usize) -> &mut [f64] {
        match self
            .blocks
            .entry(id)
            .or_insert_with(|| BlockGrad::Dense(vec![0.0; len]))
        {
            BlockGrad::Dense(v) => v,
            BlockGrad::Columns { .. } => unreachable!("block {id} is sparse"),
        }
    }

    fn column(&mut self, id: BlockId, col_len: usize, c: usize) -> &mut [f64] {
        match self.blocks.entry(id).or_insert_with(|| BlockGrad::Columns {
            col_len,
            cols: BTreeMap::new(),
        }) {
            BlockGrad::Columns { cols, .. } => cols.entry(c).or_insert_with(|| vec![0.0; col_len]),
            BlockGrad::Dense(_) => unreachable!("block {id} is dense"),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (id, g) in &self.blocks {
            if let Some(i) = g.values().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: block_kind(*id),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

fn block_kind(id: BlockId) -> &'static str {
    match id {
        BlockId::Core { .. } => "core gradient entry",
        BlockId::Factor { .. } => "factor gradient entry",
        BlockId::Embeddings => "embedding gradient entry",
    }
}

fn gold_of(inst: &FeatureInstance, size: usize) -> Result<usize> {
    let g = inst.gold.ok_or(Error::Unlabeled)?;
    if g >= size {
        return Err(Error::GoldMissing {
            what: choice_name(inst),
            index: g,
            size,
        });
    }
    Ok(g)
}

fn check_task(model: &Model, inst: &FeatureInstance) -> Result<()> {
    match (&inst.choices, model.task()) {
        (Choices::Labels(_), Task::Classify { .. }) | (Choices::Candidates(_), Task::Rank) => Ok(()),
        (Choices::Labels(_), Task::Rank) => Err(Error::Config(
            "classification instance given to a ranking model".into(),
        )),
        (Choices::Candidates(_), Task::Classify { .. }) => Err(Error::Config(
            "ranking instance given to a classification model".into(),
        )),
    }
}

/// Negative log posterior of the gold choice. Regularization is not included.
pub fn loss(model: &Model, inst: &FeatureInstance) -> Result<f64> {
    loss_with(model, inst, Grouping::ByWord)
}

pub fn loss_with(model: &Model, inst: &FeatureInstance, grouping: Grouping) -> Result<f64> {
    check_task(model, inst)?;
    let scores = Scorer::new(model).scores(inst, grouping)?;
    let gold = gold_of(inst, scores.len())?;
    softmax(&scores, choice_name(inst))?;
    Ok(log_sum_exp(&scores) - scores[gold])
}

/// Loss and its gradient with respect to every trainable block.
pub fn gradients(model: &Model, inst: &FeatureInstance) -> Result<(f64, GradientSet)> {
    gradients_with(model, inst, Grouping::ByWord)
}

pub fn gradients_with(
    model: &Model,
    inst: &FeatureInstance,
    grouping: Grouping,
) -> Result<(f64, GradientSet)> {
    check_task(model, inst)?;
    let scorer = Scorer::new(model);
    let scores = scorer.scores(inst, grouping)?;
    let gold = gold_of(inst, scores.len())?;
    let p = softmax(&scores, choice_name(inst))?;
    let loss = log_sum_exp(&scores) - scores[gold];
    let residual: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk - if k == gold { 1.0 } else { 0.0 })
        .collect();

    let mut grads = GradientSet::new();
    match &inst.choices {
        Choices::Labels(set) => {
            accumulate_set(&scorer, set, grouping, Weighting::Labels(&residual), &mut grads)?
        }
        Choices::Candidates(cands) => {
            for (set, &c) in cands.iter().zip(&residual) {
                if c != 0.0 {
                    accumulate_set(&scorer, set, grouping, Weighting::Scalar(c), &mut grads)?;
                }
            }
        }
    }
    grads.check_finite()?;
    Ok((loss, grads))
}

enum Weighting<'a> {
    /// `∂ℓ/∂s_y` for every label.
    Labels(&'a [f64]),
    /// `∂ℓ/∂s` of a candidate.
    Scalar(f64),
}

fn accumulate_set(
    scorer: &Scorer<'_>,
    set: &FeatureSet,
    grouping: Grouping,
    weighting: Weighting<'_>,
    grads: &mut GradientSet,
) -> Result<()> {
    let model = scorer.model();
    let pv = model.property_view();
    for (n, _) in set.partitions() {
        let t = model.tensor(n).ok_or(Error::MissingTensor(n))?;
        // Label view: the residual-weighted mix of label vectors stands in
        // for the label hidden vector, by linearity.
        let (label_mix, scale) = match weighting {
            Weighting::Labels(c) => {
                let f = &t.factors()[0];
                let mut mix = vec![0.0; f.rank()];
                for (y, &cy) in c.iter().enumerate() {
                    for (m, w) in mix.iter_mut().zip(f.column(y)) {
                        *m += cy * w;
                    }
                }
                (Some(mix), 1.0)
            }
            Weighting::Scalar(c) => (None, c),
        };
        let mut lead_sum = label_mix.as_ref().map(|m| vec![0.0; m.len()]);

        for unit in set.units(n, grouping) {
            let rest = scorer.unit_hidden(t, n, &unit.words, &unit.properties)?;
            let mut hidden: Vec<&[f64]> = Vec::with_capacity(rest.len() + 1);
            if let Some(m) = &label_mix {
                hidden.push(m);
            }
            hidden.extend(rest.iter().map(|h| h.as_ref()));
            let mut partials = t.partials(&hidden);
            if scale != 1.0 {
                for p in &mut partials {
                    p.iter_mut().for_each(|x| *x *= scale);
                }
            }

            if let LowRankTensor::Tucker(tk) = t {
                let id = BlockId::Core { arity: n };
                let out = grads.dense(id, tk.core().len());
                tk.add_core_grad(&hidden, scale, out);
            }
            if let Some(sum) = lead_sum.as_mut() {
                for (s, v) in sum.iter_mut().zip(&partials[0]) {
                    *s += v;
                }
            }
            let pf = &partials[pv];
            let rank = pf.len();
            for &(u, count) in &unit.properties {
                let col = grads.column(BlockId::Factor { arity: n, view: pv }, rank, u);
                for (g, v) in col.iter_mut().zip(pf) {
                    *g += count as f64 * v;
                }
            }
            for (slot, &w) in unit.words.iter().enumerate() {
                let view = pv + 1 + slot;
                add_word_grad(model, t, n, view, w, &partials[view], grads);
            }
        }

        if let (Weighting::Labels(c), Some(sum)) = (&weighting, lead_sum) {
            let id = BlockId::Factor { arity: n, view: 0 };
            for (y, &cy) in c.iter().enumerate() {
                let col = grads.column(id, sum.len(), y);
                for (g, v) in col.iter_mut().zip(&sum) {
                    *g += cy * v;
                }
            }
        }
    }
    Ok(())
}

fn add_word_grad(
    model: &Model,
    t: &LowRankTensor,
    arity: usize,
    view: usize,
    w: usize,
    partial: &[f64],
    grads: &mut GradientSet,
) {
    let f = &t.factors()[view];
    let rank = f.rank();
    let id = BlockId::Factor { arity, view };
    match model.words() {
        WordEncoding::OneHot { .. } => {
            let col = grads.column(id, rank, w);
            for (g, v) in col.iter_mut().zip(partial) {
                *g += v;
            }
        }
        WordEncoding::Embedded(e) => {
            let x = e.row(w);
            for (c, &xc) in x.iter().enumerate() {
                let col = grads.column(id, rank, c);
                for (g, v) in col.iter_mut().zip(partial) {
                    *g += xc * v;
                }
            }
            if model.fine_tune() {
                let dim = e.dim();
                let row = grads.column(BlockId::Embeddings, dim, w);
                for (c, g) in row.iter_mut().enumerate() {
                    *g += crate::tensor::dot(f.column(c), partial);
                }
            }
        }
    }
}
