use std::collections::BTreeMap;

use super::grad::{BlockGrad, GradientSet};
use crate::model::{Anchor, BlockId, Model};

/// Denominator floor of the AdaGrad update.
pub const ADAGRAD_EPS: f64 = 1e-8;

/// Accumulated squared gradients per parameter block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaGradState {
    acc: BTreeMap<BlockId, Vec<f64>>,
    eps: f64,
}

impl AdaGradState {
    pub fn new() -> Self {
        AdaGradState {
            acc: BTreeMap::new(),
            eps: ADAGRAD_EPS,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn accumulator(&self, id: BlockId) -> Option<&[f64]> {
        self.acc.get(&id).map(Vec::as_slice)
    }
}

fn anchor_value(anchor: Anchor, col_len: usize, i: usize) -> Option<f64> {
    match anchor {
        Anchor::None => None,
        Anchor::Zero => Some(0.0),
        Anchor::Identity(_) => Some(if i / col_len == i % col_len { 1.0 } else { 0.0 }),
    }
}

/// One AdaGrad step on every block in `grads`.
///
/// Each touched coordinate gets `g̃ = g + 2λ(p − a)`, where `a` is 0, or the
/// identity entry for square factors started at `I`; unanchored blocks get
/// no penalty. Then `acc += g̃²` and `p −= η g̃ / (√acc + ε)`. Sparse blocks
/// are penalized on touched columns only.
pub fn adagrad_step(model: &mut Model, grads: &GradientSet, state: &mut AdaGradState, eta: f64, lambda: f64) {
    let eps = state.eps;
    for (id, g) in grads.iter() {
        let anchor = model.block_anchor(id);
        let col_len = model.block_column_len(id).max(1);
        let Some(params) = model.block_mut(id) else {
            continue;
        };
        let acc = state
            .acc
            .entry(id)
            .or_insert_with(|| vec![0.0; params.len()]);
        let mut update = |i: usize, gi: f64| {
            let reg = match anchor_value(anchor, col_len, i) {
                Some(a) if lambda != 0.0 => 2.0 * lambda * (params[i] - a),
                _ => 0.0,
            };
            let gt = gi + reg;
            acc[i] += gt * gt;
            params[i] -= eta * gt / (acc[i].sqrt() + eps);
        };
        match g {
            BlockGrad::Dense(v) => {
                for (i, &gi) in v.iter().enumerate() {
                    update(i, gi);
                }
            }
            BlockGrad::Columns { col_len, cols } => {
                for (&c, v) in cols {
                    for (r, &gi) in v.iter().enumerate() {
                        update(c * col_len + r, gi);
                    }
                }
            }
        }
    }
}
