use super::grad::{gradients, loss, GradientSet};
use crate::error::Result;
use crate::features::FeatureInstance;
use crate::model::{BlockId, Model};
use crate::par::{self, Execution};

/// Default central-difference step.
pub const FD_EPS: f64 = 1e-5;

/// Denominator floor of the relative error, for blocks whose gradient is
/// essentially zero.
pub const FD_FLOOR: f64 = 1e-8;

/// Agreement of one block's analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub block: BlockId,
    pub len: usize,
    pub max_abs_error: f64,
    /// `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞, floor)`.
    pub rel_error: f64,
}

/// Compares [`gradients`] with central differences of [`loss`] on every
/// trainable block, including fine-tuned embeddings.
pub fn finite_diff_check(
    model: &Model,
    inst: &FeatureInstance,
    eps: f64,
    exec: Execution,
) -> Result<Vec<BlockCheck>> {
    let (_, grads) = gradients(model, inst)?;
    compare_gradients(model, inst, &grads, eps, exec)
}

/// Like [`finite_diff_check`] against a caller-supplied gradient.
pub fn compare_gradients(
    model: &Model,
    inst: &FeatureInstance,
    grads: &GradientSet,
    eps: f64,
    exec: Execution,
) -> Result<Vec<BlockCheck>> {
    let mut out = Vec::new();
    for id in model.block_ids() {
        let len = model.block(id).map_or(0, <[f64]>::len);
        let analytic = grads
            .get(id)
            .map_or_else(|| vec![0.0; len], |g| g.to_dense(len));
        let numeric = numeric_block(model, inst, id, len, eps, exec)?;
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_abs_error = analytic
            .iter()
            .zip(&numeric)
            .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        let denom = norm(&analytic).max(norm(&numeric)).max(FD_FLOOR);
        out.push(BlockCheck {
            block: id,
            len,
            max_abs_error,
            rel_error: max_abs_error / denom,
        });
    }
    Ok(out)
}

fn numeric_block(
    model: &Model,
    inst: &FeatureInstance,
    id: BlockId,
    len: usize,
    eps: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 64;
    let chunks = len.div_ceil(CHUNK);
    let parts = par::map_range(exec, chunks, |k| -> Result<Vec<f64>> {
        let mut m = model.clone();
        let mut part = Vec::with_capacity(CHUNK);
        for i in k * CHUNK..((k + 1) * CHUNK).min(len) {
            let orig = m.block(id).expect("block exists")[i];
            m.block_mut(id).expect("block exists")[i] = orig + eps;
            let plus = loss(&m, inst)?;
            m.block_mut(id).expect("block exists")[i] = orig - eps;
            let minus = loss(&m, inst)?;
            m.block_mut(id).expect("block exists")[i] = orig;
            part.push((plus - minus) / (2.0 * eps));
        }
        Ok(part)
    });
    let mut out = Vec::with_capacity(len);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Largest relative error over all blocks, 0 when there are none.
pub fn max_rel_error(checks: &[BlockCheck]) -> f64 {
    checks.iter().fold(0.0, |m, c| m.max(c.rel_error))
}
