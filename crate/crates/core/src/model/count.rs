use crate::error::{Error, Result};

/// Sizes that determine parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Number of labels `d_1`.
    pub labels: usize,
    /// Number of non-lexical properties `d_2`.
    pub properties: usize,
    /// Embedding dimension `m`.
    pub embedding: usize,
    /// Lexical arity `n`.
    pub arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSpec {
    Full,
    /// `(r_1, r_2, r_3)`, with `r_3` shared by every lexical view.
    Tucker(usize, usize, usize),
    Cp(usize),
}

/// Parameter count of a scoring tensor in the given form:
///
/// * full: `d_1 · d_2 · m^n`
/// * tucker: `r_1 · r_2 · r_3^n + d_1 r_1 + d_2 r_2 + m r_3`
/// * cp: `r · (d_1 + d_2 + n·m)`
///
/// The Tucker count follows the tabulated formula, which charges a single
/// `m × r_3` lexical factor regardless of `n`.
pub fn param_count(spec: RankSpec, dims: ModelDims) -> Result<u128> {
    let ModelDims {
        labels,
        properties,
        embedding,
        arity,
    } = dims;
    if labels == 0 || properties == 0 || embedding == 0 || arity == 0 {
        return Err(Error::Config(format!("dimensions must be positive: {dims:?}")));
    }
    let (d1, d2, m) = (labels as u128, properties as u128, embedding as u128);
    let n = arity as u32;
    match spec {
        RankSpec::Full => Ok(d1 * d2 * m.pow(n)),
        RankSpec::Tucker(r1, r2, r3) => {
            if r1 == 0 || r2 == 0 || r3 == 0 {
                return Err(Error::Config("ranks must be positive".into()));
            }
            let (r1, r2, r3) = (r1 as u128, r2 as u128, r3 as u128);
            Ok(r1 * r2 * r3.pow(n) + d1 * r1 + d2 * r2 + m * r3)
        }
        RankSpec::Cp(r) => {
            if r == 0 {
                return Err(Error::Config("rank must be positive".into()));
            }
            Ok(r as u128 * (d1 + d2 + arity as u128 * m))
        }
    }
}
