use rand::Rng;

use super::factor::FactorMatrix;
use super::{check_cap, ViewRole};
use crate::error::{Error, Result};
use crate::flops::Tally;
use crate::tensor::{axpy, dot, mode_product, DenseTensor};

/// `𝒯 = g ×_1 W_1 ×_2 W_2 … ×_K W_K` with a core `g` of shape `r_1 × … × r_K`
/// and factors `W_i` of shape `r_i × d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    core: DenseTensor,
    factors: Vec<FactorMatrix>,
    roles: Vec<ViewRole>,
}

impl TuckerModel {
    pub fn new(core: DenseTensor, factors: Vec<FactorMatrix>, roles: Vec<ViewRole>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::Shape(format!(
                "core of order {} with {} factors",
                core.order(),
                factors.len()
            )));
        }
        if roles.len() != factors.len() {
            return Err(Error::Shape(format!(
                "{} view roles for {} factors",
                roles.len(),
                factors.len()
            )));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.rank() != core.shape()[k] {
                return Err(Error::Dimension {
                    mode: k + 1,
                    expected: core.shape()[k],
                    found: f.rank(),
                });
            }
        }
        Ok(TuckerModel {
            core,
            factors,
            roles,
        })
    }

    /// Core uniform in `[-scale, scale]`; factors per [`FactorMatrix::init`].
    pub fn init<R: Rng>(
        roles: Vec<ViewRole>,
        dims: &[usize],
        ranks: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() != ranks.len() || dims.len() != roles.len() {
            return Err(Error::Shape("dims, ranks and roles differ in length".into()));
        }
        let core = DenseTensor::from_fn(ranks.to_vec(), |_| rng.gen_range(-scale..=scale))?;
        let factors = ranks
            .iter()
            .zip(dims)
            .map(|(&r, &d)| FactorMatrix::init(r, d, scale, rng))
            .collect();
        TuckerModel::new(core, factors, roles)
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut DenseTensor {
        &mut self.core
    }

    pub fn factors(&self) -> &[FactorMatrix] {
        &self.factors
    }

    pub fn factors_mut(&mut self) -> &mut [FactorMatrix] {
        &mut self.factors
    }

    pub fn roles(&self) -> &[ViewRole] {
        &self.roles
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.shape()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(FactorMatrix::dim).collect()
    }

    pub fn num_params(&self) -> usize {
        self.core.len() + self.factors.iter().map(|f| f.data().len()).sum::<usize>()
    }

    /// Full `d_1 × … × d_K` tensor by successive mode products.
    pub fn materialize(&self, cap: usize) -> Result<DenseTensor> {
        check_cap(&self.dims(), cap)?;
        let mut t = self.core.clone();
        for (k, f) in self.factors.iter().enumerate() {
            t = mode_product(&t, &f.to_matrix(), k)?;
        }
        Ok(t)
    }

    /// Contracts every mode except the first, innermost mode first.
    /// `trailing[k]` is the hidden vector of view `k + 1`.
    pub(crate) fn leading_vector<T: Tally>(&self, trailing: &[&[f64]], tally: &mut T) -> Vec<f64> {
        debug_assert_eq!(trailing.len() + 1, self.core.order());
        let mut stage = 0;
        let mut iter = trailing.iter().rev();
        let mut cur = match iter.next() {
            Some(v) => {
                tally.record(stage, self.core.len() as u64);
                stage += 1;
                contract_back(self.core.data(), v)
            }
            None => return self.core.data().to_vec(),
        };
        for v in iter {
            tally.record(stage, cur.len() as u64);
            stage += 1;
            cur = contract_back(&cur, v);
        }
        cur
    }

    pub(crate) fn score_hidden<T: Tally>(&self, hidden: &[&[f64]], tally: &mut T) -> f64 {
        let lead = self.leading_vector(&hidden[1..], tally);
        tally.record(hidden.len() - 1, lead.len() as u64);
        dot(hidden[0], &lead)
    }

    /// `∂s/∂h_i` for every view: the core contracted with all other vectors.
    pub(crate) fn partials(&self, hidden: &[&[f64]]) -> Vec<Vec<f64>> {
        let order = self.core.order();
        (0..order)
            .map(|i| {
                let mut cur: Vec<f64> = self.core.data().to_vec();
                for k in (i + 1..order).rev() {
                    cur = contract_back(&cur, hidden[k]);
                }
                for v in &hidden[..i] {
                    cur = contract_front(&cur, v);
                }
                cur
            })
            .collect()
    }

    /// `out += weight · (h_1 ⊗ … ⊗ h_K)`, the core gradient of one score.
    pub(crate) fn add_core_grad(&self, hidden: &[&[f64]], weight: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.core.len());
        let (last, init) = hidden.split_last().expect("tensor order >= 1");
        let mut prefix = vec![weight];
        for v in init {
            let mut next = Vec::with_capacity(prefix.len() * v.len());
            for &a in &prefix {
                next.extend(v.iter().map(|&b| a * b));
            }
            prefix = next;
        }
        let n = last.len();
        for (i, &a) in prefix.iter().enumerate() {
            if a != 0.0 {
                axpy(a, last, &mut out[i * n..(i + 1) * n]);
            }
        }
    }
}

/// Contracts the last (fastest) mode of a row-major block with `v`.
fn contract_back(data: &[f64], v: &[f64]) -> Vec<f64> {
    data.chunks_exact(v.len()).map(|c| dot(c, v)).collect()
}

/// Contracts the first (slowest) mode of a row-major block with `v`.
fn contract_front(data: &[f64], v: &[f64]) -> Vec<f64> {
    let rest = data.len() / v.len();
    let mut out = vec![0.0; rest];
    for (a, &va) in v.iter().enumerate() {
        if va != 0.0 {
            axpy(va, &data[a * rest..(a + 1) * rest], &mut out);
        }
    }
    out
}
