use rand::Rng;

use super::factor::FactorMatrix;
use super::tucker::TuckerModel;
use super::{check_cap, ViewRole};
use crate::error::{Error, Result};
use crate::flops::Tally;
use crate::tensor::{outer_product, DenseTensor};

/// `𝒯 = Σ_j W_1[j,:] ⊗ … ⊗ W_K[j,:]`, every factor `r × d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    rank: usize,
    factors: Vec<FactorMatrix>,
    roles: Vec<ViewRole>,
}

impl CpModel {
    pub fn new(factors: Vec<FactorMatrix>, roles: Vec<ViewRole>) -> Result<Self> {
        let rank = factors
            .first()
            .map(FactorMatrix::rank)
            .ok_or_else(|| Error::InvalidShape("CP model without factors".into()))?;
        if let Some(k) = factors.iter().position(|f| f.rank() != rank) {
            return Err(Error::Dimension {
                mode: k + 1,
                expected: rank,
                found: factors[k].rank(),
            });
        }
        if roles.len() != factors.len() {
            return Err(Error::Shape(format!(
                "{} view roles for {} factors",
                roles.len(),
                factors.len()
            )));
        }
        Ok(CpModel {
            rank,
            factors,
            roles,
        })
    }

    pub fn init<R: Rng>(
        roles: Vec<ViewRole>,
        dims: &[usize],
        rank: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() != roles.len() {
            return Err(Error::Shape("dims and roles differ in length".into()));
        }
        let factors = dims
            .iter()
            .map(|&d| FactorMatrix::init(rank, d, scale, rng))
            .collect();
        CpModel::new(factors, roles)
    }

    pub fn rank(&self) -> usize {
        self.rank
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

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(FactorMatrix::dim).collect()
    }

    pub fn num_params(&self) -> usize {
        self.factors.iter().map(|f| f.data().len()).sum()
    }

    /// Sum of `r` outer products of factor rows.
    pub fn materialize(&self, cap: usize) -> Result<DenseTensor> {
        let dims = self.dims();
        check_cap(&dims, cap)?;
        let mut out = DenseTensor::zeros(dims)?;
        for j in 0..self.rank {
            let rows: Vec<Vec<f64>> = self.factors.iter().map(|f| f.row(j)).collect();
            let term = outer_product(&rows)?;
            for (o, t) in out.data_mut().iter_mut().zip(term.data()) {
                *o += t;
            }
        }
        Ok(out)
    }

    /// The Tucker model with a superdiagonal core and the same factors.
    pub fn as_tucker(&self) -> TuckerModel {
        let order = self.factors.len();
        let core = DenseTensor::from_fn(vec![self.rank; order], |ix| {
            if ix.iter().all(|&i| i == ix[0]) {
                1.0
            } else {
                0.0
            }
        })
        .expect("rank and order are positive");
        TuckerModel::new(core, self.factors.clone(), self.roles.clone())
            .expect("CP factors share a rank")
    }

    /// `v_j = Π_k trailing[k][j]`.
    pub(crate) fn leading_vector<T: Tally>(&self, trailing: &[&[f64]], tally: &mut T) -> Vec<f64> {
        let mut v = match trailing.first() {
            Some(first) => first.to_vec(),
            None => return vec![1.0; self.rank],
        };
        for h in &trailing[1..] {
            tally.record(0, self.rank as u64);
            for (a, b) in v.iter_mut().zip(h.iter()) {
                *a *= b;
            }
        }
        v
    }

    pub(crate) fn score_hidden<T: Tally>(&self, hidden: &[&[f64]], tally: &mut T) -> f64 {
        let lead = self.leading_vector(&hidden[1..], tally);
        tally.record(0, self.rank as u64);
        hidden[0].iter().zip(&lead).map(|(a, b)| a * b).sum()
    }

    /// `∂s/∂h_i[j] = Π_{k≠i} h_k[j]`, via prefix and suffix products.
    pub(crate) fn partials(&self, hidden: &[&[f64]]) -> Vec<Vec<f64>> {
        let order = hidden.len();
        let r = self.rank;
        let mut prefix = vec![vec![1.0; r]; order + 1];
        for k in 0..order {
            for j in 0..r {
                prefix[k + 1][j] = prefix[k][j] * hidden[k][j];
            }
        }
        let mut suffix = vec![1.0; r];
        let mut out = vec![Vec::new(); order];
        for k in (0..order).rev() {
            out[k] = (0..r).map(|j| prefix[k][j] * suffix[j]).collect();
            for j in 0..r {
                suffix[j] *= hidden[k][j];
            }
        }
        out
    }
}
