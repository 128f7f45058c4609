use std::borrow::Cow;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{axpy, Matrix};

/// Input to one view of a low-rank tensor: a one-hot index or a dense vector
/// (a pre-trained word embedding).
#[derive(Debug, Clone, Copy)]
pub enum ViewInput<'a> {
    Index(usize),
    Dense(&'a [f64]),
}

/// Transformation matrix `W` of shape `rank × dim`.
///
/// Stored column-major, so the hidden representation of a one-hot input is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rank: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rank: usize, dim: usize) -> Self {
        FactorMatrix {
            rank,
            dim,
            data: vec![0.0; rank * dim],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut f = FactorMatrix::zeros(n, n);
        for c in 0..n {
            f.data[c * n + c] = 1.0;
        }
        f
    }

    /// Identity when square, otherwise uniform in `[-scale, scale]`.
    pub fn init<R: Rng>(rank: usize, dim: usize, scale: f64, rng: &mut R) -> Self {
        if rank == dim {
            return FactorMatrix::identity(rank);
        }
        let data = (0..rank * dim)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        FactorMatrix { rank, dim, data }
    }

    pub fn from_column_major(rank: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rank == 0 || dim == 0 || data.len() != rank * dim {
            return Err(Error::InvalidShape(format!(
                "factor {}x{} with {} entries",
                rank,
                dim,
                data.len()
            )));
        }
        Ok(FactorMatrix { rank, dim, data })
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let (rank, dim) = (m.rows(), m.cols());
        let mut data = Vec::with_capacity(rank * dim);
        for c in 0..dim {
            for r in 0..rank {
                data.push(m.get(r, c));
            }
        }
        FactorMatrix { rank, dim, data }
    }

    /// Row-major `rank × dim` copy, the orientation used by `mode_product`.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rank, self.dim, |r, c| self.get(r, c))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_square(&self) -> bool {
        self.rank == self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rank + r]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rank..(c + 1) * self.rank]
    }

    /// Row `r` across all columns.
    pub fn row(&self, r: usize) -> Vec<f64> {
        (0..self.dim).map(|c| self.get(r, c)).collect()
    }

    /// `W · x` for a one-hot or dense input.
    pub fn apply<'a>(&'a self, input: ViewInput<'_>) -> Result<Cow<'a, [f64]>> {
        match input {
            ViewInput::Index(c) => {
                if c >= self.dim {
                    return Err(Error::Shape(format!(
                        "index {} outside a view of dimension {}",
                        c, self.dim
                    )));
                }
                Ok(Cow::Borrowed(self.column(c)))
            }
            ViewInput::Dense(x) => {
                if x.len() != self.dim {
                    return Err(Error::Shape(format!(
                        "dense input of length {} for a view of dimension {}",
                        x.len(),
                        self.dim
                    )));
                }
                Ok(Cow::Owned(self.mul_vec(x)))
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.rank];
        for (c, &xc) in x.iter().enumerate() {
            if xc != 0.0 {
                axpy(xc, self.column(c), &mut h);
            }
        }
        h
    }

    /// `W · (Σ count_u · e_u)` for a multiset of one-hot indices.
    pub fn apply_multiset<'a>(&'a self, items: &[(usize, u32)]) -> Result<Cow<'a, [f64]>> {
        if let Some(&(c, _)) = items.iter().find(|(c, _)| *c >= self.dim) {
            return Err(Error::Shape(format!(
                "index {} outside a view of dimension {}",
                c, self.dim
            )));
        }
        match items {
            [(c, 1)] => Ok(Cow::Borrowed(self.column(*c))),
            _ => {
                let mut h = vec![0.0; self.rank];
                for &(c, k) in items {
                    axpy(f64::from(k), self.column(c), &mut h);
                }
                Ok(Cow::Owned(h))
            }
        }
    }
}
