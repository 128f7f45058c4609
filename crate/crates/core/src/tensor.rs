//! Dense K-way tensors and the multilinear primitives the rest of the crate
//! is built on.
//!
//! Storage is row-major with the last index fastest. Mode indices are 0-based
//! in the API and reported 1-based in errors.
//!
//! The mode-k unfolding places mode-k fibers in columns. Columns are ordered
//! lexicographically over the remaining indices with the first remaining mode
//! varying slowest, which is the row-major order of the tensor with mode k
//! removed.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return Err(Error::InvalidShape(format!("mode {} has size 0", pos + 1)));
    }
    Ok(shape.iter().product())
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(Error::InvalidShape(format!(
                "shape {:?} needs {} entries, got {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(DenseTensor {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.order() {
            return Err(Error::InvalidMode {
                mode: k + 1,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Splits the shape around mode `k` into (outer, d_k, inner) extents.
    fn split(&self, k: usize) -> (usize, usize, usize) {
        let outer = self.shape[..k].iter().product();
        let inner = self.shape[k + 1..].iter().product();
        (outer, self.shape[k], inner)
    }
}

/// Advances a row-major multi-index; wraps to zero after the last entry.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "matrix {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidShape("ragged matrix rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    /// A single column vector.
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        Matrix::new(v.len(), 1, v.to_vec())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }
}

/// k-mode product `t ×_k m` where `m` is `d_k × J`.
///
/// `result[.., j, ..] = Σ_a t[.., a, ..] · m[a, j]`.
pub fn mode_product(t: &DenseTensor, m: &Matrix, k: usize) -> Result<DenseTensor> {
    t.check_mode(k)?;
    let (outer, dk, inner) = t.split(k);
    if m.rows != dk {
        return Err(Error::Dimension {
            mode: k + 1,
            expected: dk,
            found: m.rows,
        });
    }
    let j_len = m.cols;
    let mut shape = t.shape.clone();
    shape[k] = j_len;
    let mut out = vec![0.0; outer * j_len * inner];
    for o in 0..outer {
        let src = &t.data[o * dk * inner..(o + 1) * dk * inner];
        let dst = &mut out[o * j_len * inner..(o + 1) * j_len * inner];
        for a in 0..dk {
            let fiber = &src[a * inner..(a + 1) * inner];
            for j in 0..j_len {
                let w = m.get(a, j);
                if w == 0.0 {
                    continue;
                }
                let row = &mut dst[j * inner..(j + 1) * inner];
                for (d, s) in row.iter_mut().zip(fiber) {
                    *d += s * w;
                }
            }
        }
    }
    Ok(DenseTensor { shape, data: out })
}

/// Mode-k unfolding, a `d_k × Π_{i≠k} d_i` matrix.
pub fn unfold(t: &DenseTensor, k: usize) -> Result<Matrix> {
    t.check_mode(k)?;
    let (outer, dk, inner) = t.split(k);
    let cols = outer * inner;
    let mut data = vec![0.0; dk * cols];
    for o in 0..outer {
        for a in 0..dk {
            for i in 0..inner {
                data[a * cols + o * inner + i] = t.data[(o * dk + a) * inner + i];
            }
        }
    }
    Matrix::new(dk, cols, data)
}

/// Inverse of [`unfold`].
pub fn refold(m: &Matrix, k: usize, shape: &[usize]) -> Result<DenseTensor> {
    let t = DenseTensor::zeros(shape.to_vec())?;
    t.check_mode(k)?;
    let (outer, dk, inner) = t.split(k);
    if m.rows != dk || m.cols != outer * inner {
        return Err(Error::Shape(format!(
            "a {}x{} matrix is not a mode-{} unfolding of {:?}",
            m.rows,
            m.cols,
            k + 1,
            shape
        )));
    }
    let mut data = t.data;
    let cols = m.cols;
    for o in 0..outer {
        for a in 0..dk {
            for i in 0..inner {
                data[(o * dk + a) * inner + i] = m.data[a * cols + o * inner + i];
            }
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}

/// Outer product `v_1 ⊗ … ⊗ v_K`.
pub fn outer_product<V: AsRef<[f64]>>(vectors: &[V]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(Error::InvalidShape("outer product of zero vectors".into()));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.as_ref().len()).collect();
    check_shape(&shape)?;
    let mut data = vec![1.0];
    for v in vectors {
        let v = v.as_ref();
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &a in &data {
            next.extend(v.iter().map(|&b| a * b));
        }
        data = next;
    }
    DenseTensor::new(shape, data)
}

/// Frobenius (entrywise) inner product.
pub fn frobenius_dot(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!(
            "frobenius product of {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    Ok(dot(&a.data, &b.data))
}

pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "hadamard product of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (d, s) in y.iter_mut().zip(x) {
        *d += alpha * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(shape: &[usize]) -> DenseTensor {
        let n = shape.iter().product::<usize>();
        DenseTensor::new(shape.to_vec(), (0..n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn identity_mode_product_is_noop() {
        let t = iota(&[2, 3, 4]);
        for k in 0..3 {
            let out = mode_product(&t, &Matrix::identity(t.shape()[k]), k).unwrap();
            assert_eq!(out, t);
        }
    }

    #[test]
    fn matrix_times_ones_vector() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Matrix::column_vector(&[1.0, 1.0]).unwrap();
        let out = mode_product(&t, &x, 0).unwrap();
        assert_eq!(out.shape(), &[1, 2]);
        assert_eq!(out.data(), &[4.0, 6.0]);
    }

    #[test]
    fn selecting_a_frontal_slice() {
        // t[i,j,l] = i + 2j + 4l, contracted on mode 3 with e_1
        let t = DenseTensor::from_fn(vec![2, 2, 2], |ix| (ix[0] + 2 * ix[1] + 4 * ix[2]) as f64)
            .unwrap();
        let x = Matrix::column_vector(&[1.0, 0.0]).unwrap();
        let out = mode_product(&t, &x, 2).unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert_eq!(out.data(), &[0.0, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn mode_product_rejects_bad_rows() {
        let t = iota(&[2, 3]);
        let err = mode_product(&t, &Matrix::identity(2), 1).unwrap_err();
        assert!(matches!(err, Error::Dimension { mode: 2, expected: 3, found: 2 }));
        assert!(err.to_string().contains("mode 2"));
        assert!(matches!(
            mode_product(&t, &Matrix::identity(2), 2),
            Err(Error::InvalidMode { mode: 3, order: 2 })
        ));
    }

    #[test]
    fn unfold_matrix_mode_one_is_itself() {
        let t = iota(&[2, 2]);
        let m = unfold(&t, 0).unwrap();
        assert_eq!(m.data(), t.data());
    }

    #[test]
    fn unfold_column_order_is_golden() {
        // columns enumerate (i1, i3) with i1 slowest
        let t = iota(&[2, 2, 2]);
        let m = unfold(&t, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        assert_eq!(m.row(0), &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(m.row(1), &[2.0, 3.0, 6.0, 7.0]);
        assert!(unfold(&t, 3).is_err());
    }

    #[test]
    fn outer_products() {
        let t = outer_product(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);

        let t = outer_product(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(t.data(), &[3.0, 4.0, 6.0, 8.0]);

        let t = outer_product(&[vec![1.5, -2.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));

        assert!(outer_product::<Vec<f64>>(&[]).is_err());
        assert!(outer_product(&[Vec::<f64>::new()]).is_err());
    }

    #[test]
    fn frobenius_and_hadamard() {
        let t = iota(&[2, 3]);
        let ones = DenseTensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(frobenius_dot(&t, &ones).unwrap(), 15.0);
        let sel = outer_product(&[vec![0.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(frobenius_dot(&sel, &t).unwrap(), t.get(&[1, 2]));
        assert!(frobenius_dot(&t, &iota(&[3, 2])).is_err());
        assert_eq!(
            hadamard(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(),
            vec![4.0, 10.0, 18.0]
        );
        assert!(hadamard(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn shape_invariants() {
        assert!(DenseTensor::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![1.0; 3]).is_err());
    }
}
