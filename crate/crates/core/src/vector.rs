//! Feature vectors as seen by the networks.
//!
//! Context vectors are mostly zero (one populated block out of `k`), so the
//! history buffers store them sparsely. Both dense slices and [`SparseVec`]
//! implement [`Features`]; the network kernels only visit non-zero entries,
//! which gives bit-identical results for either representation.

use serde::{Deserialize, Serialize};

/// Read-only view over a feature vector.
pub trait Features {
    fn dim(&self) -> usize;

    /// Visits every non-zero coordinate in increasing index order.
    fn for_each_nonzero<F: FnMut(usize, f64)>(&self, f: F);

    fn norm(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_nonzero(|_, v| acc += v * v);
        acc.sqrt()
    }
}

impl Features for [f64] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero<F: FnMut(usize, f64)>(&self, mut f: F) {
        for (j, &v) in self.iter().enumerate() {
            if v != 0.0 {
                f(j, v);
            }
        }
    }
}

impl Features for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero<F: FnMut(usize, f64)>(&self, f: F) {
        self.as_slice().for_each_nonzero(f)
    }
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_dense_at(values.len(), 0, values, 1.0)
    }

    /// Builds a `dim`-length vector holding `scale * block` starting at `offset`.
    pub fn from_dense_at(dim: usize, offset: usize, block: &[f64], scale: f64) -> Self {
        assert!(offset + block.len() <= dim, "block exceeds vector length");
        let mut out = Self::zeros(dim);
        out.extend_block(offset, block, scale);
        out
    }

    /// Appends `scale * block` at `offset`; `offset` must be past every stored index.
    pub(crate) fn extend_block(&mut self, offset: usize, block: &[f64], scale: f64) {
        debug_assert!(self.indices.last().is_none_or(|&i| (i as usize) < offset));
        for (j, &v) in block.iter().enumerate() {
            let v = v * scale;
            if v != 0.0 {
                self.indices.push((offset + j) as u32);
                self.values.push(v);
            }
        }
    }

    pub(crate) fn len_u32(&self) -> crate::Result<u32> {
        u32::try_from(self.dim)
            .map_err(|_| crate::Error::InvalidDimensions(format!("dim {} exceeds u32", self.dim)))
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    pub(crate) fn from_parts(dim: usize, indices: Vec<u32>, values: Vec<f64>) -> Option<Self> {
        if indices.len() != values.len() {
            return None;
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        if indices.last().is_some_and(|&i| i as usize >= dim) {
            return None;
        }
        if values.contains(&0.0) {
            return None;
        }
        Some(Self {
            dim,
            indices,
            values,
        })
    }
}

impl Features for SparseVec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn for_each_nonzero<F: FnMut(usize, f64)>(&self, mut f: F) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            f(i as usize, v);
        }
    }
}

/// Dot product with four independent accumulators (fixed summation order).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
