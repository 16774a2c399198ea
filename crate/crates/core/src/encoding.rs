//! Per-class context vectors, 0-1 loss, reward targets and the
//! derivative-context embedding fed to the exploration network.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::nn::{MlpParams, Workspace};
use crate::vector::{Features, SparseVec};

/// Tolerance on `‖context‖₂ = 1` accepted by [`dc_embedding`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// The `k` block-padded context vectors of one instance.
///
/// Context `i` has length `d·k` and holds `x` in coordinates `[i·d, (i+1)·d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextSet {
    x: Vec<f64>,
    k: usize,
    pub true_class: Option<usize>,
}

/// Reward targets for one context: `r1` for the exploitation network and the
/// residual `r2 = r1 - f1(context)` for the exploration network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardPair {
    pub r1: f64,
    pub r2: f64,
}

pub fn build_contexts(x: &[f64], k: usize) -> Result<ContextSet> {
    if k < 2 {
        return Err(Error::Config(format!("class count {k} must be >= 2")));
    }
    if x.is_empty() {
        return Err(Error::InvalidDimensions("empty instance".into()));
    }
    Ok(ContextSet {
        x: x.to_vec(),
        k,
        true_class: None,
    })
}

impl ContextSet {
    pub fn with_label(mut self, label: usize) -> Self {
        self.true_class = Some(label);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Raw feature dimension `d`.
    pub fn d(&self) -> usize {
        self.x.len()
    }

    /// Context length `d·k`.
    pub fn context_dim(&self) -> usize {
        self.x.len() * self.k
    }

    pub fn raw(&self) -> &[f64] {
        &self.x
    }

    pub fn context(&self, i: usize) -> SparseVec {
        assert!(i < self.k, "class index {i} out of range");
        SparseVec::from_dense_at(self.context_dim(), i * self.d(), &self.x, 1.0)
    }

    pub fn dense_context(&self, i: usize) -> Vec<f64> {
        self.context(i).to_dense()
    }

    pub fn contexts(&self) -> Vec<SparseVec> {
        (0..self.k).map(|i| self.context(i)).collect()
    }
}

pub fn zero_one_loss(pred_class: usize, true_class: usize) -> u8 {
    u8::from(pred_class != true_class)
}

/// Full-feedback rewards for every context given the (true or pseudo) label.
pub fn rewards_for_label(k: usize, label_class: usize, f1_scores: &[f64]) -> Result<Vec<RewardPair>> {
    if label_class >= k {
        return Err(Error::Config(format!("label {label_class} out of range for k={k}")));
    }
    if f1_scores.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: f1_scores.len(),
        });
    }
    Ok(f1_scores
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let r1 = 1.0 - f64::from(zero_one_loss(i, label_class));
            RewardPair { r1, r2: r1 - s }
        })
        .collect())
}

/// Derivative-context embedding `φ = (∇ₓf1 / (√2‖∇ₓf1‖), x / √2)`.
///
/// When the input gradient vanishes the first half is zero and the second
/// half is the context itself, so `‖φ‖₂ = 1` either way.
pub fn dc_embedding<X: Features + ?Sized>(f1: &MlpParams, context: &X) -> Result<SparseVec> {
    if context.dim() != f1.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: f1.input_dim(),
            got: context.dim(),
        });
    }
    let mut ws = Workspace::new(f1);
    let mut grad = vec![0.0; f1.input_dim()];
    Ok(dc_embedding_with(f1, context, &mut ws, &mut grad)?.1)
}

/// Same as [`dc_embedding`] with caller-provided scratch; also returns `f1(context)`.
pub(crate) fn dc_embedding_with<X: Features + ?Sized>(
    f1: &MlpParams,
    context: &X,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> Result<(f64, SparseVec)> {
    let norm = context.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm(norm));
    }
    let dim = f1.input_dim();
    let score = f1.forward_ws(context, ws);
    f1.backward_ws(context, 1.0, ws, None, Some(grad));
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut phi = SparseVec::zeros(2 * dim);
    let mut block = vec![0.0; dim];
    if gnorm > 0.0 {
        phi.extend_block(0, grad, 1.0 / (SQRT_2 * gnorm));
        context.for_each_nonzero(|j, v| block[j] = v);
        phi.extend_block(dim, &block, 1.0 / SQRT_2);
    } else {
        context.for_each_nonzero(|j, v| block[j] = v);
        phi.extend_block(dim, &block, 1.0);
    }
    Ok((score, phi))
}
