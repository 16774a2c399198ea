//! Bias-free fully-connected ReLU networks with a scalar output.
//!
//! A network of depth `L` maps `x` to `W_L σ(W_{L-1} σ(... σ(W_1 x)))` where
//! `W_1` is `m × d_in`, the middle layers are `m × m` and `W_L` is `1 × m`.
//! Weights are stored column-major so that the forward pass and the weight
//! gradient are both sums of scaled columns, and zero inputs can be skipped.
//!
//! The ReLU subgradient at zero is taken to be zero.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{axpy, dot, Features};

const SNAPSHOT_MAGIC: &[u8; 4] = b"MLP1";

/// Dense matrix stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[c * rows + r] = values[r * cols + c];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// All entries, in storage (column-major) order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }
}

/// Weights of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    input_dim: usize,
    width: usize,
    layers: Vec<Matrix>,
}

fn check_shape(input_dim: usize, width: usize, depth: usize) -> Result<()> {
    if input_dim == 0 || width == 0 {
        return Err(Error::InvalidDimensions(format!(
            "input_dim={input_dim} width={width} must be positive"
        )));
    }
    if depth < 2 {
        return Err(Error::InvalidDimensions(format!("depth={depth} must be >= 2")));
    }
    if input_dim > u32::MAX as usize || width > u32::MAX as usize || depth > u32::MAX as usize {
        return Err(Error::InvalidDimensions("dimension exceeds u32".into()));
    }
    Ok(())
}

fn layer_shape(input_dim: usize, width: usize, depth: usize, l: usize) -> (usize, usize) {
    match l {
        0 => (width, input_dim),
        l if l == depth - 1 => (1, width),
        _ => (width, width),
    }
}

impl MlpParams {
    pub fn zeros(input_dim: usize, width: usize, depth: usize) -> Result<Self> {
        check_shape(input_dim, width, depth)?;
        let layers = (0..depth)
            .map(|l| {
                let (r, c) = layer_shape(input_dim, width, depth, l);
                Matrix::zeros(r, c)
            })
            .collect();
        Ok(Self {
            input_dim,
            width,
            layers,
        })
    }

    /// Builds a network from row-major layer matrices `W_1, ..., W_L`.
    pub fn from_layers(layers: Vec<Matrix>) -> Result<Self> {
        let depth = layers.len();
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidDimensions("no layers".into()))?;
        let (width, input_dim) = (first.rows, first.cols);
        check_shape(input_dim, width, depth)?;
        for (l, w) in layers.iter().enumerate() {
            let expect = layer_shape(input_dim, width, depth, l);
            if (w.rows, w.cols) != expect {
                return Err(Error::InvalidDimensions(format!(
                    "layer {l} is {}x{}, expected {}x{}",
                    w.rows, w.cols, expect.0, expect.1
                )));
            }
        }
        let p = Self {
            input_dim,
            width,
            layers,
        };
        if !p.is_finite() {
            return Err(Error::NonFinite("weights"));
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            width: self.width,
            layers: self
                .layers
                .iter()
                .map(|w| Matrix::zeros(w.rows, w.cols))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut Matrix {
        &mut self.layers[l]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|w| w.data.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.width == other.width
            && self.layers.len() == other.layers.len()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|w| w.is_finite())
    }

    /// Iterates over every weight (layer by layer, storage order).
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|w| w.data.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|w| w.data.iter_mut())
    }

    pub fn scale(&mut self, s: f64) {
        self.iter_mut().for_each(|w| *w *= s);
    }

    pub fn fill_zero(&mut self) {
        self.iter_mut().for_each(|w| *w = 0.0);
    }

    fn check_input<X: Features + ?Sized>(&self, x: &X) -> Result<()> {
        if x.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    pub fn forward<X: Features + ?Sized>(&self, x: &X) -> Result<f64> {
        self.check_input(x)?;
        let mut ws = Workspace::new(self);
        Ok(self.forward_ws(x, &mut ws))
    }

    /// `upstream · ∂f(x)/∂θ`, shaped like the parameters.
    pub fn grad_params<X: Features + ?Sized>(&self, x: &X, upstream: f64) -> Result<MlpParams> {
        self.check_input(x)?;
        let mut ws = Workspace::new(self);
        let mut grad = self.zeros_like();
        self.forward_ws(x, &mut ws);
        self.backward_ws(x, upstream, &mut ws, Some(&mut grad), None);
        Ok(grad)
    }

    /// `∂f(x)/∂x`.
    pub fn grad_input<X: Features + ?Sized>(&self, x: &X) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = Workspace::new(self);
        let mut out = vec![0.0; self.input_dim];
        self.forward_ws(x, &mut ws);
        self.backward_ws(x, 1.0, &mut ws, None, Some(&mut out));
        Ok(out)
    }

    pub(crate) fn forward_ws<X: Features + ?Sized>(&self, x: &X, ws: &mut Workspace) -> f64 {
        let hidden = self.layers.len() - 1;
        ws.pre[0].iter_mut().for_each(|z| *z = 0.0);
        {
            let w = &self.layers[0];
            let z = &mut ws.pre[0];
            x.for_each_nonzero(|j, v| axpy(v, w.col(j), z));
        }
        relu_into(&ws.pre[0], &mut ws.act[0]);
        for l in 1..hidden {
            let (prev, rest) = ws.act.split_at_mut(l);
            let input = &prev[l - 1];
            let z = &mut ws.pre[l];
            z.iter_mut().for_each(|v| *v = 0.0);
            let w = &self.layers[l];
            for (c, &a) in input.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, w.col(c), z);
                }
            }
            relu_into(z, &mut rest[0]);
        }
        dot(&self.layers[hidden].data, &ws.act[hidden - 1])
    }

    /// Backpropagates `upstream` through the activations left in `ws` by
    /// [`Self::forward_ws`] on the same `x`. Accumulates into `grad` and/or
    /// writes the input gradient into `input_grad`.
    pub(crate) fn backward_ws<X: Features + ?Sized>(
        &self,
        x: &X,
        upstream: f64,
        ws: &mut Workspace,
        mut grad: Option<&mut MlpParams>,
        input_grad: Option<&mut [f64]>,
    ) {
        let hidden = self.layers.len() - 1;
        if let Some(g) = grad.as_deref_mut() {
            axpy(upstream, &ws.act[hidden - 1], &mut g.layers[hidden].data);
        }
        let w_out = &self.layers[hidden].data;
        for (c, d) in ws.delta.iter_mut().enumerate() {
            *d = if ws.pre[hidden - 1][c] > 0.0 {
                upstream * w_out[c]
            } else {
                0.0
            };
        }
        for l in (0..hidden).rev() {
            if let Some(g) = grad.as_deref_mut() {
                let gw = &mut g.layers[l];
                let delta = &ws.delta;
                if l == 0 {
                    x.for_each_nonzero(|j, v| axpy(v, delta, gw.col_mut(j)));
                } else {
                    for (c, &a) in ws.act[l - 1].iter().enumerate() {
                        if a != 0.0 {
                            axpy(a, delta, gw.col_mut(c));
                        }
                    }
                }
            }
            if l > 0 {
                let w = &self.layers[l];
                for c in 0..self.width {
                    ws.delta_prev[c] = if ws.pre[l - 1][c] > 0.0 {
                        dot(w.col(c), &ws.delta)
                    } else {
                        0.0
                    };
                }
                std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
        }
        if let Some(out) = input_grad {
            let w = &self.layers[0];
            for (j, o) in out.iter_mut().enumerate() {
                *o = dot(w.col(j), &ws.delta);
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.param_count());
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Writes the `MLP1` snapshot: magic, `d_in`, `m`, `L` as little-endian
    /// u32, then each layer's weights row-major as little-endian f64.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        for v in [self.input_dim, self.width, self.layers.len()] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for layer in &self.layers {
            for v in layer.to_row_major() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let p = Self::read_from(&mut bytes)?;
        if !bytes.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after MLP1 snapshot",
                bytes.len()
            )));
        }
        Ok(p)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Format(format!("bad MLP snapshot magic {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let [input_dim, width, depth] = dims;
        check_shape(input_dim, width, depth)?;
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let (rows, cols) = layer_shape(input_dim, width, depth, l);
            let mut values = vec![0.0; rows * cols];
            let mut b = [0u8; 8];
            for v in &mut values {
                r.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
            layers.push(Matrix::from_row_major(rows, cols, &values)?);
        }
        Self::from_layers(layers)
    }
}

fn relu_into(pre: &[f64], act: &mut [f64]) {
    for (a, &z) in act.iter_mut().zip(pre) {
        *a = if z > 0.0 { z } else { 0.0 };
    }
}

/// Scratch buffers for one forward/backward pass.
#[derive(Clone, Debug)]
pub struct Workspace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    pub fn new(params: &MlpParams) -> Self {
        let hidden = params.depth() - 1;
        let m = params.width();
        Self {
            pre: vec![vec![0.0; m]; hidden],
            act: vec![vec![0.0; m]; hidden],
            delta: vec![0.0; m],
            delta_prev: vec![0.0; m],
        }
    }

    /// Hidden pre-activations of the last forward pass, one vector per layer.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

/// Samples a network with hidden entries from `N(0, 2/m)` and output entries
/// from `N(0, 1/m)`, layer by layer in row-major order.
pub fn init_mlp(input_dim: usize, width: usize, depth: usize, seed: u64) -> Result<MlpParams> {
    let mut params = MlpParams::zeros(input_dim, width, depth)?;
    let mut rng = Pcg64::seed_from_u64(seed);
    let m = width as f64;
    let hidden = Normal::new(0.0, (2.0 / m).sqrt()).expect("valid normal");
    let output = Normal::new(0.0, (1.0 / m).sqrt()).expect("valid normal");
    for l in 0..depth {
        let dist = if l == depth - 1 { &output } else { &hidden };
        let w = &mut params.layers[l];
        for r in 0..w.rows {
            for c in 0..w.cols {
                w.set(r, c, dist.sample(&mut rng));
            }
        }
    }
    Ok(params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    PlainSgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn plain_sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::PlainSgd,
            learning_rate,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::adam(),
            learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.kind {
            let open_unit = |b: f64| b > 0.0 && b < 1.0;
            if !open_unit(beta1) || !open_unit(beta2) || !(eps > 0.0) {
                return Err(Error::Config(format!(
                    "adam constants out of range: beta1={beta1} beta2={beta2} eps={eps}"
                )));
            }
        }
        Ok(())
    }
}

/// Optimizer configuration plus its running state.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    step: u64,
    moments: Option<(MlpParams, MlpParams)>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &MlpParams) -> Result<Self> {
        config.validate()?;
        let moments = match config.kind {
            OptimizerKind::PlainSgd => None,
            OptimizerKind::Adam { .. } => Some((params.zeros_like(), params.zeros_like())),
        };
        Ok(Self {
            config,
            step: 0,
            moments,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// First and second moment accumulators (adaptive-moment only).
    pub fn moments(&self) -> Option<(&MlpParams, &MlpParams)> {
        self.moments.as_ref().map(|(m, v)| (m, v))
    }

    pub(crate) fn from_parts(
        config: OptimizerConfig,
        step: u64,
        moments: Option<(MlpParams, MlpParams)>,
    ) -> Result<Self> {
        config.validate()?;
        let expects_moments = matches!(config.kind, OptimizerKind::Adam { .. });
        if expects_moments != moments.is_some() {
            return Err(Error::Format("optimizer moments do not match kind".into()));
        }
        Ok(Self {
            config,
            step,
            moments,
        })
    }
}

/// Applies one optimizer update with an already-averaged gradient.
pub fn sgd_step(params: &mut MlpParams, avg_grad: &MlpParams, opt: &mut OptimizerState) -> Result<()> {
    if !params.same_shape(avg_grad) {
        return Err(Error::InvalidDimensions("gradient shape differs from parameters".into()));
    }
    if !avg_grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    let lr = opt.config.learning_rate;
    match (opt.config.kind, opt.moments.as_mut()) {
        (OptimizerKind::PlainSgd, _) => {
            for (w, g) in params.iter_mut().zip(avg_grad.iter()) {
                *w -= lr * g;
            }
        }
        (OptimizerKind::Adam { beta1, beta2, eps }, Some((first, second))) => {
            if !params.same_shape(first) {
                return Err(Error::InvalidDimensions("moment shape differs from parameters".into()));
            }
            let t = (opt.step + 1) as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2_sqrt = (1.0 - beta2.powi(t)).sqrt();
            let step_size = lr / bc1;
            for (l, layer) in params.layers.iter_mut().enumerate() {
                let g = &avg_grad.layers[l].data;
                let m = &mut first.layers[l].data;
                let v = &mut second.layers[l].data;
                for i in 0..layer.data.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let denom = v[i].sqrt() / bc2_sqrt + eps;
                    layer.data[i] -= step_size * m[i] / denom;
                }
            }
        }
        (OptimizerKind::Adam { .. }, None) => {
            return Err(Error::Config("adaptive-moment optimizer without moments".into()));
        }
    }
    opt.step += 1;
    Ok(())
}
