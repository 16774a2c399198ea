//! The exploitation/exploration learner.
//!
//! Each round the learner scores every class context with `f = f1 + f2`,
//! predicts the arg-max class `î`, and requests the label when the gap to the
//! runner-up `i°` is smaller than `2γβ_t`. Whether or not the label is
//! revealed, rewards for all `k` contexts are appended to the history buffers
//! (the prediction acts as a pseudo-label on non-query rounds) and both
//! networks take one warm-started mini-batch step.

use std::io::{Read, Write};

use rand::{seq::index, RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::encoding::{dc_embedding_with, rewards_for_label, ContextSet};
use crate::error::{Error, Result};
use crate::nn::{init_mlp, sgd_step, MlpParams, OptimizerConfig, OptimizerState, Workspace};
use crate::vector::{Features, SparseVec};

const STATE_MAGIC: &[u8; 4] = b"NASL";
const STATE_VERSION: u32 = 1;

/// The exploration network is initialized from `seed ^ EXPLORE_SEED_SALT`.
pub const EXPLORE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
/// Mini-batch and snapshot draws come from `Pcg64::seed_from_u64(seed ^ SAMPLER_SEED_SALT)`.
pub const SAMPLER_SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// Which parameter pair scores the next round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotPolicy {
    /// The most recently trained pair.
    #[default]
    Latest,
    /// A uniform draw from every pair trained so far. Keeps all snapshots in memory.
    UniformFromOmega,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Exploration aggressiveness, `γ ≥ 1`.
    pub gamma: f64,
    /// Confidence level in `(0, 1)`.
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Planned number of rounds `T` (enters `β_t` only).
    pub horizon: usize,
    pub k: usize,
    /// Raw feature dimension.
    pub d: usize,
    pub batch_size: usize,
    pub width: usize,
    pub depth: usize,
    pub exploit_opt: OptimizerConfig,
    pub explore_opt: OptimizerConfig,
    pub snapshot_policy: SnapshotPolicy,
    pub seed: u64,
}

impl LearnerConfig {
    /// Defaults: `γ=1, δ=0.1, c₁=c₂=c₃=1`, width 100, depth 2, batch 64,
    /// adaptive-moment at 0.001 for both networks.
    pub fn new(k: usize, d: usize, horizon: usize) -> Self {
        Self {
            gamma: 1.0,
            delta: 0.1,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            horizon,
            k,
            d,
            batch_size: 64,
            width: 100,
            depth: 2,
            exploit_opt: OptimizerConfig::adam(0.001),
            explore_opt: OptimizerConfig::adam(0.001),
            snapshot_policy: SnapshotPolicy::Latest,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma {} must be >= 1", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} must be in (0,1)", self.delta)));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("{name}={c} must be positive")));
            }
        }
        if self.k < 2 || self.d == 0 || self.horizon == 0 || self.batch_size == 0 {
            return Err(Error::Config(format!(
                "need k>=2, d>0, horizon>0, batch>0 (k={}, d={}, T={}, b={})",
                self.k, self.d, self.horizon, self.batch_size
            )));
        }
        self.exploit_opt.validate()?;
        self.explore_opt.validate()?;
        self.beta_numerator().map(|_| ())
    }

    /// `β_t · √t`, the round-independent part of the confidence width.
    fn beta_numerator(&self) -> Result<f64> {
        let log_arg = self.c3 * self.horizon as f64 * self.k as f64 / self.delta;
        if !(log_arg > 1.0) {
            return Err(Error::Config(format!(
                "c3*T*k/delta = {log_arg} must exceed 1"
            )));
        }
        let depth = self.depth as f64;
        Ok((2.0 * self.c1).sqrt()
            + 3.0 * self.c2 * depth / std::f64::consts::SQRT_2
            + (2.0 * log_arg.ln()).sqrt())
    }
}

/// Confidence width
/// `β_t = √(2c₁/t) + 3c₂L/√(2t) + √(2 ln(c₃Tk/δ)/t)`.
///
/// Evaluated as `C / √t` so `β(4t) = β(t)/2` holds bit-for-bit.
pub fn beta(t: usize, cfg: &LearnerConfig) -> Result<f64> {
    if t == 0 {
        return Err(Error::Config("round index starts at 1".into()));
    }
    Ok(cfg.beta_numerator()? / (t as f64).sqrt())
}

/// Arg-max and runner-up, ties broken towards the lower index.
pub fn top_two(scores: &[f64]) -> (usize, usize) {
    assert!(scores.len() >= 2, "need at least two scores");
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    let mut second = if best == 0 { 1 } else { 0 };
    for (i, &s) in scores.iter().enumerate() {
        if i != best && s > scores[second] {
            second = i;
        }
    }
    (best, second)
}

/// Append-only store of `(input, reward)` training pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HistoryBuffer {
    inputs: Vec<SparseVec>,
    rewards: Vec<f64>,
}

impl HistoryBuffer {
    pub fn push(&mut self, input: SparseVec, reward: f64) {
        self.inputs.push(input);
        self.rewards.push(reward);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn get(&self, i: usize) -> (&SparseVec, f64) {
        (&self.inputs[i], self.rewards[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SparseVec, f64)> {
        self.inputs.iter().zip(self.rewards.iter().copied())
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        codec::put_u64(w, self.len() as u64)?;
        for (x, r) in self.iter() {
            codec::put_sparse(w, x)?;
            codec::put_f64(w, r)?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let n = codec::get_u64(r)? as usize;
        let mut buf = Self::default();
        for _ in 0..n {
            let x = codec::get_sparse(r)?;
            let reward = codec::get_f64(r)?;
            buf.push(x, reward);
        }
        Ok(buf)
    }
}

/// Outcome of scoring one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundDecision {
    /// 1-based round index this decision was made in.
    pub round: usize,
    pub i_hat: usize,
    pub i_circ: usize,
    /// `f1 + f2` per class.
    pub scores: Vec<f64>,
    /// `f1` per class, used for the residual targets.
    pub exploit_scores: Vec<f64>,
    pub queried: bool,
    pub beta_t: f64,
    /// Embeddings of each context under the scoring `f1`, reused for `H²`.
    pub embeddings: Vec<SparseVec>,
}

impl RoundDecision {
    pub fn gap(&self) -> f64 {
        (self.scores[self.i_hat] - self.scores[self.i_circ]).abs()
    }
}

/// Reusable buffers for one mini-batch step.
#[derive(Clone, Debug)]
pub(crate) struct TrainScratch {
    grad: MlpParams,
    ws: Workspace,
}

impl TrainScratch {
    pub(crate) fn new(net: &MlpParams) -> Self {
        Self {
            grad: net.zeros_like(),
            ws: Workspace::new(net),
        }
    }
}

/// Draws `min(b, |buffer|)` entries without replacement, averages the
/// gradient of `(r - f(x))²/2` at the current parameters and takes one
/// optimizer step.
pub(crate) fn train_on_batch(
    net: &mut MlpParams,
    opt: &mut OptimizerState,
    buffer: &HistoryBuffer,
    batch_size: usize,
    rng: &mut Pcg64,
    scratch: &mut TrainScratch,
) -> Result<()> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let n = buffer.len();
    let b = batch_size.min(n);
    let picks = index::sample(rng, n, b);
    scratch.grad.fill_zero();
    for i in picks.iter() {
        let (x, r) = buffer.get(i);
        let f = net.forward_ws(x, &mut scratch.ws);
        net.backward_ws(x, f - r, &mut scratch.ws, Some(&mut scratch.grad), None);
    }
    scratch.grad.scale(1.0 / b as f64);
    sgd_step(net, &scratch.grad, opt)
}

#[derive(Clone, Debug)]
pub struct LearnerState {
    cfg: LearnerConfig,
    f1: MlpParams,
    f2: MlpParams,
    /// Pair drawn from Ω for scoring; `None` means the trained pair.
    active: Option<(MlpParams, MlpParams)>,
    h1: HistoryBuffer,
    h2: HistoryBuffer,
    opt1: OptimizerState,
    opt2: OptimizerState,
    completed: usize,
    omega_len: usize,
    omega: Vec<(MlpParams, MlpParams)>,
    rng: Pcg64,
    scratch1: TrainScratch,
    scratch2: TrainScratch,
}

impl LearnerState {
    pub fn new(cfg: LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        let dk = cfg.d * cfg.k;
        let f1 = init_mlp(dk, cfg.width, cfg.depth, cfg.seed)?;
        let f2 = init_mlp(2 * dk, cfg.width, cfg.depth, cfg.seed ^ EXPLORE_SEED_SALT)?;
        Self::with_params(cfg, f1, f2)
    }

    /// Starts from given initial networks instead of sampling them.
    pub fn with_params(cfg: LearnerConfig, f1: MlpParams, f2: MlpParams) -> Result<Self> {
        cfg.validate()?;
        let dk = cfg.d * cfg.k;
        if f1.input_dim() != dk || f2.input_dim() != 2 * dk {
            return Err(Error::InvalidDimensions(format!(
                "networks take {} and {} inputs, expected {dk} and {}",
                f1.input_dim(),
                f2.input_dim(),
                2 * dk
            )));
        }
        let opt1 = OptimizerState::new(cfg.exploit_opt, &f1)?;
        let opt2 = OptimizerState::new(cfg.explore_opt, &f2)?;
        let rng = Pcg64::seed_from_u64(cfg.seed ^ SAMPLER_SEED_SALT);
        Ok(Self {
            scratch1: TrainScratch::new(&f1),
            scratch2: TrainScratch::new(&f2),
            cfg,
            f1,
            f2,
            active: None,
            h1: HistoryBuffer::default(),
            h2: HistoryBuffer::default(),
            opt1,
            opt2,
            completed: 0,
            omega_len: 0,
            omega: Vec::new(),
            rng,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    /// The pair most recently produced by training.
    pub fn trained(&self) -> (&MlpParams, &MlpParams) {
        (&self.f1, &self.f2)
    }

    /// The pair used to score the next round.
    pub fn scoring(&self) -> (&MlpParams, &MlpParams) {
        match &self.active {
            Some((a, b)) => (a, b),
            None => (&self.f1, &self.f2),
        }
    }

    pub fn h1(&self) -> &HistoryBuffer {
        &self.h1
    }

    pub fn h2(&self) -> &HistoryBuffer {
        &self.h2
    }

    pub fn rounds_completed(&self) -> usize {
        self.completed
    }

    /// `|Ω|`: number of parameter pairs produced so far.
    pub fn snapshot_count(&self) -> usize {
        self.omega_len
    }

    pub fn optimizers(&self) -> (&OptimizerState, &OptimizerState) {
        (&self.opt1, &self.opt2)
    }

    fn check_context(&self, ctx: &ContextSet) -> Result<()> {
        if ctx.k() != self.cfg.k || ctx.d() != self.cfg.d {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.d * self.cfg.k,
                got: ctx.context_dim(),
            });
        }
        Ok(())
    }

    /// Per-class `(f1, f1 + f2, φ)` under the scoring parameters.
    fn evaluate(&self, ctx: &ContextSet) -> Result<(Vec<f64>, Vec<f64>, Vec<SparseVec>)> {
        self.check_context(ctx)?;
        let (f1, f2) = self.scoring();
        let mut ws1 = Workspace::new(f1);
        let mut ws2 = Workspace::new(f2);
        let mut grad = vec![0.0; f1.input_dim()];
        let k = ctx.k();
        let mut exploit = Vec::with_capacity(k);
        let mut total = Vec::with_capacity(k);
        let mut embeddings = Vec::with_capacity(k);
        for i in 0..k {
            let c = ctx.context(i);
            let (s1, phi) = dc_embedding_with(f1, &c, &mut ws1, &mut grad)?;
            let s2 = f2.forward_ws(&phi, &mut ws2);
            exploit.push(s1);
            total.push(s1 + s2);
            embeddings.push(phi);
        }
        Ok((exploit, total, embeddings))
    }

    /// Full scores `f1 + f2` per class.
    pub fn scores(&self, ctx: &ContextSet) -> Result<Vec<f64>> {
        Ok(self.evaluate(ctx)?.1)
    }

    pub fn predict(&self, ctx: &ContextSet) -> Result<usize> {
        Ok(top_two(&self.scores(ctx)?).0)
    }

    pub fn current_round(&self) -> usize {
        self.completed + 1
    }

    pub fn score_round(&self, ctx: &ContextSet) -> Result<RoundDecision> {
        let (exploit_scores, scores, embeddings) = self.evaluate(ctx)?;
        let t = self.current_round();
        let beta_t = beta(t, &self.cfg)?;
        let (i_hat, i_circ) = top_two(&scores);
        let gap = (scores[i_hat] - scores[i_circ]).abs();
        let queried = gap < 2.0 * self.cfg.gamma * beta_t;
        Ok(RoundDecision {
            round: t,
            i_hat,
            i_circ,
            scores,
            exploit_scores,
            queried,
            beta_t,
            embeddings,
        })
    }

    /// Records the round's rewards and trains both networks.
    ///
    /// `revealed_label` must be present exactly when `decision.queried`.
    pub fn observe_and_update(
        &mut self,
        ctx: &ContextSet,
        decision: &RoundDecision,
        revealed_label: Option<usize>,
    ) -> Result<()> {
        self.check_context(ctx)?;
        let k = self.cfg.k;
        if decision.round != self.current_round() {
            return Err(Error::Config(format!(
                "decision from round {} applied at round {}",
                decision.round,
                self.current_round()
            )));
        }
        if decision.exploit_scores.len() != k || decision.embeddings.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: decision.embeddings.len(),
            });
        }
        let label = match (decision.queried, revealed_label) {
            (true, Some(y)) => y,
            (false, None) => decision.i_hat,
            (true, None) => return Err(Error::Budget("queried round needs a label".into())),
            (false, Some(_)) => {
                return Err(Error::Budget("label revealed on a round that did not query".into()))
            }
        };
        let rewards = rewards_for_label(k, label, &decision.exploit_scores)?;
        for (i, rp) in rewards.iter().enumerate() {
            self.h1.push(ctx.context(i), rp.r1);
        }
        for (phi, rp) in decision.embeddings.iter().zip(&rewards) {
            if phi.dim() != 2 * ctx.context_dim() {
                return Err(Error::DimensionMismatch {
                    expected: 2 * ctx.context_dim(),
                    got: phi.dim(),
                });
            }
            self.h2.push(phi.clone(), rp.r2);
        }
        self.warm_start_step()?;
        self.completed += 1;
        Ok(())
    }

    /// One mini-batch step for each network from its current parameters,
    /// then records the new pair in Ω and selects the pair for the next round.
    pub fn warm_start_step(&mut self) -> Result<()> {
        if self.h1.is_empty() || self.h2.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let b = self.cfg.batch_size;
        train_on_batch(&mut self.f1, &mut self.opt1, &self.h1, b, &mut self.rng, &mut self.scratch1)?;
        train_on_batch(&mut self.f2, &mut self.opt2, &self.h2, b, &mut self.rng, &mut self.scratch2)?;
        self.omega_len += 1;
        match self.cfg.snapshot_policy {
            SnapshotPolicy::Latest => self.active = None,
            SnapshotPolicy::UniformFromOmega => {
                self.omega.push((self.f1.clone(), self.f2.clone()));
                let pick = self.rng.random_range(0..self.omega.len());
                self.active = Some(self.omega[pick].clone());
            }
        }
        Ok(())
    }

    /// The pair returned at the end of a run.
    pub fn final_params(&self, rng_seed: u64) -> Result<(MlpParams, MlpParams)> {
        if self.omega_len == 0 {
            return Err(Error::EmptySnapshots);
        }
        match self.cfg.snapshot_policy {
            SnapshotPolicy::Latest => Ok((self.f1.clone(), self.f2.clone())),
            SnapshotPolicy::UniformFromOmega => {
                let mut rng = Pcg64::seed_from_u64(rng_seed);
                let pick = rng.random_range(0..self.omega.len());
                Ok(self.omega[pick].clone())
            }
        }
    }

    /// Serializes the complete state so a run can be resumed.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(STATE_MAGIC)?;
        codec::put_u32(w, STATE_VERSION)?;
        codec::put_bytes(w, &serde_json::to_vec(&self.cfg)?)?;
        codec::put_u64(w, self.completed as u64)?;
        codec::put_u64(w, self.omega_len as u64)?;
        self.f1.write_to(w)?;
        self.f2.write_to(w)?;
        match &self.active {
            Some((a, b)) => {
                codec::put_u8(w, 1)?;
                a.write_to(w)?;
                b.write_to(w)?;
            }
            None => codec::put_u8(w, 0)?,
        }
        for opt in [&self.opt1, &self.opt2] {
            codec::put_u64(w, opt.steps_taken())?;
            match opt.moments() {
                Some((m, v)) => {
                    codec::put_u8(w, 1)?;
                    m.write_to(w)?;
                    v.write_to(w)?;
                }
                None => codec::put_u8(w, 0)?,
            }
        }
        self.h1.write_to(w)?;
        self.h2.write_to(w)?;
        codec::put_u64(w, self.omega.len() as u64)?;
        for (a, b) in &self.omega {
            a.write_to(w)?;
            b.write_to(w)?;
        }
        codec::put_bytes(w, &serde_json::to_vec(&self.rng)?)?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != STATE_MAGIC {
            return Err(Error::Format(format!("bad learner snapshot magic {magic:?}")));
        }
        let version = codec::get_u32(r)?;
        if version != STATE_VERSION {
            return Err(Error::Format(format!("unsupported learner snapshot version {version}")));
        }
        let cfg: LearnerConfig = serde_json::from_slice(&codec::get_bytes(r, 1 << 20)?)?;
        cfg.validate()?;
        let completed = codec::get_u64(r)? as usize;
        let omega_len = codec::get_u64(r)? as usize;
        let f1 = MlpParams::read_from(r)?;
        let f2 = MlpParams::read_from(r)?;
        let active = match codec::get_u8(r)? {
            0 => None,
            1 => Some((MlpParams::read_from(r)?, MlpParams::read_from(r)?)),
            b => return Err(Error::Format(format!("bad flag byte {b}"))),
        };
        let mut opts = Vec::with_capacity(2);
        for (config, net) in [(cfg.exploit_opt, &f1), (cfg.explore_opt, &f2)] {
            let step = codec::get_u64(r)?;
            let moments = match codec::get_u8(r)? {
                0 => None,
                1 => Some((MlpParams::read_from(r)?, MlpParams::read_from(r)?)),
                b => return Err(Error::Format(format!("bad flag byte {b}"))),
            };
            if let Some((m, v)) = &moments {
                if !m.same_shape(net) || !v.same_shape(net) {
                    return Err(Error::Format("optimizer moments do not match network".into()));
                }
            }
            opts.push(OptimizerState::from_parts(config, step, moments)?);
        }
        let opt2 = opts.pop().expect("two optimizers");
        let opt1 = opts.pop().expect("two optimizers");
        let h1 = HistoryBuffer::read_from(r)?;
        let h2 = HistoryBuffer::read_from(r)?;
        let n_omega = codec::get_u64(r)? as usize;
        let mut omega = Vec::with_capacity(n_omega.min(1 << 16));
        for _ in 0..n_omega {
            omega.push((MlpParams::read_from(r)?, MlpParams::read_from(r)?));
        }
        let rng: Pcg64 = serde_json::from_slice(&codec::get_bytes(r, 1 << 16)?)?;

        let mut state = Self::with_params(cfg, f1, f2)?;
        if h1.len() != h2.len() || h1.len() != completed * state.cfg.k {
            return Err(Error::Format("buffer sizes disagree with round counter".into()));
        }
        state.active = active;
        state.opt1 = opt1;
        state.opt2 = opt2;
        state.h1 = h1;
        state.h2 = h2;
        state.completed = completed;
        state.omega_len = omega_len;
        state.omega = omega;
        state.rng = rng;
        Ok(state)
    }
}
