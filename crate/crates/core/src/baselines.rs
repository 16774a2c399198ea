//! Random and margin query strategies.
//!
//! Both use a single network of the same shape as the learner's exploitation
//! network and the same buffer-and-step training path, including pseudo-labels
//! on rounds without a query, so comparisons isolate the query rule.

use rand::{Rng, RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::encoding::{rewards_for_label, ContextSet};
use crate::error::{Error, Result};
use crate::learner::{top_two, train_on_batch, HistoryBuffer, TrainScratch};
use crate::nn::{init_mlp, MlpParams, OptimizerConfig, OptimizerState, Workspace};

const QUERY_SEED_SALT: u64 = 0x2545_F491_4F6C_DD1D;
const TRAIN_SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryRule {
    /// Query with fixed probability `p`.
    Random { p: f64 },
    /// Query when the largest softmax probability falls below `threshold`.
    Margin { threshold: f64 },
}

impl QueryRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QueryRule::Random { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::Config(format!("random p={p} outside [0,1]")))
            }
            QueryRule::Margin { threshold } if !(threshold > 0.0 && threshold < 1.0) => {
                Err(Error::Config(format!("margin threshold {threshold} outside (0,1)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub rule: QueryRule,
    pub k: usize,
    pub d: usize,
    pub width: usize,
    pub depth: usize,
    pub batch_size: usize,
    pub opt: OptimizerConfig,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(rule: QueryRule, k: usize, d: usize) -> Self {
        Self {
            rule,
            k,
            d,
            width: 100,
            depth: 2,
            batch_size: 64,
            opt: OptimizerConfig::adam(0.001),
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if self.k < 2 || self.d == 0 || self.batch_size == 0 {
            return Err(Error::Config(format!(
                "need k>=2, d>0, batch>0 (k={}, d={}, b={})",
                self.k, self.d, self.batch_size
            )));
        }
        self.opt.validate()
    }
}

/// Largest softmax probability over `scores`.
pub fn max_softmax(scores: &[f64]) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
    1.0 / z
}

impl QueryRule {
    /// The value the rule compares against [`QueryRule::threshold`]: a uniform
    /// draw for the random rule, the top softmax probability for the margin rule.
    ///
    /// The random rule always consumes exactly one draw from `rng`; the margin
    /// rule never touches it.
    pub fn signal<R: Rng + ?Sized>(&self, scores: &[f64], rng: &mut R) -> f64 {
        assert!(scores.len() >= 2, "need at least two scores");
        match *self {
            QueryRule::Random { .. } => rng.random::<f64>(),
            QueryRule::Margin { .. } => max_softmax(scores),
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            QueryRule::Random { p } => p,
            QueryRule::Margin { threshold } => threshold,
        }
    }
}

/// Whether the rule asks for the label this round.
pub fn baseline_decide<R: Rng + ?Sized>(rule: &QueryRule, scores: &[f64], rng: &mut R) -> bool {
    rule.signal(scores, rng) < rule.threshold()
}

#[derive(Clone, Debug)]
pub struct BaselineState {
    cfg: BaselineConfig,
    f1: MlpParams,
    opt: OptimizerState,
    h: HistoryBuffer,
    train_rng: Pcg64,
    query_rng: Pcg64,
    completed: usize,
    scratch: TrainScratch,
}

impl BaselineState {
    pub fn new(cfg: BaselineConfig) -> Result<Self> {
        cfg.validate()?;
        let f1 = init_mlp(cfg.d * cfg.k, cfg.width, cfg.depth, cfg.seed)?;
        let opt = OptimizerState::new(cfg.opt, &f1)?;
        Ok(Self {
            scratch: TrainScratch::new(&f1),
            train_rng: Pcg64::seed_from_u64(cfg.seed ^ TRAIN_SEED_SALT),
            query_rng: Pcg64::seed_from_u64(cfg.seed ^ QUERY_SEED_SALT),
            cfg,
            f1,
            opt,
            h: HistoryBuffer::default(),
            completed: 0,
        })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.cfg
    }

    pub fn network(&self) -> &MlpParams {
        &self.f1
    }

    pub fn buffer(&self) -> &HistoryBuffer {
        &self.h
    }

    pub fn rounds_completed(&self) -> usize {
        self.completed
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

    pub fn scores(&self, ctx: &ContextSet) -> Result<Vec<f64>> {
        self.check_context(ctx)?;
        let mut ws = Workspace::new(&self.f1);
        Ok((0..ctx.k())
            .map(|i| self.f1.forward_ws(&ctx.context(i), &mut ws))
            .collect())
    }

    pub fn predict(&self, ctx: &ContextSet) -> Result<usize> {
        Ok(top_two(&self.scores(ctx)?).0)
    }

    /// Applies the query rule to precomputed scores using the strategy's own
    /// RNG. Returns the decision and the signal it was based on.
    pub fn decide(&mut self, scores: &[f64]) -> (bool, f64) {
        let signal = self.cfg.rule.signal(scores, &mut self.query_rng);
        (signal < self.cfg.rule.threshold(), signal)
    }

    /// Appends full-feedback rewards for `label` (true or pseudo) and takes one step.
    pub fn baseline_update(&mut self, ctx: &ContextSet, label: usize) -> Result<()> {
        self.check_context(ctx)?;
        let zeros = vec![0.0; ctx.k()];
        let rewards = rewards_for_label(ctx.k(), label, &zeros)?;
        for (i, rp) in rewards.iter().enumerate() {
            self.h.push(ctx.context(i), rp.r1);
        }
        train_on_batch(
            &mut self.f1,
            &mut self.opt,
            &self.h,
            self.cfg.batch_size,
            &mut self.train_rng,
            &mut self.scratch,
        )?;
        self.completed += 1;
        Ok(())
    }
}
