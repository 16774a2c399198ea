//! Synthetic streams with a known conditional class distribution `h`.
//!
//! Every generated instance has a unique Bayes class whose probability beats
//! the runner-up by at least `epsilon`, enforced by rejection. Because `h` is
//! known, regrets can be measured against the Bayes classifier directly.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::encoding::build_contexts;
use crate::error::{Error, Result};
use crate::learner::{top_two, LearnerConfig, LearnerState};
use crate::vector::l2_norm;

/// Give up once fewer than one draw in this many is accepted.
const MAX_REJECTION_RATIO: usize = 1000;
const MIN_ATTEMPTS_BEFORE_GIVING_UP: usize = 10_000;
const TEST_STREAM_SALT: u64 = 0x7465_7374;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `x` uniform on the sphere, `h = softmax(s · W x)` for a hidden Gaussian `W`.
    LinearLogit,
    /// `x` a normalized noisy copy of one of `k` sphere centres,
    /// `h = softmax(s · ⟨μᵢ, x⟩)`.
    ClusterMixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub d: usize,
    /// Required gap between the top two class probabilities, in `(0, 1]`.
    pub epsilon: f64,
    pub seed: u64,
    pub family: Family,
    pub n_test: usize,
    /// Softmax inverse temperature; `None` gives one-hot `h` (noise-free labels).
    pub sharpness: Option<f64>,
    /// Cluster spread, used by [`Family::ClusterMixture`] only.
    pub spread: f64,
}

impl SyntheticSpec {
    pub fn new(k: usize, d: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            k,
            d,
            epsilon,
            seed,
            family: Family::LinearLogit,
            n_test: 10_000,
            sharpness: if epsilon >= 1.0 { None } else { Some(4.0) },
            spread: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.d == 0 {
            return Err(Error::Config(format!("need k>=2 and d>0 (k={}, d={})", self.k, self.d)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0,1]", self.epsilon)));
        }
        if let Some(s) = self.sharpness {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sharpness {s} must be positive")));
            }
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::Config(format!("spread {} must be non-negative", self.spread)));
        }
        Ok(())
    }

    /// Plain `key=value` lines, one per field.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let family = match self.family {
            Family::LinearLogit => "linear-logit",
            Family::ClusterMixture => "cluster-mixture",
        };
        let sharp = self.sharpness.map_or("hard".to_string(), |v| v.to_string());
        for (key, val) in [
            ("k", self.k.to_string()),
            ("d", self.d.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("seed", self.seed.to_string()),
            ("family", family.to_string()),
            ("n_test", self.n_test.to_string()),
            ("sharpness", sharp),
            ("spread", self.spread.to_string()),
        ] {
            let _ = writeln!(s, "{key}={val}");
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut spec = Self::new(2, 1, 0.5, 0);
        let mut seen = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (key, val) = (key.trim(), val.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}")));
            let int = |v: &str| v.parse::<u64>().map_err(|_| err(format!("bad integer {v:?}")));
            match key {
                "k" => spec.k = int(val)? as usize,
                "d" => spec.d = int(val)? as usize,
                "epsilon" => spec.epsilon = num(val)?,
                "seed" => spec.seed = int(val)?,
                "n_test" => spec.n_test = int(val)? as usize,
                "spread" => spec.spread = num(val)?,
                "sharpness" => {
                    spec.sharpness = if val == "hard" { None } else { Some(num(val)?) }
                }
                "family" => {
                    spec.family = match val {
                        "linear-logit" => Family::LinearLogit,
                        "cluster-mixture" => Family::ClusterMixture,
                        other => return Err(err(format!("unknown family {other:?}"))),
                    }
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
            seen.push(key.to_string());
        }
        for required in ["k", "d", "epsilon", "seed"] {
            if !seen.iter().any(|s| s == required) {
                return Err(Error::Config(format!("missing key {required}")));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }
}

/// A batch of generated instances.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub d: usize,
    pub k: usize,
    /// Row-major, unit-norm rows.
    pub x: Vec<f64>,
    /// Row-major class probabilities.
    pub h: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SyntheticSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn probs(&self, i: usize) -> &[f64] {
        &self.h[i * self.k..(i + 1) * self.k]
    }

    pub fn bayes(&self, i: usize) -> usize {
        top_two(self.probs(i)).0
    }
}

/// A generator with its hidden parameters drawn from `SyntheticSpec::seed`.
#[derive(Clone, Debug)]
pub struct SyntheticLab {
    spec: SyntheticSpec,
    /// `k × d`, row-major: logit weights or cluster centres.
    hidden: Vec<f64>,
}

fn gaussian_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = l2_norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

impl SyntheticLab {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Pcg64::seed_from_u64(spec.seed);
        let hidden = match spec.family {
            Family::LinearLogit => (0..spec.k * spec.d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            Family::ClusterMixture => (0..spec.k)
                .flat_map(|_| gaussian_unit(&mut rng, spec.d))
                .collect(),
        };
        Ok(Self { spec, hidden })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// The class probabilities `h(x)`.
    pub fn class_probs(&self, x: &[f64]) -> Vec<f64> {
        let k = self.spec.k;
        let scores: Vec<f64> = (0..k)
            .map(|i| {
                let row = &self.hidden[i * self.spec.d..(i + 1) * self.spec.d];
                row.iter().zip(x).map(|(w, v)| w * v).sum()
            })
            .collect();
        let mut h = vec![0.0; k];
        match self.spec.sharpness {
            Some(s) => {
                let scaled: Vec<f64> = scores.iter().map(|v| v * s).collect();
                softmax_into(&scaled, &mut h);
            }
            None => h[top_two(&scores).0] = 1.0,
        }
        h
    }

    /// Bayes-optimal class for `x`.
    pub fn bayes_predict(&self, x: &[f64]) -> usize {
        top_two(&self.class_probs(x)).0
    }

    fn draw_x<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.spec.d;
        match self.spec.family {
            Family::LinearLogit => gaussian_unit(rng, d),
            Family::ClusterMixture => loop {
                let c = rng.random_range(0..self.spec.k);
                let centre = &self.hidden[c * d..(c + 1) * d];
                let v: Vec<f64> = centre
                    .iter()
                    .map(|m| m + self.spec.spread * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let n = l2_norm(&v);
                if n > 0.0 {
                    break v.into_iter().map(|x| x / n).collect();
                }
            },
        }
    }

    /// Draws `n` instances satisfying the margin, with labels sampled from `h`.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SyntheticSample> {
        let (k, d) = (self.spec.k, self.spec.d);
        let mut out = SyntheticSample {
            d,
            k,
            x: Vec::with_capacity(n * d),
            h: Vec::with_capacity(n * k),
            labels: Vec::with_capacity(n),
        };
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            if attempts >= MIN_ATTEMPTS_BEFORE_GIVING_UP
                && out.len() * MAX_REJECTION_RATIO < attempts
            {
                return Err(Error::Infeasible(format!(
                    "accepted {} of {attempts} draws at epsilon={}",
                    out.len(),
                    self.spec.epsilon
                )));
            }
            let x = self.draw_x(rng);
            let h = self.class_probs(&x);
            let (a, b) = top_two(&h);
            if h[a] - h[b] < self.spec.epsilon {
                continue;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut y = k - 1;
            for (i, &p) in h.iter().enumerate() {
                acc += p;
                if u < acc {
                    y = i;
                    break;
                }
            }
            out.x.extend_from_slice(&x);
            out.h.extend_from_slice(&h);
            out.labels.push(y);
        }
        Ok(out)
    }
}

/// Convenience: a lab plus `n` draws, both from `SyntheticSpec::seed`.
pub fn generate(spec: &SyntheticSpec, n: usize) -> Result<SyntheticSample> {
    let lab = SyntheticLab::new(spec.clone())?;
    let mut rng = Pcg64::seed_from_u64(spec.seed.wrapping_add(1));
    lab.generate(n, &mut rng)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretEstimate {
    /// Population regret of the final model, `E_x[h(x, i*) − h(x, ŷ)]`.
    pub latest_regret: f64,
    /// Monte-Carlo standard error of `latest_regret`.
    pub std_error: f64,
    /// Sum over rounds of the per-round excess loss on the instance that arrived.
    /// Each instance is a fresh draw, so this is also an unbiased estimate of
    /// the cumulative population regret.
    pub conditional_regret: f64,
    pub cumulative_regret: f64,
    pub query_count: usize,
    pub rounds: usize,
}

/// Monte-Carlo estimate of the population regret of `predict` on `n_test` fresh draws.
pub fn estimate_regret<F, R>(lab: &SyntheticLab, predict: F, n_test: usize, rng: &mut R) -> Result<RegretEstimate>
where
    F: Fn(&[f64]) -> Result<usize>,
    R: Rng + ?Sized,
{
    if n_test == 0 {
        return Err(Error::Config("n_test must be at least 1".into()));
    }
    let sample = lab.generate(n_test, rng)?;
    let mut losses = Vec::with_capacity(n_test);
    for i in 0..n_test {
        let h = sample.probs(i);
        let yhat = predict(sample.instance(i))?;
        losses.push(h[sample.bayes(i)] - h[yhat]);
    }
    let n = n_test as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = if n_test > 1 {
        losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(RegretEstimate {
        latest_regret: mean,
        std_error: (var / n).sqrt(),
        ..Default::default()
    })
}

/// `T̄ = 12(γ+1)²[2μ + 9L²ν²C₁² + 2 ln(C₂Tk/δ)] / ε²`, a diagnostic round count.
#[allow(clippy::too_many_arguments)]
pub fn t_bar(cfg: &LearnerConfig, epsilon: f64, mu: f64, nu: f64, big_l: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(epsilon > 0.0) || mu < 0.0 || nu < 0.0 || big_l < 0.0 || c1 < 0.0 || !(c2 > 0.0) {
        return Err(Error::Config("t_bar inputs must be non-negative, epsilon and C2 positive".into()));
    }
    let log_arg = c2 * cfg.horizon as f64 * cfg.k as f64 / cfg.delta;
    if !(log_arg > 1.0) {
        return Err(Error::Config(format!("C2*T*k/delta = {log_arg} must exceed 1")));
    }
    let g = cfg.gamma + 1.0;
    let bracket = 2.0 * mu + 9.0 * big_l * big_l * nu * nu * c1 * c1 + 2.0 * log_arg.ln();
    Ok(12.0 * g * g * bracket / (epsilon * epsilon))
}

/// Query counts and regrets of one unbudgeted learner run on a synthetic stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRun {
    pub seed: u64,
    pub rounds: usize,
    pub queries_first_half: usize,
    pub queries_second_half: usize,
    /// Cumulative query count after each round.
    pub query_curve: Vec<usize>,
    pub regret: RegretEstimate,
}

/// Streams `rounds` fresh instances through a learner that sees every
/// requested label, then estimates the final model's population regret.
pub fn run_synthetic(spec: &SyntheticSpec, cfg: &LearnerConfig, rounds: usize) -> Result<SyntheticRun> {
    if cfg.k != spec.k || cfg.d != spec.d {
        return Err(Error::Config("learner and spec disagree on k or d".into()));
    }
    let lab = SyntheticLab::new(spec.clone())?;
    let mut stream_rng = Pcg64::seed_from_u64(cfg.seed);
    let stream = lab.generate(rounds, &mut stream_rng)?;
    let mut learner = LearnerState::new(cfg.clone())?;
    let mut curve = Vec::with_capacity(rounds);
    let mut queries = 0usize;
    let mut conditional = 0.0;
    for t in 0..rounds {
        let ctx = build_contexts(stream.instance(t), spec.k)?;
        let decision = learner.score_round(&ctx)?;
        let h = stream.probs(t);
        conditional += h[stream.bayes(t)] - h[decision.i_hat];
        let label = decision.queried.then_some(stream.labels[t]);
        queries += usize::from(decision.queried);
        learner.observe_and_update(&ctx, &decision, label)?;
        curve.push(queries);
    }
    let half = rounds / 2;
    let first = if half == 0 { 0 } else { curve[half - 1] };
    let mut test_rng = Pcg64::seed_from_u64(spec.seed ^ cfg.seed ^ TEST_STREAM_SALT);
    let predict = |x: &[f64]| learner.predict(&build_contexts(x, spec.k)?);
    let mut regret = estimate_regret(&lab, predict, spec.n_test, &mut test_rng)?;
    regret.conditional_regret = conditional;
    regret.cumulative_regret = conditional;
    regret.query_count = queries;
    regret.rounds = rounds;
    Ok(SyntheticRun {
        seed: cfg.seed,
        rounds,
        queries_first_half: first,
        queries_second_half: queries - first,
        query_curve: curve,
        regret,
    })
}
