//! Budgeted streaming harness.
//!
//! A run streams the training portion of a shuffled dataset through a query
//! strategy. Every round the strategy predicts and may ask for the label; the
//! label is revealed only while budget remains, otherwise the round falls back
//! to the pseudo-label path and is counted as starved. Realized regret is the
//! running sum of 0-1 losses of the predictions.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, BaselineState, QueryRule};
use crate::data::{
    binary_transform, cap_samples, load_csv, load_idx, load_libsvm, normalize_unit, shuffle, BinaryRule,
    Dataset,
};
use crate::encoding::{build_contexts, zero_one_loss, ContextSet};
use crate::error::{Error, Result};
use crate::learner::{top_two, LearnerConfig, LearnerState, RoundDecision, SnapshotPolicy};
use crate::nn::OptimizerConfig;

pub const DEFAULT_GAMMA_GRID: [f64; 6] = [1.0, 2.0, 5.0, 6.0, 7.0, 10.0];
pub const DEFAULT_MARGIN_GRID: [f64; 5] = [0.3, 0.5, 0.7, 0.9, 0.95];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Idx,
    Libsvm,
    Csv,
}

/// Where a dataset comes from and how it is reduced before streaming.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    /// File path, or for `idx` a directory holding `train-images-idx3-ubyte`
    /// and `train-labels-idx1-ubyte`.
    pub path: PathBuf,
    pub format: DataFormat,
    pub transform: Option<BinaryRule>,
    pub max_samples: Option<usize>,
    /// Seed of the subset drawn when `max_samples` applies.
    pub sample_seed: u64,
}

impl DataSource {
    fn idx_paths(&self) -> (PathBuf, PathBuf) {
        if self.path.is_dir() {
            (
                self.path.join("train-images-idx3-ubyte"),
                self.path.join("train-labels-idx1-ubyte"),
            )
        } else {
            let name = self.path.to_string_lossy();
            let labels = name.replace("images-idx3", "labels-idx1");
            (self.path.clone(), PathBuf::from(labels))
        }
    }
}

/// Loads, transforms, caps and unit-normalizes a dataset.
pub fn load_dataset(src: &DataSource) -> Result<Dataset> {
    let ds = match src.format {
        DataFormat::Idx => {
            let (images, labels) = src.idx_paths();
            load_idx(&images, &labels)?
        }
        DataFormat::Libsvm => load_libsvm(&src.path)?,
        DataFormat::Csv => load_csv(&src.path)?,
    };
    let ds = match src.transform {
        Some(rule) => binary_transform(&ds, rule)?,
        None => ds,
    };
    let ds = match src.max_samples {
        Some(max) => cap_samples(&ds, max, src.sample_seed),
        None => ds,
    };
    let (ds, dropped) = normalize_unit(&ds);
    if !dropped.is_empty() {
        log::warn!("{} rows dropped during normalization", dropped.len());
    }
    if ds.is_empty() {
        return Err(Error::Config("dataset is empty after preprocessing".into()));
    }
    Ok(ds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    INeural { gamma: f64 },
    Random { p: f64 },
    Margin { threshold: f64 },
}

impl StrategySpec {
    pub fn family(&self) -> &'static str {
        match self {
            StrategySpec::INeural { .. } => "i-neural",
            StrategySpec::Random { .. } => "random",
            StrategySpec::Margin { .. } => "margin",
        }
    }

    /// Family plus its query parameter, e.g. `i-neural(gamma=6)`.
    pub fn label(&self) -> String {
        match *self {
            StrategySpec::INeural { gamma } => format!("i-neural(gamma={gamma})"),
            StrategySpec::Random { p } => format!("random(p={p})"),
            StrategySpec::Margin { threshold } => format!("margin(threshold={threshold})"),
        }
    }
}

/// Network and optimizer settings shared by every strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSettings {
    pub width: usize,
    pub depth: usize,
    pub batch_size: usize,
    pub opt: OptimizerConfig,
}

impl Default for NetSettings {
    fn default() -> Self {
        Self {
            width: 100,
            depth: 2,
            batch_size: 64,
            opt: OptimizerConfig::adam(0.001),
        }
    }
}

/// Confidence-width constants of the learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSettings {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub snapshot_policy: SnapshotPolicy,
}

impl Default for ConfidenceSettings {
    fn default() -> Self {
        Self {
            delta: 0.1,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            snapshot_policy: SnapshotPolicy::Latest,
        }
    }
}

/// Everything needed to reproduce a single run; one manifest line each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    /// `grid` for tuning runs, `final` for reported runs.
    pub phase: String,
    pub data: DataSource,
    pub strategy: StrategySpec,
    pub seed: u64,
    pub budget_fraction: f64,
    /// Rounds to stream; `None` streams the whole training portion.
    pub rounds: Option<usize>,
    pub test_frac: f64,
    pub net: NetSettings,
    pub confidence: ConfidenceSettings,
    /// Non-query rounds train on the predicted label (all strategies).
    pub pseudo_labels: bool,
    /// Budget-exhausted query requests fall back to the pseudo-label path.
    pub starved_rounds_pseudo_labelled: bool,
}

/// One streaming round as recorded in the per-run CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub i_hat: usize,
    pub i_circ: usize,
    pub true_label: usize,
    /// The label was revealed this round.
    pub queried: bool,
    /// The strategy asked for the label but the budget was spent.
    pub starved: bool,
    pub budget_left: usize,
    pub loss: u8,
    pub cumulative_regret: u64,
    /// Quantity the query rule compared against `threshold`.
    pub signal: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: StrategySpec,
    pub seed: u64,
    pub rounds: usize,
    pub budget: usize,
    pub total_regret: u64,
    pub queries: usize,
    pub starved: usize,
    pub test_accuracy: f64,
    #[serde(skip)]
    pub records: Vec<RoundRecord>,
}

/// What a strategy proposes before the harness applies the budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    pub i_hat: usize,
    pub i_circ: usize,
    pub wants_query: bool,
    pub signal: f64,
    pub threshold: f64,
}

/// A query strategy driven by [`run_stream`].
pub trait StreamStrategy {
    fn propose(&mut self, ctx: &ContextSet) -> Result<Proposal>;

    /// Completes the round. `revealed` is the true label when the harness
    /// granted a query and `None` otherwise.
    fn commit(&mut self, ctx: &ContextSet, revealed: Option<usize>) -> Result<()>;

    fn predict(&self, ctx: &ContextSet) -> Result<usize>;
}

/// I-NeurAL inside the harness.
pub struct NeuralAgent {
    state: LearnerState,
    pending: Option<RoundDecision>,
}

impl NeuralAgent {
    pub fn new(cfg: LearnerConfig) -> Result<Self> {
        Ok(Self {
            state: LearnerState::new(cfg)?,
            pending: None,
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }
}

impl StreamStrategy for NeuralAgent {
    fn propose(&mut self, ctx: &ContextSet) -> Result<Proposal> {
        let d = self.state.score_round(ctx)?;
        let p = Proposal {
            i_hat: d.i_hat,
            i_circ: d.i_circ,
            wants_query: d.queried,
            signal: d.gap(),
            threshold: 2.0 * self.state.config().gamma * d.beta_t,
        };
        self.pending = Some(d);
        Ok(p)
    }

    fn commit(&mut self, ctx: &ContextSet, revealed: Option<usize>) -> Result<()> {
        let mut d = self
            .pending
            .take()
            .ok_or_else(|| Error::Config("commit without a proposal".into()))?;
        d.queried = revealed.is_some();
        self.state.observe_and_update(ctx, &d, revealed)
    }

    fn predict(&self, ctx: &ContextSet) -> Result<usize> {
        self.state.predict(ctx)
    }
}

/// Random or margin baseline inside the harness.
pub struct BaselineAgent {
    state: BaselineState,
    pending_hat: Option<usize>,
}

impl BaselineAgent {
    pub fn new(cfg: BaselineConfig) -> Result<Self> {
        Ok(Self {
            state: BaselineState::new(cfg)?,
            pending_hat: None,
        })
    }
}

impl StreamStrategy for BaselineAgent {
    fn propose(&mut self, ctx: &ContextSet) -> Result<Proposal> {
        let scores = self.state.scores(ctx)?;
        let (i_hat, i_circ) = top_two(&scores);
        let (wants_query, signal) = self.state.decide(&scores);
        self.pending_hat = Some(i_hat);
        Ok(Proposal {
            i_hat,
            i_circ,
            wants_query,
            signal,
            threshold: self.state.config().rule.threshold(),
        })
    }

    fn commit(&mut self, ctx: &ContextSet, revealed: Option<usize>) -> Result<()> {
        let i_hat = self
            .pending_hat
            .take()
            .ok_or_else(|| Error::Config("commit without a proposal".into()))?;
        self.state.baseline_update(ctx, revealed.unwrap_or(i_hat))
    }

    fn predict(&self, ctx: &ContextSet) -> Result<usize> {
        self.state.predict(ctx)
    }
}

/// `floor(fraction · n)`, guarded against representation error just below an integer.
pub fn budget_for(fraction: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("budget fraction {fraction} outside [0,1]")));
    }
    Ok((fraction * n as f64 + 1e-9).floor() as usize)
}

/// Streams `rows` of `ds` through `strategy` with at most `budget` revealed labels.
pub fn run_stream<S: StreamStrategy + ?Sized>(
    strategy: &mut S,
    ds: &Dataset,
    rows: &[usize],
    budget: usize,
) -> Result<(Vec<RoundRecord>, usize)> {
    let mut records = Vec::with_capacity(rows.len());
    let mut budget_left = budget;
    let mut regret = 0u64;
    let mut revealed_count = 0usize;
    for (t, &row) in rows.iter().enumerate() {
        let y = ds.label(row);
        let ctx = build_contexts(ds.instance(row), ds.k())?;
        let p = strategy.propose(&ctx)?;
        let loss = zero_one_loss(p.i_hat, y);
        regret += u64::from(loss);
        let granted = p.wants_query && budget_left > 0;
        let revealed = granted.then_some(y);
        if granted {
            budget_left -= 1;
            revealed_count += 1;
        }
        strategy.commit(&ctx, revealed)?;
        records.push(RoundRecord {
            t: t + 1,
            i_hat: p.i_hat,
            i_circ: p.i_circ,
            true_label: y,
            queried: granted,
            starved: p.wants_query && !granted,
            budget_left,
            loss,
            cumulative_regret: regret,
            signal: p.signal,
            threshold: p.threshold,
        });
    }
    debug_assert!(revealed_count <= budget);
    Ok((records, revealed_count))
}

/// Fraction of `rows` whose arg-max prediction matches the label.
pub fn evaluate_accuracy<S: StreamStrategy + ?Sized>(strategy: &S, ds: &Dataset, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    let mut correct = 0usize;
    for &row in rows {
        let ctx = build_contexts(ds.instance(row), ds.k())?;
        correct += usize::from(strategy.predict(&ctx)? == ds.label(row));
    }
    Ok(correct as f64 / rows.len() as f64)
}

pub fn build_strategy(cell: &CellConfig, ds: &Dataset, horizon: usize) -> Result<Box<dyn StreamStrategy + Send>> {
    let net = &cell.net;
    Ok(match cell.strategy {
        StrategySpec::INeural { gamma } => {
            let conf = &cell.confidence;
            let mut cfg = LearnerConfig::new(ds.k(), ds.d(), horizon);
            cfg.gamma = gamma;
            cfg.delta = conf.delta;
            cfg.c1 = conf.c1;
            cfg.c2 = conf.c2;
            cfg.c3 = conf.c3;
            cfg.snapshot_policy = conf.snapshot_policy;
            cfg.width = net.width;
            cfg.depth = net.depth;
            cfg.batch_size = net.batch_size;
            cfg.exploit_opt = net.opt;
            cfg.explore_opt = net.opt;
            cfg.seed = cell.seed;
            Box::new(NeuralAgent::new(cfg)?)
        }
        StrategySpec::Random { p } => Box::new(BaselineAgent::new(baseline_cfg(cell, ds, QueryRule::Random { p }))?),
        StrategySpec::Margin { threshold } => {
            Box::new(BaselineAgent::new(baseline_cfg(cell, ds, QueryRule::Margin { threshold }))?)
        }
    })
}

fn baseline_cfg(cell: &CellConfig, ds: &Dataset, rule: QueryRule) -> BaselineConfig {
    let mut cfg = BaselineConfig::new(rule, ds.k(), ds.d());
    cfg.width = cell.net.width;
    cfg.depth = cell.net.depth;
    cfg.batch_size = cell.net.batch_size;
    cfg.opt = cell.net.opt;
    cfg.seed = cell.seed;
    cfg
}

/// Runs one cell on an already loaded dataset.
pub fn run_cell(cell: &CellConfig, ds: &Dataset) -> Result<RunResult> {
    let order = shuffle(ds.len(), cell.seed)?;
    let (train, test) = order.split(cell.test_frac)?;
    let rounds = cell.rounds.unwrap_or(train.len());
    if rounds > train.len() {
        return Err(Error::Config(format!(
            "{rounds} rounds requested but only {} training instances",
            train.len()
        )));
    }
    if rounds == 0 {
        return Err(Error::Config("zero rounds".into()));
    }
    let budget = budget_for(cell.budget_fraction, ds.len())?;
    let mut strategy = build_strategy(cell, ds, rounds)?;
    let (records, queries) = run_stream(strategy.as_mut(), ds, &train[..rounds], budget)?;
    let test_accuracy = if test.is_empty() {
        f64::NAN
    } else {
        evaluate_accuracy(strategy.as_ref(), ds, test)?
    };
    let last = records.last().expect("at least one round");
    Ok(RunResult {
        strategy: cell.strategy,
        seed: cell.seed,
        rounds,
        budget,
        total_regret: last.cumulative_regret,
        queries,
        starved: records.iter().filter(|r| r.starved).count(),
        test_accuracy,
        records,
    })
}

/// Runs cells in parallel on a pool capped by `NAS_THREADS`; results keep cell order.
pub fn run_cells(cells: &[CellConfig], ds: &Dataset) -> Result<Vec<RunResult>> {
    let threads = std::env::var("NAS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                log::info!("running {} seed {}", cell.strategy.label(), cell.seed);
                run_cell(cell, ds)
            })
            .collect()
    })
}

/// A user-level benchmark: strategies, grids and seeds expanded into cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    /// Families to run: any of `i-neural`, `random`, `margin`.
    pub strategies: Vec<String>,
    pub budget_fraction: f64,
    pub rounds: Option<usize>,
    pub seeds: Vec<u64>,
    pub n_runs: usize,
    pub test_frac: f64,
    pub gamma_grid: Vec<f64>,
    pub margin_grid: Vec<f64>,
    pub random_p: f64,
    pub net: NetSettings,
    pub confidence: ConfidenceSettings,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(data: DataSource, out_dir: PathBuf) -> Self {
        Self {
            data,
            strategies: vec!["i-neural".into(), "random".into(), "margin".into()],
            budget_fraction: 0.03,
            rounds: None,
            seeds: vec![42],
            n_runs: 5,
            test_frac: 0.2,
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            margin_grid: DEFAULT_MARGIN_GRID.to_vec(),
            random_p: 0.1,
            net: NetSettings::default(),
            confidence: ConfidenceSettings::default(),
            out_dir,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "budget fraction {} outside (0,1]",
                self.budget_fraction
            )));
        }
        if self.seeds.is_empty() || self.n_runs == 0 {
            return Err(Error::Config("need at least one seed and one run".into()));
        }
        for s in &self.strategies {
            if !matches!(s.as_str(), "i-neural" | "random" | "margin") {
                return Err(Error::Config(format!("unknown strategy {s:?}")));
            }
        }
        Ok(())
    }

    /// Seeds of the reported runs: the listed seeds, extended by counting up
    /// from the last one until there are `n_runs`.
    pub fn run_seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.seeds.iter().copied().take(self.n_runs).collect();
        while seeds.len() < self.n_runs {
            let next = seeds.last().copied().unwrap_or(0).wrapping_add(1);
            seeds.push(next);
        }
        seeds
    }

    fn cell(&self, phase: &str, strategy: StrategySpec, seed: u64) -> CellConfig {
        CellConfig {
            phase: phase.into(),
            data: self.data.clone(),
            strategy,
            seed,
            budget_fraction: self.budget_fraction,
            rounds: self.rounds,
            test_frac: self.test_frac,
            net: self.net.clone(),
            confidence: self.confidence.clone(),
            pseudo_labels: true,
            starved_rounds_pseudo_labelled: true,
        }
    }

    /// Grid cells: every γ (and margin threshold) with more than one value,
    /// run once on the first seed.
    pub fn grid_cells(&self) -> Vec<CellConfig> {
        let seed = self.run_seeds()[0];
        let mut cells = Vec::new();
        for family in &self.strategies {
            match family.as_str() {
                "i-neural" if self.gamma_grid.len() > 1 => cells.extend(
                    self.gamma_grid
                        .iter()
                        .map(|&gamma| self.cell("grid", StrategySpec::INeural { gamma }, seed)),
                ),
                "margin" if self.margin_grid.len() > 1 => cells.extend(
                    self.margin_grid
                        .iter()
                        .map(|&threshold| self.cell("grid", StrategySpec::Margin { threshold }, seed)),
                ),
                _ => {}
            }
        }
        cells
    }

    /// Reported cells given the grid winners.
    pub fn final_cells(&self, grid: &[RunResult]) -> Result<Vec<CellConfig>> {
        let mut cells = Vec::new();
        for family in &self.strategies {
            let spec = match family.as_str() {
                "i-neural" => best_of(grid, "i-neural")
                    .or_else(|| self.gamma_grid.first().map(|&gamma| StrategySpec::INeural { gamma })),
                "margin" => best_of(grid, "margin")
                    .or_else(|| self.margin_grid.first().map(|&threshold| StrategySpec::Margin { threshold })),
                _ => Some(StrategySpec::Random { p: self.random_p }),
            }
            .ok_or_else(|| Error::Config(format!("empty grid for {family}")))?;
            cells.extend(self.run_seeds().into_iter().map(|seed| self.cell("final", spec, seed)));
        }
        Ok(cells)
    }
}

/// Grid winner of a family: lowest total regret, earliest grid entry on ties.
pub fn best_of(grid: &[RunResult], family: &str) -> Option<StrategySpec> {
    grid.iter()
        .filter(|r| r.strategy.family() == family)
        .min_by_key(|r| r.total_regret)
        .map(|r| r.strategy)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub runs: usize,
    pub rounds: usize,
    pub budget: usize,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub queries_mean: f64,
    pub starved_mean: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

/// Groups results by strategy label in first-seen order.
pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    let mut labels: Vec<String> = Vec::new();
    for r in results {
        let l = r.strategy.label();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&RunResult> = results.iter().filter(|r| r.strategy.label() == label).collect();
            let regret: Vec<f64> = group.iter().map(|r| r.total_regret as f64).collect();
            let acc: Vec<f64> = group.iter().map(|r| r.test_accuracy).collect();
            let queries: Vec<f64> = group.iter().map(|r| r.queries as f64).collect();
            let starved: Vec<f64> = group.iter().map(|r| r.starved as f64).collect();
            let (regret_mean, regret_std) = mean_std(&regret);
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            SummaryRow {
                strategy: label,
                runs: group.len(),
                rounds: group[0].rounds,
                budget: group[0].budget,
                regret_mean,
                regret_std,
                queries_mean: mean_std(&queries).0,
                starved_mean: mean_std(&starved).0,
                accuracy_mean,
                accuracy_std,
            }
        })
        .collect()
}

fn rounds_file_name(r: &RunResult, phase: &str) -> String {
    let label: String = r
        .strategy
        .label()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{phase}_{label}_seed{}.csv", r.seed)
}

/// Writes the output files of a benchmark:
///
/// * `manifest.jsonl`: one cell configuration per line, grid cells first
/// * `grid.csv`: summary of every grid cell
/// * `summary.csv`: mean and standard deviation over the reported runs
/// * `regret_curves.csv`: mean cumulative regret per round for each strategy
/// * `rounds/*.csv`: every round of every run
pub fn aggregate_and_emit(
    out_dir: &Path,
    grid_cells: &[CellConfig],
    grid: &[RunResult],
    final_cells: &[CellConfig],
    results: &[RunResult],
) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::Config("no runs to aggregate".into()));
    }
    fs::create_dir_all(out_dir.join("rounds"))?;

    write_manifest(&out_dir.join("manifest.jsonl"), grid_cells.iter().chain(final_cells))?;

    if !grid.is_empty() {
        write_summary(&out_dir.join("grid.csv"), &summarize(grid))?;
    }
    let summary = summarize(results);
    write_summary(&out_dir.join("summary.csv"), &summary)?;

    write_curves(&out_dir.join("regret_curves.csv"), results)?;

    for (r, phase) in grid
        .iter()
        .map(|r| (r, "grid"))
        .chain(results.iter().map(|r| (r, "final")))
    {
        let mut w = csv::Writer::from_path(out_dir.join("rounds").join(rounds_file_name(r, phase)))?;
        for rec in &r.records {
            w.serialize(rec)?;
        }
        w.flush()?;
    }
    Ok(summary)
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_curves(path: &Path, results: &[RunResult]) -> Result<()> {
    let summary = summarize(results);
    let labels: Vec<&str> = summary.iter().map(|s| s.strategy.as_str()).collect();
    let t_max = results.iter().map(|r| r.records.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    w.write_record(&header)?;
    for t in 0..t_max {
        let mut row = vec![(t + 1).to_string()];
        for label in &labels {
            let vals: Vec<f64> = results
                .iter()
                .filter(|r| r.strategy.label() == *label)
                .filter_map(|r| r.records.get(t).map(|rec| rec.cumulative_regret as f64))
                .collect();
            row.push(if vals.is_empty() {
                String::new()
            } else {
                mean_std(&vals).0.to_string()
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest<'a>(path: &Path, cells: impl Iterator<Item = &'a CellConfig>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for cell in cells {
        serde_json::to_writer(&mut w, cell)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<CellConfig>> {
    let reader = BufReader::new(File::open(path)?);
    let mut cells = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        cells.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    if cells.is_empty() {
        return Err(Error::Config("manifest has no cells".into()));
    }
    Ok(cells)
}

/// Grid search, reported runs and output files for a benchmark.
pub fn run_benchmark(cfg: &RunConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.data)?;
    log::info!("{}: {} instances, d={}, k={}", ds.name, ds.len(), ds.d(), ds.k());
    let grid_cells = cfg.grid_cells();
    let grid = run_cells(&grid_cells, &ds)?;
    let final_cells = cfg.final_cells(&grid)?;
    let results = run_cells(&final_cells, &ds)?;
    aggregate_and_emit(&cfg.out_dir, &grid_cells, &grid, &final_cells, &results)
}

/// Re-executes every cell of a manifest and writes the same set of outputs.
pub fn replay_manifest(manifest: &Path, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    let cells = read_manifest(manifest)?;
    let first = &cells[0].data;
    if cells.iter().any(|c| &c.data != first) {
        return Err(Error::Config("manifest cells use different datasets".into()));
    }
    let ds = load_dataset(first)?;
    let (grid_cells, final_cells): (Vec<CellConfig>, Vec<CellConfig>) =
        cells.into_iter().partition(|c| c.phase == "grid");
    let grid = run_cells(&grid_cells, &ds)?;
    let results = run_cells(&final_cells, &ds)?;
    aggregate_and_emit(out_dir, &grid_cells, &grid, &final_cells, &results)
}
