use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use nas_core::bench::{self, DataFormat, DataSource, RunConfig, SummaryRow};
use nas_core::data::BinaryRule;
use nas_core::gradcheck;
use nas_core::learner::{LearnerConfig, SnapshotPolicy};
use nas_core::nn::OptimizerConfig;
use nas_core::synthetic::{self, Family, SyntheticSpec};

#[derive(Parser)]
#[command(name = "nas", version, about = "Neural active learning on streams under a label budget")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Budgeted streaming benchmark on a real dataset.
    Run(RunArgs),
    /// Query and regret behaviour on synthetic margin data.
    Synth(SynthArgs),
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Idx,
    Libsvm,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Latest,
    UniformFromOmega,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    LinearLogit,
    ClusterMixture,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Dataset file (idx: directory or images file).
    #[arg(long, required_unless_present = "manifest")]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    format: FormatArg,
    /// Binary reduction: odd-even, am-nz, tshirt-trouser, horse-ship.
    #[arg(long)]
    transform: Option<String>,
    /// Comma-separated: i-neural, random, margin.
    #[arg(long, default_value = "i-neural,random,margin", value_delimiter = ',')]
    strategy: Vec<String>,
    #[arg(long, default_value_t = 0.03)]
    budget_frac: f64,
    /// Rounds to stream (default: the whole training split).
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, default_value = "42", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// γ values; more than one triggers a grid search on the first seed.
    #[arg(long, default_value = "1,2,5,6,7,10", value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Margin thresholds; more than one triggers a grid search.
    #[arg(long, default_value = "0.3,0.5,0.7,0.9,0.95", value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    random_p: f64,
    #[arg(long, default_value_t = 100)]
    width: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    #[arg(long, value_enum, default_value = "latest")]
    snapshot_policy: PolicyArg,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    #[arg(long)]
    max_samples: Option<usize>,
    /// Seed of the `--max-samples` subset.
    #[arg(long, default_value_t = 42)]
    sample_seed: u64,
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    /// Replay every run listed in a manifest instead of configuring one.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Key=value spec file; overrides the shape flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value = "0.5", value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, value_enum, default_value = "linear-logit")]
    family: FamilyArg,
    #[arg(long, default_value_t = 10_000)]
    rounds: usize,
    #[arg(long, default_value = "6", value_delimiter = ',')]
    gamma: Vec<f64>,
    #[arg(long, default_value = "0,1,2,3,4", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Seed of the hidden distribution.
    #[arg(long, default_value_t = 42)]
    data_seed: u64,
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    #[arg(long, default_value_t = 100)]
    width: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value = "results-synth")]
    out: PathBuf,
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<28} {:>5} {:>14} {:>9} {:>8} {:>14}",
        "strategy", "runs", "regret", "queries", "starved", "accuracy"
    );
    for r in rows {
        println!(
            "{:<28} {:>5} {:>8.1}±{:<5.1} {:>9.1} {:>8.1} {:>8.4}±{:.4}",
            r.strategy, r.runs, r.regret_mean, r.regret_std, r.queries_mean, r.starved_mean, r.accuracy_mean, r.accuracy_std
        );
    }
}

fn run(args: RunArgs) -> Result<()> {
    if let Some(manifest) = &args.manifest {
        let rows = bench::replay_manifest(manifest, &args.out)
            .with_context(|| format!("replaying {}", manifest.display()))?;
        print_summary(&rows);
        return Ok(());
    }
    let source = DataSource {
        path: args.dataset.clone().expect("clap enforces --dataset"),
        format: match args.format {
            FormatArg::Idx => DataFormat::Idx,
            FormatArg::Libsvm => DataFormat::Libsvm,
            FormatArg::Csv => DataFormat::Csv,
        },
        transform: args.transform.as_deref().map(str::parse::<BinaryRule>).transpose()?,
        max_samples: args.max_samples,
        sample_seed: args.sample_seed,
    };
    let mut cfg = RunConfig::new(source, args.out.clone());
    cfg.strategies = args.strategy;
    cfg.budget_fraction = args.budget_frac;
    cfg.rounds = args.rounds;
    cfg.seeds = args.seeds;
    cfg.n_runs = args.runs;
    cfg.test_frac = args.test_frac;
    cfg.gamma_grid = args.gamma;
    cfg.margin_grid = args.threshold;
    cfg.random_p = args.random_p;
    cfg.net.width = args.width;
    cfg.net.depth = args.depth;
    cfg.net.batch_size = args.batch;
    cfg.net.opt = match args.optimizer {
        OptimizerArg::Adam => OptimizerConfig::adam(args.lr),
        OptimizerArg::Sgd => OptimizerConfig::plain_sgd(args.lr),
    };
    cfg.confidence.delta = args.delta;
    cfg.confidence.c3 = args.c3;
    cfg.confidence.snapshot_policy = match args.snapshot_policy {
        PolicyArg::Latest => SnapshotPolicy::Latest,
        PolicyArg::UniformFromOmega => SnapshotPolicy::UniformFromOmega,
    };
    let rows = bench::run_benchmark(&cfg)?;
    print_summary(&rows);
    println!("outputs written to {}", cfg.out_dir.display());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let base = match &args.spec {
        Some(p) => SyntheticSpec::load(p)?,
        None => {
            let mut s = SyntheticSpec::new(args.k, args.d, args.epsilon[0], args.data_seed);
            s.family = match args.family {
                FamilyArg::LinearLogit => Family::LinearLogit,
                FamilyArg::ClusterMixture => Family::ClusterMixture,
            };
            s.n_test = args.n_test;
            s
        }
    };
    let epsilons = if args.spec.is_some() { vec![base.epsilon] } else { args.epsilon.clone() };

    let mut summary = csv::Writer::from_path(args.out.join("synth_summary.csv"))?;
    summary.write_record([
        "epsilon",
        "gamma",
        "seed",
        "rounds",
        "queries_first_half",
        "queries_second_half",
        "latest_regret",
        "std_error",
        "conditional_regret",
    ])?;
    let mut curves = csv::Writer::from_path(args.out.join("query_curves.csv"))?;
    curves.write_record(["epsilon", "gamma", "seed", "t", "cumulative_queries"])?;

    for &eps in &epsilons {
        let mut spec = base.clone();
        spec.epsilon = eps;
        if spec.epsilon >= 1.0 && args.spec.is_none() {
            spec.sharpness = None;
        }
        spec.save(&args.out.join(format!("spec_eps{eps}.kv")))?;
        for &gamma in &args.gamma {
            for &seed in &args.seeds {
                let mut cfg = LearnerConfig::new(spec.k, spec.d, args.rounds);
                cfg.gamma = gamma;
                cfg.seed = seed;
                cfg.c3 = args.c3;
                cfg.width = args.width;
                cfg.exploit_opt = OptimizerConfig::adam(args.lr);
                cfg.explore_opt = OptimizerConfig::adam(args.lr);
                let r = synthetic::run_synthetic(&spec, &cfg, args.rounds)?;
                println!(
                    "eps={eps} gamma={gamma} seed={seed}: queries {} then {}, R_T={:.4}±{:.4}",
                    r.queries_first_half, r.queries_second_half, r.regret.latest_regret, r.regret.std_error
                );
                summary.write_record([
                    eps.to_string(),
                    gamma.to_string(),
                    seed.to_string(),
                    r.rounds.to_string(),
                    r.queries_first_half.to_string(),
                    r.queries_second_half.to_string(),
                    r.regret.latest_regret.to_string(),
                    r.regret.std_error.to_string(),
                    r.regret.conditional_regret.to_string(),
                ])?;
                for (t, q) in r.query_curve.iter().enumerate() {
                    curves.write_record([
                        eps.to_string(),
                        gamma.to_string(),
                        seed.to_string(),
                        (t + 1).to_string(),
                        q.to_string(),
                    ])?;
                }
            }
        }
    }
    summary.flush()?;
    curves.flush()?;
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
        Command::Gradcheck { cases, seed } => {
            let r = gradcheck::run_battery(cases, seed)?;
            println!(
                "{} cases ({} skipped near kinks): max rel err params {:.3e}, input {:.3e}",
                r.cases, r.skipped, r.max_rel_err_params, r.max_rel_err_input
            );
            if r.max_rel_err() > 1e-4 {
                bail!("gradient check failed");
            }
            Ok(())
        }
    }
}
