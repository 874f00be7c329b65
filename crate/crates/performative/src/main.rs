//! Command-line front end. All heavy lifting lives in the library's
//! `experiment` module; this binary parses a TOML config, applies flag
//! overrides, dispatches one subcommand and writes its deterministic output
//! files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use performative::experiment::{
    self, bounds_csv, lowerbound_csv, rerm_csv, sweep_csv, Config, ExperimentError, Method,
};

#[derive(Parser)]
#[command(
    name = "performative",
    about = "Binary classification under performative label shift: sweeps, repeated training, \
             bound reports and lower-bound demos",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write it as CSV.
    Gen(SubArgs),
    /// Sweep drift strength, training each method with repeats.
    Sweep(SubArgs),
    /// Run the repeated-training dynamics at one drift point.
    Rerm(SubArgs),
    /// Evaluate generalization bounds at one drift point.
    Bounds(SubArgs),
    /// Build the two-world instance and run the adversarial simulation.
    Lowerbound(SubArgs),
    /// Parse a CSV dataset and report its shape.
    IngestCheck(SubArgs),
}

#[derive(Args)]
struct SubArgs {
    /// TOML config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flag overrides, one per config field (see the README for the mapping).
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated: erm,perm
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    // dataset.*
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    path: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    p_true: Option<String>,
    #[arg(long)]
    balance: Option<bool>,

    // drift.*
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    b: Option<f64>,
    /// Four comma-separated values a1,a2,a3,a4 (with --family custom).
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,

    // oracle.*
    #[arg(long = "oracle")]
    oracle_kind: Option<String>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    bootstrap: Option<bool>,

    // train.*
    #[arg(long)]
    arch: Option<String>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    plateau: Option<bool>,
    #[arg(long)]
    plateau_factor: Option<f64>,
    #[arg(long)]
    plateau_patience: Option<usize>,

    // split.*
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,

    // rerm.*
    #[arg(long)]
    max_iters: Option<usize>,

    // bounds.*
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    #[arg(long)]
    bounds_n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rademacher: Option<f64>,
    #[arg(long)]
    rad_draws: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    midpoint: Option<bool>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    class_size: Option<usize>,

    // lowerbound.*
    #[arg(long)]
    abar1: Option<f64>,
    #[arg(long)]
    lb_epsilon: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    a3: Option<f64>,
    #[arg(long)]
    a4: Option<f64>,
    #[arg(long)]
    lb_n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Overrides {
    fn apply(self, cfg: &mut Config) -> Result<(), ExperimentError> {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        macro_rules! set_opt {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = Some(v);
                }
            };
        }
        set!(cfg.seed, self.seed);
        set!(cfg.repeats, self.repeats);
        set!(cfg.output, self.output);
        set_opt!(cfg.workers, self.workers);
        if let Some(methods) = self.methods {
            cfg.methods = methods
                .iter()
                .map(|m| match m.as_str() {
                    "erm" => Ok(Method::Erm),
                    "perm" => Ok(Method::Perm),
                    other => Err(ExperimentError::Config(format!("unknown method '{other}'"))),
                })
                .collect::<Result<_, _>>()?;
        }
        set!(cfg.dataset.source, self.source);
        set!(cfg.dataset.n, self.n);
        set_opt!(cfg.dataset.path, self.path);
        set!(cfg.dataset.label, self.label);
        set_opt!(cfg.dataset.p_true, self.p_true);
        set!(cfg.dataset.balance, self.balance);
        set!(cfg.drift.family, self.family);
        set_opt!(cfg.drift.a, self.a);
        set!(cfg.drift.grid, self.grid);
        set_opt!(cfg.drift.b, self.b);
        if let Some(p) = self.params {
            if p.len() != 4 {
                return Err(ExperimentError::Config(format!(
                    "--params takes exactly four values, got {}",
                    p.len()
                )));
            }
            cfg.drift.params = Some([p[0], p[1], p[2], p[3]]);
        }
        set!(cfg.oracle.kind, self.oracle_kind);
        set!(cfg.oracle.trees, self.trees);
        set!(cfg.oracle.depth, self.depth);
        set!(cfg.oracle.bootstrap, self.bootstrap);
        set!(cfg.train.arch, self.arch);
        set!(cfg.train.hidden, self.hidden);
        set!(cfg.train.optimizer, self.optimizer);
        set!(cfg.train.lr, self.lr);
        set!(cfg.train.epochs, self.epochs);
        set!(cfg.train.batch, self.batch);
        set!(cfg.train.l2, self.l2);
        set!(cfg.train.plateau, self.plateau);
        set!(cfg.train.plateau_factor, self.plateau_factor);
        set!(cfg.train.plateau_patience, self.plateau_patience);
        set!(cfg.split.strategy, self.strategy);
        set!(cfg.split.fractions, self.fractions);
        set!(cfg.rerm.max_iters, self.max_iters);
        set!(cfg.bounds.kinds, self.kinds);
        set!(cfg.bounds.n, self.bounds_n);
        set!(cfg.bounds.delta, self.delta);
        set_opt!(cfg.bounds.rademacher, self.rademacher);
        set!(cfg.bounds.rad_draws, self.rad_draws);
        set!(cfg.bounds.epsilon, self.epsilon);
        set!(cfg.bounds.midpoint, self.midpoint);
        set!(cfg.bounds.m, self.m);
        set!(cfg.bounds.class_size, self.class_size);
        set!(cfg.lowerbound.abar1, self.abar1);
        set!(cfg.lowerbound.epsilon, self.lb_epsilon);
        set_opt!(cfg.lowerbound.a2, self.a2);
        set_opt!(cfg.lowerbound.a3, self.a3);
        set_opt!(cfg.lowerbound.a4, self.a4);
        set!(cfg.lowerbound.n, self.lb_n);
        set!(cfg.lowerbound.trials, self.trials);
        Ok(())
    }
}

enum Which {
    Gen,
    Sweep,
    Rerm,
    Bounds,
    Lowerbound,
    IngestCheck,
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let (args, which) = match cli.command {
        Command::Gen(a) => (a, Which::Gen),
        Command::Sweep(a) => (a, Which::Sweep),
        Command::Rerm(a) => (a, Which::Rerm),
        Command::Bounds(a) => (a, Which::Bounds),
        Command::Lowerbound(a) => (a, Which::Lowerbound),
        Command::IngestCheck(a) => (a, Which::IngestCheck),
    };
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    args.overrides.apply(&mut cfg)?;
    let prefix = cfg.output.clone();
    match which {
        Which::Gen => {
            let out = experiment::run_gen(&cfg)?;
            experiment::write_outputs(&prefix, &out, None)?;
            println!(
                "gen: {} rows x {} columns (positive fraction {:.4}) -> {}",
                out.rows, out.columns, out.positive_fraction, out.csv_path
            );
        }
        Which::Sweep => {
            let out = experiment::run_sweep(&cfg)?;
            experiment::write_outputs(&prefix, &out, Some(&sweep_csv(&out)))?;
            for p in &out.results {
                println!(
                    "sweep: a={:<6} {:<5} mean={:.4} std={:.4}",
                    p.a, p.method, p.mean_accuracy, p.std_accuracy
                );
            }
            println!("sweep: wrote {prefix}.json and {prefix}.csv");
            if !out.failures.is_empty() {
                // partial results are on disk with failure markers; report
                // the run as failed with the first failure's class
                for f in &out.failures {
                    eprintln!(
                        "sweep: FAILED cell a={} {} repeat {}: {}",
                        f.a, f.method, f.repeat, f.error
                    );
                }
                return Err(ExperimentError::Config(format!(
                    "{} sweep cells failed (partial results written)",
                    out.failures.len()
                ))
                .with_code(out.failures[0].exit_code));
            }
        }
        Which::Rerm => {
            let out = experiment::run_rerm_experiment(&cfg)?;
            experiment::write_outputs(&prefix, &out, Some(&rerm_csv(&out)))?;
            println!(
                "rerm: {} iterations, status {:?}, reference accuracy {:.4}",
                out.iterations.len(),
                out.status,
                out.perm_reference_accuracy
            );
        }
        Which::Bounds => {
            let out = experiment::run_bounds_report(&cfg)?;
            experiment::write_outputs(&prefix, &out, Some(&bounds_csv(&out)))?;
            for r in &out.reports {
                println!(
                    "bounds: {:<18} deviation={:?} excess={:?}",
                    r.kind, r.deviation_rhs, r.excess_rhs
                );
            }
        }
        Which::Lowerbound => {
            let out = experiment::run_lowerbound_demo(&cfg)?;
            experiment::write_outputs(&prefix, &out, Some(&lowerbound_csv(&out)))?;
            println!(
                "lowerbound: chosen world {:?}, failure frequency {:.4} (threshold eps/4 = {})",
                out.outcome.chosen_world,
                out.outcome.failure_frequency,
                out.instance.epsilon / 4.0
            );
        }
        Which::IngestCheck => {
            let out = experiment::run_ingest_check(&cfg)?;
            experiment::write_outputs(&prefix, &out, None)?;
            println!(
                "ingest-check: {} rows x {} columns, {} positive / {} negative, p column: {}, \
                 roundtrip: {}",
                out.rows,
                out.columns,
                out.positives,
                out.negatives,
                out.has_probabilities,
                if out.roundtrip_ok { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
