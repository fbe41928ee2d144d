//! Command line for the library: simulation studies, clustering of angle
//! files, face reports and the structural check suites.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 on input errors.

use clap::{Args, Parser, Subcommand};
use extclust::clustering::Method;
use extclust::error::Error;
use extclust::experiment::{
    run_check, run_cluster, run_faces, run_simulate, CheckConfig, CheckSuite, ClusterConfig,
    D1Spec, FacesConfig, KSpec, SimulateConfig,
};
use extclust::faces::MatchRule;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "extclust",
    about = "Spherical clustering for groups of concomitant extremes",
    version
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Master seed for everything randomized.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: std::path::PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation study: random variograms, max-stable samples,
    /// clustering, face detection and error counts.
    Simulate(SimulateArgs),
    /// Cluster a CSV of unit angles (or raw positive data).
    Cluster(ClusterArgs),
    /// Detect faces of centroids and score them against a truth file.
    Faces(FacesArgs),
    /// Run the structural check suites.
    Check(CheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Ambient dimension.
    #[arg(long, default_value_t = 20)]
    d: usize,
    /// Fixed size of the first group.
    #[arg(long, conflicts_with = "d1_range")]
    d1: Option<usize>,
    /// Range lo:hi for the first group size, drawn uniformly per
    /// replication.
    #[arg(long = "d1-range", value_parser = parse_range)]
    d1_range: Option<(usize, usize)>,
    /// Max-stable samples per replication.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Fraction of largest-norm rows kept as angles.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Number of clusters.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Random restarts per fit.
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Number of replications.
    #[arg(long, default_value_t = 30)]
    replications: usize,
    /// Angular threshold(s) for the joint error rule (repeatable).
    #[arg(long = "eps-angle")]
    eps_angle: Vec<f64>,
    /// Entrywise threshold(s) for the truncation detector (repeatable).
    #[arg(long = "eps-entry")]
    eps_entry: Vec<f64>,
    /// Centroid-to-face matching: fixed or perm.
    #[arg(long = "match", default_value = "perm", value_parser = parse_match)]
    match_rule: MatchRule,
}

#[derive(Args)]
struct ClusterArgs {
    /// Input CSV: unit angles x1..xd, or raw positives y1..yd with --raw.
    input: PathBuf,
    /// Treat the input as raw data and extract angles first.
    #[arg(long)]
    raw: bool,
    /// Standardize raw columns to the unit-Fréchet scale by the rank
    /// transform -1/log(r/(n+1)) before extraction.
    #[arg(long = "rank-transform", requires = "raw")]
    rank_transform: bool,
    /// Fraction of largest-norm rows kept (with --raw).
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Number of clusters.
    #[arg(long, conflicts_with = "k_range")]
    k: Option<usize>,
    /// Range lo:hi of cluster counts.
    #[arg(long = "k-range", value_parser = parse_range)]
    k_range: Option<(usize, usize)>,
    /// kmeans, kpc or both.
    #[arg(long, default_value = "both", value_parser = parse_methods)]
    method: MethodChoice,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Angular threshold(s) for the per-k face statistics (repeatable;
    /// default 1/5, 1/4, 1/3).
    #[arg(long = "eps-angle")]
    eps_angle: Vec<f64>,
}

#[derive(Args)]
struct FacesArgs {
    /// Centroid CSV (x1..xd).
    input: PathBuf,
    #[arg(long = "eps-angle")]
    eps_angle: Vec<f64>,
    #[arg(long = "eps-entry")]
    eps_entry: Vec<f64>,
    /// Ground-truth partition CSV (face,indices with ; separators).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long = "match", default_value = "perm", value_parser = parse_match)]
    match_rule: MatchRule,
}

#[derive(Args)]
struct CheckArgs {
    /// eigen, bounds, conditions or all.
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    suite: CheckSuite,
    /// Random trials for the sweep checks.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Optional discrete-law CSV to validate.
    #[arg(long)]
    law: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo = lo.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_match(s: &str) -> Result<MatchRule, String> {
    match s {
        "fixed" => Ok(MatchRule::Fixed),
        "perm" | "best_permutation" => Ok(MatchRule::BestPermutation),
        other => Err(format!("unknown match rule {other:?}")),
    }
}

#[derive(Clone, Copy, Debug)]
enum MethodChoice {
    KMeans,
    Kpc,
    Both,
}

impl MethodChoice {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::KMeans => vec![Method::KMeans],
            MethodChoice::Kpc => vec![Method::Kpc],
            MethodChoice::Both => vec![Method::KMeans, Method::Kpc],
        }
    }
}

fn parse_methods(s: &str) -> Result<MethodChoice, String> {
    match s {
        "kmeans" => Ok(MethodChoice::KMeans),
        "kpc" => Ok(MethodChoice::Kpc),
        "both" => Ok(MethodChoice::Both),
        other => Err(format!("unknown method {other:?}")),
    }
}

fn parse_suite(s: &str) -> Result<CheckSuite, String> {
    match s {
        "eigen" => Ok(CheckSuite::Eigen),
        "bounds" => Ok(CheckSuite::Bounds),
        "conditions" => Ok(CheckSuite::Conditions),
        "all" => Ok(CheckSuite::All),
        other => Err(format!("unknown suite {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cli.threads > 0 {
        builder = builder.num_threads(cli.threads);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    pool.install(|| dispatch(cli.command, cli.seed, cli.out))
}

fn dispatch(command: Command, seed: u64, out: std::path::PathBuf) -> ExitCode {
    match command {
        Command::Simulate(args) => {
            let d1 = match (args.d1, args.d1_range) {
                (Some(v), _) => D1Spec::Fixed(v),
                (None, Some((lo, hi))) => D1Spec::Range(lo, hi),
                (None, None) => D1Spec::Range(1, args.d.saturating_sub(1).max(1)),
            };
            let config = SimulateConfig {
                d: args.d,
                d1,
                n: args.n,
                fraction: args.fraction,
                k: args.k,
                restarts: args.restarts,
                replications: args.replications,
                seed,
                eps_angle: non_empty(args.eps_angle, vec![0.1]),
                eps_entry: non_empty(args.eps_entry, vec![0.1]),
                methods: vec![Method::KMeans, Method::Kpc],
                match_rule: args.match_rule,
                out_dir: out,
            };
            match run_simulate(&config) {
                Ok(out) => {
                    println!("method,eps_angle,errors,centroids,error_rate");
                    for a in &out.aggregates {
                        println!(
                            "{},{},{},{},{:.4}",
                            a.method.name(),
                            a.eps_angle,
                            a.errors,
                            a.centroids,
                            a.error_rate
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Cluster(args) => {
            let k = match (args.k, args.k_range) {
                (Some(v), _) => KSpec::Single(v),
                (None, Some((lo, hi))) => KSpec::Range(lo, hi),
                (None, None) => KSpec::Single(2),
            };
            let methods = args.method.methods();
            let config = ClusterConfig {
                input: args.input,
                raw: args.raw,
                rank_transform: args.rank_transform,
                fraction: args.fraction,
                k,
                methods,
                restarts: args.restarts,
                seed,
                eps_angle: non_empty(args.eps_angle, vec![0.2, 0.25, 1.0 / 3.0]),
                out_dir: out,
            };
            match run_cluster(&config) {
                Ok(rows) => {
                    println!("method,k,reward,objective,iterations,converged");
                    for r in &rows {
                        println!(
                            "{},{},{:.12},{:.12},{},{}",
                            r.method.name(),
                            r.k,
                            r.reward,
                            r.objective,
                            r.iterations,
                            r.converged
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Faces(args) => {
            let config = FacesConfig {
                input: args.input,
                eps_angle: non_empty(args.eps_angle, vec![0.1]),
                eps_entry: non_empty(args.eps_entry, vec![0.1]),
                truth: args.truth,
                match_rule: args.match_rule,
                out_dir: out,
            };
            match run_faces(&config) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Check(args) => {
            let config = CheckConfig {
                suite: args.suite,
                trials: args.trials,
                seed,
                law: args.law,
            };
            match run_check(&config) {
                Ok(rows) => {
                    println!("check,trials,status,worst_slack,detail");
                    let mut all = true;
                    for r in &rows {
                        println!("{}", r.to_csv());
                        all &= r.passed;
                    }
                    if all {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}

fn non_empty(v: Vec<f64>, default: Vec<f64>) -> Vec<f64> {
    if v.is_empty() {
        default
    } else {
        v
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}
