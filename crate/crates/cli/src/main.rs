use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpp_impute::dpp::{self, LEnsemble};
use dpp_impute::forest::Sampler;
use dpp_impute::harness::{self, ExperimentConfig, GbtConfig, SyntheticSpec};
use dpp_impute::impute::{self, ImputeConfig, MaskedData, Method};
use dpp_impute::numerics::{self, Matrix};
use dpp_impute::qdpp::{self, LoaderTopology};
use dpp_impute::error::Context;
use dpp_impute::{Error, Result, SeedStream};
use serde::de::DeserializeOwned;
use serde_json::json;

#[derive(Parser)]
#[command(name = "dppimpute", version, about = "DPP-subsampled forest imputation, evaluation and quantum DPP simulation")]
struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-class dataset as CSV.
    GenerateData(GenerateArgs),
    /// Hide cells of a CSV at random (MCAR) or depending on the outcome (MNAR).
    InduceMissingness(MissingnessArgs),
    /// Fill the empty cells of a CSV with MissForest or MICE.
    Impute(ImputeArgs),
    /// Three-fold consecutive holdout AUC of a complete CSV.
    Evaluate(EvaluateArgs),
    /// Run a full experiment grid from a JSON configuration.
    Benchmark(BenchmarkArgs),
    /// Sample or select subsets from the Gram kernel of a feature CSV.
    DppSample(DppArgs),
    /// Simulate the loader circuit for an orthonormal matrix.
    QdppSimulate(QdppArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    informative: Option<usize>,
    #[arg(long)]
    class_sep: Option<f64>,
    #[arg(long, default_value = "y")]
    outcome_column: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Mcar,
    Mnar,
}

#[derive(Args)]
struct MissingnessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    outcome_column: String,
    #[arg(long, value_enum, default_value = "mcar")]
    kind: Kind,
    #[arg(long, default_value_t = 0.2)]
    rate: f64,
    /// Relative shift of the MNAR rate between the classes.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    outcome_column: String,
    /// missforest or mice_pmm.
    #[arg(long)]
    method: Option<Method>,
    /// uniform, dpp or detdpp.
    #[arg(long)]
    sampler: Option<Sampler>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    k_per_batch: Option<usize>,
    /// Complete CSV to score the imputation against (RMSE on the filled cells).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    outcome_column: String,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Summary CSV, one row per (dataset, missingness, method, holdout).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Full JSON report including per-repeat records.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DppMode {
    /// Spectral k-DPP samples.
    Sample,
    /// Greedy deterministic selection.
    Greedy,
    /// Exact most likely subset by enumeration.
    Mode,
}

#[derive(Args)]
struct DppArgs {
    /// CSV of feature rows; the kernel is their Gram matrix.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "sample")]
    mode: DppMode,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// z-score each column before building the kernel.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QdppArgs {
    /// CSV holding the n x d matrix A.
    #[arg(long)]
    input: PathBuf,
    /// Replace A by an orthonormal basis of its column space first.
    #[arg(long)]
    orthonormalize: bool,
    #[arg(long, default_value_t = qdpp::DEFAULT_SHOTS)]
    shots: usize,
    #[arg(long, value_enum, default_value = "parallel")]
    topology: Topology,
    /// Write the circuit's gate list as JSON.
    #[arg(long)]
    gates: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Topology {
    Diagonal,
    SemiDiagonal,
    Parallel,
}

impl From<Topology> for LoaderTopology {
    fn from(t: Topology) -> Self {
        match t {
            Topology::Diagonal => LoaderTopology::Diagonal,
            Topology::SemiDiagonal => LoaderTopology::SemiDiagonal,
            Topology::Parallel => LoaderTopology::Parallel,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::from).with_context(|| p.display().to_string())?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
        }
    }
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text).map_err(Error::from).with_context(|| p.display().to_string())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::GenerateData(a) => {
            let mut spec: SyntheticSpec = read_config(config)?;
            spec.n_rows = a.rows.unwrap_or(spec.n_rows);
            spec.n_features = a.features.unwrap_or(spec.n_features);
            spec.n_informative = a.informative.unwrap_or(spec.n_informative.min(spec.n_features));
            spec.class_sep = a.class_sep.unwrap_or(spec.class_sep);
            spec.seed = cli.seed.unwrap_or(spec.seed);
            let d = harness::generate_synthetic(&spec)?;
            harness::write_csv(&a.out, d.x.as_slice(), d.x.cols(), &d.feature_names, &d.y, &a.outcome_column)?;
            eprintln!("wrote {} rows x {} features to {}", d.x.rows(), d.x.cols(), a.out.display());
        }
        Command::InduceMissingness(a) => {
            let data = harness::load_csv(&a.input, &a.outcome_column)?;
            let mut rng = SeedStream::new(cli.seed.unwrap_or(0)).rng();
            let masked = match a.kind {
                Kind::Mcar => impute::induce_mcar(&data, a.rate, &mut rng)?,
                Kind::Mnar => impute::induce_mnar(&data, a.rate, a.delta, &mut rng)?,
            };
            harness::write_masked_csv(&a.out, &masked, &a.outcome_column)?;
            eprintln!("missing fraction {:.4}", masked.missing_fraction());
        }
        Command::Impute(a) => {
            let mut cfg: ImputeConfig = read_config(config)?;
            cfg.method = a.method.unwrap_or(cfg.method);
            cfg.sampler = a.sampler.unwrap_or(cfg.sampler);
            cfg.n_iterations = a.iterations.unwrap_or(cfg.n_iterations);
            cfg.forest.n_trees = a.trees.unwrap_or(cfg.forest.n_trees);
            cfg.forest.batch_size = a.batch_size.unwrap_or(cfg.forest.batch_size);
            cfg.forest.k_per_batch = a.k_per_batch.or(cfg.forest.k_per_batch);
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            let data = harness::load_csv(&a.input, &a.outcome_column)?;
            let imputed = impute::impute(&data, &cfg)?;
            harness::write_csv(&a.out, imputed.as_slice(), imputed.cols(), data.feature_names(), data.outcome(), &a.outcome_column)?;
            eprintln!("{}: filled {} cells", cfg.label(), data.missing_count());
            if let Some(truth_path) = a.truth {
                let truth = complete_matrix(&harness::load_csv(&truth_path, &a.outcome_column)?)?;
                let rmse = impute::imputation_rmse(&imputed, &truth, &data.mask())?;
                emit(&json!({ "method": cfg.label(), "rmse": rmse }), None)?;
            }
        }
        Command::Evaluate(a) => {
            let cfg: GbtConfig = read_config(config)?;
            let data = harness::load_csv(&a.input, &a.outcome_column)?;
            let x = complete_matrix(&data)?;
            let aucs = harness::three_fold_eval(&x, data.outcome(), &cfg, cli.seed.unwrap_or(0))?.0;
            emit(&json!({ "H1": aucs[0], "H2": aucs[1], "H3": aucs[2] }), a.out.as_deref())?;
        }
        Command::Benchmark(a) => {
            let mut cfg: ExperimentConfig = read_config(config)?;
            cfg.repeats = a.repeats.unwrap_or(cfg.repeats);
            cfg.threads = a.threads.or(cfg.threads);
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            let report = harness::run_experiment(&cfg)?;
            if let Some(p) = &a.out_csv {
                report.write_csv(p)?;
            }
            if let Some(p) = &a.out_json {
                report.write_json(p)?;
            }
            println!("{:<6} {:<20} {:<3} {:>8} {:>8}", "miss", "method", "H", "mean", "sd");
            for row in &report.summary {
                println!("{:<6} {:<20} {:<3} {:>8.4} {:>8.4}", row.missingness, row.method, row.holdout, row.mean, row.sd);
            }
        }
        Command::DppSample(a) => {
            let (mut features, _) = harness::read_matrix_csv(&a.input)?;
            if a.standardize {
                features = standardize(&features);
            }
            let ensemble = LEnsemble::from_features(features.clone())?;
            let value = match a.mode {
                DppMode::Sample => {
                    let mut rng = SeedStream::new(cli.seed.unwrap_or(0)).rng();
                    let samples: Vec<Vec<usize>> = (0..a.samples)
                        .map(|_| dpp::sample_kdpp(&ensemble, a.k, &mut rng).map(|s| s.into_indices()))
                        .collect::<Result<_>>()?;
                    json!({ "mode": "sample", "k": a.k, "samples": samples })
                }
                DppMode::Greedy => {
                    let s = dpp::det_kdpp(ensemble.kernel(), a.k)?;
                    json!({ "mode": "greedy", "k": a.k, "subset": s.indices() })
                }
                DppMode::Mode => {
                    let s = dpp::highest_prob_subset_bruteforce(&ensemble, a.k)?;
                    let dist = dpp::kdpp_distribution_bruteforce(&ensemble, a.k)?;
                    json!({ "mode": "mode", "k": a.k, "subset": s.indices(), "probability": dist.prob(s.indices()) })
                }
            };
            emit(&value, a.out.as_deref())?;
        }
        Command::QdppSimulate(a) => {
            let (mut m, _) = harness::read_matrix_csv(&a.input)?;
            if a.orthonormalize {
                m = numerics::qr_orthonormalize(&m)?;
            }
            let state = qdpp::simulate_qdpp(&m)?;
            let mut rng = SeedStream::new(cli.seed.unwrap_or(0)).rng();
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for s in qdpp::measure(&state, a.shots, &mut rng)? {
                *counts.entry(format!("{:?}", s.indices())).or_default() += 1;
            }
            let mut amplitudes: BTreeMap<String, f64> = BTreeMap::new();
            dpp::for_each_combination(m.rows(), m.cols(), |s| {
                amplitudes.insert(format!("{s:?}"), state.amplitude(s));
            });
            let most_frequent = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| k.clone());
            let circuit = qdpp::build_qdpp_circuit(&m, a.topology.into())?;
            if let Some(p) = &a.gates {
                fs::write(p, circuit.to_json()?).map_err(Error::from).with_context(|| p.display().to_string())?;
            }
            let value = json!({
                "n": m.rows(),
                "d": m.cols(),
                "amplitudes": amplitudes,
                "shots": a.shots,
                "counts": counts,
                "most_frequent": most_frequent,
                "exact_mode": qdpp::exact_mode(&m)?.indices(),
                "resources": qdpp::resources(&circuit),
                "reference_parallel_depth": qdpp::reference_parallel_depth(m.rows(), m.cols()),
            });
            emit(&value, a.out.as_deref())?;
        }
    }
    Ok(())
}

fn complete_matrix(data: &MaskedData) -> Result<Matrix> {
    if data.missing_count() > 0 {
        return Err(Error::InvalidInput(format!("{} cells are missing; impute first", data.missing_count())));
    }
    Matrix::new(data.rows(), data.cols(), data.raw_values().to_vec())
}

fn standardize(m: &Matrix) -> Matrix {
    let n = m.rows() as f64;
    let stats: Vec<(f64, f64)> = (0..m.cols())
        .map(|j| {
            let c = m.column(j);
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, sd)
        })
        .collect();
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        let (mean, sd) = stats[j];
        if sd > 0.0 {
            (m[(i, j)] - mean) / sd
        } else {
            0.0
        }
    })
}
