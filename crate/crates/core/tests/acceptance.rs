//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any hard criterion fails. Criterion 4 is a soft
//! regression alarm: it is reported but never fails the run.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dpp_impute::dpp::{self, LEnsemble, SubsetSample};
use dpp_impute::forest::{self, ForestConfig, Sampler, Selector};
use dpp_impute::harness::{self, DatasetSpec, ExperimentConfig, GbtConfig, MissingnessSpec, Regime, SyntheticSpec};
use dpp_impute::impute::{self, ImputeConfig, MaskedData, Method};
use dpp_impute::numerics::{self, Matrix};
use dpp_impute::qdpp::{self, LoaderTopology};
use dpp_impute::SeedStream;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if took > limit {
        out.pass = false;
        out.detail += &format!("; exceeded the {}s budget", limit.as_secs());
    }
    (out, took)
}

fn synthetic_500x8() -> SyntheticSpec {
    SyntheticSpec { n_rows: 500, n_features: 8, n_informative: 8, class_sep: 1.0, seed: 2024 }
}

fn sampler_correctness() -> Outcome {
    let (mut worst_tv, mut min_p, mut cases) = (0.0f64, 1.0f64, 0);
    for e in 0..20u64 {
        let l = LEnsemble::from_kernel(common::random_psd(6, 6, 10_000 + e)).unwrap();
        for k in [2, 3] {
            let oracle: BTreeMap<Vec<usize>, f64> =
                dpp::kdpp_distribution_bruteforce(&l, k).unwrap().iter().map(|(s, p)| (s.to_vec(), p)).collect();
            let mut rng = SeedStream::new(e).child(k as u64).rng();
            let counts =
                common::count((0..50_000).map(|_| dpp::sample_kdpp(&l, k, &mut rng).unwrap().into_indices()));
            worst_tv = worst_tv.max(common::tv(&oracle, &counts));
            let p = common::chi_square_p(&oracle, &counts);
            if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() { eprintln!("case {e}/{k}: p {p:.4}"); }
            min_p = min_p.min(p);
            cases += 1;
        }
    }
    check(worst_tv <= 0.02 && min_p > 0.001, format!("{cases} ensembles x 50000 samples; worst TV {worst_tv:.4}, min chi-square p {min_p:.4}"))
}

fn greedy_fidelity() -> Outcome {
    let mut mismatches = 0;
    let mut unstable = 0;
    for i in 0..200u64 {
        let n = 2 + (i as usize % 11);
        let rank = 1 + (i as usize * 7 % n);
        let kernel = common::random_psd(n, rank, 20_000 + i);
        let k = 1 + (i as usize * 3 % rank);
        let ours = dpp::det_kdpp(&kernel, k).unwrap();
        let mut oracle = common::greedy_oracle(&kernel, k);
        oracle.sort_unstable();
        if ours.indices() != oracle.as_slice() {
            mismatches += 1;
        }
        if (0..100).any(|_| dpp::det_kdpp(&kernel, k).unwrap() != ours) {
            unstable += 1;
        }
    }
    check(
        mismatches == 0 && unstable == 0,
        format!("200 kernels (n <= 12): {mismatches} oracle mismatches, {unstable} kernels not bit-stable over 100 runs"),
    )
}

fn impute_then_score(data: &MaskedData, cfg: &ImputeConfig) -> (Matrix, [f64; 3]) {
    let imputed = impute::impute(data, cfg).unwrap();
    let aucs = harness::three_fold_eval(&imputed, data.outcome(), &GbtConfig::default(), 0).unwrap().0;
    (imputed, aucs)
}

fn zero_variance() -> Outcome {
    let data = harness::generate_synthetic(&synthetic_500x8()).unwrap().to_masked().unwrap();
    let masked = impute::induce_mcar(&data, 0.2, &mut SeedStream::new(77).rng()).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for method in [Method::MissForest, Method::MicePmm] {
        for sampler in [Sampler::DetDpp, Sampler::Uniform] {
            let base = ImputeConfig { method, sampler, ..ImputeConfig::default() };
            let runs: Vec<(Matrix, [f64; 3])> =
                (0..10).map(|seed| impute_then_score(&masked, &ImputeConfig { seed: 1000 + seed, ..base })).collect();
            let identical = runs.iter().all(|(m, _)| m.as_slice().iter().zip(runs[0].0.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
            let sds: Vec<f64> = (0..3).map(|h| harness::mean_sd(&runs.iter().map(|r| r.1[h]).collect::<Vec<_>>()).1).collect();
            let max_sd = sds.iter().copied().fold(0.0, f64::max);
            let ok = match sampler {
                Sampler::DetDpp => identical && max_sd == 0.0,
                _ => !identical && max_sd > 0.0,
            };
            pass &= ok;
            notes.push(format!("{} identical={identical} max SD={max_sd:.2e}", base.label()));
        }
    }
    check(pass, notes.join("; "))
}

fn comparative_trend() -> Outcome {
    let base = ImputeConfig::default();
    let methods = [Sampler::Uniform, Sampler::Dpp, Sampler::DetDpp]
        .map(|sampler| ImputeConfig { method: Method::MissForest, sampler, ..base })
        .to_vec();
    let cfg = ExperimentConfig {
        dataset: DatasetSpec::Synthetic(synthetic_500x8()),
        missingness: vec![MissingnessSpec::mcar(0.2), MissingnessSpec::mnar(0.2, 0.5)],
        methods,
        repeats: 10,
        seed: 11,
        regime: Regime::Resampled,
        ..ExperimentConfig::default()
    };
    let report = harness::run_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for miss in ["MCAR", "MNAR"] {
        let uniform = report.mean_auc(miss, "MissForest").unwrap();
        let dpp = report.mean_auc(miss, "DPP-MissForest").unwrap();
        let det = report.mean_auc(miss, "detDPP-MissForest").unwrap();
        pass &= dpp >= uniform - 0.005 && det >= uniform - 0.005;
        notes.push(format!("{miss}: MissForest {uniform:.4}, DPP {dpp:.4}, detDPP {det:.4}"));
    }
    check(pass, notes.join("; "))
}

fn amplitude_identity() -> Outcome {
    let (mut worst_in, mut worst_out, mut cases) = (0.0f64, 0.0f64, 0);
    for (n, d) in [(4, 2), (6, 3), (8, 4)] {
        let cols: Vec<usize> = (0..d).collect();
        for seed in 0..50u64 {
            let a = common::random_orthonormal(n, d, 30_000 + seed * 10 + n as u64);
            let state = qdpp::simulate_qdpp(&a).unwrap();
            for (i, &amp) in state.amplitudes().iter().enumerate() {
                let s = qdpp::index_to_subset(n, i);
                if s.len() == d {
                    let minor = numerics::det(&a.select_rows(&s).select_cols(&cols)).unwrap();
                    worst_in = worst_in.max((amp - minor).abs());
                } else {
                    worst_out = worst_out.max(amp.abs());
                }
            }
            cases += 1;
        }
    }
    check(
        worst_in <= 1e-9 && worst_out <= 1e-9,
        format!("{cases} matrices; max |amp - det(A_S)| {worst_in:.1e}, max off-sector |amp| {worst_out:.1e}"),
    )
}

fn quantum_classical_bridge() -> Outcome {
    let a = common::random_orthonormal(6, 3, 40_000);
    let projection = LEnsemble::from_kernel(a.matmul(&a.transpose()).unwrap()).unwrap();
    let classical: BTreeMap<Vec<usize>, f64> =
        dpp::kdpp_distribution_bruteforce(&projection, 3).unwrap().iter().map(|(s, p)| (s.to_vec(), p)).collect();
    let det_squared = common::det_squared_oracle(&a);
    let bridge_gap = classical.iter().map(|(s, p)| (p - det_squared[s]).abs()).fold(0.0, f64::max);
    let shots = qdpp::measure(&qdpp::simulate_qdpp(&a).unwrap(), 100_000, &mut SeedStream::new(5).rng()).unwrap();
    let tv = common::tv(&det_squared, &common::count(shots.into_iter().map(SubsetSample::into_indices)));

    let mut hits = 0;
    let mut trials = 0;
    let mut seed = 50_000u64;
    while trials < 100 {
        seed += 1;
        let a = common::random_orthonormal(6, 3, seed);
        let mut probs: Vec<(Vec<usize>, f64)> = common::det_squared_oracle(&a).into_iter().collect();
        probs.sort_by(|x, y| y.1.total_cmp(&x.1));
        if probs[0].1 - probs[1].1 < 0.05 {
            continue;
        }
        let got = qdpp::most_frequent_outcome(&a, 1000, &mut SeedStream::new(seed).rng()).unwrap();
        hits += usize::from(got.indices() == probs[0].0.as_slice());
        trials += 1;
    }
    check(
        tv <= 0.02 && hits >= 95 && bridge_gap < 1e-9,
        format!("(6,3): TV {tv:.4} at 1e5 shots, det^2 vs k-DPP max gap {bridge_gap:.1e}; modal subset found in {hits}/100 trials"),
    )
}

fn hardware_protocol() -> Outcome {
    let x = common::random_matrix(10, 3, 60_000);
    let y: Vec<f64> = (0..10).map(|i| x[(i, 0)] + x[(i, 1)]).collect();
    let cfg = ForestConfig {
        n_trees: 4,
        sampler: Sampler::DetDpp,
        batch_size: 10,
        k_per_batch: Some(2),
        stratify: false,
        ..ForestConfig::default()
    };
    let model = forest::fit_forest(&x, &y, &cfg).unwrap();
    let sizes: Vec<(usize, usize)> = model.selection_trace().iter().map(|s| (s.kernel_size, s.k)).collect();
    let sizes_ok = sizes == [(10, 2), (8, 2), (6, 2), (4, 2)];

    let spec = SyntheticSpec { n_rows: 100, n_features: 3, n_informative: 3, class_sep: 1.0, seed: 7 };
    let data = harness::generate_synthetic(&spec).unwrap();
    let masked = impute::induce_mcar(&data.to_masked().unwrap(), 0.2, &mut SeedStream::new(8).rng()).unwrap();
    let icfg = ImputeConfig {
        method: Method::MissForest,
        sampler: Sampler::DetDpp,
        forest: ForestConfig {
            n_trees: 4,
            batch_size: 10,
            k_per_batch: Some(2),
            selector: Selector::Quantum { shots: None },
            ..ForestConfig::default()
        },
        ..ImputeConfig::default()
    };
    let a = impute::impute(&masked, &ImputeConfig { seed: 1, ..icfg }).unwrap();
    let b = impute::impute(&masked, &ImputeConfig { seed: 2, ..icfg }).unwrap();
    let rmse = impute::imputation_rmse(&a, &data.x, &masked.mask()).unwrap();
    check(
        sizes_ok && a == b,
        format!("kernel sizes {sizes:?}; quantum exact-mode detDPP-MissForest on 100x3 identical across seeds: {} (RMSE {rmse:.3})", a == b),
    )
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn resource_accounting() -> Outcome {
    let a = common::random_orthonormal(150, 14, 70_000);
    let parallel = qdpp::resources(&qdpp::build_qdpp_circuit(&a, LoaderTopology::Parallel).unwrap());
    let reference = qdpp::reference_parallel_depth(150, 14);
    let ratio = parallel.depth as f64 / reference;

    let ns = [8usize, 16, 32, 64];
    let depths: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let a = common::random_orthonormal(n, 4, 71_000 + n as u64);
            qdpp::resources(&qdpp::build_qdpp_circuit(&a, LoaderTopology::Diagonal).unwrap()).depth as f64
        })
        .collect();
    let slope = log_slope(&ns.map(|n| n as f64), &depths);
    check(
        (0.5..=2.0).contains(&ratio) && (slope - 1.0).abs() <= 0.15,
        format!(
            "parallel n=150 d=14 depth {} vs 4 d log2 n = {reference:.0} (ratio {ratio:.2}, {} beam splitters); diagonal d=4 depths {depths:?} -> log-log slope {slope:.3}",
            parallel.depth, parallel.rbs_count
        ),
    )
}

fn marginal_consistency() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=8usize {
        for seed in 0..3u64 {
            let l = LEnsemble::from_kernel(common::random_psd(n, n, 80_000 + 10 * n as u64 + seed)).unwrap();
            let k = dpp::marginal_kernel(&l).unwrap();
            let mut inclusion = vec![0.0; n * n];
            for size in 0..=n {
                for s in common::subsets(n, size) {
                    let p = dpp::subset_prob(&l, &SubsetSample::new(s.clone(), n).unwrap()).unwrap();
                    for &i in &s {
                        for &j in &s {
                            inclusion[i * n + j] += p;
                        }
                    }
                }
            }
            for i in 0..n {
                worst = worst.max((inclusion[i * n + i] - numerics::principal_det(&k, &[i])).abs());
                for j in i + 1..n {
                    worst = worst.max((inclusion[i * n + j] - numerics::principal_det(&k, &[i, j])).abs());
                }
            }
            cases += 1;
        }
    }
    check(worst <= 1e-8, format!("{cases} ensembles (n <= 8); max |P(T in Y) - det(K_T)| {worst:.1e} over singletons and pairs"))
}

/// Name, whether failure is fatal, time budget in seconds, check.
type Criterion = (&'static str, bool, u64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("k-DPP sampler matches enumeration", true, 120, sampler_correctness),
        ("greedy selection matches step oracle", true, 60, greedy_fidelity),
        ("deterministic imputation has zero variance", true, 600, zero_variance),
        ("DPP MissForest trend vs MissForest (soft)", false, 1800, comparative_trend),
        ("loader amplitudes equal minors", true, 60, amplitude_identity),
        ("measurement matches classical DPP", true, 120, quantum_classical_bridge),
        ("hardware protocol shapes", true, 600, hardware_protocol),
        ("circuit resource scaling", true, 600, resource_accounting),
        ("inclusion marginals equal det(K_T)", true, 600, marginal_consistency),
    ];
    let mut hard_failures = 0;
    for (i, (name, hard, budget, f)) in criteria.into_iter().enumerate() {
        let (out, took) = timed(Duration::from_secs(budget), f);
        let status = match (out.pass, hard) {
            (true, _) => "PASS",
            (false, true) => {
                hard_failures += 1;
                "FAIL"
            }
            (false, false) => "ALARM",
        };
        println!("{status} [{}] {name} ({:.1}s): {}", i + 1, took.as_secs_f64(), out.detail);
    }
    if hard_failures > 0 {
        println!("{hard_failures} hard criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
