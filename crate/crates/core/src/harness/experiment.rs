use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::forest::Sampler;
use crate::harness::data::{generate_synthetic, load_csv, SyntheticSpec};
use crate::harness::eval::three_fold_eval;
use crate::harness::gbt::GbtConfig;
use crate::impute::{self, ImputeConfig, MaskedData, Method};
use crate::numerics::Matrix;
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, outcome_column: String },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSpec {
    /// The masked data and, when known, the complete ground truth.
    pub fn load(&self) -> Result<(MaskedData, Option<Matrix>)> {
        match self {
            DatasetSpec::Synthetic(spec) => {
                let d = generate_synthetic(spec)?;
                Ok((d.to_masked()?, Some(d.x)))
            }
            DatasetSpec::Csv { path, outcome_column } => {
                let data = load_csv(path, outcome_column).with_context(|| path.display().to_string())?;
                let truth = (data.missing_count() == 0)
                    .then(|| Matrix::new(data.rows(), data.cols(), data.raw_values().to_vec()))
                    .transpose()?;
                Ok((data, truth))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingKind {
    Mcar,
    Mnar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessSpec {
    pub kind: MissingKind,
    pub rate: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.5
}

impl MissingnessSpec {
    pub fn mcar(rate: f64) -> Self {
        MissingnessSpec { kind: MissingKind::Mcar, rate, delta: 0.0 }
    }

    pub fn mnar(rate: f64, delta: f64) -> Self {
        MissingnessSpec { kind: MissingKind::Mnar, rate, delta }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            MissingKind::Mcar => "MCAR",
            MissingKind::Mnar => "MNAR",
        }
    }

    pub fn apply(&self, data: &MaskedData, seed: SeedStream) -> Result<MaskedData> {
        let mut rng = seed.rng();
        match self.kind {
            MissingKind::Mcar => impute::induce_mcar(data, self.rate, &mut rng),
            MissingKind::Mnar => impute::induce_mnar(data, self.rate, self.delta, &mut rng),
        }
    }
}

/// Where the repeat-to-repeat variation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Missingness is re-drawn for every repeat.
    #[default]
    Resampled,
    /// One missingness draw shared by all repeats; only imputer seeds vary.
    VarianceIsolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in reports.
    pub name: String,
    pub dataset: DatasetSpec,
    pub missingness: Vec<MissingnessSpec>,
    pub methods: Vec<ImputeConfig>,
    pub classifier: GbtConfig,
    pub repeats: usize,
    pub seed: u64,
    pub regime: Regime,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "SYNTH".into(),
            dataset: DatasetSpec::default(),
            missingness: vec![MissingnessSpec::mcar(0.2), MissingnessSpec::mnar(0.2, 0.5)],
            methods: six_methods(ImputeConfig::default()),
            classifier: GbtConfig::default(),
            repeats: 10,
            seed: 0,
            regime: Regime::Resampled,
            threads: None,
        }
    }
}

/// MICE and MissForest with each of the three samplers, built on `base`.
pub fn six_methods(base: ImputeConfig) -> Vec<ImputeConfig> {
    let mut out = Vec::new();
    for method in [Method::MicePmm, Method::MissForest] {
        for sampler in [Sampler::Uniform, Sampler::Dpp, Sampler::DetDpp] {
            out.push(ImputeConfig { method, sampler, ..base });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub dataset: String,
    pub missingness: String,
    pub method: String,
    pub repeat: usize,
    pub aucs: [f64; 3],
    /// Imputation RMSE against the ground truth, when it is known.
    pub rmse: Option<f64>,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub missingness: String,
    pub method: String,
    pub holdout: String,
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<RepeatRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Mean and sample standard deviation. The deviation is computed on values
/// shifted by the first one, so identical values give exactly zero.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let shift = values[0];
    let d: Vec<f64> = values.iter().map(|v| v - shift).collect();
    let mean_d = d.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 { 0.0 } else { (d.iter().map(|x| (x - mean_d).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (shift + mean_d, sd)
}

const MISSINGNESS_LABEL: u64 = 1;
const IMPUTE_LABEL: u64 = 2;
const CLASSIFIER_LABEL: u64 = 3;

/// Runs every (missingness, method, repeat) cell: induce missingness, impute,
/// then three-fold evaluation on the imputed matrix.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if cfg.missingness.is_empty() || cfg.methods.is_empty() {
        return Err(Error::invalid("need at least one missingness setting and one method"));
    }
    cfg.methods.iter().try_for_each(ImputeConfig::validate)?;
    let (data, truth) = cfg.dataset.load().with_context(|| format!("loading dataset {}", cfg.name))?;
    let base = SeedStream::new(cfg.seed);
    let classifier_seed = base.child(CLASSIFIER_LABEL).key();

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.missingness.len())
        .flat_map(|m| (0..cfg.methods.len()).flat_map(move |k| (0..cfg.repeats).map(move |r| (m, k, r))))
        .collect();
    let run = |&(m, k, r): &(usize, usize, usize)| -> Result<RepeatRecord> {
        let miss = &cfg.missingness[m];
        let method = &cfg.methods[k];
        let miss_seed = match cfg.regime {
            Regime::Resampled => base.child2(MISSINGNESS_LABEL, m as u64).child(r as u64),
            Regime::VarianceIsolation => base.child2(MISSINGNESS_LABEL, m as u64),
        };
        let masked = miss.apply(&data, miss_seed)?;
        let icfg = ImputeConfig { seed: base.child2(IMPUTE_LABEL, r as u64).key(), ..*method };
        let imputed = impute::impute(&masked, &icfg)?;
        let aucs = three_fold_eval(&imputed, data.outcome(), &cfg.classifier, classifier_seed)?.0;
        let rmse = match &truth {
            Some(t) if masked.missing_count() > data.missing_count() => {
                // Score only cells this run hid, not cells missing in the input.
                let hidden: Vec<bool> =
                    masked.mask().iter().zip(data.mask()).map(|(&now, before)| now || !before).collect();
                Some(impute::imputation_rmse(&imputed, t, &hidden)?)
            }
            _ => None,
        };
        Ok(RepeatRecord {
            dataset: cfg.name.clone(),
            missingness: miss.label().into(),
            method: method.label(),
            repeat: r,
            aucs,
            rmse,
            missing_fraction: masked.missing_fraction(),
        })
    };
    let describe = |&(m, k, r): &(usize, usize, usize)| {
        format!("{} / {} / {} / repeat {r}", cfg.name, cfg.missingness[m].label(), cfg.methods[k].label())
    };

    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len());
    let results: Mutex<Vec<Option<Result<RepeatRecord>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let out = run(job).with_context(|| describe(job));
                results.lock().expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });
    let records: Vec<RepeatRecord> = results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    for chunk in records.chunks(cfg.repeats) {
        for h in 0..3 {
            let values: Vec<f64> = chunk.iter().map(|r| r.aucs[h]).collect();
            let (mean, sd) = mean_sd(&values);
            summary.push(SummaryRow {
                dataset: chunk[0].dataset.clone(),
                missingness: chunk[0].missingness.clone(),
                method: chunk[0].method.clone(),
                holdout: format!("H{}", h + 1),
                mean,
                sd,
                values,
            });
        }
    }
    Ok(ExperimentReport { records, summary })
}

impl ExperimentReport {
    pub fn row(&self, missingness: &str, method: &str, holdout: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.missingness == missingness && r.method == method && r.holdout == holdout)
    }

    /// Mean AUC over the three holdouts and all repeats.
    pub fn mean_auc(&self, missingness: &str, method: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.missingness == missingness && r.method == method)
            .flat_map(|r| r.aucs)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// One row per (dataset, missingness, method, holdout) with mean, SD and
    /// the raw per-repeat values.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let repeats = self.summary.iter().map(|r| r.values.len()).max().unwrap_or(0);
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(Error::from).with_context(|| path.display().to_string())?;
        let mut header: Vec<String> =
            ["dataset", "missingness", "method", "holdout", "mean", "sd"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=repeats).map(|r| format!("run{r}")));
        w.write_record(&header)?;
        for row in &self.summary {
            let mut fields = vec![
                row.dataset.clone(),
                row.missingness.clone(),
                row.method.clone(),
                row.holdout.clone(),
                row.mean.to_string(),
                row.sd.to_string(),
            ];
            fields.extend(row.values.iter().map(f64::to_string));
            fields.resize(header.len(), String::new());
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?)
            .map_err(Error::from)
            .with_context(|| path.display().to_string())?;
        Ok(())
    }
}
