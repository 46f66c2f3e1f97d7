//! Missingness induction and iterative imputation.
//!
//! Both imputers start from column means and then sweep the incomplete
//! columns (fewest missing first) `n_iterations` times. Each visit fits a
//! forest on the rows where the column is observed, using every other column
//! at its current imputed value plus the outcome as features:
//!
//! * [`Method::MissForest`] writes the forest's predictions into the gaps.
//! * [`Method::MicePmm`] copies the observed value of a donor row whose
//!   prediction is close to the missing row's prediction (predictive mean
//!   matching). With the `detdpp` sampler the donor is the single closest
//!   one, so the whole imputation is seed-independent.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::forest::{self, ForestConfig, Sampler};
use crate::numerics::Matrix;
use crate::rng::{Rng, SeedStream};

/// A feature matrix with missing cells and a fully observed binary outcome.
///
/// Missing cells hold `NaN` internally and are never handed to a model.
#[derive(Debug, Clone)]
pub struct MaskedData {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    outcome: Vec<f64>,
    feature_names: Vec<String>,
}

impl MaskedData {
    /// `observed[i * cols + j]` marks cell `(i, j)` as present. Masked cells of
    /// `values` are ignored.
    pub fn new(values: &Matrix, observed: &[bool], outcome: Vec<f64>) -> Result<Self> {
        let (rows, cols) = values.shape();
        if observed.len() != rows * cols {
            return Err(Error::invalid(format!("mask has {} cells, matrix has {}", observed.len(), rows * cols)));
        }
        let data = values.as_slice().iter().zip(observed).map(|(&v, &o)| if o { v } else { f64::NAN }).collect();
        Self::from_raw(rows, cols, data, outcome, None)
    }

    /// Fully observed data.
    pub fn complete(values: &Matrix, outcome: Vec<f64>) -> Result<Self> {
        Self::new(values, &vec![true; values.rows() * values.cols()], outcome)
    }

    /// `values` row-major with `NaN` for missing cells.
    pub fn from_raw(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        outcome: Vec<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::invalid(format!("{} values do not form a non-empty {rows}x{cols} matrix", values.len())));
        }
        if outcome.len() != rows {
            return Err(Error::invalid(format!("{rows} rows but {} outcomes", outcome.len())));
        }
        if let Some(v) = outcome.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("outcome value {v} is not 0 or 1")));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::invalid("infinite feature value"));
        }
        let feature_names = feature_names.unwrap_or_else(|| (0..cols).map(|j| format!("x{j}")).collect());
        if feature_names.len() != cols {
            return Err(Error::invalid(format!("{} names for {cols} columns", feature_names.len())));
        }
        let data = MaskedData { rows, cols, values, outcome, feature_names };
        if let Some(j) = (0..cols).find(|&j| data.observed_in(j) < 2) {
            return Err(Error::invalid(format!("column {j} has fewer than 2 observed values")));
        }
        Ok(data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.cols + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        !self.values[i * self.cols + j].is_nan()
    }

    /// Row-major observed flags.
    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| !v.is_nan()).collect()
    }

    /// Row-major values with `NaN` in missing cells.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn observed_in(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.is_observed(i, j)).count()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / self.values.len() as f64
    }

    fn hide(&mut self, i: usize, j: usize) {
        self.values[i * self.cols + j] = f64::NAN;
    }
}

impl PartialEq for MaskedData {
    /// Missing cells compare equal to each other; observed cells bitwise.
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.outcome == other.outcome
            && self.feature_names == other.feature_names
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

fn check_rate(p: f64, what: &str) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("{what} {p} must lie in [0, 1)")));
    }
    Ok(())
}

/// Masks every observed cell independently with probability `rate`.
pub fn induce_mcar(data: &MaskedData, rate: f64, rng: &mut Rng) -> Result<MaskedData> {
    check_rate(rate, "missingness rate")?;
    mask_with(data, |_| rate, rng)
}

/// Masks cells of positive-outcome rows with probability `rate (1 + delta)`
/// and of negative rows with `rate (1 - delta)`.
pub fn induce_mnar(data: &MaskedData, rate: f64, delta: f64, rng: &mut Rng) -> Result<MaskedData> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta {delta} must lie in [0, 1]")));
    }
    check_rate(rate, "missingness rate")?;
    check_rate(rate * (1.0 + delta), "positive-class missingness rate")?;
    mask_with(data, |y| if y == 1.0 { rate * (1.0 + delta) } else { rate * (1.0 - delta) }, rng)
}

/// Applies per-row masking probabilities, then restores randomly chosen newly
/// masked cells in any column left with fewer than two observations.
fn mask_with(data: &MaskedData, prob: impl Fn(f64) -> f64, rng: &mut Rng) -> Result<MaskedData> {
    let mut out = data.clone();
    let mut hidden: Vec<Vec<usize>> = vec![Vec::new(); data.cols];
    for i in 0..data.rows {
        let p = prob(data.outcome[i]);
        for (j, col) in hidden.iter_mut().enumerate() {
            if data.is_observed(i, j) && rng.random::<f64>() < p {
                out.hide(i, j);
                col.push(i);
            }
        }
    }
    for (j, mut col) in hidden.into_iter().enumerate() {
        while out.observed_in(j) < 2 && !col.is_empty() {
            let i = col.swap_remove(rng.random_range(0..col.len()));
            out.values[i * out.cols + j] = data.values[i * data.cols + j];
        }
    }
    Ok(out)
}

/// Replaces every missing cell by its column's observed mean.
pub fn initial_fill(data: &MaskedData) -> Result<Matrix> {
    let mut means = Vec::with_capacity(data.cols);
    for j in 0..data.cols {
        let obs: Vec<f64> = (0..data.rows).filter_map(|i| data.get(i, j)).collect();
        if obs.is_empty() {
            return Err(Error::invalid(format!("column {j} has no observed values")));
        }
        means.push(obs.iter().sum::<f64>() / obs.len() as f64);
    }
    Ok(Matrix::from_fn(data.rows, data.cols, |i, j| data.get(i, j).unwrap_or(means[j])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "missforest")]
    MissForest,
    MicePmm,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "missforest" => Ok(Method::MissForest),
            "mice_pmm" | "mice" => Ok(Method::MicePmm),
            other => Err(Error::invalid(format!("unknown method {other:?} (missforest, mice_pmm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    pub method: Method,
    /// Overrides `forest.sampler`.
    pub sampler: Sampler,
    pub n_iterations: usize,
    pub forest: ForestConfig,
    pub pmm_donors: usize,
    pub seed: u64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            method: Method::MissForest,
            sampler: Sampler::Uniform,
            n_iterations: 10,
            forest: ForestConfig::default(),
            pmm_donors: 5,
            seed: 0,
        }
    }
}

impl ImputeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::invalid("n_iterations must be at least 1"));
        }
        if self.pmm_donors == 0 {
            return Err(Error::invalid("pmm_donors must be at least 1"));
        }
        ForestConfig { sampler: self.sampler, ..self.forest }.validate()
    }

    /// Short label such as `detDPP-MissForest`.
    pub fn label(&self) -> String {
        let prefix = match self.sampler {
            Sampler::Uniform => "",
            Sampler::Dpp => "DPP-",
            Sampler::DetDpp => "detDPP-",
        };
        let method = match self.method {
            Method::MissForest => "MissForest",
            Method::MicePmm => "MICE",
        };
        format!("{prefix}{method}")
    }
}

/// Iterative imputation; observed cells are returned bit-for-bit unchanged.
pub fn impute(data: &MaskedData, cfg: &ImputeConfig) -> Result<Matrix> {
    cfg.validate()?;
    let mut x = initial_fill(data)?;
    let (n, p) = (data.rows, data.cols);
    let mut order: Vec<(usize, usize)> =
        (0..p).map(|j| (n - data.observed_in(j), j)).filter(|&(missing, _)| missing > 0).collect();
    order.sort_unstable();
    let seeds = SeedStream::new(cfg.seed);

    for it in 0..cfg.n_iterations {
        for &(_, c) in &order {
            let (obs, mis): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| data.is_observed(i, c));
            // Column c's slot carries the outcome instead of the target.
            let design = |rows: &[usize], x: &Matrix| {
                Matrix::from_fn(rows.len(), p, |r, j| if j == c { data.outcome[rows[r]] } else { x[(rows[r], j)] })
            };
            let train = design(&obs, &x);
            let target: Vec<f64> = obs.iter().map(|&i| x[(i, c)]).collect();
            let strata: Vec<bool> = obs.iter().map(|&i| data.outcome[i] == 1.0).collect();
            let stream = seeds.child2(it as u64, c as u64);
            let fcfg = ForestConfig { sampler: cfg.sampler, seed: stream.key(), ..cfg.forest };
            let model = forest::fit_forest_stratified(&train, &target, Some(&strata), &fcfg)
                .with_context(|| format!("imputing column {c} (iteration {it})"))?;
            let pred_mis = forest::predict_forest(&model, &design(&mis, &x))?;

            let fills = match cfg.method {
                Method::MissForest => pred_mis,
                Method::MicePmm => {
                    let pred_obs = forest::predict_forest(&model, &train)?;
                    let mut rng = stream.child(0).rng();
                    pmm(&pred_obs, &target, &pred_mis, cfg.pmm_donors, cfg.sampler != Sampler::DetDpp, &mut rng)
                }
            };
            let mut data_mut = x.as_slice().to_vec();
            for (&i, v) in mis.iter().zip(fills) {
                data_mut[i * p + c] = v;
            }
            x = Matrix::new(n, p, data_mut)?;
        }
    }
    Ok(x)
}

/// Predictive mean matching: for each missing prediction take the `donors`
/// observed rows with the closest predictions (ties by position) and copy one
/// donor's observed value, chosen uniformly when `random`, else the closest.
fn pmm(pred_obs: &[f64], observed: &[f64], pred_mis: &[f64], donors: usize, random: bool, rng: &mut Rng) -> Vec<f64> {
    let donors = donors.min(pred_obs.len());
    let mut idx: Vec<usize> = (0..pred_obs.len()).collect();
    pred_mis
        .iter()
        .map(|&target| {
            let key = |&i: &usize| ((pred_obs[i] - target).abs(), i);
            idx.select_nth_unstable_by(donors - 1, |a, b| {
                let (da, ia) = key(a);
                let (db, ib) = key(b);
                da.total_cmp(&db).then(ia.cmp(&ib))
            });
            let mut pool = idx[..donors].to_vec();
            pool.sort_by(|a, b| key(a).0.total_cmp(&key(b).0).then(a.cmp(b)));
            let pick = if random { pool[rng.random_range(0..donors)] } else { pool[0] };
            observed[pick]
        })
        .collect()
}

/// RMSE over the cells where `observed` is false.
pub fn imputation_rmse(imputed: &Matrix, truth: &Matrix, observed: &[bool]) -> Result<f64> {
    if imputed.shape() != truth.shape() || observed.len() != truth.rows() * truth.cols() {
        return Err(Error::invalid("imputed matrix, truth and mask must have matching shapes"));
    }
    let (sum, count) = imputed
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .zip(observed)
        .filter(|(_, &o)| !o)
        .fold((0.0, 0usize), |(s, c), ((a, b), _)| (s + (a - b).powi(2), c + 1));
    if count == 0 {
        return Err(Error::UndefinedMetric("no masked cells to score".into()));
    }
    Ok((sum / count as f64).sqrt())
}
