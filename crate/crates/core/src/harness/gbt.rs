//! A small gradient-boosted tree classifier used to score imputations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{self, Task, Tree, TreeConfig};
use crate::numerics::Matrix;
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty added to the Hessian sum in each leaf.
    pub lambda: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { n_rounds: 100, learning_rate: 0.3, max_depth: 3, min_samples_leaf: 1, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    base: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    n_features: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic-loss boosting. Each round fits a depth-limited regression tree to
/// the residuals `y - p` and then sets every leaf to the Newton step
/// `Σ (y - p) / (Σ p (1 - p) + λ)`.
pub fn fit_gbt(x: &Matrix, y: &[f64], cfg: &GbtConfig, seed: u64) -> Result<GbtModel> {
    if x.rows() != y.len() || y.is_empty() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateModel("training labels contain a single class".into()));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.lambda >= 0.0) {
        return Err(Error::invalid("learning_rate and lambda must be non-negative"));
    }
    let prior = positives as f64 / y.len() as f64;
    let base = (prior / (1.0 - prior)).ln();
    let tree_cfg = TreeConfig {
        max_depth: Some(cfg.max_depth),
        min_samples_leaf: cfg.min_samples_leaf.max(1),
        max_features: 1.0,
        task: Task::Regression,
    };
    let seeds = SeedStream::new(seed);
    let mut f = vec![base; y.len()];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    for round in 0..cfg.n_rounds {
        let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
        let residual: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y - p).collect();
        let mut tree = forest::fit_tree(x, &residual, &tree_cfg, &mut seeds.child(round as u64).rng())?;
        let leaves: Vec<usize> = (0..x.rows()).map(|i| tree.leaf_index(x.row(i))).collect();
        let mut sums: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
        for (i, &leaf) in leaves.iter().enumerate() {
            let e = sums.entry(leaf).or_default();
            e.0 += residual[i];
            e.1 += p[i] * (1.0 - p[i]);
        }
        for (&leaf, &(g, h)) in &sums {
            tree.set_leaf_value(leaf, g / (h + cfg.lambda));
        }
        for (i, &leaf) in leaves.iter().enumerate() {
            let (g, h) = sums[&leaf];
            f[i] += cfg.learning_rate * g / (h + cfg.lambda);
        }
        trees.push(tree);
    }
    Ok(GbtModel { base, learning_rate: cfg.learning_rate, trees, n_features: x.cols() })
}

/// Probability of class 1 for every row.
pub fn predict_gbt(model: &GbtModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_features {
        return Err(Error::invalid(format!("expected {} features, got {}", model.n_features, x.cols())));
    }
    Ok((0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let z = model.base + model.learning_rate * model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>();
            sigmoid(z)
        })
        .collect())
}
