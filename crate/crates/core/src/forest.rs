//! CART trees and random forests with bootstrap, DPP and deterministic DPP
//! row subsampling.
//!
//! The DPP samplers split the rows into batches, standardize each batch's
//! features, and use the batch Gram matrix `L = A A^T` as the kernel:
//!
//! * [`Sampler::Dpp`] draws a fresh k-DPP sample from every batch for every
//!   tree and trains the tree on the union.
//! * [`Sampler::DetDpp`] walks the trees in order; for each batch it selects
//!   `k` rows greedily, hands them to the current tree, removes them from the
//!   batch, and repeats on the smaller kernel for the next tree.
//!
//! A forest fitted with `DetDpp` does not depend on the seed at all: batches
//! are dealt without shuffling and the trees' feature subsampling uses a fixed
//! stream.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dpp::{self, LEnsemble};
use crate::error::{Context, Error, Result};
use crate::numerics::{self, Matrix};
use crate::qdpp;
use crate::rng::{Rng, SeedStream};

/// Stream used for every random choice of a deterministic forest.
const FIXED_STREAM: u64 = 0x5eed_0f_de7e;

const PARTITION_LABEL: u64 = u64::MAX;
const FIT_LABEL: u64 = u64::MAX - 1;
const BOOTSTRAP_LABEL: u64 = u64::MAX - 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each split.
    pub max_features: f64,
    pub task: Task,
}

impl TreeConfig {
    /// Unlimited depth, leaves of at least 5 rows, a third of the features.
    pub fn regression() -> Self {
        TreeConfig { max_depth: None, min_samples_leaf: 5, max_features: 1.0 / 3.0, task: Task::Regression }
    }

    pub fn classification() -> Self {
        TreeConfig { max_depth: None, min_samples_leaf: 1, max_features: 1.0, task: Task::Classification }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::invalid(format!("max_features {} must lie in (0, 1]", self.max_features)));
        }
        Ok(())
    }
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig::regression()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A fitted binary tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    fn leaf_node(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Prediction for one row: the leaf mean (regression) or majority class.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_node(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_node returns a leaf"),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_cols(x, self.n_features)?;
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    /// Identifier of the leaf `row` falls into.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        self.leaf_node(row)
    }

    /// Overwrites a leaf's value; `leaf` must come from [`Tree::leaf_index`].
    pub fn set_leaf_value(&mut self, leaf: usize, value: f64) {
        match &mut self.nodes[leaf] {
            Node::Leaf { value: v } => *v = value,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// `(feature, threshold)` of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

fn check_cols(x: &Matrix, n_features: usize) -> Result<()> {
    if x.cols() != n_features {
        return Err(Error::invalid(format!("expected {n_features} feature columns, got {}", x.cols())));
    }
    Ok(())
}

fn check_targets(x: &Matrix, y: &[f64], task: Task) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!("{} feature rows but {} targets", x.rows(), y.len())));
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::invalid("cannot fit on an empty matrix"));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite target {v}")));
    }
    if task == Task::Classification {
        if let Some(v) = y.iter().find(|&&v| v < 0.0 || v.fract() != 0.0 || v > 1e6) {
            return Err(Error::invalid(format!("class label {v} is not a small non-negative integer")));
        }
    }
    Ok(())
}

/// Fits a CART tree on every row of `x`.
///
/// Splits minimize the summed squared error (regression) or size-weighted
/// Gini impurity (classification) and sit at the midpoint between adjacent
/// distinct values. Nodes with fewer than `2 * min_samples_leaf` rows, or a
/// constant target, become leaves.
pub fn fit_tree(x: &Matrix, y: &[f64], cfg: &TreeConfig, rng: &mut Rng) -> Result<Tree> {
    cfg.validate()?;
    check_targets(x, y, cfg.task)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(grow(x, y, &rows, cfg, rng))
}

/// Fits on the listed rows; repeated indices count as repeated observations.
pub(crate) fn grow(x: &Matrix, y: &[f64], rows: &[usize], cfg: &TreeConfig, rng: &mut Rng) -> Tree {
    let d = x.cols();
    let n_classes = match cfg.task {
        Task::Regression => 0,
        Task::Classification => rows.iter().map(|&r| y[r] as usize + 1).max().unwrap_or(1).max(2),
    };
    let per_split = ((cfg.max_features * d as f64).floor() as usize).clamp(1, d);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut work = vec![(0usize, rows.to_vec(), 0usize)];
    let mut features: Vec<usize> = (0..d).collect();

    while let Some((slot, idx, depth)) = work.pop() {
        let leaf_value = leaf_value(y, &idx, cfg.task, n_classes);
        let can_split = idx.len() >= 2 * cfg.min_samples_leaf && cfg.max_depth.is_none_or(|m| depth < m);
        let split = if can_split {
            features.shuffle(rng);
            best_split(x, y, &idx, &features, per_split, cfg, n_classes)
        } else {
            None
        };
        match split {
            None => nodes[slot] = Node::Leaf { value: leaf_value },
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[(i, feature)] <= threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot] = Node::Split { feature, threshold, left, right: left + 1 };
                work.push((left + 1, r, depth + 1));
                work.push((left, l, depth + 1));
            }
        }
    }
    Tree { nodes, n_features: d }
}

fn leaf_value(y: &[f64], idx: &[usize], task: Task, n_classes: usize) -> f64 {
    match task {
        Task::Regression => idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64,
        Task::Classification => {
            let mut counts = vec![0usize; n_classes];
            idx.iter().for_each(|&i| counts[y[i] as usize] += 1);
            let best = counts.iter().copied().max().unwrap_or(0);
            counts.iter().position(|&c| c == best).unwrap_or(0) as f64
        }
    }
}

/// Impurity of a node summarized by running statistics.
#[derive(Clone)]
enum Stats {
    /// Count, sum and sum of squares of centred targets.
    Moments(f64, f64, f64),
    Counts(Vec<f64>, f64),
}

impl Stats {
    fn empty(n_classes: usize) -> Self {
        if n_classes == 0 {
            Stats::Moments(0.0, 0.0, 0.0)
        } else {
            Stats::Counts(vec![0.0; n_classes], 0.0)
        }
    }

    fn add(&mut self, v: f64, sign: f64) {
        match self {
            Stats::Moments(n, s, q) => {
                *n += sign;
                *s += sign * v;
                *q += sign * v * v;
            }
            Stats::Counts(c, n) => {
                c[v as usize] += sign;
                *n += sign;
            }
        }
    }

    /// Sum of squared errors, or `n * gini`.
    fn cost(&self) -> f64 {
        match self {
            Stats::Moments(n, s, q) => {
                if *n <= 0.0 {
                    0.0
                } else {
                    (q - s * s / n).max(0.0)
                }
            }
            Stats::Counts(c, n) => {
                if *n <= 0.0 {
                    0.0
                } else {
                    n - c.iter().map(|ci| ci * ci).sum::<f64>() / n
                }
            }
        }
    }
}

fn best_split(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    features: &[usize],
    per_split: usize,
    cfg: &TreeConfig,
    n_classes: usize,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let min_leaf = cfg.min_samples_leaf;
    let centre = if n_classes == 0 { idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64 } else { 0.0 };
    let target = |i: usize| if n_classes == 0 { y[i] - centre } else { y[i] };

    let mut total = Stats::empty(n_classes);
    idx.iter().for_each(|&i| total.add(target(i), 1.0));
    let parent = total.cost();
    if parent <= 1e-12 * (1.0 + parent) {
        return None;
    }

    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = idx.to_vec();
    for (tried, &f) in features.iter().enumerate() {
        if tried >= per_split && best.is_some() {
            break;
        }
        sorted.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
        let mut left = Stats::empty(n_classes);
        let mut right = total.clone();
        for pos in 1..n {
            let moved = sorted[pos - 1];
            left.add(target(moved), 1.0);
            right.add(target(moved), -1.0);
            if pos < min_leaf || n - pos < min_leaf {
                continue;
            }
            let (lo, hi) = (x[(moved, f)], x[(sorted[pos], f)]);
            if lo == hi {
                continue;
            }
            let cost = left.cost() + right.cost();
            if best.is_none_or(|(c, _, _)| cost < c) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some((cost, f, threshold));
            }
        }
    }
    best.filter(|&(c, _, _)| c < parent - 1e-12 * parent).map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Bootstrap: `n` rows drawn uniformly with replacement.
    Uniform,
    /// Fresh k-DPP sample per (tree, batch).
    Dpp,
    /// Greedy deterministic selection with removal.
    DetDpp,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Sampler::Uniform),
            "dpp" => Ok(Sampler::Dpp),
            "detdpp" => Ok(Sampler::DetDpp),
            other => Err(Error::invalid(format!("unknown sampler {other:?} (uniform, dpp, detdpp)"))),
        }
    }
}

/// How [`Sampler::DetDpp`] picks `k` rows from a batch kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// The greedy conditional-score rule ([`dpp::det_kdpp`]).
    #[default]
    Greedy,
    /// Most frequent outcome of the simulated loader circuit over the top-k
    /// eigenvectors; `shots: None` takes the exact mode.
    Quantum { shots: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub sampler: Sampler,
    pub batch_size: usize,
    /// Rows per batch and tree for the DPP samplers; defaults to the number
    /// of features.
    pub k_per_batch: Option<usize>,
    pub stratify: bool,
    pub seed: u64,
    pub tree: TreeConfig,
    pub selector: Selector,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            sampler: Sampler::Uniform,
            batch_size: 150,
            k_per_batch: None,
            stratify: true,
            seed: 0,
            tree: TreeConfig::regression(),
            selector: Selector::Greedy,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if self.k_per_batch == Some(0) {
            return Err(Error::invalid("k_per_batch must be at least 1"));
        }
        if let Some(k) = self.k_per_batch.filter(|&k| k > self.batch_size) {
            return Err(Error::invalid(format!("k_per_batch {k} exceeds batch_size {}", self.batch_size)));
        }
        if let Selector::Quantum { shots: Some(0) } = self.selector {
            return Err(Error::invalid("quantum selector needs at least one shot"));
        }
        Ok(())
    }
}

/// One greedy selection made while fitting a deterministic forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionStep {
    pub batch: usize,
    pub tree: usize,
    /// Rows left in the batch kernel when the selection was made.
    pub kernel_size: usize,
    pub k: usize,
    /// Selected rows, as indices into the training matrix.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Tree>,
    config: ForestConfig,
    n_classes: usize,
    training_rows: Vec<Vec<usize>>,
    oob_indices: Vec<Vec<usize>>,
    selection_trace: Vec<SelectionStep>,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Rows each tree was trained on (with repeats for the bootstrap).
    pub fn training_rows(&self) -> &[Vec<usize>] {
        &self.training_rows
    }

    /// Rows each tree never saw.
    pub fn oob_indices(&self) -> &[Vec<usize>] {
        &self.oob_indices
    }

    /// Greedy selections in the order they were made (deterministic sampler
    /// only).
    pub fn selection_trace(&self) -> &[SelectionStep] {
        &self.selection_trace
    }
}

/// Splits `0..n_rows` into `ceil(n_rows / batch_size)` batches whose sizes
/// differ by at most one.
///
/// With `strata`, positives and negatives are dealt separately so every
/// batch's positive count is within one of every other's. With `rng` the
/// rows are shuffled before dealing; without it the assignment depends only on
/// `n_rows` and `strata`. Each batch is returned sorted.
pub fn partition_batches(
    n_rows: usize,
    strata: Option<&[bool]>,
    batch_size: usize,
    rng: Option<&mut Rng>,
) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::invalid("batch_size must be at least 2"));
    }
    if n_rows == 0 {
        return Err(Error::invalid("cannot partition zero rows"));
    }
    if let Some(s) = strata.filter(|s| s.len() != n_rows) {
        return Err(Error::invalid(format!("{} strata labels for {n_rows} rows", s.len())));
    }
    let n_batches = n_rows.div_ceil(batch_size);
    let mut groups: Vec<Vec<usize>> = match strata {
        Some(s) => {
            let (pos, neg): (Vec<usize>, Vec<usize>) = (0..n_rows).partition(|&i| s[i]);
            vec![pos, neg]
        }
        None => vec![(0..n_rows).collect()],
    };
    if let Some(rng) = rng {
        groups.iter_mut().for_each(|g| g.shuffle(rng));
    }
    let mut batches = vec![Vec::with_capacity(batch_size); n_batches];
    for (i, row) in groups.into_iter().flatten().enumerate() {
        batches[i % n_batches].push(row);
    }
    batches.iter_mut().for_each(|b| b.sort_unstable());
    Ok(batches)
}

/// Per-column z-scores of the selected rows; constant columns become zero.
fn standardized(x: &Matrix, rows: &[usize]) -> Matrix {
    let m = rows.len() as f64;
    let d = x.cols();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for j in 0..d {
        mean[j] = rows.iter().map(|&r| x[(r, j)]).sum::<f64>() / m;
        sd[j] = (rows.iter().map(|&r| (x[(r, j)] - mean[j]).powi(2)).sum::<f64>() / m).sqrt();
    }
    Matrix::from_fn(rows.len(), d, |i, j| {
        if sd[j] > 1e-12 * (1.0 + mean[j].abs()) {
            (x[(rows[i], j)] - mean[j]) / sd[j]
        } else {
            0.0
        }
    })
}

pub fn fit_forest(x: &Matrix, y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    fit_forest_stratified(x, y, None, cfg)
}

/// [`fit_forest`] with explicit stratification labels for batching. Without
/// them, classification forests stratify on `y == 1` and regression forests
/// do not stratify.
pub fn fit_forest_stratified(x: &Matrix, y: &[f64], strata: Option<&[bool]>, cfg: &ForestConfig) -> Result<ForestModel> {
    cfg.validate()?;
    check_targets(x, y, cfg.tree.task)?;
    let n = x.rows();
    let own_strata: Vec<bool>;
    let strata = match (cfg.stratify, strata, cfg.tree.task) {
        (false, _, _) => None,
        (true, Some(s), _) => Some(s),
        (true, None, Task::Classification) => {
            own_strata = y.iter().map(|&v| v == 1.0).collect();
            Some(own_strata.as_slice())
        }
        (true, None, Task::Regression) => None,
    };

    let seeds = SeedStream::new(cfg.seed);
    let mut trace = Vec::new();
    let training_rows: Vec<Vec<usize>> = match cfg.sampler {
        Sampler::Uniform => (0..cfg.n_trees)
            .map(|t| {
                let mut rng = seeds.child2(BOOTSTRAP_LABEL, t as u64).rng();
                (0..n).map(|_| rng.random_range(0..n)).collect()
            })
            .collect(),
        Sampler::Dpp => {
            let mut rng = seeds.child(PARTITION_LABEL).rng();
            let batches = partition_batches(n, strata, cfg.batch_size, Some(&mut rng))?;
            dpp_rows(x, &batches, cfg, seeds)?
        }
        Sampler::DetDpp => {
            let batches = partition_batches(n, strata, cfg.batch_size, None)?;
            det_dpp_rows(x, &batches, cfg, seeds, &mut trace)?
        }
    };

    let tree_seeds = match cfg.sampler {
        Sampler::DetDpp => SeedStream::new(FIXED_STREAM),
        _ => seeds.child(FIT_LABEL),
    };
    let trees = training_rows
        .iter()
        .enumerate()
        .map(|(t, rows)| grow(x, y, rows, &cfg.tree, &mut tree_seeds.child(t as u64).rng()))
        .collect();
    let oob_indices = training_rows
        .iter()
        .map(|rows| {
            let mut used = vec![false; n];
            rows.iter().for_each(|&r| used[r] = true);
            (0..n).filter(|&i| !used[i]).collect()
        })
        .collect();
    let n_classes = match cfg.tree.task {
        Task::Regression => 0,
        Task::Classification => y.iter().map(|&v| v as usize + 1).max().unwrap_or(1).max(2),
    };
    Ok(ForestModel { trees, config: *cfg, n_classes, training_rows, oob_indices, selection_trace: trace })
}

fn k_for(cfg: &ForestConfig, d: usize) -> usize {
    cfg.k_per_batch.unwrap_or(d)
}

fn dpp_rows(x: &Matrix, batches: &[Vec<usize>], cfg: &ForestConfig, seeds: SeedStream) -> Result<Vec<Vec<usize>>> {
    let k = k_for(cfg, x.cols());
    let mut rows = vec![Vec::new(); cfg.n_trees];
    for (b, batch) in batches.iter().enumerate() {
        if k > batch.len() {
            return Err(Error::invalid(format!("k_per_batch {k} exceeds the {} rows of batch {b}", batch.len())));
        }
        let ensemble = LEnsemble::from_features(standardized(x, batch)).with_context(|| format!("batch {b}"))?;
        for (t, tree_rows) in rows.iter_mut().enumerate() {
            let mut rng = seeds.child2(t as u64, b as u64).rng();
            let s = dpp::sample_kdpp(&ensemble, k, &mut rng).with_context(|| format!("batch {b}"))?;
            tree_rows.extend(s.indices().iter().map(|&i| batch[i]));
        }
    }
    Ok(rows)
}

fn det_dpp_rows(
    x: &Matrix,
    batches: &[Vec<usize>],
    cfg: &ForestConfig,
    seeds: SeedStream,
    trace: &mut Vec<SelectionStep>,
) -> Result<Vec<Vec<usize>>> {
    let k = k_for(cfg, x.cols());
    let mut rows = vec![Vec::new(); cfg.n_trees];
    for (b, batch) in batches.iter().enumerate() {
        if cfg.n_trees * k > batch.len() {
            return Err(Error::invalid(format!(
                "deterministic sampling needs n_trees * k = {} rows but batch {b} has {}",
                cfg.n_trees * k,
                batch.len()
            )));
        }
        let features = standardized(x, batch);
        let mut remaining: Vec<usize> = (0..batch.len()).collect();
        for (t, tree_rows) in rows.iter_mut().enumerate() {
            let picks = select(&features.select_rows(&remaining), k, cfg.selector, seeds.child2(t as u64, b as u64))
                .with_context(|| format!("batch {b}, tree {t}"))?;
            let selected: Vec<usize> = picks.iter().map(|&p| batch[remaining[p]]).collect();
            trace.push(SelectionStep { batch: b, tree: t, kernel_size: remaining.len(), k, selected: selected.clone() });
            tree_rows.extend(selected);
            let mut drop = picks;
            drop.sort_unstable();
            for p in drop.into_iter().rev() {
                remaining.remove(p);
            }
        }
    }
    Ok(rows)
}

/// Chooses `k` rows of the kernel `A A^T`; returns local row positions.
fn select(a: &Matrix, k: usize, selector: Selector, seeds: SeedStream) -> Result<Vec<usize>> {
    let eig = numerics::gram_eig(a)?;
    match selector {
        Selector::Greedy => dpp::det_kdpp_from_eig(&eig, k),
        Selector::Quantum { shots } => {
            if eig.eigenvalues.len() < k {
                return Err(Error::degenerate(format!("kernel rank {} is below k = {k}", eig.eigenvalues.len())));
            }
            let top = eig.eigenvectors.select_cols(&(0..k).collect::<Vec<_>>());
            let s = match shots {
                None => qdpp::exact_mode(&top)?,
                Some(shots) => qdpp::most_frequent_outcome(&top, shots, &mut seeds.rng())?,
            };
            Ok(s.into_indices())
        }
    }
}

/// Mean over trees (regression) or majority vote with ties to the lowest
/// class (classification).
pub fn predict_forest(model: &ForestModel, x: &Matrix) -> Result<Vec<f64>> {
    let per_tree: Vec<Vec<f64>> = model.trees.iter().map(|t| t.predict(x)).collect::<Result<_>>()?;
    let m = model.trees.len() as f64;
    Ok((0..x.rows())
        .map(|i| match model.config.tree.task {
            Task::Regression => per_tree.iter().map(|p| p[i]).sum::<f64>() / m,
            Task::Classification => {
                let mut votes = vec![0usize; model.n_classes];
                per_tree.iter().for_each(|p| votes[p[i] as usize] += 1);
                let best = *votes.iter().max().expect("at least two classes");
                votes.iter().position(|&v| v == best).expect("max exists") as f64
            }
        })
        .collect())
}

/// Fraction of trees voting for each class; one row per input row.
pub fn vote_fractions(model: &ForestModel, x: &Matrix) -> Result<Matrix> {
    if model.config.tree.task != Task::Classification {
        return Err(Error::invalid("vote fractions need a classification forest"));
    }
    let mut data = vec![0.0; x.rows() * model.n_classes];
    let w = 1.0 / model.trees.len() as f64;
    for tree in &model.trees {
        for (i, p) in tree.predict(x)?.into_iter().enumerate() {
            data[i * model.n_classes + p as usize] += w;
        }
    }
    Matrix::new(x.rows(), model.n_classes, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> Rng {
        SeedStream::new(1).rng()
    }

    fn leafy(task: Task) -> TreeConfig {
        TreeConfig { max_depth: None, min_samples_leaf: 1, max_features: 1.0, task }
    }

    #[test]
    fn constant_target_gives_single_leaf() {
        let x = Matrix::from_fn(12, 2, |i, j| (i * (j + 1)) as f64);
        let tree = fit_tree(&x, &[4.5; 12], &leafy(Task::Regression), &mut rng()).unwrap();
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.predict_row(&[100.0, -3.0]), 4.5);
    }

    #[test]
    fn perfect_split() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let tree = fit_tree(&x, &[0.0, 10.0], &leafy(Task::Regression), &mut rng()).unwrap();
        assert_eq!(tree.root_split(), Some((0, 0.5)));
        assert_eq!(tree.predict(&x).unwrap(), vec![0.0, 10.0]);
    }

    #[test]
    fn staircase_is_interpolated() {
        let x = Matrix::from_fn(30, 1, |i, _| i as f64 * 0.7);
        let y: Vec<f64> = (0..30).map(|i| ((i / 4) as f64).powi(2) - (i % 3) as f64).collect();
        let tree = fit_tree(&x, &y, &leafy(Task::Regression), &mut rng()).unwrap();
        assert_eq!(tree.predict(&x).unwrap(), y);
    }

    #[test]
    fn classification_tree_separates_labels() {
        let x = Matrix::from_fn(20, 2, |i, j| if j == 0 { i as f64 } else { (i % 3) as f64 });
        let y: Vec<f64> = (0..20).map(|i| if i >= 12 { 1.0 } else { 0.0 }).collect();
        let tree = fit_tree(&x, &y, &leafy(Task::Classification), &mut rng()).unwrap();
        assert_eq!(tree.root_split(), Some((0, 11.5)));
        assert_eq!(tree.predict(&x).unwrap(), y);
        assert!(fit_tree(&x, &[0.5; 20], &leafy(Task::Classification), &mut rng()).is_err());
    }

    #[test]
    fn min_leaf_and_depth_are_respected() {
        let x = Matrix::from_fn(40, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..40).map(|i| (i * i % 7) as f64).collect();
        let cfg = TreeConfig { max_depth: Some(2), min_samples_leaf: 6, max_features: 1.0, task: Task::Regression };
        let tree = fit_tree(&x, &y, &cfg, &mut rng()).unwrap();
        assert!(tree.depth() <= 2);
        let mut sizes = std::collections::HashMap::new();
        for i in 0..40 {
            *sizes.entry(tree.leaf_index(x.row(i))).or_insert(0) += 1;
        }
        assert!(sizes.values().all(|&s| s >= 6));
    }

    #[test]
    fn partition_examples() {
        let b = partition_batches(300, None, 150, Some(&mut rng())).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![150, 150]);

        let b = partition_batches(10, None, 150, Some(&mut rng())).unwrap();
        assert_eq!(b, vec![(0..10).collect::<Vec<_>>()]);

        let strata: Vec<bool> = (0..100).map(|i| i % 10 < 3).collect();
        let b = partition_batches(100, Some(&strata), 50, Some(&mut rng())).unwrap();
        for batch in &b {
            let pos = batch.iter().filter(|&&i| strata[i]).count();
            assert!((14..=16).contains(&pos), "{pos}");
        }

        let b = partition_batches(301, None, 100, None).unwrap();
        assert_eq!(b.len(), 4);
        let mut all: Vec<usize> = b.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..301).collect::<Vec<_>>());
        assert!(b.iter().all(|x| x.len() == 75 || x.len() == 76));
        assert!(partition_batches(10, None, 1, None).is_err());
    }

    fn blob(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = SeedStream::new(seed).rng();
        Matrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0))
    }

    #[test]
    fn detdpp_consumes_shrinking_kernels() {
        let x = blob(10, 3, 4);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let cfg = ForestConfig {
            n_trees: 4,
            sampler: Sampler::DetDpp,
            batch_size: 10,
            k_per_batch: Some(2),
            stratify: false,
            ..ForestConfig::default()
        };
        let model = fit_forest(&x, &y, &cfg).unwrap();
        let sizes: Vec<(usize, usize)> = model.selection_trace().iter().map(|s| (s.kernel_size, s.k)).collect();
        assert_eq!(sizes, vec![(10, 2), (8, 2), (6, 2), (4, 2)]);
        let mut used: Vec<usize> = model.training_rows().iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 8);

        let too_many = ForestConfig { n_trees: 6, ..cfg };
        assert!(fit_forest(&x, &y, &too_many).is_err());
    }

    #[test]
    fn detdpp_ignores_seed() {
        let x = blob(90, 4, 6);
        let y: Vec<f64> = (0..90).map(|i| (i % 2) as f64).collect();
        let base = ForestConfig {
            n_trees: 5,
            sampler: Sampler::DetDpp,
            batch_size: 30,
            tree: TreeConfig { task: Task::Classification, ..TreeConfig::regression() },
            ..ForestConfig::default()
        };
        let a = fit_forest(&x, &y, &ForestConfig { seed: 1, ..base }).unwrap();
        let b = fit_forest(&x, &y, &ForestConfig { seed: 2, ..base }).unwrap();
        assert_eq!(a.training_rows(), b.training_rows());
        assert_eq!(a.trees(), b.trees());

        let q = ForestConfig { selector: Selector::Quantum { shots: None }, batch_size: 12, k_per_batch: Some(2), ..base };
        let a = fit_forest(&x, &y, &ForestConfig { seed: 1, ..q }).unwrap();
        let b = fit_forest(&x, &y, &ForestConfig { seed: 2, ..q }).unwrap();
        assert_eq!(a.training_rows(), b.training_rows());
    }

    #[test]
    fn dpp_training_sets_have_k_per_batch() {
        let x = blob(100, 3, 8);
        let y: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let cfg = ForestConfig { n_trees: 6, sampler: Sampler::Dpp, batch_size: 25, seed: 3, ..ForestConfig::default() };
        let model = fit_forest(&x, &y, &cfg).unwrap();
        for rows in model.training_rows() {
            assert_eq!(rows.len(), 3 * 4);
            let mut u = rows.clone();
            u.sort_unstable();
            u.dedup();
            assert_eq!(u.len(), rows.len());
        }
        assert_ne!(model.training_rows()[0], model.training_rows()[1]);
    }

    #[test]
    fn rank_deficient_batch_is_reported() {
        let x = Matrix::from_fn(20, 3, |i, j| if j == 2 { 1.0 } else { (i * (j + 1)) as f64 });
        let y = vec![0.0; 20];
        let cfg = ForestConfig { sampler: Sampler::Dpp, batch_size: 20, ..ForestConfig::default() };
        let err = fit_forest(&x, &y, &cfg).unwrap_err();
        assert!(matches!(err.root(), Error::DegenerateKernel(_)));
        assert!(err.to_string().contains("batch 0"), "{err}");
    }

    #[test]
    fn bootstrap_unique_fraction() {
        let x = blob(500, 2, 2);
        let y = vec![1.0; 500];
        let cfg = ForestConfig { n_trees: 200, seed: 9, ..ForestConfig::default() };
        let model = fit_forest(&x, &y, &cfg).unwrap();
        let mut total = 0.0;
        for rows in model.training_rows() {
            assert_eq!(rows.len(), 500);
            let mut u = rows.clone();
            u.sort_unstable();
            u.dedup();
            total += u.len() as f64 / 500.0;
        }
        let mean = total / 200.0;
        assert!((mean - (1.0 - (-1.0f64).exp())).abs() < 0.03, "{mean}");
    }

    #[test]
    fn dpp_prefers_cross_cluster_pairs() {
        // Centring makes any two cluster centres antipodal, so the linear
        // kernel cannot tell them apart; three clusters stay distinguishable.
        let centres = [(5.0, 0.0), (0.0, 5.0), (-5.0, -5.0)];
        let mut r = SeedStream::new(12).rng();
        let x = Matrix::from_fn(21, 2, |i, j| {
            let c = centres[i % 3];
            (if j == 0 { c.0 } else { c.1 }) + r.random_range(-0.1..0.1)
        });
        let y = vec![0.0; 21];
        let frac = |sampler| {
            let cfg = ForestConfig {
                n_trees: 1000,
                sampler,
                batch_size: 21,
                k_per_batch: Some(2),
                seed: 5,
                ..ForestConfig::default()
            };
            let model = fit_forest(&x, &y, &cfg).unwrap();
            model.training_rows().iter().filter(|rows| rows[0] % 3 != rows[1] % 3).count() as f64 / 1000.0
        };
        let (dpp, uniform) = (frac(Sampler::Dpp), frac(Sampler::Uniform));
        assert!(dpp > 0.97, "{dpp}");
        assert!(dpp > uniform + 0.2, "{dpp} vs {uniform}");
    }

    fn manual_forest(task: Task, preds: &[f64]) -> ForestModel {
        let trees = preds.iter().map(|&v| Tree { nodes: vec![Node::Leaf { value: v }], n_features: 1 }).collect();
        ForestModel {
            trees,
            config: ForestConfig { tree: TreeConfig { task, ..TreeConfig::regression() }, ..ForestConfig::default() },
            n_classes: if task == Task::Classification { 2 } else { 0 },
            training_rows: vec![],
            oob_indices: vec![],
            selection_trace: vec![],
        }
    }

    #[test]
    fn forest_prediction_rules() {
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        let votes = manual_forest(Task::Classification, &[1.0, 1.0, 0.0]);
        assert_eq!(predict_forest(&votes, &x).unwrap(), vec![1.0]);
        assert!((vote_fractions(&votes, &x).unwrap()[(0, 1)] - 2.0 / 3.0).abs() < 1e-15);

        let tie = manual_forest(Task::Classification, &[1.0, 0.0]);
        assert_eq!(predict_forest(&tie, &x).unwrap(), vec![0.0]);

        let reg = manual_forest(Task::Regression, &[1.0, 2.0, 3.0]);
        assert_eq!(predict_forest(&reg, &x).unwrap(), vec![2.0]);
        assert!(predict_forest(&reg, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let x = blob(60, 3, 3);
        let y: Vec<f64> = (0..60).map(|i| x[(i, 0)] * 2.0 + x[(i, 1)]).collect();
        let cfg = ForestConfig { n_trees: 1, seed: 77, ..ForestConfig::default() };
        let a = fit_forest(&x, &y, &cfg).unwrap();
        let b = fit_forest(&x, &y, &cfg).unwrap();
        assert_eq!(a.trees(), b.trees());
        assert_eq!(predict_forest(&a, &x).unwrap(), a.trees()[0].predict(&x).unwrap());
    }
}
