use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::harness::gbt::{fit_gbt, predict_gbt, GbtConfig};
use crate::numerics::Matrix;

/// Area under the ROC curve as the Mann–Whitney statistic, with midranks for
/// tied scores.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.iter().filter(|&&l| l == 0.0).count();
    if n_pos + n_neg != labels.len() {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        rank_sum += midrank * order[start..end].iter().filter(|&&i| labels[i] == 1.0).count() as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Three consecutive row ranges covering `0..n`; earlier folds take the
/// remainder.
pub fn consecutive_folds(n: usize) -> [Range<usize>; 3] {
    let base = n / 3;
    let extra = n % 3;
    let a = base + usize::from(extra > 0);
    let b = a + base + usize::from(extra > 1);
    [0..a, a..b, b..n]
}

/// Holdout AUCs for the three consecutive folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldAucs(pub [f64; 3]);

/// Trains the classifier on each pair of folds and scores the third.
pub fn three_fold_eval(x: &Matrix, y: &[f64], cfg: &GbtConfig, seed: u64) -> Result<FoldAucs> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.rows() < 30 {
        return Err(Error::invalid(format!("three-fold evaluation needs at least 30 rows, got {}", x.rows())));
    }
    let mut out = [0.0; 3];
    for (h, fold) in consecutive_folds(x.rows()).into_iter().enumerate() {
        let dev: Vec<usize> = (0..x.rows()).filter(|i| !fold.contains(i)).collect();
        let hold: Vec<usize> = fold.collect();
        let pick = |rows: &[usize]| rows.iter().map(|&i| y[i]).collect::<Vec<f64>>();
        let model = fit_gbt(&x.select_rows(&dev), &pick(&dev), cfg, seed).with_context(|| format!("fold H{}", h + 1))?;
        let scores = predict_gbt(&model, &x.select_rows(&hold))?;
        out[h] = auc(&scores, &pick(&hold)).with_context(|| format!("holdout H{}", h + 1))?;
    }
    Ok(FoldAucs(out))
}
