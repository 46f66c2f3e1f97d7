//! Experiment driver: data generation and loading, the three-fold holdout
//! protocol, a boosted-tree classifier, AUC, and report writing.

mod data;
mod eval;
mod experiment;
mod gbt;

pub use data::{generate_synthetic, load_csv, read_matrix_csv, write_csv, write_masked_csv, Dataset, SyntheticSpec};
pub use eval::{auc, consecutive_folds, three_fold_eval, FoldAucs};
pub use experiment::{
    mean_sd, run_experiment, six_methods, DatasetSpec, ExperimentConfig, ExperimentReport, MissingKind,
    MissingnessSpec, Regime, RepeatRecord, SummaryRow,
};
pub use gbt::{fit_gbt, predict_gbt, GbtConfig, GbtModel};
