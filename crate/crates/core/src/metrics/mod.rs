//! Evaluation statistics and experiment mechanics: rank correlation with
//! confidence intervals, ROC AUC, k-fold plans, ensembling, and the
//! task-inclusion analysis of ablation sweeps.

pub mod ablation;
pub mod auc;
pub mod folds;
pub mod rank;

pub use ablation::{
    read_ablation_csv, task_inclusion_correlation, write_ablation_csv, AblationRow,
};
pub use auc::auc_roc;
pub use folds::{kfold, FoldPattern, FoldPlan, FoldRoles};
pub use rank::{average_ranks, pearson, spearman, spearman_ci_bootstrap, spearman_ci_fisher, Interval};

use crate::error::{invalid, Result};

/// Per-sample arithmetic mean over models: `predictions[model][sample]`.
pub fn ensemble_mean(predictions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = predictions.first().ok_or_else(|| invalid("ensemble of zero models"))?;
    if predictions.iter().any(|p| p.len() != first.len()) {
        return Err(invalid("ensemble members predict different sample counts"));
    }
    // Running mean: exact when all members agree.
    let mut mean = first.clone();
    for (k, p) in predictions.iter().enumerate().skip(1) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += (v - *m) / (k + 1) as f64;
        }
    }
    Ok(mean)
}
