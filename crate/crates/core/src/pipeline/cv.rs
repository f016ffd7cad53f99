//! K-fold training of the image-level network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::config::CvConfig;
use crate::error::{invalid, Result};
use crate::metrics::{ensemble_mean, kfold, FoldPlan};
use crate::models::{EmbeddingGrid, WsiCnnSpec};
use crate::survival::SurvivalRecord;
use crate::training::{predict, train_image_level, ImageTrainConfig, Targets, TrainedImageModel};

/// One line of the predictions CSV. `fold` is the rotation whose model made
/// the prediction, empty for ensemble rows; `label` is the regression
/// target, the class, or the follow-up time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub sample_id: String,
    pub fold: Option<usize>,
    pub model: String,
    pub prediction: f64,
    pub label: f64,
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub plan: FoldPlan,
    /// Images taking part in the folds (indices into the input grids).
    pub samples: Vec<usize>,
    /// Held-out prediction for each of `samples`, same order.
    pub oof: Vec<f64>,
    /// Rotation that produced each `oof` value.
    pub oof_fold: Vec<usize>,
    /// Images outside the folds and their ensemble predictions.
    pub holdout: Vec<usize>,
    pub ensemble: Vec<f64>,
    pub models: Vec<TrainedImageModel>,
}

impl CvOutcome {
    pub fn rows(&self, ids: &[String], targets: &Targets) -> Vec<PredictionRow> {
        let label = |i: usize| match targets {
            Targets::Regression(v) => v[i],
            Targets::Classes(v) => v[i] as f64,
            Targets::Survival(v) => v[i].follow_up,
        };
        let oof = self.samples.iter().zip(&self.oof).zip(&self.oof_fold).map(|((&i, &p), &f)| PredictionRow {
            sample_id: ids[i].clone(),
            fold: Some(f),
            model: format!("fold{f}"),
            prediction: p,
            label: label(i),
        });
        let ens = self.holdout.iter().zip(&self.ensemble).map(|(&i, &p)| PredictionRow {
            sample_id: ids[i].clone(),
            fold: None,
            model: "ensemble".into(),
            prediction: p,
            label: label(i),
        });
        oof.chain(ens).collect()
    }
}

fn subset(targets: &Targets, idx: &[usize]) -> Targets {
    match targets {
        Targets::Regression(v) => Targets::Regression(idx.iter().map(|&i| v[i]).collect()),
        Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
        Targets::Survival(v) => Targets::Survival(idx.iter().map(|&i| v[i]).collect::<Vec<SurvivalRecord>>()),
    }
}

/// Trains one model per fold rotation. Every image in the folds receives
/// exactly one held-out prediction; the last `cv.holdout` images (by index)
/// are kept out of the folds and scored by the mean of all fold models.
///
/// Rotations train in parallel; each has its own seed, so the result does
/// not depend on the thread count.
pub fn cross_validate(
    spec: &WsiCnnSpec,
    train_cfg: &ImageTrainConfig,
    cv: &CvConfig,
    grids: &[EmbeddingGrid],
    targets: &Targets,
    seed: u64,
) -> Result<CvOutcome> {
    if grids.len() != targets.len() {
        return Err(invalid(format!("{} grids for {} targets", grids.len(), targets.len())));
    }
    if cv.holdout >= grids.len() {
        return Err(invalid("holdout leaves no images for the folds"));
    }
    let n = grids.len() - cv.holdout;
    let samples: Vec<usize> = (0..n).collect();
    let holdout: Vec<usize> = (n..grids.len()).collect();
    let plan = kfold(n, cv.folds, cv.pattern, seed)?;
    let fold_grids = &grids[..n];
    let fold_targets = subset(targets, &samples);

    let results: Vec<(TrainedImageModel, Vec<usize>, Vec<f64>, Vec<f64>)> = (0..cv.folds)
        .into_par_iter()
        .map(|r| {
            let roles = plan.rotation(r);
            let model = train_image_level(
                spec,
                fold_grids,
                &fold_targets,
                &roles.train,
                &roles.val,
                train_cfg,
                derive_seed(seed, r as u64),
            )?;
            let held = roles.held_out().to_vec();
            let pred = predict(spec, &model.params, fold_grids, &held)?;
            let ext = if holdout.is_empty() {
                Vec::new()
            } else {
                predict(spec, &model.params, grids, &holdout)?
            };
            Ok((model, held, pred, ext))
        })
        .collect::<Result<_>>()?;

    let mut oof = vec![f64::NAN; n];
    let mut oof_fold = vec![usize::MAX; n];
    let mut external = Vec::new();
    let mut models = Vec::new();
    for (r, (model, held, pred, ext)) in results.into_iter().enumerate() {
        for (&i, &p) in held.iter().zip(&pred) {
            oof[i] = p;
            oof_fold[i] = r;
        }
        external.push(ext);
        models.push(model);
    }
    let ensemble = if holdout.is_empty() { Vec::new() } else { ensemble_mean(&external)? };
    Ok(CvOutcome {
        plan,
        samples,
        oof,
        oof_fold,
        holdout,
        ensemble,
        models,
    })
}
