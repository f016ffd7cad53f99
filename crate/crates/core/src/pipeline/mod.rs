//! The stages of an experiment as plain functions over in-memory data. The
//! `nic` binary adds file handling around them.

pub mod ablation;
pub mod cv;
pub mod evaluate;
pub mod io;

pub use ablation::{ablation_subsets, run_ablation, AblationJob, AblationSetup};
pub use cv::{cross_validate, CvOutcome, PredictionRow};
pub use evaluate::{evaluate_classification, evaluate_regression, evaluate_survival, Report, SurvivalEvaluation};

use nic_autodiff::ParamStore;

use crate::compression::{compress_image, CompressOptions, CompressedImage, RgbImage};
use crate::config::DataConfig;
use crate::error::{invalid, Result};
use crate::models::{EmbeddingGrid, EncoderSpec, Task};
use crate::survival::SurvivalRecord;
use crate::synthdata::{gen_mini_wsi, gen_patch_tasks, gen_survival, MiniWsi};
use crate::training::{train_multitask, History, MultitaskConfig, PatchTaskData};

/// A complete synthetic benchmark.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub patch_tasks: Vec<PatchTaskData>,
    pub wsis: Vec<MiniWsi>,
    pub survival: Vec<SurvivalRecord>,
}

pub fn generate(seed: u64, cfg: &DataConfig) -> Result<SyntheticData> {
    let patch_tasks = gen_patch_tasks(seed, cfg.patches_per_task, cfg.patch_size)?;
    let wsis = (0..cfg.wsi_count)
        .map(|i| gen_mini_wsi(seed, i, &cfg.wsi))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = wsis.iter().map(|w| w.label.latent_risk).collect();
    let survival = if wsis.is_empty() {
        Vec::new()
    } else {
        gen_survival(seed, &risks, cfg.censor_rate)?
    };
    Ok(SyntheticData {
        patch_tasks,
        wsis,
        survival,
    })
}

/// The datasets of `tasks`, in the order given.
pub fn select_tasks(datasets: &[PatchTaskData], tasks: &[Task]) -> Result<Vec<PatchTaskData>> {
    tasks
        .iter()
        .map(|&t| {
            datasets
                .iter()
                .find(|d| d.task == t)
                .cloned()
                .ok_or_else(|| invalid(format!("no dataset for task {t}")))
        })
        .collect()
}

/// Multitask training restricted to `tasks`.
pub fn train_encoder(
    encoder: &EncoderSpec,
    config: &MultitaskConfig,
    datasets: &[PatchTaskData],
    tasks: &[Task],
    seed: u64,
) -> Result<(ParamStore, History)> {
    train_multitask(encoder, &select_tasks(datasets, tasks)?, config, seed)
}

/// Compresses every image; `images` pairs an id with the pixels.
pub fn compress_all(
    images: &[(String, &RgbImage)],
    encoder: &EncoderSpec,
    params: &ParamStore,
    opts: &CompressOptions,
) -> Result<Vec<CompressedImage>> {
    images
        .iter()
        .map(|(id, img)| compress_image(img, id, encoder, params, opts))
        .collect()
}

pub fn to_grids(images: &[CompressedImage]) -> Result<Vec<EmbeddingGrid>> {
    images.iter().map(CompressedImage::to_grid).collect()
}

/// Seed of an independent sub-experiment (fold model, ablation repeat).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    crate::rng::splitmix64(seed ^ crate::rng::splitmix64(tag))
}
