//! Task-subset sweep: one encoder per subset of tasks, each scored by the
//! cross-validated correlation of an image-level regressor on its codes.

use super::{compress_all, cross_validate, derive_seed, to_grids, train_encoder};
use crate::compression::{CompressOptions, RgbImage};
use crate::config::CvConfig;
use crate::error::Result;
use crate::metrics::{spearman, AblationRow};
use crate::models::{EncoderSpec, Task, WsiCnnSpec};
use crate::training::{ImageTrainConfig, MultitaskConfig, PatchTaskData, Targets};

/// Everything an ablation run shares across subsets.
#[derive(Clone, Debug)]
pub struct AblationSetup<'a> {
    pub encoder: &'a EncoderSpec,
    pub multitask: &'a MultitaskConfig,
    pub compression: &'a CompressOptions,
    pub wsi: &'a WsiCnnSpec,
    pub image_training: &'a ImageTrainConfig,
    pub cv: &'a CvConfig,
    pub datasets: &'a [PatchTaskData],
    pub images: &'a [(String, &'a RgbImage)],
    pub targets: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationJob {
    pub tasks: Vec<Task>,
    pub encoder_seed: u64,
}

/// The 15 nonempty task subsets (fewest tasks first) followed by
/// `repeat_full` four-task encoders with fresh seeds. `extremes_only`
/// keeps just the single-task and four-task subsets.
pub fn ablation_subsets(seed: u64, repeat_full: usize, extremes_only: bool) -> Vec<AblationJob> {
    let mut masks: Vec<u32> = (1..16).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut jobs: Vec<AblationJob> = masks
        .into_iter()
        .filter(|m| !extremes_only || m.count_ones() == 1 || m.count_ones() == 4)
        .map(|m| AblationJob {
            tasks: Task::ALL.iter().copied().filter(|t| m & (1 << t.index()) != 0).collect(),
            encoder_seed: seed,
        })
        .collect();
    jobs.extend((1..=repeat_full).map(|i| AblationJob {
        tasks: Task::ALL.to_vec(),
        encoder_seed: derive_seed(seed, 1000 + i as u64),
    }));
    jobs
}

/// Out-of-fold Spearman correlation of the regressor trained on the codes of
/// one job's encoder. The image-level seed is shared by all jobs.
pub fn run_job(setup: &AblationSetup, job: &AblationJob, seed: u64) -> Result<AblationRow> {
    let (params, _) = train_encoder(setup.encoder, setup.multitask, setup.datasets, &job.tasks, job.encoder_seed)?;
    let compressed = compress_all(setup.images, setup.encoder, &params, setup.compression)?;
    let grids = to_grids(&compressed)?;
    let targets = Targets::Regression(setup.targets.to_vec());
    let out = cross_validate(setup.wsi, setup.image_training, setup.cv, &grids, &targets, seed)?;
    let truth: Vec<f64> = out.samples.iter().map(|&i| setup.targets[i]).collect();
    let mut include = [false; 4];
    job.tasks.iter().for_each(|t| include[t.index()] = true);
    Ok(AblationRow {
        include,
        correlation: spearman(&out.oof, &truth)?,
    })
}

pub fn run_ablation(setup: &AblationSetup, jobs: &[AblationJob], seed: u64) -> Result<Vec<AblationRow>> {
    jobs.iter().map(|j| run_job(setup, j, seed)).collect()
}
