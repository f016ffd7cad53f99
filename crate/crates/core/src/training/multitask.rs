use nic_autodiff::{Mode, ParamStore};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::augment::AugmentPolicy;
use super::data::{PatchSet, PatchTaskData};
use super::history::{EpochRecord, History};
use super::plateau::{Direction, PlateauAction, PlateauConfig, PlateauSchedule};
use crate::error::{invalid, Result};
use crate::models::head::{multitask_loss, BnBatching, HeadConfig, HeadSpec, TaskBatch};
use crate::models::{apply_stats, EncoderSpec, Graph, Task};
use crate::rng::{self, Prng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultitaskConfig {
    pub batch_per_task: usize,
    pub lr: f64,
    pub lr_floor: f64,
    pub max_epochs: usize,
    pub plateau: PlateauConfig,
    pub adam: AdamConfig,
    pub augment: AugmentPolicy,
    pub bn_batching: BnBatching,
    pub head: HeadConfig,
}

impl Default for MultitaskConfig {
    fn default() -> Self {
        Self {
            batch_per_task: 32,
            lr: 1e-3,
            lr_floor: 1e-5,
            max_epochs: 50,
            plateau: PlateauConfig::default(),
            adam: AdamConfig::default(),
            augment: AugmentPolicy::default(),
            bn_batching: BnBatching::Mixed,
            head: HeadConfig::default(),
        }
    }
}

/// Stream id of the initializer of `task`'s head; the encoder uses
/// [`rng::ids::INIT`]. Separate streams keep every network's initial weights
/// independent of which tasks are trained.
fn head_stream(task: Task) -> u64 {
    rng::ids::INIT + 100 + task.index() as u64
}

/// Initial encoder weights plus one head per task (all four, trained or not).
pub fn init_multitask(encoder: &EncoderSpec, head: &HeadConfig, seed: u64) -> Result<ParamStore> {
    let mut params = encoder.init(&mut rng::stream(seed, rng::ids::INIT))?;
    for task in Task::ALL {
        let spec = HeadSpec::new(task, encoder, head);
        params.extend(spec.init(&mut rng::stream(seed, head_stream(task))));
    }
    Ok(params)
}

/// Fraction of `set` classified correctly, in inference mode.
pub fn evaluate_accuracy(encoder: &EncoderSpec, head: &HeadSpec, params: &ParamStore, set: &PatchSet) -> Result<f64> {
    if set.is_empty() {
        return Err(invalid("accuracy of an empty set"));
    }
    let k = head.task.classes();
    let mut correct = 0usize;
    let all: Vec<usize> = (0..set.len()).collect();
    for idx in all.chunks(256) {
        let (x, labels) = set.batch::<Prng>(idx, None)?;
        let mut g = Graph::new(params, Mode::Infer);
        let x = g.input(x);
        let z = encoder.forward(&mut g, x)?;
        let probs = head.forward(&mut g, z)?;
        for (row, &label) in g.value(probs).data().chunks_exact(k).zip(&labels) {
            let argmax = (0..k).fold(0, |best, c| if row[c] > row[best] { c } else { best });
            correct += usize::from(argmax == label);
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

/// Trains the shared encoder and the heads of the given tasks jointly,
/// minimizing the mean per-task cross-entropy.
///
/// An epoch is one pass over the smallest training set, in steps that draw
/// `batch_per_task` patches from every task. The learning rate follows a
/// plateau schedule on the mean validation accuracy.
pub fn train_multitask(
    encoder: &EncoderSpec,
    datasets: &[PatchTaskData],
    config: &MultitaskConfig,
    seed: u64,
) -> Result<(ParamStore, History)> {
    if datasets.is_empty() {
        return Err(invalid("multitask training needs at least one task"));
    }
    for (i, d) in datasets.iter().enumerate() {
        if d.train.is_empty() || d.val.is_empty() {
            return Err(invalid(format!("task {} has an empty train or validation set", d.task)));
        }
        if datasets[..i].iter().any(|o| o.task == d.task) {
            return Err(invalid(format!("task {} is listed twice", d.task)));
        }
        if d.train.patch_size != encoder.patch_size || d.val.patch_size != encoder.patch_size {
            return Err(invalid(format!("task {} patches do not match the encoder input", d.task)));
        }
    }
    if config.batch_per_task == 0 || config.max_epochs == 0 {
        return Err(invalid("batch size and epoch budget must be positive"));
    }
    let heads: Vec<HeadSpec> = datasets
        .iter()
        .map(|d| HeadSpec::new(d.task, encoder, &config.head))
        .collect();
    let mut params = init_multitask(encoder, &config.head, seed)?;
    let mut adam = Adam::new(config.adam, config.lr);
    let mut schedule = PlateauSchedule::new(config.lr, config.lr_floor, config.plateau, Direction::Maximize)?;
    let mut shuffle_rng = rng::stream(seed, rng::ids::SHUFFLE);
    let mut dropout_rng = rng::stream(seed, rng::ids::DROPOUT);
    let mut augment_rng = rng::stream(seed, rng::ids::AUGMENT);

    let smallest = datasets.iter().map(|d| d.train.len()).min().unwrap();
    let batch = config.batch_per_task.min(smallest);
    let steps = smallest / batch;
    let mut names: Vec<String> = datasets.iter().map(|d| format!("val_acc_{}", d.task)).collect();
    names.push("val_acc_mean".into());
    let mut history = History::new(names);

    for epoch in 1..=config.max_epochs {
        let orders: Vec<Vec<usize>> = datasets
            .iter()
            .map(|d| {
                let mut o: Vec<usize> = (0..d.train.len()).collect();
                o.shuffle(&mut shuffle_rng);
                o
            })
            .collect();
        let mut loss_sum = 0.0;
        for s in 0..steps {
            let mut batches = Vec::with_capacity(datasets.len());
            for (d, order) in datasets.iter().zip(&orders) {
                let idx = &order[s * batch..(s + 1) * batch];
                let (patches, labels) = d.train.batch(idx, Some((&mut augment_rng, &config.augment)))?;
                batches.push(TaskBatch {
                    task: d.task,
                    patches,
                    labels,
                });
            }
            let mut g = Graph::new(&params, Mode::Train).with_rng(&mut dropout_rng);
            let (loss, _) = multitask_loss(&mut g, encoder, &heads, &batches, config.bn_batching)?;
            loss_sum += g.value(loss).item()?;
            g.backward(loss)?;
            let grads = g.grads();
            let stats = g.take_stats();
            drop(g);
            adam.step(&mut params, &grads)?;
            apply_stats(&mut params, &stats)?;
        }
        let accs: Vec<f64> = datasets
            .iter()
            .zip(&heads)
            .map(|(d, h)| evaluate_accuracy(encoder, h, &params, &d.val))
            .collect::<Result<_>>()?;
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let mut metrics = accs;
        metrics.push(mean);
        history.epochs.push(EpochRecord {
            epoch,
            lr: adam.lr,
            train_loss: loss_sum / steps as f64,
            metrics,
        });
        if !params.all_finite() {
            return Err(crate::Error::Numeric(format!("parameters diverged in epoch {epoch}")));
        }
        match schedule.step(mean) {
            PlateauAction::Continue => {}
            PlateauAction::Decayed(lr) => adam.lr = lr,
            PlateauAction::Stop => break,
        }
    }
    Ok((params, history))
}
