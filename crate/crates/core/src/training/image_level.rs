use nic_autodiff::{Mode, ParamStore, Tensor, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::history::{EpochRecord, History};
use super::plateau::{Direction, PlateauAction, PlateauConfig, PlateauSchedule};
use crate::error::{invalid, Error, Result};
use crate::models::{apply_stats, pad_grid, stack_grids, EmbeddingGrid, Graph, Objective, WsiCnnSpec};
use crate::rng;
use crate::survival::{cox_loss, cox_loss_on_tape, SurvivalRecord};

/// Image-level labels, one per grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Regression(Vec<f64>),
    Classes(Vec<usize>),
    Survival(Vec<SurvivalRecord>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(v) => v.len(),
            Targets::Classes(v) => v.len(),
            Targets::Survival(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn objective(&self) -> Objective {
        match self {
            Targets::Regression(_) => Objective::Mse,
            Targets::Classes(_) => Objective::Ce,
            Targets::Survival(_) => Objective::Cox,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageTrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub lr_floor: f64,
    pub max_epochs: usize,
    pub plateau: PlateauConfig,
    pub adam: AdamConfig,
    /// Return the parameters of the epoch with the lowest validation loss
    /// instead of the last epoch's.
    pub keep_best: bool,
}

impl Default for ImageTrainConfig {
    fn default() -> Self {
        Self {
            batch: 16,
            lr: 1e-2,
            lr_floor: 1e-5,
            max_epochs: 100,
            plateau: PlateauConfig::default(),
            adam: AdamConfig::default(),
            keep_best: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedImageModel {
    pub params: ParamStore,
    pub history: History,
    /// Epoch whose parameters were kept.
    pub epoch: usize,
}

/// Raw network outputs for the grids at `idx`: one row per grid
/// (class probabilities for `ce`, a single value otherwise).
fn outputs(spec: &WsiCnnSpec, params: &ParamStore, grids: &[EmbeddingGrid], idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    let k = spec.outputs();
    let mut rows = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(16) {
        let refs: Vec<&EmbeddingGrid> = chunk.iter().map(|&i| &grids[i]).collect();
        let mut g = Graph::new(params, Mode::Infer);
        let x = g.input(stack_grids(&refs, spec.pad_multiple)?);
        let y = spec.forward(&mut g, x)?;
        let out = g.value(y);
        if !out.is_finite() {
            return Err(Error::Numeric("non-finite image-level prediction".into()));
        }
        rows.extend(out.data().chunks_exact(k).map(<[f64]>::to_vec));
    }
    Ok(rows)
}

/// One score per grid at `idx`, in inference mode: the output value for
/// `mse` and `cox`; for `ce`, the probability of class 1 when there are two
/// classes and the arg-max class otherwise.
pub fn predict(spec: &WsiCnnSpec, params: &ParamStore, grids: &[EmbeddingGrid], idx: &[usize]) -> Result<Vec<f64>> {
    Ok(outputs(spec, params, grids, idx)?
        .into_iter()
        .map(|row| match (spec.objective, row.len()) {
            (Objective::Ce, 2) => row[1],
            (Objective::Ce, _) => row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0 as f64,
            _ => row[0],
        })
        .collect())
}

/// Data loss (no weight penalty) of the grids at `idx`; `None` when it is
/// undefined (a survival subset without events).
fn data_loss(spec: &WsiCnnSpec, params: &ParamStore, grids: &[EmbeddingGrid], targets: &Targets, idx: &[usize]) -> Result<Option<f64>> {
    let out = outputs(spec, params, grids, idx)?;
    let n = idx.len() as f64;
    Ok(match targets {
        Targets::Regression(y) => Some(idx.iter().zip(&out).map(|(&i, o)| (o[0] - y[i]).powi(2)).sum::<f64>() / n),
        Targets::Classes(y) => Some(
            -idx.iter()
                .zip(&out)
                .map(|(&i, o)| o[y[i]].max(nic_autodiff::ops::loss::PROB_FLOOR).ln())
                .sum::<f64>()
                / n,
        ),
        Targets::Survival(r) => {
            let recs: Vec<SurvivalRecord> = idx.iter().map(|&i| r[i]).collect();
            if !recs.iter().any(|r| r.event) {
                return Ok(None);
            }
            let risks: Vec<f64> = out.iter().map(|o| o[0]).collect();
            Some(cox_loss(&risks, &recs)?)
        }
    })
}

fn batch_loss(g: &mut Graph, spec: &WsiCnnSpec, out: Var, targets: &Targets, idx: &[usize]) -> Result<Var> {
    let data = match targets {
        Targets::Regression(y) => {
            let t: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            g.tape.mse(out, &t)?
        }
        Targets::Classes(y) => {
            let t: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            g.tape.cross_entropy(out, &t)?
        }
        Targets::Survival(r) => {
            let recs: Vec<SurvivalRecord> = idx.iter().map(|&i| r[i]).collect();
            cox_loss_on_tape(&mut g.tape, out, &recs)?
        }
    };
    Ok(match spec.l2_penalty(g)? {
        Some(pen) => g.tape.add(data, pen)?,
        None => data,
    })
}

/// Splits a shuffled order into batches of `size`; a trailing batch of one
/// sample joins the previous batch, since batch norm needs two.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().map(|b| b.len()) == Some(1) {
        let n = out.len();
        let start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

/// Trains the image-level network on the grids at `train`, monitoring the
/// data loss on `val` for the plateau schedule.
///
/// The Cox objective is evaluated per mini-batch: risk sets span the batch.
/// Batches without an observed event carry no signal and are skipped; an
/// epoch with no usable batch is an error.
pub fn train_image_level(
    spec: &WsiCnnSpec,
    grids: &[EmbeddingGrid],
    targets: &Targets,
    train: &[usize],
    val: &[usize],
    config: &ImageTrainConfig,
    seed: u64,
) -> Result<TrainedImageModel> {
    spec.validate()?;
    if targets.objective() != spec.objective {
        return Err(invalid(format!(
            "targets are for {:?} but the network is built for {:?}",
            targets.objective(),
            spec.objective
        )));
    }
    if grids.len() != targets.len() {
        return Err(invalid(format!("{} grids for {} targets", grids.len(), targets.len())));
    }
    if train.len() < 2 || val.is_empty() {
        return Err(invalid("image-level training needs >= 2 training and >= 1 validation grids"));
    }
    if let Some(&i) = train.iter().chain(val).find(|&&i| i >= grids.len()) {
        return Err(invalid(format!("sample index {i} out of range")));
    }
    if let Targets::Classes(y) = targets {
        if y.iter().any(|&c| c >= spec.classes) {
            return Err(invalid("class label out of range"));
        }
    }
    if config.batch < 2 || config.max_epochs == 0 {
        return Err(invalid("batch size must be >= 2 and the epoch budget positive"));
    }
    let padded: Vec<EmbeddingGrid> = grids
        .iter()
        .map(|g| pad_grid(g, spec.pad_multiple))
        .collect::<Result<_>>()?;

    let mut params = spec.init(&mut rng::stream(seed, rng::ids::INIT))?;
    let mut adam = Adam::new(config.adam, config.lr);
    let mut schedule = PlateauSchedule::new(config.lr, config.lr_floor, config.plateau, Direction::Minimize)?;
    let mut shuffle_rng = rng::stream(seed, rng::ids::SHUFFLE);
    let mut dropout_rng = rng::stream(seed, rng::ids::DROPOUT);
    let mut history = History::new(vec!["val_loss".into()]);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut order = train.to_vec();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut used) = (0.0, 0usize);
        for idx in batches(&order, config.batch) {
            if let Targets::Survival(r) = targets {
                if !idx.iter().any(|&i| r[i].event) {
                    continue;
                }
            }
            let refs: Vec<&EmbeddingGrid> = idx.iter().map(|&i| &padded[i]).collect();
            let x: Tensor = stack_grids(&refs, spec.pad_multiple)?;
            let mut g = Graph::new(&params, Mode::Train).with_rng(&mut dropout_rng);
            let xv = g.input(x);
            let out = spec.forward(&mut g, xv)?;
            let loss = batch_loss(&mut g, spec, out, targets, idx)?;
            loss_sum += g.value(loss).item()?;
            used += 1;
            g.backward(loss)?;
            let grads = g.grads();
            let stats = g.take_stats();
            drop(g);
            adam.step(&mut params, &grads)?;
            apply_stats(&mut params, &stats)?;
        }
        if used == 0 {
            return Err(invalid(format!("epoch {epoch} has no mini-batch with an observed event")));
        }
        if !params.all_finite() {
            return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
        }
        let train_loss = loss_sum / used as f64;
        let val_loss = data_loss(spec, &params, &padded, targets, val)?.unwrap_or(train_loss);
        history.epochs.push(EpochRecord {
            epoch,
            lr: adam.lr,
            train_loss,
            metrics: vec![val_loss],
        });
        if config.keep_best && best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, epoch, params.clone()));
        }
        match schedule.step(val_loss) {
            PlateauAction::Continue => {}
            PlateauAction::Decayed(lr) => adam.lr = lr,
            PlateauAction::Stop => break,
        }
    }
    let last = history.last().map(|e| e.epoch).unwrap_or(0);
    let (params, epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, last),
    };
    Ok(TrainedImageModel {
        params,
        history,
        epoch,
    })
}
