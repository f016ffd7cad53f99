use nic_autodiff::{DropoutGranularity, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::init::fan_in_normal;
use super::task::Task;
use super::encoder::EncoderSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::Prng;

/// Shape of every task head: dropout, dense `hidden` + leaky ReLU, dropout,
/// dense `classes` + softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            dropout: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadSpec {
    pub task: Task,
    pub code_size: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub leaky_alpha: f64,
}

/// Samples of one task and their class labels.
#[derive(Clone, Debug)]
pub struct TaskBatch {
    pub task: Task,
    /// `[N, P, P, 3]`.
    pub patches: Tensor,
    pub labels: Vec<usize>,
}

/// How batch-norm statistics are formed when several tasks share a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnBatching {
    /// One encoder pass over the concatenation of all task batches.
    #[default]
    Mixed,
    /// One encoder pass per task batch.
    PerTask,
}

impl HeadSpec {
    pub fn new(task: Task, encoder: &EncoderSpec, config: &HeadConfig) -> Self {
        Self {
            task,
            code_size: encoder.code_size,
            hidden: config.hidden,
            dropout: config.dropout,
            leaky_alpha: encoder.leaky_alpha,
        }
    }

    pub fn prefix(&self) -> String {
        format!("head.{}", self.task.name())
    }

    pub fn init(&self, rng: &mut Prng) -> ParamStore {
        let p = self.prefix();
        let k = self.task.classes();
        let mut s = ParamStore::new();
        s.insert(
            format!("{p}.hidden.weight"),
            fan_in_normal(&[self.code_size, self.hidden], self.code_size, rng),
        );
        s.insert(format!("{p}.hidden.bias"), Tensor::zeros(&[self.hidden]));
        s.insert(format!("{p}.out.weight"), fan_in_normal(&[self.hidden, k], self.hidden, rng));
        s.insert(format!("{p}.out.bias"), Tensor::zeros(&[k]));
        s
    }

    /// `[N, code_size]` embeddings to `[N, K]` class probabilities.
    pub fn forward(&self, g: &mut Graph, z: Var) -> Result<Var> {
        let p = self.prefix();
        let h = g.dropout(z, self.dropout, DropoutGranularity::Element)?;
        let (w, b) = (g.param(&format!("{p}.hidden.weight"))?, g.param(&format!("{p}.hidden.bias"))?);
        let h = g.tape.dense(h, w, b)?;
        let h = g.tape.leaky_relu(h, self.leaky_alpha);
        let h = g.dropout(h, self.dropout, DropoutGranularity::Element)?;
        let (w, b) = (g.param(&format!("{p}.out.weight"))?, g.param(&format!("{p}.out.bias"))?);
        let logits = g.tape.dense(h, w, b)?;
        g.tape.softmax(logits).map_err(Into::into)
    }
}

/// Mean of the per-task cross-entropies. Returns the total loss and each
/// task's probabilities and loss.
pub fn multitask_loss(
    g: &mut Graph,
    encoder: &EncoderSpec,
    heads: &[HeadSpec],
    batches: &[TaskBatch],
    bn: BnBatching,
) -> Result<(Var, Vec<(Var, Var)>)> {
    if heads.len() != batches.len() || heads.is_empty() {
        return Err(invalid(format!("{} heads for {} task batches", heads.len(), batches.len())));
    }
    if heads.iter().zip(batches).any(|(h, b)| h.task != b.task) {
        return Err(invalid("heads and task batches are in different task order"));
    }
    let embeddings: Vec<Var> = match bn {
        BnBatching::Mixed => {
            let counts: Vec<usize> = batches.iter().map(|b| b.labels.len()).collect();
            let mut data = Vec::new();
            let mut shape = batches[0].patches.shape().to_vec();
            for b in batches {
                if b.patches.shape()[1..] != shape[1..] {
                    return Err(invalid("task batches have different patch shapes"));
                }
                data.extend_from_slice(b.patches.data());
            }
            shape[0] = counts.iter().sum();
            let x = g.input(Tensor::new(shape, data).map_err(Error::from)?);
            let z = encoder.forward(g, x)?;
            let mut start = 0;
            let mut out = Vec::with_capacity(counts.len());
            for n in counts {
                out.push(g.tape.slice_rows(z, start, n)?);
                start += n;
            }
            out
        }
        BnBatching::PerTask => batches
            .iter()
            .map(|b| {
                let x = g.input(b.patches.clone());
                encoder.forward(g, x)
            })
            .collect::<Result<_>>()?,
    };
    let mut per_task = Vec::with_capacity(heads.len());
    for ((head, batch), z) in heads.iter().zip(batches).zip(embeddings) {
        let probs = head.forward(g, z)?;
        let ce = g.tape.cross_entropy(probs, &batch.labels)?;
        per_task.push((probs, ce));
    }
    let mut total = per_task[0].1;
    for &(_, ce) in &per_task[1..] {
        total = g.tape.add(total, ce)?;
    }
    let total = g.tape.scale(total, 1.0 / heads.len() as f64);
    Ok((total, per_task))
}
