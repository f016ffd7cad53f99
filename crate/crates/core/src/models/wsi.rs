use nic_autodiff::{BatchNormConfig, DropoutGranularity, Padding, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::init::{fan_in_normal, insert_batch_norm};
use super::is_weight;
use crate::error::{invalid, Error, Result};
use crate::rng::Prng;

pub const PREFIX: &str = "wsi";

/// Training objective of the image-level network, which also fixes its
/// output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Single linear output, mean squared error.
    Mse,
    /// Softmax over `classes`, cross-entropy.
    Ce,
    /// Single linear risk output, negative Cox partial log-likelihood.
    Cox,
}

/// Image-level CNN over `[N, H, W, C]` embedding grids: depthwise-separable
/// 3x3 convolutions (one per entry of `strides`), each followed by batch
/// norm, leaky ReLU and channel dropout; global average pooling; a dense
/// layer with batch norm and leaky ReLU; and the objective's output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WsiCnnSpec {
    pub code_size: usize,
    pub filters: usize,
    pub strides: Vec<usize>,
    pub hidden: usize,
    pub dropout: f64,
    pub l2: f64,
    pub leaky_alpha: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Grids are zero-padded to a multiple of this many cells per side.
    pub pad_multiple: usize,
    pub objective: Objective,
    /// Output classes for the `ce` objective.
    pub classes: usize,
}

impl Default for WsiCnnSpec {
    fn default() -> Self {
        Self {
            code_size: 128,
            filters: 128,
            strides: vec![2, 2, 2, 2, 2, 2, 1, 1],
            hidden: 128,
            dropout: 0.2,
            l2: 1e-5,
            leaky_alpha: 0.2,
            bn_momentum: 0.9,
            bn_eps: 1e-3,
            pad_multiple: 64,
            objective: Objective::Mse,
            classes: 2,
        }
    }
}

impl WsiCnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.code_size == 0 || self.filters == 0 || self.hidden == 0 || self.pad_multiple == 0 {
            return Err(Error::Config("image-level network sizes must be positive".into()));
        }
        if self.strides.is_empty() || self.strides.iter().any(|&s| s == 0) {
            return Err(Error::Config("strides must be a nonempty list of positive values".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) || self.l2 < 0.0 {
            return Err(Error::Config("dropout must be in [0, 1) and l2 nonnegative".into()));
        }
        if self.objective == Objective::Ce && self.classes < 2 {
            return Err(Error::Config("classification needs at least 2 classes".into()));
        }
        Ok(())
    }

    pub fn bn(&self) -> BatchNormConfig {
        BatchNormConfig {
            momentum: self.bn_momentum,
            eps: self.bn_eps,
        }
    }

    pub fn outputs(&self) -> usize {
        match self.objective {
            Objective::Ce => self.classes,
            Objective::Mse | Objective::Cox => 1,
        }
    }

    pub fn init(&self, rng: &mut Prng) -> Result<ParamStore> {
        self.validate()?;
        let mut p = ParamStore::new();
        let mut cin = self.code_size;
        for i in 0..self.strides.len() {
            let name = format!("{PREFIX}.sep{i}");
            p.insert(format!("{name}.depth"), fan_in_normal(&[3, 3, cin], 9, rng));
            p.insert(
                format!("{name}.point"),
                fan_in_normal(&[1, 1, cin, self.filters], cin, rng),
            );
            p.insert(format!("{name}.bias"), Tensor::zeros(&[self.filters]));
            insert_batch_norm(&mut p, &format!("{name}.bn"), self.filters);
            cin = self.filters;
        }
        p.insert(
            format!("{PREFIX}.dense.weight"),
            fan_in_normal(&[self.filters, self.hidden], self.filters, rng),
        );
        p.insert(format!("{PREFIX}.dense.bias"), Tensor::zeros(&[self.hidden]));
        insert_batch_norm(&mut p, &format!("{PREFIX}.dense.bn"), self.hidden);
        p.insert(
            format!("{PREFIX}.out.weight"),
            fan_in_normal(&[self.hidden, self.outputs()], self.hidden, rng),
        );
        p.insert(format!("{PREFIX}.out.bias"), Tensor::zeros(&[self.outputs()]));
        Ok(p)
    }

    /// Output of the convolution stack, before pooling.
    pub fn features(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.value(x).shape();
        if s.len() != 4 || s[3] != self.code_size {
            return Err(invalid(format!(
                "image-level network expects [N,H,W,{}] grids, got {s:?}",
                self.code_size
            )));
        }
        let mut h = x;
        for (i, &stride) in self.strides.iter().enumerate() {
            let name = format!("{PREFIX}.sep{i}");
            let d = g.param(&format!("{name}.depth"))?;
            let p = g.param(&format!("{name}.point"))?;
            let b = g.param(&format!("{name}.bias"))?;
            h = g.tape.depthwise_separable_conv2d(h, d, p, b, stride, Padding::Same)?;
            h = g.batch_norm(h, &format!("{name}.bn"), self.bn())?;
            h = g.tape.leaky_relu(h, self.leaky_alpha);
            h = g.dropout(h, self.dropout, DropoutGranularity::Channel)?;
        }
        Ok(h)
    }

    /// Class probabilities `[N, K]` for `ce`, otherwise one value per grid
    /// `[N]`.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let n = g.value(x).shape().first().copied().unwrap_or(0);
        let h = self.features(g, x)?;
        let h = g.tape.mean_pool_spatial(h)?;
        let (w, b) = (g.param(&format!("{PREFIX}.dense.weight"))?, g.param(&format!("{PREFIX}.dense.bias"))?);
        let h = g.tape.dense(h, w, b)?;
        let h = g.batch_norm(h, &format!("{PREFIX}.dense.bn"), self.bn())?;
        let h = g.tape.leaky_relu(h, self.leaky_alpha);
        let (w, b) = (g.param(&format!("{PREFIX}.out.weight"))?, g.param(&format!("{PREFIX}.out.bias"))?);
        let y = g.tape.dense(h, w, b)?;
        match self.objective {
            Objective::Ce => g.tape.softmax(y).map_err(Into::into),
            Objective::Mse | Objective::Cox => g.tape.reshape(y, &[n]).map_err(Into::into),
        }
    }

    /// `l2 * sum of squared convolution and dense weights` over every weight
    /// bound on the graph so far; `None` when the coefficient is zero.
    pub fn l2_penalty(&self, g: &mut Graph) -> Result<Option<Var>> {
        if self.l2 == 0.0 {
            return Ok(None);
        }
        let weights: Vec<Var> = g
            .bound()
            .filter(|(name, _)| name.starts_with(PREFIX) && is_weight(name))
            .map(|(_, v)| v)
            .collect();
        let mut total: Option<Var> = None;
        for w in weights {
            let s = g.tape.sum_squares(w);
            total = Some(match total {
                Some(t) => g.tape.add(t, s)?,
                None => s,
            });
        }
        Ok(total.map(|t| g.tape.scale(t, self.l2)))
    }
}
