use nic_autodiff::{BatchNormConfig, Mode, Padding, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::init::{fan_in_normal, insert_batch_norm};
use crate::error::{invalid, Error, Result};
use crate::rng::Prng;

pub const PREFIX: &str = "encoder";

/// Patch encoder: `layers` stride-2 3x3 convolutions (`same` padding), each
/// followed by batch norm and leaky ReLU, then a dense map of the flattened
/// activation to `code_size` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSpec {
    pub patch_size: usize,
    pub filters: usize,
    pub layers: usize,
    pub code_size: usize,
    pub leaky_alpha: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            patch_size: 64,
            filters: 128,
            layers: 4,
            code_size: 128,
            leaky_alpha: 0.2,
            bn_momentum: 0.9,
            bn_eps: 1e-3,
        }
    }
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.filters == 0 || self.layers == 0 || self.code_size == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if !(self.leaky_alpha > 0.0 && self.leaky_alpha < 1.0) {
            return Err(Error::Config("leaky_alpha must be in (0, 1)".into()));
        }
        if !(self.bn_eps > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("batch norm needs eps > 0 and momentum in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn bn(&self) -> BatchNormConfig {
        BatchNormConfig {
            momentum: self.bn_momentum,
            eps: self.bn_eps,
        }
    }

    /// Spatial extent after the convolution stack.
    pub fn final_extent(&self) -> usize {
        (0..self.layers).fold(self.patch_size, |s, _| s.div_ceil(2))
    }

    pub fn flat_dim(&self) -> usize {
        self.final_extent().pow(2) * self.filters
    }

    pub fn init(&self, rng: &mut Prng) -> Result<ParamStore> {
        self.validate()?;
        let mut p = ParamStore::new();
        let mut cin = 3;
        for i in 0..self.layers {
            let name = format!("{PREFIX}.conv{i}");
            p.insert(
                format!("{name}.kernel"),
                fan_in_normal(&[3, 3, cin, self.filters], 9 * cin, rng),
            );
            p.insert(format!("{name}.bias"), Tensor::zeros(&[self.filters]));
            insert_batch_norm(&mut p, &format!("{name}.bn"), self.filters);
            cin = self.filters;
        }
        let flat = self.flat_dim();
        p.insert(
            format!("{PREFIX}.dense.weight"),
            fan_in_normal(&[flat, self.code_size], flat, rng),
        );
        p.insert(format!("{PREFIX}.dense.bias"), Tensor::zeros(&[self.code_size]));
        Ok(p)
    }

    /// Recovers the architecture for `patch_size` patches from a
    /// checkpoint's parameter shapes.
    pub fn infer_from(params: &ParamStore, patch_size: usize, leaky_alpha: f64, bn: BatchNormConfig) -> Result<Self> {
        let layers = (0..)
            .take_while(|i| params.contains(&format!("{PREFIX}.conv{i}.kernel")))
            .count();
        let k0 = params.require(&format!("{PREFIX}.conv0.kernel"))?.shape().to_vec();
        let dense = params.require(&format!("{PREFIX}.dense.weight"))?.shape().to_vec();
        let spec = Self {
            patch_size,
            filters: k0[3],
            layers,
            code_size: dense[1],
            leaky_alpha,
            bn_momentum: bn.momentum,
            bn_eps: bn.eps,
        };
        spec.validate()?;
        if spec.flat_dim() != dense[0] {
            return Err(Error::Data(format!(
                "encoder checkpoint does not fit {patch_size}x{patch_size} patches"
            )));
        }
        Ok(spec)
    }

    /// `[N, P, P, 3]` pixels in `[0, 1]` to `[N, code_size]` embeddings.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.value(x).shape().to_vec();
        if s.len() != 4 || s[1] != self.patch_size || s[2] != self.patch_size || s[3] != 3 {
            return Err(invalid(format!(
                "encoder expects [N,{p},{p},3] input, got {s:?}",
                p = self.patch_size
            )));
        }
        let mut h = x;
        for i in 0..self.layers {
            let name = format!("{PREFIX}.conv{i}");
            let k = g.param(&format!("{name}.kernel"))?;
            let b = g.param(&format!("{name}.bias"))?;
            h = g.tape.conv2d(h, k, b, 2, Padding::Same)?;
            h = g.batch_norm(h, &format!("{name}.bn"), self.bn())?;
            h = g.tape.leaky_relu(h, self.leaky_alpha);
        }
        let h = g.tape.reshape(h, &[s[0], self.flat_dim()])?;
        let w = g.param(&format!("{PREFIX}.dense.weight"))?;
        let b = g.param(&format!("{PREFIX}.dense.bias"))?;
        g.tape.dense(h, w, b).map_err(Into::into)
    }

    /// Inference-mode embeddings of a batch of patches.
    pub fn embed(&self, params: &ParamStore, patches: Tensor) -> Result<Tensor> {
        let mut g = Graph::new(params, Mode::Infer);
        let x = g.input(patches);
        let y = self.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }
}
