use crate::error::{shape_err, Error, Result};
use crate::ops::Mode;
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchNormConfig {
    /// Weight kept on the old running statistic at each update.
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            eps: 1e-3,
        }
    }
}

/// Per-channel running mean and variance used in inference mode.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

pub(crate) fn batch_norm_backward(
    gamma: &Tensor,
    xhat: &[f64],
    inv_std: &[f64],
    batch_stats: bool,
    g: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let c = gamma.len();
    let m = (xhat.len() / c) as f64;
    let gam = gamma.data();
    let mut gbeta = vec![0.0; c];
    let mut ggamma = vec![0.0; c];
    for (gr, xr) in g.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for ch in 0..c {
            gbeta[ch] += gr[ch];
            ggamma[ch] += gr[ch] * xr[ch];
        }
    }
    let mut gx = vec![0.0; g.len()];
    for ((gxr, gr), xr) in gx.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(xhat.chunks_exact(c)) {
        for ch in 0..c {
            let scale = gam[ch] * inv_std[ch];
            gxr[ch] = if batch_stats {
                scale * (gr[ch] - gbeta[ch] / m - xr[ch] * ggamma[ch] / m)
            } else {
                scale * gr[ch]
            };
        }
    }
    (gx, ggamma, gbeta)
}

impl Tape {
    /// Batch normalization over every axis but the last (channel) axis.
    ///
    /// In [`Mode::Train`] the output is normalized with the batch's own
    /// statistics and `running` is updated by exponential moving average
    /// (unbiased batch variance). In [`Mode::Infer`] `running` is used as-is.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        running: &mut RunningStats,
        config: BatchNormConfig,
        mode: Mode,
    ) -> Result<Var> {
        if config.eps <= 0.0 || config.eps.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "batch norm eps must be positive, got {}",
                config.eps
            )));
        }
        let x = self.value(input);
        let c = *x.shape().last().unwrap_or(&0);
        if x.rank() < 2
            || self.value(gamma).len() != c
            || self.value(beta).len() != c
            || running.mean.len() != c
            || running.var.len() != c
        {
            return Err(shape_err!("batch_norm: parameters do not match input {:?}", x.shape()));
        }
        let m = x.len() / c;
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0; c];
                for row in x.data().chunks_exact(c) {
                    mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                }
                mean.iter_mut().for_each(|a| *a /= m as f64);
                let mut var = vec![0.0; c];
                for row in x.data().chunks_exact(c) {
                    for ch in 0..c {
                        let d = row[ch] - mean[ch];
                        var[ch] += d * d;
                    }
                }
                var.iter_mut().for_each(|a| *a /= m as f64);
                (mean, var)
            }
            Mode::Infer => (running.mean.clone(), running.var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + config.eps).sqrt()).collect();
        let mut xhat = x.data().to_vec();
        for row in xhat.chunks_exact_mut(c) {
            for ch in 0..c {
                row[ch] = (row[ch] - mean[ch]) * inv_std[ch];
            }
        }
        let (gam, bet) = (self.value(gamma).data(), self.value(beta).data());
        let mut y = xhat.clone();
        for row in y.chunks_exact_mut(c) {
            for ch in 0..c {
                row[ch] = gam[ch] * row[ch] + bet[ch];
            }
        }
        let out = Tensor::new(x.shape().to_vec(), y)?;
        if mode == Mode::Train {
            let unbias = if m > 1 { m as f64 / (m as f64 - 1.0) } else { 1.0 };
            let mo = config.momentum;
            for ch in 0..c {
                running.mean[ch] = mo * running.mean[ch] + (1.0 - mo) * mean[ch];
                running.var[ch] = mo * running.var[ch] + (1.0 - mo) * var[ch] * unbias;
            }
        }
        Ok(self.push(
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: mode == Mode::Train,
            },
        ))
    }
}
