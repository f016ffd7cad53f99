use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::ops::Mode;
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

/// Unit dropped together by [`Tape::dropout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutGranularity {
    /// Every scalar independently.
    Element,
    /// Whole feature maps: one draw per (sample, channel), channel = last axis.
    Channel,
}

pub(crate) fn softmax_backward(y: &Tensor, g: &[f64]) -> Vec<f64> {
    let k = *y.shape().last().unwrap();
    let mut gx = vec![0.0; g.len()];
    for ((gxr, yr), gr) in gx.chunks_exact_mut(k).zip(y.data().chunks_exact(k)).zip(g.chunks_exact(k)) {
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for j in 0..k {
            gxr[j] = yr[j] * (gr[j] - dot);
        }
    }
    gx
}

impl Tape {
    /// `x` where `x >= 0`, `alpha * x` elsewhere.
    pub fn leaky_relu(&mut self, input: Var, alpha: f64) -> Var {
        let x = self.value(input);
        let out = Tensor::from_fn(x.shape(), |i| {
            let v = x.data()[i];
            if v >= 0.0 {
                v
            } else {
                alpha * v
            }
        });
        self.push(out, Op::LeakyRelu { input, alpha })
    }

    /// Max-shifted softmax along the last axis.
    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.rank() == 0 {
            return Err(shape_err!("softmax of a scalar"));
        }
        let k = *x.shape().last().unwrap();
        let mut y = x.data().to_vec();
        for row in y.chunks_exact_mut(k) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        let out = Tensor::new(x.shape().to_vec(), y)?;
        Ok(self.push(out, Op::Softmax(input)))
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
    ///
    /// In [`Mode::Infer`] (or with `rate == 0`) the input is returned as-is.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        input: Var,
        rate: f64,
        mode: Mode,
        granularity: DropoutGranularity,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(input);
        }
        let x = self.value(input);
        let keep = 1.0 / (1.0 - rate);
        let mut draw = || if rng.random::<f64>() < rate { 0.0 } else { keep };
        let mask: Vec<f64> = match granularity {
            DropoutGranularity::Element => (0..x.len()).map(|_| draw()).collect(),
            DropoutGranularity::Channel => {
                if x.rank() < 2 {
                    return Err(shape_err!("channel dropout needs a batch and a channel axis"));
                }
                let n = x.shape()[0];
                let c = *x.shape().last().unwrap();
                let per_sample = x.len() / n;
                let units: Vec<f64> = (0..n * c).map(|_| draw()).collect();
                (0..x.len())
                    .map(|i| units[(i / per_sample) * c + i % c])
                    .collect()
            }
        };
        let out = Tensor::from_fn(x.shape(), |i| x.data()[i] * mask[i]);
        Ok(self.push(out, Op::MaskMul { input, mask }))
    }
}
