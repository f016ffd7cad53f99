use crate::error::{shape_err, Error, Result};
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

/// Probabilities are clamped to this value before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

pub(crate) fn cross_entropy_backward(p: &Tensor, labels: &[usize], g: f64) -> Vec<f64> {
    let k = p.shape()[1];
    let n = labels.len() as f64;
    let mut gp = vec![0.0; p.len()];
    for (i, &l) in labels.iter().enumerate() {
        let v = p.data()[i * k + l];
        if v > PROB_FLOOR {
            gp[i * k + l] = -g / (n * v);
        }
    }
    gp
}

impl Tape {
    /// Mean over the batch of `-ln probs[i, labels[i]]`.
    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize]) -> Result<Var> {
        let p = self.value(probs);
        if p.rank() != 2 || p.shape()[0] != labels.len() {
            return Err(shape_err!(
                "cross_entropy: probs {:?} with {} labels",
                p.shape(),
                labels.len()
            ));
        }
        let k = p.shape()[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -p.data()[i * k + l].max(PROB_FLOOR).ln())
            .sum();
        let out = Tensor::scalar(total / labels.len() as f64);
        Ok(self.push(
            out,
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Mean squared error against a constant target of the same length.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() {
            return Err(shape_err!(
                "mse: {} predictions vs {} targets",
                p.len(),
                target.len()
            ));
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let out = Tensor::scalar(total / target.len() as f64);
        Ok(self.push(
            out,
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
        ))
    }
}
