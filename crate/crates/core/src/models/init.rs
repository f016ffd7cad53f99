use nic_autodiff::{ParamStore, Tensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Normal weights with standard deviation `sqrt(2 / fan_in)`.
pub fn fan_in_normal<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::from_fn(shape, |_| dist.sample(rng))
}

/// Inserts `gamma = 1`, `beta = 0` and fresh running statistics under
/// `prefix`.
pub fn insert_batch_norm(params: &mut ParamStore, prefix: &str, channels: usize) {
    params.insert(format!("{prefix}.gamma"), Tensor::full(&[channels], 1.0));
    params.insert(format!("{prefix}.beta"), Tensor::zeros(&[channels]));
    params.insert(format!("{prefix}.running_mean"), Tensor::zeros(&[channels]));
    params.insert(format!("{prefix}.running_var"), Tensor::full(&[channels], 1.0));
}
