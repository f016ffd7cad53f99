use nic_autodiff::Tensor;
use rand::Rng;

use super::augment::{augment_patch, AugmentPolicy};
use crate::error::{invalid, Result};
use crate::models::Task;

/// Square RGB patches (values in `[0, 1]`) with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    pub patch_size: usize,
    /// `N x P x P x 3`, row-major.
    pub pixels: Vec<f64>,
    pub labels: Vec<usize>,
}

impl PatchSet {
    pub fn new(patch_size: usize) -> Self {
        Self {
            patch_size,
            pixels: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn stride(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.pixels[i * self.stride()..(i + 1) * self.stride()]
    }

    pub fn push(&mut self, patch: &[f64], label: usize) -> Result<()> {
        if patch.len() != self.stride() {
            return Err(invalid("patch has the wrong size"));
        }
        self.pixels.extend_from_slice(patch);
        self.labels.push(label);
        Ok(())
    }

    /// Gathers `indices` into a `[n, P, P, 3]` batch, augmenting each patch
    /// when a random stream is given.
    pub fn batch<R: Rng + ?Sized>(
        &self,
        indices: &[usize],
        augment: Option<(&mut R, &AugmentPolicy)>,
    ) -> Result<(Tensor, Vec<usize>)> {
        let p = self.patch_size;
        let mut data = Vec::with_capacity(indices.len() * self.stride());
        match augment {
            Some((rng, policy)) => {
                for &i in indices {
                    let mut x = self.patch(i).to_vec();
                    augment_patch(&mut x, p, rng, policy);
                    data.extend_from_slice(&x);
                }
            }
            None => indices.iter().for_each(|&i| data.extend_from_slice(self.patch(i))),
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok((Tensor::new(vec![indices.len(), p, p, 3], data)?, labels))
    }
}

/// One task's training and validation patches.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchTaskData {
    pub task: Task,
    pub train: PatchSet,
    pub val: PatchSet,
}
