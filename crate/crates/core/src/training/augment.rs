//! Generic morphological and color augmentation of `[P, P, 3]` patches with
//! values in `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    pub enabled: bool,
    /// Random multiple of 90° rotation.
    pub rotate: bool,
    /// Independent horizontal and vertical flips with probability 1/2.
    pub flip: bool,
    /// Brightness and contrast factors drawn from `1 ± jitter`.
    pub jitter: f64,
    /// Per-channel additive shift drawn from `± channel_shift`.
    pub channel_shift: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            rotate: true,
            flip: true,
            jitter: 0.2,
            channel_shift: 0.1,
        }
    }
}

impl AugmentPolicy {
    pub fn off() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Rotates a square patch by `quarter_turns · 90°` counter-clockwise.
pub fn rotate90(patch: &[f64], p: usize, quarter_turns: usize) -> Vec<f64> {
    let mut out = patch.to_vec();
    for _ in 0..quarter_turns % 4 {
        let src = out.clone();
        for y in 0..p {
            for x in 0..p {
                // (x, y) <- (p-1-y, x)
                let (sx, sy) = (p - 1 - y, x);
                let (d, s) = ((y * p + x) * 3, (sy * p + sx) * 3);
                out[d..d + 3].copy_from_slice(&src[s..s + 3]);
            }
        }
    }
    out
}

pub fn flip_horizontal(patch: &mut [f64], p: usize) {
    for y in 0..p {
        for x in 0..p / 2 {
            for c in 0..3 {
                patch.swap((y * p + x) * 3 + c, (y * p + p - 1 - x) * 3 + c);
            }
        }
    }
}

pub fn flip_vertical(patch: &mut [f64], p: usize) {
    for y in 0..p / 2 {
        for x in 0..p {
            for c in 0..3 {
                patch.swap((y * p + x) * 3 + c, ((p - 1 - y) * p + x) * 3 + c);
            }
        }
    }
}

/// Applies a random subset of the policy's transforms in place; the result
/// stays in `[0, 1]`.
pub fn augment_patch<R: Rng + ?Sized>(patch: &mut Vec<f64>, p: usize, rng: &mut R, policy: &AugmentPolicy) {
    if !policy.enabled {
        return;
    }
    if policy.rotate {
        let k = rng.random_range(0..4);
        if k > 0 {
            *patch = rotate90(patch, p, k);
        }
    }
    if policy.flip {
        if rng.random::<bool>() {
            flip_horizontal(patch, p);
        }
        if rng.random::<bool>() {
            flip_vertical(patch, p);
        }
    }
    if policy.jitter > 0.0 || policy.channel_shift > 0.0 {
        let j = policy.jitter;
        let brightness = 1.0 + rng.random_range(-j..=j);
        let contrast = 1.0 + rng.random_range(-j..=j);
        let s = policy.channel_shift;
        let shift = [
            rng.random_range(-s..=s),
            rng.random_range(-s..=s),
            rng.random_range(-s..=s),
        ];
        let mean = patch.iter().sum::<f64>() / patch.len() as f64;
        for (i, v) in patch.iter_mut().enumerate() {
            let x = (*v - mean) * contrast + mean;
            *v = (x * brightness + shift[i % 3]).clamp(0.0, 1.0);
        }
    }
}
