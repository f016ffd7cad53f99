//! The four patch-classification tasks.
//!
//! | task       | classes | what separates them                          |
//! |------------|---------|----------------------------------------------|
//! | lymph      | 2       | overall brightness (dark vs bright tissue)   |
//! | mitosis    | 2       | sparse or no dots vs dense dark dots         |
//! | prostate   | 2       | horizontal vs vertical stripes               |
//! | colorectal | 9       | nine texture families                        |
//!
//! Labels cycle through the classes (`i mod K`), so classes are balanced;
//! every fifth sample of each class is held out for validation.

use rand::Rng;

use super::motif::{colorize, MotifSpec, Orientation, Texture};
use crate::error::{invalid, Result};
use crate::models::Task;
use crate::rng::{self, Prng};
use crate::training::{PatchSet, PatchTaskData};

fn level(rng: &mut Prng, lo: u8, hi: u8) -> u8 {
    rng.random_range(lo..=hi)
}

/// Background texture of ordinary tissue (no proliferation).
pub(crate) fn stroma_motif(rng: &mut Prng, p: usize) -> MotifSpec {
    let (base, ink) = (level(rng, 150, 210), level(rng, 40, 90));
    let texture = match rng.random_range(0..4) {
        0 => Texture::Plain,
        1 => Texture::Dots { density: rng.random_range(0.02..0.08) },
        2 => Texture::Stripes {
            orientation: if rng.random::<bool>() { Orientation::Horizontal } else { Orientation::Vertical },
            period: rng.random_range(4..=(p / 2).max(4)),
        },
        _ => Texture::Gradient,
    };
    MotifSpec::new(texture, base, ink)
}

/// The proliferative motif: dense dark dots.
pub(crate) fn proliferative_motif(rng: &mut Prng) -> MotifSpec {
    let (base, ink) = (level(rng, 150, 210), level(rng, 30, 70));
    MotifSpec::new(Texture::Dots { density: rng.random_range(0.3..0.5) }, base, ink)
}

fn task_motif(task: Task, class: usize, rng: &mut Prng, p: usize) -> MotifSpec {
    match task {
        Task::Lymph => {
            let base = if class == 0 { level(rng, 60, 110) } else { level(rng, 150, 200) };
            MotifSpec::new(Texture::Dots { density: 0.05 }, base, base.saturating_sub(50).max(1))
        }
        Task::Mitosis => {
            if class == 1 {
                proliferative_motif(rng)
            } else {
                let (base, ink) = (level(rng, 150, 210), level(rng, 30, 70));
                let density = if rng.random::<bool>() { rng.random_range(0.02..0.08) } else { 0.0 };
                let texture = if density > 0.0 { Texture::Dots { density } } else { Texture::Plain };
                MotifSpec::new(texture, base, ink)
            }
        }
        Task::Prostate => {
            let orientation = if class == 0 { Orientation::Horizontal } else { Orientation::Vertical };
            let period = rng.random_range(4..=(p / 2).max(4));
            MotifSpec::new(Texture::Stripes { orientation, period }, level(rng, 140, 200), level(rng, 50, 100))
        }
        Task::Colorectal => {
            let (base, ink) = (level(rng, 130, 200), level(rng, 40, 90));
            let texture = match class {
                0 => Texture::Plain,
                1 => Texture::Dots { density: 0.06 },
                2 => Texture::Dots { density: 0.4 },
                3 => Texture::Stripes { orientation: Orientation::Horizontal, period: (p / 4).max(4) },
                4 => Texture::Stripes { orientation: Orientation::Vertical, period: (p / 4).max(4) },
                5 => Texture::Stripes { orientation: Orientation::Diagonal, period: (p / 4).max(4) },
                6 => Texture::Checker { size: (p / 8).max(1) },
                7 => Texture::Checker { size: (p / 4).max(2) },
                _ => Texture::Gradient,
            };
            MotifSpec::new(texture, base, ink)
        }
    }
}

/// `patches_per_task` patches of `patch_size` pixels for each of the four
/// tasks, in [`Task::ALL`] order.
pub fn gen_patch_tasks(seed: u64, patches_per_task: usize, patch_size: usize) -> Result<Vec<PatchTaskData>> {
    if patch_size < 4 {
        return Err(invalid("patches must be at least 4 pixels wide"));
    }
    Task::ALL
        .iter()
        .map(|&task| {
            let k = task.classes();
            if patches_per_task < 2 * k {
                return Err(invalid(format!("{task} needs at least {} patches", 2 * k)));
            }
            let mut rng = rng::substream(seed, rng::ids::PATCHES, task.index() as u64);
            let mut train = PatchSet::new(patch_size);
            let mut val = PatchSet::new(patch_size);
            for i in 0..patches_per_task {
                let class = i % k;
                let lum = task_motif(task, class, &mut rng, patch_size).render(patch_size, &mut rng);
                let pixels: Vec<f64> = colorize(&lum, 0).iter().map(|&v| f64::from(v) / 255.0).collect();
                let set = if (i / k) % 5 == 0 { &mut val } else { &mut train };
                set.push(&pixels, class)?;
            }
            Ok(PatchTaskData { task, train, val })
        })
        .collect()
}
