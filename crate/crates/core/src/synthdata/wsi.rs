//! Mini whole-slide images with an image-level target.
//!
//! Each image is a grid of motif patches. A contiguous region of cells
//! (the top-`k` cells of a smooth random field) shows the proliferative
//! motif; all other cells show ordinary tissue textures. The regression
//! target is the covered fraction `k / cells`, the binary class is
//! `target > 0.5`, and the latent risk driving survival is
//! `risk_scale * (target - 0.5)`.

use rand::Rng;

use super::motif::colorize;
use super::patches::{proliferative_motif, stroma_motif};
use crate::compression::RgbImage;
use crate::error::{invalid, Result};
use crate::rng::{self, Prng};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WsiGenConfig {
    /// Grid extent in patches.
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    pub risk_scale: f64,
}

impl Default for WsiGenConfig {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 32,
            patch_size: 64,
            risk_scale: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiniWsiLabel {
    /// Fraction of grid cells covered by the proliferative motif.
    pub target: f64,
    /// `target > 0.5`.
    pub class: usize,
    pub latent_risk: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiniWsi {
    pub id: String,
    pub image: RgbImage,
    pub label: MiniWsiLabel,
    /// Per-cell coverage layout, row-major.
    pub layout: Vec<bool>,
}

/// Fraction of pixels whose blue channel exceeds the red one, i.e. pixels
/// rendered with the proliferative tint.
pub fn coverage_recount(img: &RgbImage) -> f64 {
    let hits = img.data.chunks_exact(3).filter(|p| p[2] > p[0]).count();
    hits as f64 / (img.width * img.height) as f64
}

/// Renders the given cell layout (`true` = proliferative).
pub fn render_mini_wsi(layout: &[bool], rows: usize, cols: usize, p: usize, rng: &mut Prng) -> Result<RgbImage> {
    if layout.len() != rows * cols || rows == 0 || cols == 0 || p == 0 {
        return Err(invalid("layout does not match the grid"));
    }
    let mut img = RgbImage::new(cols * p, rows * p);
    for r in 0..rows {
        for q in 0..cols {
            let prolif = layout[r * cols + q];
            let motif = if prolif { proliferative_motif(rng) } else { stroma_motif(rng, p) };
            let rgb = colorize(&motif.render(p, rng), if prolif { 1 } else { -1 });
            for y in 0..p {
                let dst = ((r * p + y) * img.width + q * p) * 3;
                img.data[dst..dst + p * 3].copy_from_slice(&rgb[y * p * 3..(y + 1) * p * 3]);
            }
        }
    }
    Ok(img)
}

/// Marks the `k` cells with the highest value of a smooth random field.
fn region_layout(rows: usize, cols: usize, k: usize, rng: &mut Prng) -> Vec<bool> {
    let span = rows.max(cols) as f64;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.0..rows as f64),
                rng.random_range(0.0..cols as f64),
                rng.random_range(0.15..0.35) * span,
                rng.random_range(0.5..1.5),
            )
        })
        .collect();
    let field: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (r, q) = ((i / cols) as f64 + 0.5, (i % cols) as f64 + 0.5);
            bumps
                .iter()
                .map(|&(cr, cq, s, a)| a * (-((r - cr).powi(2) + (q - cq).powi(2)) / (2.0 * s * s)).exp())
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..rows * cols).collect();
    order.sort_by(|&a, &b| field[b].total_cmp(&field[a]).then(a.cmp(&b)));
    let mut layout = vec![false; rows * cols];
    order[..k].iter().for_each(|&i| layout[i] = true);
    layout
}

/// The `index`-th mini-WSI of the family identified by `seed`.
pub fn gen_mini_wsi(seed: u64, index: usize, config: &WsiGenConfig) -> Result<MiniWsi> {
    let (rows, cols) = (config.rows, config.cols);
    if rows == 0 || cols == 0 {
        return Err(invalid("mini-WSI grid must be nonempty"));
    }
    let mut rng = rng::substream(seed, rng::ids::WSI, index as u64);
    let cells = rows * cols;
    let k = (rng.random::<f64>() * cells as f64).round() as usize;
    let layout = region_layout(rows, cols, k, &mut rng);
    let image = render_mini_wsi(&layout, rows, cols, config.patch_size, &mut rng)?;
    let target = k as f64 / cells as f64;
    Ok(MiniWsi {
        id: format!("wsi_{index:04}"),
        image,
        label: MiniWsiLabel {
            target,
            class: usize::from(target > 0.5),
            latent_risk: config.risk_scale * (target - 0.5),
        },
        layout,
    })
}
