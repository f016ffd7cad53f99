use std::io::Read;

use nic_autodiff::{ParamStore, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::plan_grid;
use super::nicw::CompressedImage;
use super::ppm::{write_ppm, PpmReader, RgbImage};
use crate::error::{invalid, Result};
use crate::models::EncoderSpec;

/// Luminance above which a pixel counts as background.
pub const WHITE_LUMINANCE: f64 = 0.86;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressOptions {
    pub patch_size: usize,
    pub stride: usize,
    /// Patches whose fraction of near-white pixels exceeds this are marked
    /// invalid. Absent means no filtering.
    pub tissue_threshold: Option<f64>,
    /// Patches per encoder call; chunks are embedded in parallel.
    pub chunk: usize,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            patch_size: 64,
            stride: 64,
            tissue_threshold: None,
            chunk: 64,
        }
    }
}

/// SHA-256 of the checkpoint encoding of `params`.
pub fn checkpoint_digest(params: &ParamStore) -> [u8; 32] {
    Sha256::digest(params.to_bytes()).into()
}

fn white_fraction(patch: &[f64]) -> f64 {
    let white = patch
        .chunks_exact(3)
        .filter(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] > WHITE_LUMINANCE)
        .count();
    white as f64 / (patch.len() / 3) as f64
}

/// Compresses an image read strip by strip: only the `patch_size` rows
/// under the current grid row are held in memory.
pub fn compress<R: Read>(
    reader: &mut PpmReader<R>,
    source: &str,
    encoder: &EncoderSpec,
    params: &ParamStore,
    opts: &CompressOptions,
) -> Result<CompressedImage> {
    if encoder.patch_size != opts.patch_size {
        return Err(invalid(format!(
            "encoder takes {0}x{0} patches, compression is configured for {1}x{1}",
            encoder.patch_size, opts.patch_size
        )));
    }
    if opts.chunk == 0 {
        return Err(invalid("chunk size must be positive"));
    }
    if reader.rows_read() != 0 {
        return Err(invalid("image reader is not at the first row"));
    }
    let (w, p, s, c) = (reader.width, opts.patch_size, opts.stride, encoder.code_size);
    let grid = plan_grid(reader.width, reader.height, p, s)?;
    let row_bytes = w * 3;

    let mut embeddings = vec![0f32; grid.len() * c];
    let mut mask = vec![false; grid.len()];
    let mut strip: Vec<u8> = Vec::with_capacity(p * row_bytes);
    let mut strip_first = 0;
    let mut scratch = Vec::new();

    for r in 0..grid.rows {
        let (start, end) = (r * s, r * s + p);
        let drop = (start - strip_first).min(strip.len() / row_bytes);
        strip.drain(..drop * row_bytes);
        strip_first += drop;
        if strip.is_empty() && strip_first < start {
            // Rows between patches when the stride exceeds the patch size.
            scratch.clear();
            reader.read_rows(start - strip_first, &mut scratch)?;
            strip_first = start;
        }
        let have = strip_first + strip.len() / row_bytes;
        reader.read_rows(end - have, &mut strip)?;

        let mut patches: Vec<Vec<f64>> = Vec::with_capacity(grid.cols);
        for q in 0..grid.cols {
            let x0 = q * s;
            let mut patch = Vec::with_capacity(p * p * 3);
            for y in 0..p {
                let o = y * row_bytes + x0 * 3;
                patch.extend(strip[o..o + p * 3].iter().map(|&v| f64::from(v) / 255.0));
            }
            patches.push(patch);
        }
        let valid: Vec<usize> = (0..grid.cols)
            .filter(|&q| match opts.tissue_threshold {
                Some(t) => white_fraction(&patches[q]) <= t,
                None => true,
            })
            .collect();
        let chunks: Vec<&[usize]> = valid.chunks(opts.chunk).collect();
        let embedded: Vec<Tensor> = chunks
            .par_iter()
            .map(|idx| {
                let mut data = Vec::with_capacity(idx.len() * p * p * 3);
                idx.iter().for_each(|&q| data.extend_from_slice(&patches[q]));
                encoder.embed(params, Tensor::new(vec![idx.len(), p, p, 3], data)?)
            })
            .collect::<Result<_>>()?;
        for (idx, z) in chunks.iter().zip(&embedded) {
            for (&q, row) in idx.iter().zip(z.data().chunks_exact(c)) {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(crate::Error::Numeric(format!(
                        "non-finite embedding at grid cell ({r}, {q}) of {source}"
                    )));
                }
                let cell = r * grid.cols + q;
                mask[cell] = true;
                embeddings[cell * c..(cell + 1) * c]
                    .iter_mut()
                    .zip(row)
                    .for_each(|(e, &v)| *e = v as f32);
            }
        }
    }
    // Consume the rest so a truncated file is reported.
    let rest = reader.height - reader.rows_read();
    for _ in 0..rest.div_ceil(p) {
        scratch.clear();
        let n = (reader.height - reader.rows_read()).min(p);
        reader.read_rows(n, &mut scratch)?;
    }

    Ok(CompressedImage {
        source: source.to_string(),
        rows: grid.rows,
        cols: grid.cols,
        code_size: c,
        patch_size: p,
        stride: s,
        encoder_digest: checkpoint_digest(params),
        embeddings,
        mask,
    })
}

/// [`compress`] for an image already in memory.
pub fn compress_image(
    img: &RgbImage,
    source: &str,
    encoder: &EncoderSpec,
    params: &ParamStore,
    opts: &CompressOptions,
) -> Result<CompressedImage> {
    let mut bytes = Vec::with_capacity(img.data.len() + 32);
    write_ppm(&mut bytes, img)?;
    compress(&mut PpmReader::new(bytes.as_slice())?, source, encoder, params, opts)
}
