use nic_autodiff::Tensor;

use crate::error::{invalid, Result};

/// Embedding vectors laid out on the patch grid of their source image.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingGrid {
    pub rows: usize,
    pub cols: usize,
    pub code_size: usize,
    /// `rows x cols x code_size`, row-major.
    pub data: Vec<f64>,
    /// Whether each cell holds a real embedding.
    pub mask: Vec<bool>,
}

impl EmbeddingGrid {
    pub fn new(rows: usize, cols: usize, code_size: usize, data: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if data.len() != rows * cols * code_size || mask.len() != rows * cols {
            return Err(invalid("embedding grid buffers do not match its extents"));
        }
        Ok(Self {
            rows,
            cols,
            code_size,
            data,
            mask,
        })
    }

    pub fn cell(&self, r: usize, q: usize) -> &[f64] {
        let o = (r * self.cols + q) * self.code_size;
        &self.data[o..o + self.code_size]
    }

    /// Zero-extends to `rows x cols` at the bottom and right.
    pub fn padded_to(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows < self.rows || cols < self.cols {
            return Err(invalid("cannot pad a grid to a smaller extent"));
        }
        let c = self.code_size;
        let mut data = vec![0.0; rows * cols * c];
        let mut mask = vec![false; rows * cols];
        for r in 0..self.rows {
            let src = r * self.cols;
            let dst = r * cols;
            data[dst * c..(dst + self.cols) * c].copy_from_slice(&self.data[src * c..(src + self.cols) * c]);
            mask[dst..dst + self.cols].copy_from_slice(&self.mask[src..src + self.cols]);
        }
        Self::new(rows, cols, c, data, mask)
    }
}

/// Pads rows and columns up to the next multiple of `multiple` with zero,
/// masked-out cells. Content stays at offset `(0, 0)`.
pub fn pad_grid(grid: &EmbeddingGrid, multiple: usize) -> Result<EmbeddingGrid> {
    if multiple == 0 {
        return Err(invalid("pad multiple must be positive"));
    }
    grid.padded_to(
        grid.rows.next_multiple_of(multiple),
        grid.cols.next_multiple_of(multiple),
    )
}

/// Stacks grids into `[N, H, W, C]`, padding all to the smallest common
/// multiple-of-`multiple` extent.
pub fn stack_grids(grids: &[&EmbeddingGrid], multiple: usize) -> Result<Tensor> {
    let first = grids.first().ok_or_else(|| invalid("no grids to stack"))?;
    if multiple == 0 {
        return Err(invalid("pad multiple must be positive"));
    }
    if grids.iter().any(|g| g.code_size != first.code_size) {
        return Err(invalid("grids have different code sizes"));
    }
    let rows = grids.iter().map(|g| g.rows).max().unwrap().next_multiple_of(multiple);
    let cols = grids.iter().map(|g| g.cols).max().unwrap().next_multiple_of(multiple);
    let mut data = Vec::with_capacity(grids.len() * rows * cols * first.code_size);
    for g in grids {
        if g.rows == rows && g.cols == cols {
            data.extend_from_slice(&g.data);
        } else {
            data.extend_from_slice(&g.padded_to(rows, cols)?.data);
        }
    }
    Ok(Tensor::new(vec![grids.len(), rows, cols, first.code_size], data)?)
}
