use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    /// Pixel offset of the patch's left edge.
    pub x: usize,
    /// Pixel offset of the patch's top edge.
    pub y: usize,
}

/// Patches of a uniform grid, row-major. Partial patches at the right and
/// bottom edges are discarded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, row: usize, col: usize) -> GridCell {
        GridCell {
            row,
            col,
            x: col * self.stride,
            y: row * self.stride,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| self.cell(r, c)))
    }
}

pub fn plan_grid(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<PatchGrid> {
    if patch_size == 0 || stride == 0 {
        return Err(invalid("patch size and stride must be positive"));
    }
    if width < patch_size || height < patch_size {
        return Err(invalid(format!(
            "{width}x{height} image is smaller than one {patch_size}x{patch_size} patch"
        )));
    }
    Ok(PatchGrid {
        width,
        height,
        patch_size,
        stride,
        rows: (height - patch_size) / stride + 1,
        cols: (width - patch_size) / stride + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let g = plan_grid(257, 130, 64, 64).unwrap();
        assert_eq!((g.cols, g.rows, g.len()), (4, 2, 8));
        let g = plan_grid(64, 64, 64, 64).unwrap();
        assert_eq!(g.cells().collect::<Vec<_>>(), vec![GridCell { row: 0, col: 0, x: 0, y: 0 }]);
        assert!(plan_grid(63, 64, 64, 64).is_err());
    }

    #[test]
    fn cells_are_row_major_and_inside() {
        let g = plan_grid(100, 90, 20, 15).unwrap();
        let cells: Vec<_> = g.cells().collect();
        assert_eq!(cells.len(), g.len());
        for w in cells.windows(2) {
            assert!((w[0].row, w[0].col) < (w[1].row, w[1].col));
        }
        assert!(cells.iter().all(|c| c.x + 20 <= 100 && c.y + 20 <= 90));
    }
}
