//! Turning large raster images into embedding grids: uniform patch grids,
//! streamed PPM input, per-patch encoding, and the NICW file format.

pub mod compress;
pub mod grid;
pub mod nicw;
pub mod ppm;

pub use compress::{checkpoint_digest, compress, compress_image, CompressOptions};
pub use grid::{plan_grid, GridCell, PatchGrid};
pub use nicw::{read_nicw, write_nicw, CompressedImage, NicwError};
pub use ppm::{read_ppm, write_ppm, PpmReader, RgbImage};
