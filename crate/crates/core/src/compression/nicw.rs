//! NICW: a compressed image on disk.
//!
//! Little-endian layout:
//!
//! | bytes          | field                                    |
//! |----------------|------------------------------------------|
//! | 4              | magic `NICW`                             |
//! | 2              | version (u16, currently 1)               |
//! | 4, 4, 4        | rows R, cols Q, code size C (u32)        |
//! | 2, 2           | patch size P, stride S (u16)             |
//! | 2              | flags (bit 0: validity mask present)     |
//! | 32             | SHA-256 digest of the encoder checkpoint |
//! | 4·R·Q·C        | embeddings, binary32, row-major          |
//! | ceil(R·Q / 8)  | validity bits, LSB first (if flagged)    |
//! | 4              | CRC-32 of every preceding byte           |

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::models::EmbeddingGrid;

pub const MAGIC: &[u8; 4] = b"NICW";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 56;
const FLAG_MASK: u16 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NicwError {
    #[error("not a NICW file (bad magic)")]
    BadMagic,
    #[error("unsupported NICW version {0}")]
    UnsupportedVersion(u16),
    #[error("NICW checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("NICW file is truncated")]
    Truncated,
    #[error("malformed NICW file: {0}")]
    Malformed(String),
}

/// An embedding grid with its validity mask and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedImage {
    /// Where the image came from; not stored in the file (readers fill it in
    /// from the file name).
    pub source: String,
    pub rows: usize,
    pub cols: usize,
    pub code_size: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub encoder_digest: [u8; 32],
    /// `rows x cols x code_size`, row-major; zero where the mask is false.
    pub embeddings: Vec<f32>,
    pub mask: Vec<bool>,
}

impl CompressedImage {
    pub fn cell(&self, r: usize, q: usize) -> &[f32] {
        let o = (r * self.cols + q) * self.code_size;
        &self.embeddings[o..o + self.code_size]
    }

    pub fn valid_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn to_grid(&self) -> Result<EmbeddingGrid> {
        EmbeddingGrid::new(
            self.rows,
            self.cols,
            self.code_size,
            self.embeddings.iter().map(|&v| f64::from(v)).collect(),
            self.mask.clone(),
        )
    }

    fn check(&self) -> std::result::Result<(), NicwError> {
        let fits = |v: usize, max: usize| v <= max;
        if self.embeddings.len() != self.rows * self.cols * self.code_size
            || self.mask.len() != self.rows * self.cols
        {
            return Err(NicwError::Malformed("buffers do not match the grid extents".into()));
        }
        if !fits(self.rows, u32::MAX as usize)
            || !fits(self.cols, u32::MAX as usize)
            || !fits(self.code_size, u32::MAX as usize)
            || !fits(self.patch_size, u16::MAX as usize)
            || !fits(self.stride, u16::MAX as usize)
        {
            return Err(NicwError::Malformed("extent does not fit its header field".into()));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let cells = self.rows * self.cols;
        let mut b = Vec::with_capacity(HEADER_LEN + 4 * self.embeddings.len() + cells.div_ceil(8) + 4);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.rows, self.cols, self.code_size] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in [self.patch_size, self.stride] {
            b.extend_from_slice(&(v as u16).to_le_bytes());
        }
        b.extend_from_slice(&FLAG_MASK.to_le_bytes());
        b.extend_from_slice(&self.encoder_digest);
        for v in &self.embeddings {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let mut bits = vec![0u8; cells.div_ceil(8)];
        for (i, _) in self.mask.iter().enumerate().filter(|(_, &m)| m) {
            bits[i / 8] |= 1 << (i % 8);
        }
        b.extend_from_slice(&bits);
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        Ok(b)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, NicwError> {
        if bytes.len() < 4 {
            return Err(NicwError::Truncated);
        }
        if &bytes[..4] != MAGIC {
            return Err(NicwError::BadMagic);
        }
        if bytes.len() < HEADER_LEN + 4 {
            return Err(NicwError::Truncated);
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(NicwError::UnsupportedVersion(version));
        }
        let (rows, cols, code_size) = (u32_at(6) as usize, u32_at(10) as usize, u32_at(14) as usize);
        let (patch_size, stride, flags) = (u16_at(18) as usize, u16_at(20) as usize, u16_at(22));
        if flags & !FLAG_MASK != 0 {
            return Err(NicwError::Malformed(format!("unknown flags {flags:#06x}")));
        }
        let cells = rows
            .checked_mul(cols)
            .ok_or_else(|| NicwError::Malformed("grid too large".into()))?;
        let values = cells
            .checked_mul(code_size)
            .ok_or_else(|| NicwError::Malformed("grid too large".into()))?;
        let mask_len = if flags & FLAG_MASK != 0 { cells.div_ceil(8) } else { 0 };
        let expected = values
            .checked_mul(4)
            .and_then(|v| v.checked_add(HEADER_LEN + mask_len + 4))
            .ok_or_else(|| NicwError::Malformed("grid too large".into()))?;
        if bytes.len() < expected {
            return Err(NicwError::Truncated);
        }
        if bytes.len() > expected {
            return Err(NicwError::Malformed("trailing bytes after checksum".into()));
        }
        let body = &bytes[..expected - 4];
        let stored = u32_at(expected - 4);
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(NicwError::CrcMismatch { stored, computed });
        }
        let mut encoder_digest = [0u8; 32];
        encoder_digest.copy_from_slice(&bytes[24..56]);
        let embeddings: Vec<f32> = bytes[HEADER_LEN..HEADER_LEN + 4 * values]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mask = if mask_len > 0 {
            let bits = &bytes[HEADER_LEN + 4 * values..expected - 4];
            (0..cells).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect()
        } else {
            vec![true; cells]
        };
        Ok(Self {
            source: String::new(),
            rows,
            cols,
            code_size,
            patch_size,
            stride,
            encoder_digest,
            embeddings,
            mask,
        })
    }
}

pub fn write_nicw(ci: &CompressedImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes = ci.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

/// Reads and validates a NICW file; `source` is set to the file stem.
pub fn read_nicw(path: impl AsRef<Path>) -> Result<CompressedImage> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut ci = CompressedImage::from_bytes(&bytes).map_err(Error::from)?;
    ci.source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ci)
}
