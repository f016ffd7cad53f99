//! Binary PPM (`P6`, 8-bit) images, readable in horizontal strips.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }
}

pub fn write_ppm<W: Write>(mut w: W, img: &RgbImage) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.data)?;
    w.flush()?;
    Ok(())
}

/// Streaming reader: parses the header, then hands out pixel rows on demand.
pub struct PpmReader<R> {
    inner: BufReader<R>,
    pub width: usize,
    pub height: usize,
    rows_read: usize,
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Data("PPM header is truncated".into()));
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            b => tok.push(b),
        }
    }
    String::from_utf8(tok).map_err(|_| Error::Data("PPM header is not ASCII".into()))
}

impl<R: Read> PpmReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut inner = BufReader::new(inner);
        if header_token(&mut inner)? != "P6" {
            return Err(Error::Data("not a binary PPM (P6) image".into()));
        }
        let mut num = |what: &str| -> Result<usize> {
            header_token(&mut inner)?
                .parse()
                .map_err(|_| Error::Data(format!("bad PPM {what}")))
        };
        let (width, height, maxval) = (num("width")?, num("height")?, num("maxval")?);
        if maxval != 255 {
            return Err(Error::Data(format!("only 8-bit PPM is supported, maxval {maxval}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Data("PPM image is empty".into()));
        }
        Ok(Self {
            inner,
            width,
            height,
            rows_read: 0,
        })
    }

    pub fn rows_read(&self) -> usize {
        self.rows_read
    }

    /// Appends the next `n` rows to `buf`.
    pub fn read_rows(&mut self, n: usize, buf: &mut Vec<u8>) -> Result<()> {
        if self.rows_read + n > self.height {
            return Err(Error::Data("read past the last PPM row".into()));
        }
        let start = buf.len();
        buf.resize(start + n * self.width * 3, 0);
        self.inner.read_exact(&mut buf[start..]).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Data("PPM pixel data is truncated".into()),
            _ => Error::Io(e),
        })?;
        self.rows_read += n;
        Ok(())
    }
}

pub fn read_ppm<R: Read>(r: R) -> Result<RgbImage> {
    let mut reader = PpmReader::new(r)?;
    let mut data = Vec::with_capacity(reader.width * reader.height * 3);
    let h = reader.height;
    reader.read_rows(h, &mut data)?;
    Ok(RgbImage {
        width: reader.width,
        height: reader.height,
        data,
    })
}
