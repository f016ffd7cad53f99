//! Texture rendering in byte space.
//!
//! A motif is rendered as a luminance map `L` in `[1, 254]` and colored with
//! a tint `s` as `(L - s, L, L + s)`. The tint is how images record ground
//! truth in their pixels: a pixel belongs to the proliferative motif exactly
//! when its blue channel exceeds its red channel.

use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Orientation {
    Horizontal,
    Vertical,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Texture {
    Plain,
    /// Dark disks covering roughly `density` of the area.
    Dots { density: f64 },
    Stripes { orientation: Orientation, period: usize },
    Checker { size: usize },
    /// Linear ramp from the base to the ink level, left to right.
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotifSpec {
    pub texture: Texture,
    /// Background luminance.
    pub base: u8,
    /// Foreground luminance (dots, dark stripes, ...).
    pub ink: u8,
    /// Uniform per-pixel noise amplitude.
    pub noise: u8,
}

impl MotifSpec {
    pub fn new(texture: Texture, base: u8, ink: u8) -> Self {
        Self {
            texture,
            base,
            ink,
            noise: 6,
        }
    }

    /// Luminance of a `p x p` patch, row-major, each value in `[1, 254]`.
    pub fn render<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Vec<u8> {
        let (base, ink) = (f64::from(self.base), f64::from(self.ink));
        let mut lum = vec![base; p * p];
        match self.texture {
            Texture::Plain => {}
            Texture::Dots { density } => {
                let r = (p / 16).max(1) as isize;
                let disk: Vec<(isize, isize)> = (-r..=r)
                    .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
                    .filter(|(dy, dx)| dy * dy + dx * dx <= r * r)
                    .collect();
                let count = (density * (p * p) as f64 / disk.len() as f64).round().max(1.0) as usize;
                for _ in 0..count {
                    let (cy, cx) = (rng.random_range(0..p) as isize, rng.random_range(0..p) as isize);
                    for (dy, dx) in &disk {
                        let (y, x) = (cy + dy, cx + dx);
                        if (0..p as isize).contains(&y) && (0..p as isize).contains(&x) {
                            lum[y as usize * p + x as usize] = ink;
                        }
                    }
                }
            }
            Texture::Stripes { orientation, period } => {
                let period = period.max(2);
                let phase = rng.random_range(0..period);
                for y in 0..p {
                    for x in 0..p {
                        let t = match orientation {
                            Orientation::Horizontal => y,
                            Orientation::Vertical => x,
                            Orientation::Diagonal => x + y,
                        };
                        if (t + phase) % period < period / 2 {
                            lum[y * p + x] = ink;
                        }
                    }
                }
            }
            Texture::Checker { size } => {
                let size = size.max(1);
                let (oy, ox) = (rng.random_range(0..2 * size), rng.random_range(0..2 * size));
                for y in 0..p {
                    for x in 0..p {
                        if ((y + oy) / size + (x + ox) / size) % 2 == 0 {
                            lum[y * p + x] = ink;
                        }
                    }
                }
            }
            Texture::Gradient => {
                for y in 0..p {
                    for x in 0..p {
                        let t = x as f64 / (p.max(2) - 1) as f64;
                        lum[y * p + x] = base + t * (ink - base);
                    }
                }
            }
        }
        let n = f64::from(self.noise);
        lum.iter()
            .map(|&v| {
                let jitter = if n > 0.0 { rng.random_range(-n..=n) } else { 0.0 };
                (v + jitter).round().clamp(1.0, 254.0) as u8
            })
            .collect()
    }
}

/// `(L - tint, L, L + tint)` for every luminance value; `lum` must lie in
/// `[1, 254]` and `tint` in `{-1, 0, 1}`.
pub fn colorize(lum: &[u8], tint: i8) -> Vec<u8> {
    let mut out = Vec::with_capacity(lum.len() * 3);
    for &l in lum {
        let l = i16::from(l);
        let t = i16::from(tint);
        out.extend_from_slice(&[(l - t) as u8, l as u8, (l + t) as u8]);
    }
    out
}
