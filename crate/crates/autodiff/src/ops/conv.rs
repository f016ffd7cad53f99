//! Spatial convolutions over `[N, H, W, C]` tensors.

use crate::error::{shape_err, Error, Result};
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output extent `ceil(H / stride)`; any odd padding goes bottom/right.
    Same,
    /// No padding; output extent `floor((H - k) / stride) + 1`.
    Valid,
}

/// Resolved geometry of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn out_extent(size: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = size.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(size);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if size < k {
                return Err(shape_err!("valid convolution: extent {size} < kernel {k}"));
            }
            Ok(((size - k) / stride + 1, 0))
        }
    }
}

impl ConvGeom {
    pub fn new(
        input: &[usize],
        kh: usize,
        kw: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        if input.len() != 4 {
            return Err(shape_err!("convolution input must be [N,H,W,C], got {input:?}"));
        }
        let (out_h, pad_top) = out_extent(input[1], kh, stride, padding)?;
        let (out_w, pad_left) = out_extent(input[2], kw, stride, padding)?;
        Ok(Self {
            n: input[0],
            h: input[1],
            w: input[2],
            kh,
            kw,
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    /// Input row/column read by output position `o` at kernel offset `k`.
    #[inline]
    fn src(&self, o: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(pad).filter(|&i| i < limit)
    }

    /// Calls `f(out_pixel, in_pixel, kernel_tap)` for every in-bounds tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for b in 0..self.n {
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    let opix = (b * self.out_h + oy) * self.out_w + ox;
                    for ky in 0..self.kh {
                        let Some(iy) = self.src(oy, ky, self.pad_top, self.h) else {
                            continue;
                        };
                        for kx in 0..self.kw {
                            let Some(ix) = self.src(ox, kx, self.pad_left, self.w) else {
                                continue;
                            };
                            f(opix, (b * self.h + iy) * self.w + ix, ky * self.kw + kx);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward(x: &[f64], k: &[f64], geom: &ConvGeom, cin: usize, cout: usize) -> Vec<f64> {
    let mut y = vec![0.0; geom.n * geom.out_h * geom.out_w * cout];
    geom.for_each_tap(|opix, ipix, tap| {
        let out = &mut y[opix * cout..(opix + 1) * cout];
        let xs = &x[ipix * cin..(ipix + 1) * cin];
        for (ci, &xv) in xs.iter().enumerate() {
            let krow = &k[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
            out.iter_mut().zip(krow).for_each(|(o, kv)| *o += xv * kv);
        }
    });
    y
}

pub(crate) fn conv2d_backward(x: &Tensor, k: &Tensor, geom: &ConvGeom, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let cin = x.shape()[3];
    let cout = k.shape()[3];
    let (xd, kd) = (x.data(), k.data());
    let mut gx = vec![0.0; xd.len()];
    let mut gk = vec![0.0; kd.len()];
    geom.for_each_tap(|opix, ipix, tap| {
        let gout = &g[opix * cout..(opix + 1) * cout];
        for ci in 0..cin {
            let ko = (tap * cin + ci) * cout;
            let krow = &kd[ko..ko + cout];
            gx[ipix * cin + ci] += gout.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>();
            let xv = xd[ipix * cin + ci];
            gk[ko..ko + cout]
                .iter_mut()
                .zip(gout)
                .for_each(|(o, gv)| *o += xv * gv);
        }
    });
    (gx, gk)
}

pub(crate) fn depthwise_forward(x: &[f64], k: &[f64], geom: &ConvGeom, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; geom.n * geom.out_h * geom.out_w * c];
    geom.for_each_tap(|opix, ipix, tap| {
        let out = &mut y[opix * c..(opix + 1) * c];
        let xs = &x[ipix * c..(ipix + 1) * c];
        let ks = &k[tap * c..(tap + 1) * c];
        for ((o, xv), kv) in out.iter_mut().zip(xs).zip(ks) {
            *o += xv * kv;
        }
    });
    y
}

pub(crate) fn depthwise_backward(x: &Tensor, k: &Tensor, geom: &ConvGeom, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = x.shape()[3];
    let (xd, kd) = (x.data(), k.data());
    let mut gx = vec![0.0; xd.len()];
    let mut gk = vec![0.0; kd.len()];
    geom.for_each_tap(|opix, ipix, tap| {
        for ch in 0..c {
            let gv = g[opix * c + ch];
            gx[ipix * c + ch] += gv * kd[tap * c + ch];
            gk[tap * c + ch] += gv * xd[ipix * c + ch];
        }
    });
    (gx, gk)
}

pub(crate) fn mean_pool_backward(x: &Tensor, g: &[f64]) -> Vec<f64> {
    let s = x.shape();
    let (n, hw, c) = (s[0], s[1] * s[2], s[3]);
    let scale = 1.0 / hw as f64;
    let mut gx = vec![0.0; x.len()];
    for b in 0..n {
        for p in 0..hw {
            let o = (b * hw + p) * c;
            for ch in 0..c {
                gx[o + ch] = g[b * c + ch] * scale;
            }
        }
    }
    gx
}

impl Tape {
    /// Dense 2-D convolution: `input[N,H,W,Cin]`, `kernel[kh,kw,Cin,Cout]`,
    /// `bias[Cout]`.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: Padding,
    ) -> Result<Var> {
        let (x, k) = (self.value(input), self.value(kernel));
        if k.rank() != 4 || x.rank() != 4 || k.shape()[2] != x.shape()[3] {
            return Err(shape_err!(
                "conv2d: kernel {:?} for input {:?}",
                k.shape(),
                x.shape()
            ));
        }
        let (cin, cout) = (k.shape()[2], k.shape()[3]);
        let geom = ConvGeom::new(x.shape(), k.shape()[0], k.shape()[1], stride, padding)?;
        let y = conv2d_forward(x.data(), k.data(), &geom, cin, cout);
        let out = Tensor::new(vec![geom.n, geom.out_h, geom.out_w, cout], y)?;
        let conv = self.push(
            out,
            Op::Conv2d {
                input,
                kernel,
                geom,
            },
        );
        self.add_bias(conv, bias)
    }

    /// Per-channel spatial convolution with `kernel[kh,kw,C]`, no bias.
    pub fn depthwise_conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        padding: Padding,
    ) -> Result<Var> {
        let (x, k) = (self.value(input), self.value(kernel));
        if k.rank() != 3 || x.rank() != 4 || k.shape()[2] != x.shape()[3] {
            return Err(shape_err!(
                "depthwise_conv2d: kernel {:?} for input {:?}",
                k.shape(),
                x.shape()
            ));
        }
        let c = k.shape()[2];
        let geom = ConvGeom::new(x.shape(), k.shape()[0], k.shape()[1], stride, padding)?;
        let y = depthwise_forward(x.data(), k.data(), &geom, c);
        let out = Tensor::new(vec![geom.n, geom.out_h, geom.out_w, c], y)?;
        Ok(self.push(
            out,
            Op::Depthwise {
                input,
                kernel,
                geom,
            },
        ))
    }

    /// Depthwise convolution followed by a 1x1 channel-mixing convolution
    /// (`point_kernel[1,1,Cin,Cout]`) and bias.
    pub fn depthwise_separable_conv2d(
        &mut self,
        input: Var,
        depth_kernel: Var,
        point_kernel: Var,
        bias: Var,
        stride: usize,
        padding: Padding,
    ) -> Result<Var> {
        let d = self.depthwise_conv2d(input, depth_kernel, stride, padding)?;
        let pk = self.value(point_kernel).shape().to_vec();
        if pk.len() != 4 || pk[0] != 1 || pk[1] != 1 {
            return Err(shape_err!("point kernel must be [1,1,Cin,Cout], got {pk:?}"));
        }
        let s = self.shape(d).to_vec();
        let flat = self.reshape(d, &[s[0] * s[1] * s[2], s[3]])?;
        let w = self.reshape(point_kernel, &[pk[2], pk[3]])?;
        let y = self.dense(flat, w, bias)?;
        self.reshape(y, &[s[0], s[1], s[2], pk[3]])
    }

    /// Average over the spatial axes: `[N,H,W,C] -> [N,C]`.
    pub fn mean_pool_spatial(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.rank() != 4 {
            return Err(shape_err!("mean_pool_spatial expects [N,H,W,C], got {:?}", x.shape()));
        }
        let s = x.shape();
        let (n, hw, c) = (s[0], s[1] * s[2], s[3]);
        let mut y = vec![0.0; n * c];
        for b in 0..n {
            for p in 0..hw {
                let o = (b * hw + p) * c;
                for ch in 0..c {
                    y[b * c + ch] += x.data()[o + ch];
                }
            }
        }
        y.iter_mut().for_each(|v| *v /= hw as f64);
        let out = Tensor::new(vec![n, c], y)?;
        Ok(self.push(out, Op::MeanPool(input)))
    }
}
