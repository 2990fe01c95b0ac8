//! Minimal f64 conv-net plumbing for the autoencoder: conv, linear,
//! pooling, nearest-neighbor upsampling and their backward passes.
//!
//! Everything is single-threaded and allocation-light; backward passes
//! accumulate into caller-owned gradient buffers so batches sum in a
//! fixed order.

use std::fmt;
use std::str::FromStr;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    /// Makes the whole network linear (with the output stage also switched
    /// to identity); used by gradient checks.
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    z
                } else {
                    a * z
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    pub(crate) fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// The matching output-stage activation: sigmoid squashes
    /// reconstructions into `[0, 1]`; the identity variant stays linear.
    pub(crate) fn output_is_sigmoid(self) -> bool {
        !matches!(self, Activation::Identity)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(a) => write!(f, "leaky:{a}"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Activation, String> {
        if s == "identity" {
            return Ok(Activation::Identity);
        }
        if let Some(a) = s.strip_prefix("leaky:") {
            return a
                .parse()
                .map(Activation::LeakyRelu)
                .map_err(|e| format!("bad leaky slope: {e}"));
        }
        Err(format!("unknown activation {s:?}"))
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// 2-D convolution, square kernel, zero padding.
#[derive(Debug, Clone)]
pub(crate) struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    /// `[out_c][in_c][k][k]`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize) -> Conv {
        Conv {
            in_c,
            out_c,
            k,
            stride,
            pad: k / 2,
            w: vec![0.0; out_c * in_c * k * k],
            b: vec![0.0; out_c],
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    pub fn forward(&self, x: &[f64], h: usize, w: usize, out: &mut Vec<f64>) {
        let (oh, ow) = self.out_size(h, w);
        debug_assert_eq!(x.len(), self.in_c * h * w);
        out.clear();
        out.resize(self.out_c * oh * ow, 0.0);
        for oc in 0..self.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = self.b[oc];
                    for ic in 0..self.in_c {
                        for ky in 0..self.k {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = (ic * h + iy as usize) * w;
                            let wrow = ((oc * self.in_c + ic) * self.k + ky) * self.k;
                            for kx in 0..self.k {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += self.w[wrow + kx] * x[xrow + ix as usize];
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }

    /// Backward pass; `gx` is overwritten, `gw`/`gb` are accumulated.
    pub fn backward(
        &self,
        x: &[f64],
        h: usize,
        w: usize,
        gy: &[f64],
        gx: &mut Vec<f64>,
        gw: &mut [f64],
        gb: &mut [f64],
    ) {
        let (oh, ow) = self.out_size(h, w);
        debug_assert_eq!(gy.len(), self.out_c * oh * ow);
        gx.clear();
        gx.resize(self.in_c * h * w, 0.0);
        for oc in 0..self.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gy[(oc * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    gb[oc] += g;
                    for ic in 0..self.in_c {
                        for ky in 0..self.k {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = (ic * h + iy as usize) * w;
                            let wrow = ((oc * self.in_c + ic) * self.k + ky) * self.k;
                            for kx in 0..self.k {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                gw[wrow + kx] += g * x[xrow + ix as usize];
                                gx[xrow + ix as usize] += g * self.w[wrow + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Fully connected layer, `out = W x + b`.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub in_d: usize,
    pub out_d: usize,
    /// `[out_d][in_d]`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn new(in_d: usize, out_d: usize) -> Linear {
        Linear {
            in_d,
            out_d,
            w: vec![0.0; out_d * in_d],
            b: vec![0.0; out_d],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_d);
        out.clear();
        out.resize(self.out_d, 0.0);
        for o in 0..self.out_d {
            let row = o * self.in_d;
            let mut acc = self.b[o];
            for i in 0..self.in_d {
                acc += self.w[row + i] * x[i];
            }
            out[o] = acc;
        }
    }

    pub fn backward(
        &self,
        x: &[f64],
        gy: &[f64],
        gx: &mut Vec<f64>,
        gw: &mut [f64],
        gb: &mut [f64],
    ) {
        gx.clear();
        gx.resize(self.in_d, 0.0);
        for o in 0..self.out_d {
            let g = gy[o];
            gb[o] += g;
            let row = o * self.in_d;
            for i in 0..self.in_d {
                gw[row + i] += g * x[i];
                gx[i] += g * self.w[row + i];
            }
        }
    }
}

/// Global average pool over each channel map.
pub(crate) fn gap_forward(x: &[f64], c: usize, hw: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(c, 0.0);
    for ch in 0..c {
        let s: f64 = x[ch * hw..(ch + 1) * hw].iter().sum();
        out[ch] = s / hw as f64;
    }
}

pub(crate) fn gap_backward(gy: &[f64], c: usize, hw: usize, gx: &mut Vec<f64>) {
    gx.clear();
    gx.resize(c * hw, 0.0);
    for ch in 0..c {
        let g = gy[ch] / hw as f64;
        for v in &mut gx[ch * hw..(ch + 1) * hw] {
            *v = g;
        }
    }
}

/// Tiles a channel vector over an `s x s` map (the mirror of the pool).
pub(crate) fn broadcast_forward(x: &[f64], c: usize, hw: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(c * hw, 0.0);
    for ch in 0..c {
        let v = x[ch];
        for o in &mut out[ch * hw..(ch + 1) * hw] {
            *o = v;
        }
    }
}

pub(crate) fn broadcast_backward(gy: &[f64], c: usize, hw: usize, gx: &mut Vec<f64>) {
    gx.clear();
    gx.resize(c, 0.0);
    for ch in 0..c {
        gx[ch] = gy[ch * hw..(ch + 1) * hw].iter().sum();
    }
}

/// Nearest-neighbor resize to an explicit target size, so the decoder can
/// mirror the encoder's spatial sizes exactly for any input side.
pub(crate) fn upsample_forward(
    x: &[f64],
    c: usize,
    (sh, sw): (usize, usize),
    (th, tw): (usize, usize),
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(c * th * tw, 0.0);
    for ch in 0..c {
        for ty in 0..th {
            let sy = ty * sh / th;
            for tx in 0..tw {
                let sx = tx * sw / tw;
                out[(ch * th + ty) * tw + tx] = x[(ch * sh + sy) * sw + sx];
            }
        }
    }
}

pub(crate) fn upsample_backward(
    gy: &[f64],
    c: usize,
    (sh, sw): (usize, usize),
    (th, tw): (usize, usize),
    gx: &mut Vec<f64>,
) {
    gx.clear();
    gx.resize(c * sh * sw, 0.0);
    for ch in 0..c {
        for ty in 0..th {
            let sy = ty * sh / th;
            for tx in 0..tw {
                let sx = tx * sw / tw;
                gx[(ch * sh + sy) * sw + sx] += gy[(ch * th + ty) * tw + tx];
            }
        }
    }
}
