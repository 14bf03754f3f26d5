//! Operator kernels over CHW float32 buffers.

/// Geometry of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl ConvGeom {
    /// Output `(height, width)`, or `None` when the padded input is smaller
    /// than the kernel.
    pub fn out_dims(&self) -> Option<(usize, usize)> {
        let ph = self.in_h + 2 * self.pad;
        let pw = self.in_w + 2 * self.pad;
        if self.stride == 0 || self.kernel == 0 || ph < self.kernel || pw < self.kernel {
            return None;
        }
        Some((
            (ph - self.kernel) / self.stride + 1,
            (pw - self.kernel) / self.stride + 1,
        ))
    }
}

/// Cross-correlation with zero padding. `weight` is `[out_ch, in_ch, k, k]`.
///
/// Sums are accumulated in f64 and rounded once, so the result does not
/// depend on accumulation order to f32 precision.
pub fn conv2d(g: &ConvGeom, input: &[f32], weight: &[f32], bias: Option<&[f32]>, out: &mut [f32]) {
    let (oh, ow) = g.out_dims().expect("conv geometry validated at load");
    let k = g.kernel;
    let plane = oh * ow;
    debug_assert_eq!(input.len(), g.in_ch * g.in_h * g.in_w);
    debug_assert_eq!(weight.len(), g.out_ch * g.in_ch * k * k);
    debug_assert_eq!(out.len(), g.out_ch * plane);

    // Valid output column range for each kernel column offset.
    let col_ranges: Vec<(usize, usize)> = (0..k).map(|kx| valid_range(kx, g.pad, g.stride, g.in_w, ow)).collect();

    let mut acc = vec![0.0f64; plane];
    for oc in 0..g.out_ch {
        acc.fill(bias.map_or(0.0, |b| b[oc] as f64));
        for ic in 0..g.in_ch {
            let in_plane = &input[ic * g.in_h * g.in_w..(ic + 1) * g.in_h * g.in_w];
            let w = &weight[(oc * g.in_ch + ic) * k * k..(oc * g.in_ch + ic + 1) * k * k];
            for ky in 0..k {
                let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.in_h, oh);
                for kx in 0..k {
                    let wv = w[ky * k + kx] as f64;
                    let (ox0, ox1) = col_ranges[kx];
                    if ox0 >= ox1 {
                        continue;
                    }
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ky - g.pad;
                        let in_row = &in_plane[iy * g.in_w..(iy + 1) * g.in_w];
                        let out_row = &mut acc[oy * ow + ox0..oy * ow + ox1];
                        let ix0 = ox0 * g.stride + kx - g.pad;
                        if g.stride == 1 {
                            let src = &in_row[ix0..ix0 + (ox1 - ox0)];
                            for (o, &x) in out_row.iter_mut().zip(src) {
                                *o += wv * x as f64;
                            }
                        } else {
                            for (j, o) in out_row.iter_mut().enumerate() {
                                *o += wv * in_row[ix0 + j * g.stride] as f64;
                            }
                        }
                    }
                }
            }
        }
        for (o, &a) in out[oc * plane..(oc + 1) * plane].iter_mut().zip(&acc) {
            *o = a as f32;
        }
    }
}

/// Output indices `o` in `[lo, hi)` for which `o*stride + offset - pad` lands
/// inside `[0, in_len)`.
fn valid_range(offset: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    // o*stride + offset >= pad
    let lo = if offset >= pad {
        0
    } else {
        (pad - offset).div_ceil(stride)
    };
    // o*stride + offset - pad <= in_len - 1
    let hi = if in_len + pad > offset {
        ((in_len + pad - offset - 1) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Inference-mode batch normalization, in place.
pub fn batchnorm(x: &mut [f32], ch: usize, gamma: &[f32], beta: &[f32], mean: &[f32], var: &[f32], eps: f32) {
    let plane = x.len() / ch;
    for c in 0..ch {
        let scale = gamma[c] / (var[c] + eps).sqrt();
        let shift = beta[c] - mean[c] * scale;
        for v in &mut x[c * plane..(c + 1) * plane] {
            *v = *v * scale + shift;
        }
    }
}

pub fn relu(x: &mut [f32]) {
    for v in x {
        *v = v.max(0.0);
    }
}

pub fn add(lhs: &[f32], rhs: &[f32], out: &mut [f32]) {
    for ((o, &a), &b) in out.iter_mut().zip(lhs).zip(rhs) {
        *o = a + b;
    }
}

/// Mean over each channel plane.
pub fn global_avg_pool(x: &[f32], ch: usize, out: &mut [f32]) {
    let plane = x.len() / ch;
    for (c, o) in out.iter_mut().enumerate().take(ch) {
        let sum: f64 = x[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).sum();
        *o = (sum / plane as f64) as f32;
    }
}

/// Affine map with `weight` laid out `[out_dim, in_dim]`, accumulated in f64.
pub fn fc(x: &[f32], weight: &[f32], bias: Option<&[f32]>, out: &mut [f32]) {
    let in_dim = x.len();
    for (o, slot) in out.iter_mut().enumerate() {
        let row = &weight[o * in_dim..(o + 1) * in_dim];
        let mut acc = bias.map_or(0.0, |b| b[o] as f64);
        for (&w, &v) in row.iter().zip(x) {
            acc += w as f64 * v as f64;
        }
        *slot = acc as f32;
    }
}
