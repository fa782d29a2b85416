use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Geometry of a 2-D convolution over a single `C×H×W` image.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeom {
    fn new(x: &[usize], k: usize, stride: usize, pad: usize) -> Option<Self> {
        let (c_in, h, w) = (x[0], x[1], x[2]);
        if stride == 0 || h + 2 * pad < k || w + 2 * pad < k {
            return None;
        }
        Some(ConvGeom {
            c_in,
            h,
            w,
            k,
            stride,
            pad,
            h_out: (h + 2 * pad - k) / stride + 1,
            w_out: (w + 2 * pad - k) / stride + 1,
        })
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    fn rows(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.h_out * self.w_out
    }

    /// Unfolds the padded input into a `(C·k·k) × (H'·W')` matrix.
    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let (k, s, p) = (self.k, self.stride, self.pad as isize);
        let mut cols = vec![T::zero(); self.rows() * self.cols()];
        for c in 0..self.c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * self.cols()..(row + 1) * self.cols()];
                    for oy in 0..self.h_out {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let src = &x[(c * self.h + iy as usize) * self.w..];
                        for ox in 0..self.w_out {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < self.w as isize {
                                dst[oy * self.w_out + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im<T: Scalar>(&self, cols: &[T]) -> Vec<T> {
        let (k, s, p) = (self.k, self.stride, self.pad as isize);
        let mut x = vec![T::zero(); self.c_in * self.h * self.w];
        for c in 0..self.c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * self.cols()..(row + 1) * self.cols()];
                    for oy in 0..self.h_out {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let base = (c * self.h + iy as usize) * self.w;
                        for ox in 0..self.w_out {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < self.w as isize {
                                x[base + ix as usize] += src[oy * self.w_out + ox];
                            }
                        }
                    }
                }
            }
        }
        x
    }
}

impl<T: Scalar> Tensor<T> {
    /// 2-D cross-correlation of a `C_in×H×W` input with `C_out×C_in×k×k`
    /// weights. `bias`, when given, has shape `[C_out]`.
    pub fn conv2d(&self, weight: &Tensor<T>, bias: Option<&Tensor<T>>, stride: usize, pad: usize) -> Result<Tensor<T>> {
        let (xs, ws) = (self.shape(), weight.shape());
        if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] || ws[2] != ws[3] {
            return Err(Error::dim("conv2d", xs, ws));
        }
        let k = ws[2];
        if k % 2 == 0 {
            return Err(Error::contract("conv2d", format!("kernel extent {k} must be odd")));
        }
        let c_out = ws[0];
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(Error::dim("conv2d", ws, b.shape()));
            }
        }
        let geom = ConvGeom::new(xs, k, stride, pad).ok_or_else(|| {
            Error::contract(
                "conv2d",
                format!("non-positive output extent for input {xs:?}, kernel {k}, stride {stride}, pad {pad}"),
            )
        })?;
        let (rows, ncols) = (geom.rows(), geom.cols());

        let mut out = vec![T::zero(); c_out * ncols];
        {
            let x = self.data();
            let wd = weight.data();
            if geom.is_pointwise() {
                T::gemm(c_out, rows, ncols, &wd, (rows, 1), &x, (ncols, 1), &mut out, false);
            } else {
                let cols = geom.im2col(&x);
                T::gemm(c_out, rows, ncols, &wd, (rows, 1), &cols, (ncols, 1), &mut out, false);
            }
        }
        if let Some(b) = bias {
            let bd = b.data();
            for (o, &bv) in bd.iter().enumerate() {
                for v in &mut out[o * ncols..(o + 1) * ncols] {
                    *v += bv;
                }
            }
        }

        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let shape = vec![c_out, geom.h_out, geom.w_out];
        Ok(Tensor::from_op("conv2d", shape, out, parents, move |g, p| {
            let (x, w) = (&p[0], &p[1]);
            let xd = x.data();
            let cols_owned;
            let cols: &[T] = if geom.is_pointwise() {
                &xd
            } else {
                cols_owned = geom.im2col(&xd);
                &cols_owned
            };
            let gw = w.requires_grad().then(|| {
                // dW = G · colsᵀ
                let mut gw = vec![T::zero(); c_out * rows];
                T::gemm(c_out, ncols, rows, g, (ncols, 1), cols, (1, ncols), &mut gw, false);
                gw
            });
            let gx = x.requires_grad().then(|| {
                // dcols = Wᵀ · G
                let mut gcols = vec![T::zero(); rows * ncols];
                T::gemm(rows, c_out, ncols, &w.data(), (1, rows), g, (ncols, 1), &mut gcols, false);
                if geom.is_pointwise() {
                    gcols
                } else {
                    geom.col2im(&gcols)
                }
            });
            let mut grads = vec![gx, gw];
            if let Some(b) = p.get(2) {
                grads.push(b.requires_grad().then(|| {
                    (0..c_out).map(|o| g[o * ncols..(o + 1) * ncols].iter().copied().sum()).collect()
                }));
            }
            grads
        }))
    }

    /// 2× average pooling over the last two axes of a rank-3 tensor. Odd
    /// extents round up; edge cells average only the elements they cover.
    pub fn avg_pool2x(&self) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 3 {
            return Err(Error::contract("avg_pool2x", format!("expected rank 3, got {s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
        let cell = move |oy: usize, ox: usize| {
            let ys = 2 * oy..(2 * oy + 2).min(h);
            let xs = 2 * ox..(2 * ox + 2).min(w);
            (ys.clone(), xs.clone(), (ys.len() * xs.len()) as f64)
        };
        let mut out = vec![T::zero(); c * ho * wo];
        {
            let x = self.data();
            for ch in 0..c {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let (ys, xs, n) = cell(oy, ox);
                        let mut acc = T::zero();
                        for y in ys {
                            for xx in xs.clone() {
                                acc += x[(ch * h + y) * w + xx];
                            }
                        }
                        out[(ch * ho + oy) * wo + ox] = acc / T::from_f64_lossy(n);
                    }
                }
            }
        }
        Ok(Tensor::from_op("avg_pool2x", vec![c, ho, wo], out, vec![self.clone()], move |g, _| {
            let mut gi = vec![T::zero(); c * h * w];
            for ch in 0..c {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let (ys, xs, n) = cell(oy, ox);
                        let v = g[(ch * ho + oy) * wo + ox] / T::from_f64_lossy(n);
                        for y in ys {
                            for xx in xs.clone() {
                                gi[(ch * h + y) * w + xx] += v;
                            }
                        }
                    }
                }
            }
            vec![Some(gi)]
        }))
    }

    /// Bilinear resize of a `C×h×w` tensor by an integer factor using
    /// half-pixel centers and edge clamping. Values are not rescaled.
    pub fn upsample_bilinear(&self, factor: usize) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 3 || factor == 0 {
            return Err(Error::contract("upsample_bilinear", format!("shape {s:?}, factor {factor}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (ho, wo) = (h * factor, w * factor);
        let ty = upsample_taps(h, factor);
        let tx = upsample_taps(w, factor);
        let mut out = vec![T::zero(); c * ho * wo];
        {
            let x = self.data();
            for ch in 0..c {
                let plane = &x[ch * h * w..(ch + 1) * h * w];
                for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
                    let fy = T::from_f64_lossy(fy);
                    for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                        let fx = T::from_f64_lossy(fx);
                        let top = plane[y0 * w + x0] * (T::one() - fx) + plane[y0 * w + x1] * fx;
                        let bot = plane[y1 * w + x0] * (T::one() - fx) + plane[y1 * w + x1] * fx;
                        out[(ch * ho + oy) * wo + ox] = top * (T::one() - fy) + bot * fy;
                    }
                }
            }
        }
        Ok(Tensor::from_op("upsample_bilinear", vec![c, ho, wo], out, vec![self.clone()], move |g, _| {
            let mut gi = vec![T::zero(); c * h * w];
            for ch in 0..c {
                let plane = &mut gi[ch * h * w..(ch + 1) * h * w];
                for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
                    let fy = T::from_f64_lossy(fy);
                    for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                        let fx = T::from_f64_lossy(fx);
                        let gv = g[(ch * ho + oy) * wo + ox];
                        plane[y0 * w + x0] += gv * (T::one() - fy) * (T::one() - fx);
                        plane[y0 * w + x1] += gv * (T::one() - fy) * fx;
                        plane[y1 * w + x0] += gv * fy * (T::one() - fx);
                        plane[y1 * w + x1] += gv * fy * fx;
                    }
                }
            }
            vec![Some(gi)]
        }))
    }
}

/// Source taps `(i0, i1, frac)` for each output index of a 1-D upsample.
pub(crate) fn upsample_taps(n: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..n * factor)
        .map(|o| {
            let src = ((o as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_identity_kernel() {
        let x = Tensor::<f64>::from_vec(&[2, 2, 2], (0..8).map(f64::from).collect()).unwrap();
        let w = Tensor::from_vec(&[2, 2, 1, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(x.conv2d(&w, None, 1, 0).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn impulse_response_of_ones_kernel() {
        let mut v = vec![0.0; 25];
        v[2 * 5 + 2] = 1.0;
        let x = Tensor::<f64>::from_vec(&[1, 5, 5], v).unwrap();
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = x.conv2d(&w, None, 1, 1).unwrap().to_vec();
        for r in 0..5 {
            for c in 0..5 {
                let want = if (1..=3).contains(&r) && (1..=3).contains(&c) { 1.0 } else { 0.0 };
                assert_eq!(y[r * 5 + c], want);
            }
        }
    }

    #[test]
    fn output_extents_and_errors() {
        let x = Tensor::<f64>::zeros(&[3, 8, 8]);
        let w = Tensor::zeros(&[4, 3, 3, 3]);
        assert_eq!(x.conv2d(&w, None, 2, 1).unwrap().shape(), &[4, 4, 4]);
        let big = Tensor::zeros(&[4, 3, 11, 11]);
        assert!(x.conv2d(&big, None, 1, 0).is_err());
        let even = Tensor::zeros(&[4, 3, 2, 2]);
        assert!(x.conv2d(&even, None, 1, 0).is_err());
    }

    #[test]
    fn avg_pool_rounds_up() {
        let x = Tensor::<f64>::from_vec(&[1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let y = x.avg_pool2x().unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.to_vec(), vec![3.0, 4.5, 7.5, 9.0]);
    }

    #[test]
    fn upsample_constant_stays_constant() {
        let x = Tensor::<f64>::full(&[2, 3, 4], 1.5);
        let y = x.upsample_bilinear(4).unwrap();
        assert_eq!(y.shape(), &[2, 12, 16]);
        assert!(y.to_vec().iter().all(|&v| v == 1.5));
    }
}
