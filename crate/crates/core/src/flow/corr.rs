//! All-pairs correlation pyramid and windowed lookup.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Matching costs of every source pixel against a pooled target grid.
#[derive(Clone, Debug)]
pub struct CorrelationPyramid<T: Scalar> {
    /// Level `l` is `N×h_l×w_l`: row `p` is source pixel `p`'s cost map over
    /// the target pooled `l` times.
    pub levels: Vec<Tensor<T>>,
    pub feature_channels: usize,
    /// Source grid `(h, w)`.
    pub grid: (usize, usize),
}

/// `cost(p, q) = ⟨f1[:,p], f2[:,q]⟩ / √c`, then `levels − 1` successive 2×
/// average poolings of the target axes.
pub fn build_corr_pyramid<T: Scalar>(f1: &Tensor<T>, f2: &Tensor<T>, levels: usize) -> Result<CorrelationPyramid<T>> {
    if f1.shape() != f2.shape() || f1.rank() != 3 {
        return Err(Error::dim("build_corr_pyramid", f1.shape(), f2.shape()));
    }
    if levels == 0 {
        return Err(Error::contract("build_corr_pyramid", "need at least one level"));
    }
    let (c, h, w) = (f1.shape()[0], f1.shape()[1], f1.shape()[2]);
    let n = h * w;
    let a = f1.reshape(&[c, n])?;
    let b = f2.reshape(&[c, n])?;
    let scale = T::one() / T::from_usize(c).expect("channel count fits").sqrt();
    let mut level = a.t()?.matmul(&b)?.scale(scale).reshape(&[n, h, w])?;
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            level = level.avg_pool2x()?;
        }
        out.push(level.clone());
    }
    Ok(CorrelationPyramid {
        levels: out,
        feature_channels: c,
        grid: (h, w),
    })
}

/// Pixel-center coordinates `2×h×w` (x then y).
pub fn coords_grid<T: Scalar>(h: usize, w: usize) -> Tensor<T> {
    let mut d = Vec::with_capacity(2 * h * w);
    for _ in 0..h {
        for x in 0..w {
            d.push(T::from_usize(x).expect("fits"));
        }
    }
    for y in 0..h {
        for _ in 0..w {
            d.push(T::from_usize(y).expect("fits"));
        }
    }
    Tensor::from_vec(&[2, h, w], d).expect("grid shape")
}

impl<T: Scalar> CorrelationPyramid<T> {
    /// Samples a `(2r+1)²` window per level around `(p + flow(p)) / 2^l`;
    /// levels are stacked along channels.
    pub fn lookup(&self, flow: &Tensor<T>, radius: usize) -> Result<Tensor<T>> {
        let (h, w) = self.grid;
        if flow.shape() != [2, h, w] {
            return Err(Error::dim("lookup", flow.shape(), &[2, h, w]));
        }
        let target = coords_grid::<T>(h, w).add(flow)?;
        let mut parts = Vec::with_capacity(self.levels.len());
        for (l, vol) in self.levels.iter().enumerate() {
            let centers = target.scale(T::one() / T::from_f64_lossy((1u64 << l) as f64));
            parts.push(vol.window_sample(&centers, radius)?);
        }
        Tensor::concat(&parts, 0)
    }

    pub fn lookup_channels(&self, radius: usize) -> usize {
        self.levels.len() * (2 * radius + 1).pow(2)
    }
}
