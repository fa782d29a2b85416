use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Corner taps of a bilinear sample at `(px, py)`; taps outside the plane
/// are dropped (zero padding).
struct Taps<T> {
    x0: isize,
    y0: isize,
    fx: T,
    fy: T,
}

impl<T: Scalar> Taps<T> {
    fn new(px: T, py: T) -> Self {
        let (xf, yf) = (px.floor(), py.floor());
        Taps {
            x0: xf.to_isize().unwrap_or(isize::MIN / 2),
            y0: yf.to_isize().unwrap_or(isize::MIN / 2),
            fx: px - xf,
            fy: py - yf,
        }
    }

    /// `(flat index, weight, d weight/dx, d weight/dy)` for in-range corners.
    fn corners(&self, h: usize, w: usize) -> impl Iterator<Item = (usize, T, T, T)> + '_ {
        let one = T::one();
        [(0isize, 0isize), (1, 0), (0, 1), (1, 1)].into_iter().filter_map(move |(dx, dy)| {
            let (x, y) = (self.x0 + dx, self.y0 + dy);
            if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                return None;
            }
            let (wx, dwx) = if dx == 0 { (one - self.fx, -one) } else { (self.fx, one) };
            let (wy, dwy) = if dy == 0 { (one - self.fy, -one) } else { (self.fy, one) };
            Some((y as usize * w + x as usize, wx * wy, dwx * wy, wx * dwy))
        })
    }
}

impl<T: Scalar> Tensor<T> {
    /// Samples a `C×H×W` tensor at continuous pixel coordinates.
    ///
    /// `coords` is `2×H'×W'` with channel 0 the column (x) and channel 1 the
    /// row (y). Reads outside the image are zero. Differentiable with respect
    /// to both the image and the coordinates.
    pub fn bilinear_sample(&self, coords: &Tensor<T>) -> Result<Tensor<T>> {
        let (xs, cs) = (self.shape(), coords.shape());
        if xs.len() != 3 || cs.len() != 3 || cs[0] != 2 {
            return Err(Error::dim("bilinear_sample", xs, cs));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        let n = cs[1] * cs[2];
        let mut out = vec![T::zero(); c * n];
        {
            let x = self.data();
            let cd = coords.data();
            for j in 0..n {
                let taps = Taps::new(cd[j], cd[n + j]);
                for (idx, wt, _, _) in taps.corners(h, w) {
                    for ch in 0..c {
                        out[ch * n + j] += wt * x[ch * h * w + idx];
                    }
                }
            }
        }
        let shape = vec![c, cs[1], cs[2]];
        Ok(Tensor::from_op("bilinear_sample", shape, out, vec![self.clone(), coords.clone()], move |g, p| {
            let x = p[0].data();
            let cd = p[1].data();
            let mut gx = p[0].requires_grad().then(|| vec![T::zero(); c * h * w]);
            let mut gc = p[1].requires_grad().then(|| vec![T::zero(); 2 * n]);
            for j in 0..n {
                let taps = Taps::new(cd[j], cd[n + j]);
                for (idx, wt, dwx, dwy) in taps.corners(h, w) {
                    for ch in 0..c {
                        let gv = g[ch * n + j];
                        if let Some(gx) = gx.as_mut() {
                            gx[ch * h * w + idx] += gv * wt;
                        }
                        if let Some(gc) = gc.as_mut() {
                            let v = x[ch * h * w + idx];
                            gc[j] += gv * v * dwx;
                            gc[n + j] += gv * v * dwy;
                        }
                    }
                }
            }
            vec![gx, gc]
        }))
    }

    /// Per-pixel windowed lookup into a stack of cost maps.
    ///
    /// `self` is `N×Hc×Wc`: one cost map per source pixel, `N = h·w`.
    /// `centers` is `2×h×w` (x then y, in cost-map pixels). The result is
    /// `(2r+1)²×h×w` where channel `(dy+r)·(2r+1) + (dx+r)` holds the
    /// bilinear sample of pixel `j`'s map at `center_j + (dx, dy)`.
    pub fn window_sample(&self, centers: &Tensor<T>, radius: usize) -> Result<Tensor<T>> {
        let (vs, cs) = (self.shape(), centers.shape());
        if vs.len() != 3 || cs.len() != 3 || cs[0] != 2 || cs[1] * cs[2] != vs[0] {
            return Err(Error::dim("window_sample", vs, cs));
        }
        let (n, hc, wc) = (vs[0], vs[1], vs[2]);
        let side = 2 * radius + 1;
        let win = side * side;
        let offsets: Vec<(T, T)> = (0..win)
            .map(|q| {
                let dy = (q / side) as f64 - radius as f64;
                let dx = (q % side) as f64 - radius as f64;
                (T::from_f64_lossy(dx), T::from_f64_lossy(dy))
            })
            .collect();
        let mut out = vec![T::zero(); win * n];
        {
            let vol = self.data();
            let cd = centers.data();
            for j in 0..n {
                let map = &vol[j * hc * wc..(j + 1) * hc * wc];
                for (q, &(dx, dy)) in offsets.iter().enumerate() {
                    let taps = Taps::new(cd[j] + dx, cd[n + j] + dy);
                    let mut acc = T::zero();
                    for (idx, wt, _, _) in taps.corners(hc, wc) {
                        acc += wt * map[idx];
                    }
                    out[q * n + j] = acc;
                }
            }
        }
        let shape = vec![win, cs[1], cs[2]];
        Ok(Tensor::from_op("window_sample", shape, out, vec![self.clone(), centers.clone()], move |g, p| {
            let vol = p[0].data();
            let cd = p[1].data();
            let mut gv = p[0].requires_grad().then(|| vec![T::zero(); n * hc * wc]);
            let mut gc = p[1].requires_grad().then(|| vec![T::zero(); 2 * n]);
            for j in 0..n {
                let base = j * hc * wc;
                for (q, &(dx, dy)) in offsets.iter().enumerate() {
                    let go = g[q * n + j];
                    if go == T::zero() {
                        continue;
                    }
                    let taps = Taps::new(cd[j] + dx, cd[n + j] + dy);
                    for (idx, wt, dwx, dwy) in taps.corners(hc, wc) {
                        if let Some(gv) = gv.as_mut() {
                            gv[base + idx] += go * wt;
                        }
                        if let Some(gc) = gc.as_mut() {
                            let v = vol[base + idx];
                            gc[j] += go * v * dwx;
                            gc[n + j] += go * v * dwy;
                        }
                    }
                }
            }
            vec![gv, gc]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_coords_gather_pixels() {
        let img = Tensor::<f64>::from_vec(&[1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        // sample (x=2,y=0), (x=0,y=1)
        let coords = Tensor::from_vec(&[2, 1, 2], vec![2.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(img.bilinear_sample(&coords).unwrap().to_vec(), vec![3.0, 4.0]);
    }

    #[test]
    fn center_of_two_by_two_is_mean() {
        let img = Tensor::<f64>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let coords = Tensor::from_vec(&[2, 1, 1], vec![0.5, 0.5]).unwrap();
        assert_eq!(img.bilinear_sample(&coords).unwrap().to_vec(), vec![3.0]);
    }

    #[test]
    fn out_of_range_reads_zero() {
        let img = Tensor::<f64>::full(&[1, 2, 2], 1.0);
        let coords = Tensor::from_vec(&[2, 1, 2], vec![-5.0, 1.5, 0.0, 0.0]).unwrap();
        assert_eq!(img.bilinear_sample(&coords).unwrap().to_vec(), vec![0.0, 0.5]);
    }

    #[test]
    fn window_center_is_cost_at_center() {
        // two source pixels (h=1,w=2), 1×2 cost maps
        let vol = Tensor::<f64>::from_vec(&[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let centers = Tensor::from_vec(&[2, 1, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let y = vol.window_sample(&centers, 1).unwrap();
        assert_eq!(y.shape(), &[9, 1, 2]);
        let d = y.to_vec();
        // channel 4 is the center tap
        assert_eq!(&d[8..10], &[1.0, 4.0]);
        // channel 5 is dx=+1: pixel 0 reads 2, pixel 1 falls off the map
        assert_eq!(&d[10..12], &[2.0, 0.0]);
    }
}
