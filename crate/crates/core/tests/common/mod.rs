//! Naive reference implementations shared by the integration tests.
//!
//! Every oracle is a direct loop over the defining formula. Where a test
//! demands bit-exact agreement, the loops accumulate in the same order as
//! the library (index-ascending sums starting from zero).

#![allow(dead_code)]

use agflow::data::FlowField;
use agflow::graph::ProjectionConvs;
use agflow::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, uniform(rng, n, -1.0, 1.0)).unwrap()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// `A (m×k) · B (k×n)`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}

pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

/// Direct cross-correlation with zero padding; bias added last.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    (c_in, h, w): (usize, usize, usize),
    wt: &[f64],
    c_out: usize,
    k: usize,
    bias: Option<&[f64]>,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; c_out * ho * wo];
    for o in 0..c_out {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut s = 0.0;
                for ci in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            let xv = if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                0.0
                            } else {
                                x[(ci * h + iy as usize) * w + ix as usize]
                            };
                            s += wt[((o * c_in + ci) * k + ky) * k + kx] * xv;
                        }
                    }
                }
                if let Some(b) = bias {
                    s += b[o];
                }
                out[(o * ho + oy) * wo + ox] = s;
            }
        }
    }
    (out, ho, wo)
}

/// Softmax of each row of an `m×n` matrix (max-shifted).
pub fn softmax_rows(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = a.to_vec();
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Correlation pyramid: level 0 `cost[p][q] = (Σ_c f1[c,p] f2[c,q]) · (1/√c)`,
/// each further level a ceil-mode 2×2 average of the previous one.
pub fn corr_pyramid(f1: &[f64], f2: &[f64], c: usize, h: usize, w: usize, levels: usize) -> Vec<(Vec<f64>, usize, usize)> {
    let n = h * w;
    let inv = 1.0 / (c as f64).sqrt();
    let mut lvl = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            let mut s = 0.0;
            for ch in 0..c {
                s += f1[ch * n + p] * f2[ch * n + q];
            }
            lvl[p * n + q] = s * inv;
        }
    }
    let mut out = vec![(lvl, h, w)];
    for _ in 1..levels {
        let (prev, ph, pw) = out.last().unwrap().clone();
        let (nh, nw) = (ph.div_ceil(2), pw.div_ceil(2));
        let mut next = vec![0.0; n * nh * nw];
        for p in 0..n {
            for y in 0..nh {
                for x in 0..nw {
                    let mut s = 0.0;
                    let mut cnt = 0.0;
                    for yy in 2 * y..(2 * y + 2).min(ph) {
                        for xx in 2 * x..(2 * x + 2).min(pw) {
                            s += prev[(p * ph + yy) * pw + xx];
                            cnt += 1.0;
                        }
                    }
                    next[(p * nh + y) * nw + x] = s / cnt;
                }
            }
        }
        out.push((next, nh, nw));
    }
    out
}

/// Bilinear read of an `h×w` plane at `(x, y)`, zero outside; corners are
/// visited top-left, top-right, bottom-left, bottom-right.
pub fn bilinear(plane: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let mut s = 0.0;
    for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        let (xx, yy) = (x0 + dx, y0 + dy);
        if xx < 0.0 || yy < 0.0 || xx >= w as f64 || yy >= h as f64 {
            continue;
        }
        let wx = if dx == 0.0 { 1.0 - fx } else { fx };
        let wy = if dy == 0.0 { 1.0 - fy } else { fy };
        s += wx * wy * plane[yy as usize * w + xx as usize];
    }
    s
}

/// Windowed lookup: for every source pixel `p` and level `l`, samples the
/// level's cost map at `(p + flow(p)) · 2^-l + (dx, dy)`.
pub fn lookup(pyr: &[(Vec<f64>, usize, usize)], flow: &[f64], h: usize, w: usize, r: usize) -> Vec<f64> {
    let n = h * w;
    let side = 2 * r + 1;
    let win = side * side;
    let mut out = vec![0.0; pyr.len() * win * n];
    for (l, (vol, lh, lw)) in pyr.iter().enumerate() {
        let s = 1.0 / (1u64 << l) as f64;
        for p in 0..n {
            let cx = ((p % w) as f64 + flow[p]) * s;
            let cy = ((p / w) as f64 + flow[n + p]) * s;
            let map = &vol[p * lh * lw..(p + 1) * lh * lw];
            for q in 0..win {
                let dy = (q / side) as f64 - r as f64;
                let dx = (q % side) as f64 - r as f64;
                out[(l * win + q) * n + p] = bilinear(map, *lh, *lw, cx + dx, cy + dy);
            }
        }
    }
    out
}

/// Pixel→node assignment and normalized nodes, from explicit loops.
/// Returns `(proj N×K, nodes C×K)`.
pub fn embed_nodes(f: &[f64], c: usize, h: usize, w: usize, convs: &ProjectionConvs<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = h * w;
    let w1 = convs.first.weight.to_vec();
    let b1 = convs.first.bias.to_vec();
    let mid = convs.first.c_out();
    let (hid, _, _) = conv2d(f, (c, h, w), &w1, mid, 1, Some(&b1), 1, 0);
    let hid: Vec<f64> = hid.iter().map(|v| v.max(0.0)).collect();
    let w2 = convs.second.weight.to_vec();
    let b2 = convs.second.bias.to_vec();
    let k = convs.second.c_out();
    let (logits, _, _) = conv2d(&hid, (mid, h, w), &w2, k, 1, Some(&b2), 1, 0);
    let proj = softmax_rows(&transpose(&logits, k, n), n, k);
    let raw = matmul(f, &proj, c, n, k);
    let mut nodes = raw.clone();
    for j in 0..k {
        let mut sq = 0.0;
        for ch in 0..c {
            sq += raw[ch * k + j] * raw[ch * k + j];
        }
        let d = sq.sqrt().max(1e-12);
        for ch in 0..c {
            nodes[ch * k + j] = raw[ch * k + j] / d;
        }
    }
    (proj, nodes)
}

/// `relu(A vᵀ W)ᵀ` for `v` `C×K`, `A` `K×K`, `W` `C×C`.
pub fn gcn_step(v: &[f64], a: &[f64], wt: &[f64], c: usize, k: usize) -> Vec<f64> {
    let avt = matmul(a, &transpose(v, c, k), k, k, c);
    let y: Vec<f64> = matmul(&avt, wt, k, c, c).iter().map(|x| x.max(0.0)).collect();
    transpose(&y, k, c)
}

/// `v̂ · projᵀ` reshaped to `C×h×w`.
pub fn readout(v: &[f64], proj: &[f64], c: usize, k: usize, n: usize) -> Vec<f64> {
    matmul(v, &transpose(proj, n, k), c, k, n)
}

/// `(epe, f1_all %)` over pixels valid in `gt`.
pub fn metrics(pred: &FlowField, gt: &FlowField, tau: f64) -> (f64, f64) {
    let n = gt.height * gt.width;
    let (mut s, mut bad, mut cnt) = (0.0, 0usize, 0usize);
    for i in 0..n {
        if let Some(m) = &gt.valid {
            if !m[i] {
                continue;
            }
        }
        let du = f64::from(pred.data[i]) - f64::from(gt.data[i]);
        let dv = f64::from(pred.data[n + i]) - f64::from(gt.data[n + i]);
        let e = (du * du + dv * dv).sqrt();
        s += e;
        if e > tau {
            bad += 1;
        }
        cnt += 1;
    }
    (s / cnt as f64, 100.0 * bad as f64 / cnt as f64)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i * n + j].powi(2)).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Random flow field with values in `[-scale, scale)`.
pub fn random_flow(rng: &mut ChaCha8Rng, h: usize, w: usize, scale: f32) -> FlowField {
    let data = (0..2 * h * w).map(|_| rng.gen_range(-scale..scale)).collect();
    FlowField::new(h, w, data).unwrap()
}
