use super::{numel, Scalar, Tensor};
use crate::error::{Error, Result};

/// `(outer, extent, inner)` sizes around `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

fn strip_leading_ones(shape: &[usize]) -> &[usize] {
    let lead = shape.iter().take_while(|&&d| d == 1).count();
    &shape[lead..]
}

/// Resolves broadcasting of `small` into `big`: after dropping leading unit
/// extents, `small` must equal a suffix of `big`.
fn broadcasts_into(big: &[usize], small: &[usize]) -> bool {
    let s = strip_leading_ones(small);
    s.len() <= big.len() && big[big.len() - s.len()..] == *s
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

impl<T: Scalar> Tensor<T> {
    fn binary(&self, other: &Tensor<T>, kind: Binary, op: &'static str) -> Result<Tensor<T>> {
        // `a` is the full-size operand; `b` repeats over it.
        let swap = if self.shape() == other.shape() || broadcasts_into(self.shape(), other.shape()) {
            false
        } else if broadcasts_into(other.shape(), self.shape()) {
            true
        } else {
            return Err(Error::dim(op, self.shape(), other.shape()));
        };
        let (a, b) = if swap { (other, self) } else { (self, other) };
        let out_shape = a.shape().to_vec();
        let data = {
            let ad = a.data();
            let bd = b.data();
            let bl = bd.len();
            ad.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let y = bd[i % bl];
                    let (l, r) = if swap { (y, x) } else { (x, y) };
                    match kind {
                        Binary::Add => l + r,
                        Binary::Sub => l - r,
                        Binary::Mul => l * r,
                    }
                })
                .collect()
        };
        Ok(Tensor::from_op(op, out_shape, data, vec![self.clone(), other.clone()], move |g, p| {
            let (lhs, rhs) = (&p[0], &p[1]);
            // Gradient for an operand, reduced over repeats if it was broadcast.
            let reduce = |full: Vec<T>, target: &Tensor<T>| -> Vec<T> {
                let n = target.numel();
                if full.len() == n {
                    return full;
                }
                let mut acc = vec![T::zero(); n];
                for (i, v) in full.into_iter().enumerate() {
                    acc[i % n] += v;
                }
                acc
            };
            let len = g.len();
            let ld = lhs.data();
            let rd = rhs.data();
            let (ll, rl) = (ld.len(), rd.len());
            let glhs = lhs.requires_grad().then(|| {
                let full: Vec<T> = match kind {
                    Binary::Add | Binary::Sub => g.to_vec(),
                    Binary::Mul => (0..len).map(|i| g[i] * rd[i % rl]).collect(),
                };
                reduce(full, lhs)
            });
            let grhs = rhs.requires_grad().then(|| {
                let full: Vec<T> = match kind {
                    Binary::Add => g.to_vec(),
                    Binary::Sub => g.iter().map(|&v| -v).collect(),
                    Binary::Mul => (0..len).map(|i| g[i] * ld[i % ll]).collect(),
                };
                reduce(full, rhs)
            });
            vec![glhs, grhs]
        }))
    }

    /// Elementwise sum; `other` may broadcast over leading extents.
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, Binary::Add, "add")
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, Binary::Sub, "sub")
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, Binary::Mul, "mul")
    }

    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(T) -> T,
        // derivative from (input, output)
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Tensor<T> {
        let out: Vec<T> = self.data().iter().map(|&x| f(x)).collect();
        let saved = out.clone();
        Tensor::from_op(op, self.shape().to_vec(), out, vec![self.clone()], move |g, p| {
            let x = p[0].data();
            vec![Some(
                g.iter()
                    .zip(x.iter().zip(&saved))
                    .map(|(&gi, (&xi, &yi))| gi * df(xi, yi))
                    .collect(),
            )]
        })
    }

    pub fn scale(&self, s: T) -> Tensor<T> {
        self.unary("scale", |x| x * s, move |_, _| s)
    }

    pub fn add_scalar(&self, s: T) -> Tensor<T> {
        self.unary("add_scalar", |x| x + s, |_, _| T::one())
    }

    pub fn neg(&self) -> Tensor<T> {
        self.scale(-T::one())
    }

    pub fn relu(&self) -> Tensor<T> {
        self.unary(
            "relu",
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary(
            "sigmoid",
            |x| T::one() / (T::one() + (-x).exp()),
            |_, y| y * (T::one() - y),
        )
    }

    pub fn tanh(&self) -> Tensor<T> {
        self.unary("tanh", |x| x.tanh(), |_, y| T::one() - y * y)
    }

    pub fn abs(&self) -> Tensor<T> {
        self.unary("abs", |x| x.abs(), |x, _| {
            if x > T::zero() {
                T::one()
            } else if x < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        })
    }

    pub fn square(&self) -> Tensor<T> {
        self.unary("square", |x| x * x, |x, _| x + x)
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Tensor<T> {
        let s = self.data().iter().copied().sum();
        let n = self.numel();
        Tensor::from_op("sum", vec![1], vec![s], vec![self.clone()], move |g, _| {
            vec![Some(vec![g[0]; n])]
        })
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = T::from_usize(self.numel()).expect("size fits");
        self.sum().scale(T::one() / n)
    }

    /// Sum over `axis`, removing it (a rank-1 input becomes shape `[1]`).
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() {
            return Err(Error::contract("sum_axis", format!("axis {axis} out of range for {:?}", self.shape())));
        }
        let (outer, n, inner) = axis_split(self.shape(), axis);
        let mut out = vec![T::zero(); outer * inner];
        {
            let d = self.data();
            for o in 0..outer {
                for k in 0..n {
                    let base = (o * n + k) * inner;
                    for i in 0..inner {
                        out[o * inner + i] += d[base + i];
                    }
                }
            }
        }
        let mut shape: Vec<usize> = self.shape().to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Tensor::from_op("sum_axis", shape, out, vec![self.clone()], move |g, _| {
            let mut gi = vec![T::zero(); outer * n * inner];
            for o in 0..outer {
                for k in 0..n {
                    let base = (o * n + k) * inner;
                    gi[base..base + inner].copy_from_slice(&g[o * inner..(o + 1) * inner]);
                }
            }
            vec![Some(gi)]
        }))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor<T>> {
        let n = T::from_usize(*self.shape().get(axis).unwrap_or(&1)).expect("size fits");
        Ok(self.sum_axis(axis)?.scale(T::one() / n))
    }

    /// Same data, new shape.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.numel() || shape.contains(&0) {
            return Err(Error::dim("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op("reshape", shape.to_vec(), self.to_vec(), vec![self.clone()], |g, _| {
            vec![Some(g.to_vec())]
        }))
    }

    /// Transpose of a rank-2 tensor.
    pub fn t(&self) -> Result<Tensor<T>> {
        if self.rank() != 2 {
            return Err(Error::contract("transpose", format!("expected rank 2, got {:?}", self.shape())));
        }
        let (r, c) = (self.shape()[0], self.shape()[1]);
        let out = transpose_data(&self.data(), r, c);
        Ok(Tensor::from_op("transpose", vec![c, r], out, vec![self.clone()], move |g, _| {
            vec![Some(transpose_data(g, c, r))]
        }))
    }

    /// Matrix product of rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
            return Err(Error::dim("matmul", a, b));
        }
        let (m, k, n) = (a[0], a[1], b[1]);
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, &self.data(), (k, 1), &other.data(), (n, 1), &mut out, false);
        Ok(Tensor::from_op("matmul", vec![m, n], out, vec![self.clone(), other.clone()], move |g, p| {
            let (lhs, rhs) = (&p[0], &p[1]);
            // dA = G·Bᵀ (m×n · n×k), dB = Aᵀ·G (k×m · m×n)
            let ga = lhs.requires_grad().then(|| {
                let mut ga = vec![T::zero(); m * k];
                T::gemm(m, n, k, g, (n, 1), &rhs.data(), (1, n), &mut ga, false);
                ga
            });
            let gb = rhs.requires_grad().then(|| {
                let mut gb = vec![T::zero(); k * n];
                T::gemm(k, m, n, &lhs.data(), (1, k), g, (n, 1), &mut gb, false);
                gb
            });
            vec![ga, gb]
        }))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() {
            return Err(Error::contract("softmax", format!("axis {axis} out of range for {:?}", self.shape())));
        }
        let (outer, n, inner) = axis_split(self.shape(), axis);
        let mut out = self.to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * n + k) * inner + i;
                let mut mx = T::neg_infinity();
                for k in 0..n {
                    mx = mx.max(out[idx(k)]);
                }
                let mut z = T::zero();
                for k in 0..n {
                    let e = (out[idx(k)] - mx).exp();
                    out[idx(k)] = e;
                    z += e;
                }
                for k in 0..n {
                    out[idx(k)] /= z;
                }
            }
        }
        let saved = out.clone();
        Ok(Tensor::from_op("softmax", self.shape().to_vec(), out, vec![self.clone()], move |g, _| {
            // dx_k = y_k (g_k − Σ_j g_j y_j)
            let mut gi = vec![T::zero(); saved.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |k: usize| (o * n + k) * inner + i;
                    let dot: T = (0..n).map(|k| g[idx(k)] * saved[idx(k)]).sum();
                    for k in 0..n {
                        gi[idx(k)] = saved[idx(k)] * (g[idx(k)] - dot);
                    }
                }
            }
            vec![Some(gi)]
        }))
    }

    /// Divides every slice along `axis` by `max(‖slice‖₂, eps)`.
    pub fn l2_normalize(&self, axis: usize, eps: T) -> Result<Tensor<T>> {
        if axis >= self.rank() {
            return Err(Error::contract("l2_normalize", format!("axis {axis} out of range for {:?}", self.shape())));
        }
        if eps <= T::zero() {
            return Err(Error::contract("l2_normalize", "eps must be positive"));
        }
        let (outer, n, inner) = axis_split(self.shape(), axis);
        let x = self.to_vec();
        let mut norms = vec![T::zero(); outer * inner];
        let mut out = x.clone();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * n + k) * inner + i;
                let sq: T = (0..n).map(|k| x[idx(k)] * x[idx(k)]).sum();
                let nrm = sq.sqrt();
                norms[o * inner + i] = nrm;
                let d = nrm.max(eps);
                for k in 0..n {
                    out[idx(k)] = x[idx(k)] / d;
                }
            }
        }
        let saved = out.clone();
        Ok(Tensor::from_op("l2_normalize", self.shape().to_vec(), out, vec![self.clone()], move |g, _| {
            let mut gi = vec![T::zero(); saved.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |k: usize| (o * n + k) * inner + i;
                    let nrm = norms[o * inner + i];
                    if nrm > eps {
                        // y = x/‖x‖: dx = (g − y (g·y)) / ‖x‖
                        let dot: T = (0..n).map(|k| g[idx(k)] * saved[idx(k)]).sum();
                        for k in 0..n {
                            gi[idx(k)] = (g[idx(k)] - saved[idx(k)] * dot) / nrm;
                        }
                    } else {
                        for k in 0..n {
                            gi[idx(k)] = g[idx(k)] / eps;
                        }
                    }
                }
            }
            vec![Some(gi)]
        }))
    }

    /// Concatenation along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat", "no inputs"))?;
        if axis >= first.rank() {
            return Err(Error::contract("concat", format!("axis {axis} out of range for {:?}", first.shape())));
        }
        for p in &parts[1..] {
            let ok = p.rank() == first.rank()
                && p.shape().iter().zip(first.shape()).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !ok {
                return Err(Error::dim("concat", first.shape(), p.shape()));
            }
        }
        let (outer, _, inner) = axis_split(first.shape(), axis);
        let extents: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = extents.iter().sum();
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        {
            let datas: Vec<_> = parts.iter().map(|p| p.data()).collect();
            for o in 0..outer {
                for (d, &e) in datas.iter().zip(&extents) {
                    out.extend_from_slice(&d[o * e * inner..(o + 1) * e * inner]);
                }
            }
        }
        Ok(Tensor::from_op("concat", shape, out, parts.to_vec(), move |g, p| {
            let mut grads: Vec<Vec<T>> = extents.iter().map(|&e| Vec::with_capacity(outer * e * inner)).collect();
            let mut off = 0;
            for _ in 0..outer {
                for (gv, &e) in grads.iter_mut().zip(&extents) {
                    gv.extend_from_slice(&g[off..off + e * inner]);
                    off += e * inner;
                }
            }
            grads
                .into_iter()
                .zip(p)
                .map(|(gv, t)| t.requires_grad().then_some(gv))
                .collect()
        }))
    }

    /// Sub-range `start..start+len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() || len == 0 || start + len > self.shape()[axis] {
            return Err(Error::contract(
                "narrow",
                format!("range {start}..{} on axis {axis} of {:?}", start + len, self.shape()),
            ));
        }
        let (outer, n, inner) = axis_split(self.shape(), axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        {
            let d = self.data();
            for o in 0..outer {
                let base = (o * n + start) * inner;
                out.extend_from_slice(&d[base..base + len * inner]);
            }
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Ok(Tensor::from_op("narrow", shape, out, vec![self.clone()], move |g, _| {
            let mut gi = vec![T::zero(); outer * n * inner];
            for o in 0..outer {
                let base = (o * n + start) * inner;
                gi[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(gi)]
        }))
    }

    /// Multiplies channel `c` of a `C×…` tensor by `s[c]`.
    pub fn scale_channels(&self, s: &Tensor<T>) -> Result<Tensor<T>> {
        if self.rank() < 1 || s.numel() != self.shape()[0] {
            return Err(Error::dim("scale_channels", self.shape(), s.shape()));
        }
        let ch = self.shape()[0];
        let inner = self.numel() / ch;
        let out: Vec<T> = {
            let x = self.data();
            let sd = s.data();
            x.iter().enumerate().map(|(i, &v)| v * sd[i / inner]).collect()
        };
        Ok(Tensor::from_op("scale_channels", self.shape().to_vec(), out, vec![self.clone(), s.clone()], move |g, p| {
            let gx = p[0].requires_grad().then(|| {
                let sd = p[1].data();
                g.iter().enumerate().map(|(i, &v)| v * sd[i / inner]).collect()
            });
            let gs = p[1].requires_grad().then(|| {
                let x = p[0].data();
                let mut gs = vec![T::zero(); ch];
                for (i, (&gv, &xv)) in g.iter().zip(x.iter()).enumerate() {
                    gs[i / inner] += gv * xv;
                }
                gs
            });
            vec![gx, gs]
        }))
    }
}

pub(crate) fn transpose_data<T: Copy>(d: &[T], r: usize, c: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            out.push(d[i * c + j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_projector() {
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let m = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(eye.matmul(&m).unwrap().to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        let p = t(&[2, 2], &[1.0, 0.0, 0.0, 0.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(p.matmul(&b).unwrap().to_vec(), vec![5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[2, 3]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn f32_matmul_matches_f64() {
        let a: Vec<f32> = (0..12).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..20).map(|i| (i as f32 * 0.11).cos()).collect();
        let ta = Tensor::from_vec(&[3, 4], a.clone()).unwrap();
        let tb = Tensor::from_vec(&[4, 5], b.clone()).unwrap();
        let c = ta.matmul(&tb).unwrap().to_vec();
        for i in 0..3 {
            for j in 0..5 {
                let want: f32 = (0..4).map(|p| a[i * 4 + p] * b[p * 5 + j]).sum();
                assert!((c[i * 5 + j] - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(t(&[2], &[0.0, 0.0]).softmax(0).unwrap().to_vec(), vec![0.5, 0.5]);
        assert_eq!(t(&[2], &[1000.0, 1000.0]).softmax(0).unwrap().to_vec(), vec![0.5, 0.5]);
        let s = t(&[2, 3], &[1.0, 2.0, 3.0, -1.0, 0.0, 5.0]).softmax(1).unwrap().to_vec();
        assert!((s[0] + s[1] + s[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_normalize_cases() {
        let y = t(&[2], &[3.0, 4.0]).l2_normalize(0, 1e-12).unwrap().to_vec();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        assert_eq!(t(&[3], &[0.0; 3]).l2_normalize(0, 1e-12).unwrap().to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn elementwise_cases() {
        assert_eq!(t(&[2], &[-1.0, 2.0]).relu().to_vec(), vec![0.0, 2.0]);
        assert_eq!(t(&[1], &[0.0]).sigmoid().to_vec(), vec![0.5]);
    }

    #[test]
    fn broadcast_over_leading_unit_extents() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[1, 2], &[10.0, 20.0]);
        assert_eq!(a.add(&b).unwrap().to_vec(), vec![11.0, 22.0, 13.0, 24.0]);
        let s = t(&[1], &[2.0]);
        assert_eq!(s.mul(&a).unwrap().to_vec(), vec![2.0, 4.0, 6.0, 8.0]);
        let bad = t(&[2, 1], &[1.0, 2.0]);
        assert!(matches!(a.add(&bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn add_passes_gradient_unchanged() {
        let a = Tensor::<f64>::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let b = Tensor::<f64>::param(&[3], vec![0.5, 0.5, 0.5]).unwrap();
        let w = t(&[3], &[1.0, -2.0, 4.0]);
        a.add(&b).unwrap().mul(&w).unwrap().sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![1.0, -2.0, 4.0]);
        assert_eq!(b.grad().unwrap(), vec![1.0, -2.0, 4.0]);
    }

    #[test]
    fn backward_basic_cases() {
        let x = Tensor::<f64>::param(&[4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let loss = x.sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
        assert_eq!(loss.grad().unwrap(), vec![1.0]);

        x.zero_grad();
        x.square().sum().scale(0.5).backward().unwrap();
        assert_eq!(x.grad().unwrap(), x.to_vec());
    }

    #[test]
    fn backward_contract_errors() {
        let x = Tensor::<f64>::param(&[2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(x.relu().backward(), Err(Error::Contract { .. })));
        let loss = x.sum();
        loss.backward().unwrap();
        assert!(matches!(loss.backward(), Err(Error::Contract { .. })));
        loss.zero_grad();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn fan_out_sums_contributions() {
        let x = Tensor::<f64>::param(&[2], vec![1.5, -0.5]).unwrap();
        let y = x.scale(3.0);
        let loss = y.add(&y).unwrap().add(&x).unwrap().sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![7.0, 7.0]);
    }

    #[test]
    fn no_grad_records_nothing() {
        let x = Tensor::<f64>::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = super::super::no_grad(|| x.relu());
        assert!(!y.requires_grad());
        assert!(x.relu().requires_grad());
    }

    #[test]
    fn concat_and_narrow_round_trip() {
        let a = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2, 2], &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = Tensor::concat(&[a.clone(), b.clone()], 0).unwrap();
        assert_eq!(c.shape(), &[3, 2, 2]);
        assert_eq!(c.narrow(0, 1, 2).unwrap().to_vec(), b.to_vec());
        let d = Tensor::concat(&[a.clone(), a.clone()], 2).unwrap();
        assert_eq!(d.to_vec(), vec![1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0]);
    }
}
