//! Parameter registry and the few layer types the networks are built from.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Named trainable tensors in registration order.
pub struct ParamStore<T: Scalar> {
    params: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            params: IndexMap::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Scalar count of all parameters whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.numel())
            .sum()
    }

    pub fn zero_grad(&self) {
        for p in self.params.values() {
            p.zero_grad();
        }
    }

    /// Overwrites the values of `name`, checking the shape.
    pub fn assign(&self, name: &str, shape: &[usize], values: &[T]) -> Result<()> {
        let p = self.params.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))?;
        if p.shape() != shape {
            return Err(Error::ParamShape {
                name: name.to_string(),
                expected: p.shape().to_vec(),
                found: shape.to_vec(),
            });
        }
        p.data_mut().copy_from_slice(values);
        Ok(())
    }

    fn register(&mut self, name: String, t: Tensor<T>) -> Tensor<T> {
        assert!(!self.params.contains_key(&name), "duplicate parameter {name}");
        self.params.insert(name, t.clone());
        t
    }
}

/// Seeded parameter factory. Values are drawn in `f64` and rounded to `T`,
/// so the same seed yields the same network at either precision.
pub struct Init<'a, T: Scalar> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<'a, T: Scalar> Init<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, seed: u64) -> Self {
        Init {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Tensor<T> {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64_lossy(self.rng.gen_range(-bound..=bound)))
            .collect();
        let t = Tensor::param(shape, data).expect("valid parameter shape");
        self.store.register(name.to_string(), t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Tensor<T> {
        let n = shape.iter().product();
        let t = Tensor::param(shape, vec![T::from_f64_lossy(value); n]).expect("valid parameter shape");
        self.store.register(name.to_string(), t)
    }

    /// Square matrix with fan-in scaled uniform entries.
    pub fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Tensor<T> {
        let bound = 1.0 / (rows as f64).sqrt();
        self.uniform(name, &[rows, cols], bound)
    }

    pub fn conv(&mut self, name: &str, c_in: usize, c_out: usize, k: usize, stride: usize) -> Conv2d<T> {
        let bound = 1.0 / ((c_in * k * k) as f64).sqrt();
        let weight = self.uniform(&format!("{name}.weight"), &[c_out, c_in, k, k], bound);
        let bias = self.uniform(&format!("{name}.bias"), &[c_out], bound);
        Conv2d {
            weight,
            bias,
            stride,
            pad: k / 2,
        }
    }
}

/// Convolution with "same" padding for odd kernels.
#[derive(Clone)]
pub struct Conv2d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv2d(&self.weight, Some(&self.bias), self.stride, self.pad)
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }

    /// `2·MACs` at an input of `h×w`.
    pub fn flops(&self, h: usize, w: usize) -> u64 {
        let k = self.kernel();
        conv_flops(self.c_in(), self.c_out(), k, out_extent(h, k, self.stride, self.pad), out_extent(w, k, self.stride, self.pad))
    }
}

pub fn out_extent(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad - k) / stride + 1
}

/// `2 · C_out · C_in · k² · H' · W'` (bias adds excluded).
pub fn conv_flops(c_in: usize, c_out: usize, k: usize, h_out: usize, w_out: usize) -> u64 {
    2 * (c_out * c_in * k * k * h_out * w_out) as u64
}

/// Closed-form parameter count of a biased `k×k` convolution.
pub fn conv_params(c_in: usize, c_out: usize, k: usize) -> usize {
    c_out * c_in * k * k + c_out
}
