//! Images, flow fields, synthetic pairs, file formats and metrics.

pub mod flo;
pub mod manifest;
pub mod metrics;
pub mod ppm;
pub mod synth;
pub mod viz;

pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use manifest::{write_dataset, Dataset, PairRecord, Sample};
pub use metrics::{epe, f1_all, f1_all_with, EvalResult, F1Criterion, PairScore};
pub use synth::{gen_pair, Motion, SyntheticPair, SyntheticSpec, Texture};
pub use ppm::{read_ppm, write_ppm};
pub use viz::flow_to_color;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Planar RGB image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    /// `3×H×W`, row-major per channel.
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::dim("image", &[3, height, width], &[data.len()]));
        }
        Ok(Image { height, width, data })
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let d = self.data.iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect();
        Tensor::from_vec(&[3, self.height, self.width], d).expect("image shape")
    }
}

/// Dense displacement field. `u` is horizontal (positive right), `v`
/// vertical (positive down), both in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    /// `2×H×W`: the `u` plane followed by the `v` plane.
    pub data: Vec<f32>,
    pub valid: Option<Vec<bool>>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 2 * height * width {
            return Err(Error::dim("flow", &[2, height, width], &[data.len()]));
        }
        Ok(FlowField {
            height,
            width,
            data,
            valid: None,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField {
            height,
            width,
            data: vec![0.0; 2 * height * width],
            valid: None,
        }
    }

    pub fn constant(height: usize, width: usize, u: f32, v: f32) -> Self {
        let n = height * width;
        let mut data = vec![u; 2 * n];
        data[n..].fill(v);
        FlowField {
            height,
            width,
            data,
            valid: None,
        }
    }

    pub fn with_valid(mut self, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != self.height * self.width {
            return Err(Error::dim("flow mask", &[self.height, self.width], &[valid.len()]));
        }
        self.valid = Some(valid);
        Ok(self)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// `(u, v)` at flat pixel index `i`.
    pub fn at(&self, i: usize) -> (f32, f32) {
        (self.data[i], self.data[self.pixels() + i])
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid.as_ref().is_none_or(|m| m[i])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let d = self.data.iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect();
        Tensor::from_vec(&[2, self.height, self.width], d).expect("flow shape")
    }

    /// `H×W` 0/1 mask tensor, if a mask is present.
    pub fn mask_tensor<T: Scalar>(&self) -> Option<Tensor<T>> {
        self.valid.as_ref().map(|m| {
            let d = m.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
            Tensor::from_vec(&[self.height, self.width], d).expect("mask shape")
        })
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 2 {
            return Err(Error::contract("flow", format!("expected 2×H×W, got {s:?}")));
        }
        let data = t.data().iter().map(|v| v.to_f64_lossy() as f32).collect();
        FlowField::new(s[1], s[2], data)
    }
}
