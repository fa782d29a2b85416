//! Convolutional building blocks of the recurrent substrate.

use crate::error::{Error, Result};
use crate::nn::{Conv2d, Init};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone)]
pub struct ResidualBlock<T: Scalar> {
    pub a: Conv2d<T>,
    pub b: Conv2d<T>,
}

impl<T: Scalar> ResidualBlock<T> {
    fn new(init: &mut Init<'_, T>, name: &str, c: usize) -> Self {
        ResidualBlock {
            a: init.conv(&format!("{name}.a"), c, c, 3, 1),
            b: init.conv(&format!("{name}.b"), c, c, 3, 1),
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.b.forward(&self.a.forward(x)?.relu())?;
        Ok(x.add(&y)?.relu())
    }
}

#[derive(Clone)]
pub struct Stage<T: Scalar> {
    pub down: Conv2d<T>,
    pub blocks: [ResidualBlock<T>; 2],
}

/// Strided stem per scale, two residual blocks per scale, 1×1 output conv.
#[derive(Clone)]
pub struct Encoder<T: Scalar> {
    pub stages: Vec<Stage<T>>,
    pub out: Conv2d<T>,
    pub downsample: usize,
}

impl<T: Scalar> Encoder<T> {
    /// `downsample` must be a power of two.
    pub fn new(init: &mut Init<'_, T>, name: &str, out_channels: usize, downsample: usize) -> Self {
        let halvings = downsample.trailing_zeros() as usize;
        let n_stages = halvings.max(1);
        let mut c_in = 3;
        let mut stages = Vec::with_capacity(n_stages);
        for i in 0..n_stages {
            let width = (out_channels >> (n_stages - 1 - i)).max(8);
            let stride = if i < halvings { 2 } else { 1 };
            stages.push(Stage {
                down: init.conv(&format!("{name}.stage{i}.down"), c_in, width, 3, stride),
                blocks: [
                    ResidualBlock::new(init, &format!("{name}.stage{i}.res0"), width),
                    ResidualBlock::new(init, &format!("{name}.stage{i}.res1"), width),
                ],
            });
            c_in = width;
        }
        Encoder {
            stages,
            out: init.conv(&format!("{name}.out"), c_in, out_channels, 1, 1),
            downsample,
        }
    }

    /// `3×H×W` image in `[0, 1]` → `C×H/d×W/d`.
    pub fn forward(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        let s = image.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(Error::contract("encoder", format!("expected 3×H×W image, got {s:?}")));
        }
        if s[1] % self.downsample != 0 || s[2] % self.downsample != 0 {
            return Err(Error::Config(format!(
                "image extents {}×{} not divisible by downsample factor {}",
                s[1], s[2], self.downsample
            )));
        }
        let two = T::from_f64_lossy(2.0);
        let mut x = image.scale(two).add_scalar(-T::one());
        for stage in &self.stages {
            x = stage.down.forward(&x)?.relu();
            for b in &stage.blocks {
                x = b.forward(&x)?;
            }
        }
        self.out.forward(&x)
    }

    /// `2·MACs` on an `H×W` input.
    pub fn flops(&self, h: usize, w: usize) -> u64 {
        let (mut h, mut w) = (h, w);
        let mut total = 0;
        for stage in &self.stages {
            total += stage.down.flops(h, w);
            h = crate::nn::out_extent(h, 3, stage.down.stride, 1);
            w = crate::nn::out_extent(w, 3, stage.down.stride, 1);
            for b in &stage.blocks {
                total += b.a.flops(h, w) + b.b.flops(h, w);
            }
        }
        total + self.out.flops(h, w)
    }
}

/// Four convolutions turning correlation samples and the current flow into
/// motion features.
#[derive(Clone)]
pub struct MotionEncoder<T: Scalar> {
    pub corr0: Conv2d<T>,
    pub corr1: Conv2d<T>,
    pub flow0: Conv2d<T>,
    pub out: Conv2d<T>,
}

impl<T: Scalar> MotionEncoder<T> {
    pub fn new(init: &mut Init<'_, T>, name: &str, corr_channels: usize, c: usize) -> Self {
        let fw = (c / 2).max(2);
        MotionEncoder {
            corr0: init.conv(&format!("{name}.corr0"), corr_channels, c, 1, 1),
            corr1: init.conv(&format!("{name}.corr1"), c, c, 3, 1),
            flow0: init.conv(&format!("{name}.flow0"), 2, fw, 3, 1),
            out: init.conv(&format!("{name}.out"), c + fw, c, 3, 1),
        }
    }

    pub fn forward(&self, corr: &Tensor<T>, flow: &Tensor<T>) -> Result<Tensor<T>> {
        let c = self.corr1.forward(&self.corr0.forward(corr)?.relu())?.relu();
        let f = self.flow0.forward(flow)?.relu();
        Ok(self.out.forward(&Tensor::concat(&[c, f], 0)?)?.relu())
    }

    pub fn flops(&self, h: usize, w: usize) -> u64 {
        [&self.corr0, &self.corr1, &self.flow0, &self.out]
            .iter()
            .map(|c| c.flops(h, w))
            .sum()
    }
}

/// Convolutional GRU with 3×3 gates.
#[derive(Clone)]
pub struct ConvGru<T: Scalar> {
    pub update: Conv2d<T>,
    pub reset: Conv2d<T>,
    pub candidate: Conv2d<T>,
}

/// Gate activations of one GRU step, exposed for inspection.
pub struct GruStep<T: Scalar> {
    pub hidden: Tensor<T>,
    pub update_gate: Tensor<T>,
    pub reset_gate: Tensor<T>,
}

impl<T: Scalar> ConvGru<T> {
    pub fn new(init: &mut Init<'_, T>, name: &str, hidden: usize, input: usize) -> Self {
        ConvGru {
            update: init.conv(&format!("{name}.z"), hidden + input, hidden, 3, 1),
            reset: init.conv(&format!("{name}.r"), hidden + input, hidden, 3, 1),
            candidate: init.conv(&format!("{name}.q"), hidden + input, hidden, 3, 1),
        }
    }

    pub fn step(&self, hidden: &Tensor<T>, input: &Tensor<T>) -> Result<GruStep<T>> {
        let hx = Tensor::concat(&[hidden.clone(), input.clone()], 0)?;
        let z = self.update.forward(&hx)?.sigmoid();
        let r = self.reset.forward(&hx)?.sigmoid();
        let rhx = Tensor::concat(&[r.mul(hidden)?, input.clone()], 0)?;
        let q = self.candidate.forward(&rhx)?.tanh();
        self.combine(hidden, &z, &q).map(|h| GruStep {
            hidden: h,
            update_gate: z,
            reset_gate: r,
        })
    }

    /// `h + z·(q − h)`, i.e. `(1 − z)·h + z·q`.
    pub fn combine(&self, hidden: &Tensor<T>, z: &Tensor<T>, q: &Tensor<T>) -> Result<Tensor<T>> {
        hidden.add(&z.mul(&q.sub(hidden)?)?)
    }

    pub fn forward(&self, hidden: &Tensor<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.step(hidden, input)?.hidden)
    }

    pub fn flops(&self, h: usize, w: usize) -> u64 {
        self.update.flops(h, w) + self.reset.flops(h, w) + self.candidate.flops(h, w)
    }
}

/// Two convolutions from the hidden state to a flow increment.
#[derive(Clone)]
pub struct FlowHead<T: Scalar> {
    pub conv0: Conv2d<T>,
    pub conv1: Conv2d<T>,
}

impl<T: Scalar> FlowHead<T> {
    pub fn new(init: &mut Init<'_, T>, name: &str, hidden: usize) -> Self {
        FlowHead {
            conv0: init.conv(&format!("{name}.0"), hidden, hidden, 3, 1),
            conv1: init.conv(&format!("{name}.1"), hidden, 2, 3, 1),
        }
    }

    pub fn forward(&self, hidden: &Tensor<T>) -> Result<Tensor<T>> {
        self.conv1.forward(&self.conv0.forward(hidden)?.relu())
    }

    pub fn flops(&self, h: usize, w: usize) -> u64 {
        self.conv0.flops(h, w) + self.conv1.flops(h, w)
    }
}

/// Bilinear upsampling of a low-resolution flow with displacements scaled
/// by the same factor.
pub fn upsample_flow<T: Scalar>(flow: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    if flow.rank() != 3 || flow.shape()[0] != 2 {
        return Err(Error::contract("upsample_flow", format!("expected 2×h×w, got {:?}", flow.shape())));
    }
    Ok(flow
        .upsample_bilinear(factor)?
        .scale(T::from_usize(factor).expect("factor fits")))
}
