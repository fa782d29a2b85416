//! Recurrent all-pairs matching network hosting the graph reasoning block.
//!
//! Per image pair: a shared feature encoder runs on both frames, a context
//! encoder on the first; a 4-level correlation pyramid is built once. Each
//! refinement iteration looks up costs around the current flow, encodes
//! motion, fuses it with context through [`AgrParams`], updates a ConvGRU
//! and adds the predicted increment to the flow.

mod blocks;
pub mod checkpoint;
mod corr;
pub mod optim;

use std::fmt;

pub use blocks::{upsample_flow, ConvGru, Encoder, FlowHead, GruStep, MotionEncoder, ResidualBlock};
pub use corr::{build_corr_pyramid, coords_grid, CorrelationPyramid};

use crate::error::{Error, Result};
use crate::graph::{agr_flops, AgrConfig, AgrParams, GraphMode};
use crate::nn::{Init, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Network hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Matching feature channels `c_f`.
    pub feature_channels: usize,
    /// Context/motion channels `c` (also node channels and GRU width).
    pub channels: usize,
    /// Graph nodes `K`.
    pub nodes: usize,
    pub context_steps: usize,
    pub motion_steps: usize,
    /// Refinement iterations `T`.
    pub iters: usize,
    /// Lookup radius; windows are `(2r+1)²`.
    pub radius: usize,
    /// Encoder downsampling factor `d` (power of two).
    pub downsample: usize,
    pub levels: usize,
    pub attention_reduction: usize,
    pub graph: GraphMode,
    pub seed: u64,
}

impl Default for ModelConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        ModelConfig {
            feature_channels: 64,
            channels: 64,
            nodes: 16,
            context_steps: 2,
            motion_steps: 1,
            iters: 6,
            radius: 4,
            downsample: 4,
            levels: 4,
            attention_reduction: 4,
            graph: GraphMode::Agr,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Full-size dimensions (`c = C = K = 128`, `c_f = 256`, `d = 8`), used
    /// for parameter and FLOP accounting.
    pub fn full_scale() -> Self {
        ModelConfig {
            feature_channels: 256,
            channels: 128,
            nodes: 128,
            iters: 12,
            downsample: 8,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feature_channels", self.feature_channels),
            ("channels", self.channels),
            ("nodes", self.nodes),
            ("context_steps", self.context_steps),
            ("motion_steps", self.motion_steps),
            ("iters", self.iters),
            ("downsample", self.downsample),
            ("levels", self.levels),
            ("attention_reduction", self.attention_reduction),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.downsample.is_power_of_two() {
            return Err(Error::Config(format!("downsample {} must be a power of two", self.downsample)));
        }
        Ok(())
    }

    pub fn agr(&self) -> AgrConfig {
        AgrConfig {
            channels: self.channels,
            nodes: self.nodes,
            context_steps: self.context_steps,
            motion_steps: self.motion_steps,
            reduction: self.attention_reduction,
            mode: self.graph,
        }
    }

    pub fn corr_channels(&self) -> usize {
        self.levels * (2 * self.radius + 1).pow(2)
    }

    pub fn check_image_size(&self, h: usize, w: usize) -> Result<()> {
        if h == 0 || w == 0 || h % self.downsample != 0 || w % self.downsample != 0 {
            return Err(Error::Config(format!(
                "image extents {h}×{w} not divisible by downsample factor {}",
                self.downsample
            )));
        }
        Ok(())
    }
}

/// Context encoder output.
#[derive(Clone, Debug)]
pub struct ContextFeatures<T: Scalar> {
    /// `f_c`, `c×h×w`, ReLU-activated.
    pub features: Tensor<T>,
    /// Initial GRU state, tanh-activated.
    pub hidden: Tensor<T>,
}

/// The full flow network with its parameter registry.
pub struct FlowModel<T: Scalar> {
    pub cfg: ModelConfig,
    pub params: ParamStore<T>,
    pub fnet: Encoder<T>,
    pub cnet: Encoder<T>,
    pub menc: MotionEncoder<T>,
    pub agr: AgrParams<T>,
    pub gru: ConvGru<T>,
    pub head: FlowHead<T>,
}

impl<T: Scalar> FlowModel<T> {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::default();
        let mut init = Init::new(&mut params, cfg.seed);
        let c = cfg.channels;
        let fnet = Encoder::new(&mut init, "fnet", cfg.feature_channels, cfg.downsample);
        let cnet = Encoder::new(&mut init, "cnet", 2 * c, cfg.downsample);
        let menc = MotionEncoder::new(&mut init, "menc", cfg.corr_channels(), c);
        let agr = AgrParams::new(&mut init, "agr", cfg.agr());
        let gru = ConvGru::new(&mut init, "gru", c, 2 * c);
        let head = FlowHead::new(&mut init, "head", c);
        Ok(FlowModel {
            cfg,
            params,
            fnet,
            cnet,
            menc,
            agr,
            gru,
            head,
        })
    }

    pub fn encode_features(&self, i1: &Tensor<T>, i2: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        if i1.shape() != i2.shape() {
            return Err(Error::dim("encode_features", i1.shape(), i2.shape()));
        }
        Ok((self.fnet.forward(i1)?, self.fnet.forward(i2)?))
    }

    pub fn encode_context(&self, i1: &Tensor<T>) -> Result<ContextFeatures<T>> {
        let out = self.cnet.forward(i1)?;
        let c = self.cfg.channels;
        Ok(ContextFeatures {
            hidden: out.narrow(0, 0, c)?.tanh(),
            features: out.narrow(0, c, c)?.relu(),
        })
    }

    /// One upsampled prediction per refinement iteration, each `2×H×W`.
    pub fn forward(&self, i1: &Tensor<T>, i2: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let s = i1.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(Error::contract("forward", format!("expected 3×H×W image, got {s:?}")));
        }
        self.cfg.check_image_size(s[1], s[2])?;
        let (f1, f2) = self.encode_features(i1, i2)?;
        let pyramid = build_corr_pyramid(&f1, &f2, self.cfg.levels)?;
        let ctx = self.encode_context(i1)?;
        let context_state = self.agr.prepare_context(&ctx.features)?;

        let (h, w) = (s[1] / self.cfg.downsample, s[2] / self.cfg.downsample);
        let mut hidden = ctx.hidden;
        let mut flow = Tensor::<T>::zeros(&[2, h, w]);
        let mut preds = Vec::with_capacity(self.cfg.iters);
        for _ in 0..self.cfg.iters {
            let corr = pyramid.lookup(&flow, self.cfg.radius)?;
            let motion = self.menc.forward(&corr, &flow)?;
            let fused = self.agr.fuse(&context_state, &motion)?;
            hidden = self.gru.forward(&hidden, &fused)?;
            flow = flow.add(&self.head.forward(&hidden)?)?;
            preds.push(upsample_flow(&flow, self.cfg.downsample)?);
        }
        Ok(preds)
    }

    /// Per-component parameter counts.
    pub fn count_params(&self) -> Breakdown<usize> {
        let mut parts: Vec<(String, usize)> = Vec::new();
        for (name, t) in self.params.iter() {
            let key = component_of(name);
            match parts.iter_mut().find(|(k, _)| *k == key) {
                Some((_, n)) => *n += t.numel(),
                None => parts.push((key, t.numel())),
            }
        }
        Breakdown { parts }
    }

    /// Analytic `2·MAC` totals for one forward pass on `H×W` images.
    pub fn count_flops(&self, h: usize, w: usize) -> Breakdown<u64> {
        let d = self.cfg.downsample;
        let (fh, fw) = (h / d, w / d);
        let n = (fh * fw) as u64;
        let iters = self.cfg.iters as u64;
        let agr = agr_flops(&self.cfg.agr(), fh, fw);
        let parts = vec![
            ("fnet".to_string(), 2 * self.fnet.flops(h, w)),
            ("cnet".to_string(), self.cnet.flops(h, w)),
            ("corr".to_string(), 2 * self.cfg.feature_channels as u64 * n * n),
            ("menc".to_string(), iters * self.menc.flops(fh, fw)),
            ("agr".to_string(), agr.context + iters * agr.per_iteration),
            ("gru".to_string(), iters * self.gru.flops(fh, fw)),
            ("head".to_string(), iters * self.head.flops(fh, fw)),
        ];
        Breakdown { parts }
    }
}

/// `fnet.stage0.down.weight` → `fnet`; `agr.proj_c.0.weight` → `agr.proj_c`.
fn component_of(name: &str) -> String {
    let mut it = name.split('.');
    let first = it.next().unwrap_or_default();
    if first == "agr" {
        match it.next() {
            Some(second) => format!("agr.{second}"),
            None => first.to_string(),
        }
    } else {
        first.to_string()
    }
}

/// Named totals, in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Breakdown<N> {
    pub parts: Vec<(String, N)>,
}

impl<N: Copy + std::iter::Sum<N> + Default> Breakdown<N> {
    pub fn total(&self) -> N {
        self.parts.iter().map(|(_, n)| *n).sum()
    }

    pub fn get(&self, key: &str) -> N {
        self.parts.iter().find(|(k, _)| k == key).map(|(_, n)| *n).unwrap_or_default()
    }

    /// Sum over components whose name starts with `prefix`.
    pub fn prefixed(&self, prefix: &str) -> N {
        self.parts
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, n)| *n)
            .sum()
    }
}

impl<N: fmt::Display> fmt::Display for Breakdown<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, n)) in self.parts.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{k}\t{n}")?;
        }
        Ok(())
    }
}

/// `Σ_i γ^(T−1−i) · mean_valid(|Δu| + |Δv|)`.
///
/// `valid`, when given, is an `H×W` 0/1 mask.
pub fn sequence_loss<T: Scalar>(preds: &[Tensor<T>], gt: &Tensor<T>, valid: Option<&Tensor<T>>, gamma: f64) -> Result<Tensor<T>> {
    if preds.is_empty() {
        return Err(Error::contract("sequence_loss", "no predictions"));
    }
    let s = gt.shape();
    if s.len() != 3 || s[0] != 2 {
        return Err(Error::contract("sequence_loss", format!("ground truth must be 2×H×W, got {s:?}")));
    }
    let count = match valid {
        Some(m) => {
            if m.shape() != [s[1], s[2]] {
                return Err(Error::dim("sequence_loss", s, m.shape()));
            }
            m.data().iter().filter(|&&v| v > T::zero()).count()
        }
        None => s[1] * s[2],
    };
    if count == 0 {
        return Err(Error::contract("sequence_loss", "no valid pixels"));
    }
    let inv = T::one() / T::from_usize(count).expect("count fits");
    let t = preds.len();
    let mut total: Option<Tensor<T>> = None;
    for (i, p) in preds.iter().enumerate() {
        let mut err = p.sub(gt)?.abs();
        if let Some(m) = valid {
            err = err.mul(m)?;
        }
        let weight = T::from_f64_lossy(gamma.powi((t - 1 - i) as i32)) * inv;
        let term = err.sum().scale(weight);
        total = Some(match total {
            Some(acc) => acc.add(&term)?,
            None => term,
        });
    }
    Ok(total.expect("nonempty"))
}
