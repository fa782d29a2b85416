//! Adaptive graph reasoning over context and motion features.
//!
//! Grid features `c×h×w` are softly assigned to `K` graph nodes, reasoned
//! over with a graph convolution, and projected back to the grid with the
//! same assignment matrix. The motion graph's adjacency is produced by a
//! two-layer adapter whose second layer is a `K×K` kernel predicted from the
//! context nodes, so motion relations adapt to each image in one shot.
//!
//! Shapes: node sets are `C×K` (one column per node), assignment matrices
//! are `N×K` with `N = h·w` (one row per pixel, each row a distribution over
//! nodes).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{conv_params, Conv2d, Init};
use crate::tensor::{Scalar, Tensor};

/// Guard for node normalization.
pub const NODE_EPS: f64 = 1e-12;

/// Which reasoning variant to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphMode {
    /// One node type: context and motion features share the projection and
    /// graph weights, both with plain adjacency.
    Base,
    /// Separate context and motion graphs, both with plain adjacency.
    Sgr,
    /// Separate graphs, motion adjacency from the context-driven adapter.
    Agr,
}

impl GraphMode {
    pub const ALL: [GraphMode; 3] = [GraphMode::Base, GraphMode::Sgr, GraphMode::Agr];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphMode::Base => "base",
            GraphMode::Sgr => "sgr",
            GraphMode::Agr => "agr",
        }
    }
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(GraphMode::Base),
            "sgr" => Ok(GraphMode::Sgr),
            "agr" => Ok(GraphMode::Agr),
            other => Err(Error::Config(format!("unknown graph mode `{other}` (expected base|sgr|agr)"))),
        }
    }
}

/// Node embeddings and the pixel→node assignment that produced them.
#[derive(Clone, Debug)]
pub struct NodeSet<T: Scalar> {
    /// `C×K`
    pub nodes: Tensor<T>,
    /// `N×K`, rows sum to one.
    pub proj: Tensor<T>,
    /// `(c, h, w)` of the source grid.
    pub source_shape: (usize, usize, usize),
}

impl<T: Scalar> NodeSet<T> {
    pub fn channels(&self) -> usize {
        self.nodes.shape()[0]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.shape()[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjacencyKind {
    Plain,
    Adapted,
}

/// `K×K` node relation matrix.
#[derive(Clone, Debug)]
pub struct Adjacency<T: Scalar> {
    pub matrix: Tensor<T>,
    pub kind: AdjacencyKind,
}

/// The two convolutions that map `c` grid channels to `K` assignment
/// logits (`c → c/2 → K`, 1×1, ReLU between).
#[derive(Clone)]
pub struct ProjectionConvs<T: Scalar> {
    pub first: Conv2d<T>,
    pub second: Conv2d<T>,
}

impl<T: Scalar> ProjectionConvs<T> {
    pub fn new(init: &mut Init<'_, T>, name: &str, c: usize, k: usize) -> Self {
        let mid = hidden_width(c);
        ProjectionConvs {
            first: init.conv(&format!("{name}.0"), c, mid, 1, 1),
            second: init.conv(&format!("{name}.1"), mid, k, 1, 1),
        }
    }

    fn logits(&self, f: &Tensor<T>) -> Result<Tensor<T>> {
        self.second.forward(&self.first.forward(f)?.relu())
    }
}

fn hidden_width(c: usize) -> usize {
    (c / 2).max(1)
}

/// Weighted node sums `f · proj`, normalized per node.
pub fn project_to_nodes<T: Scalar>(f: &Tensor<T>, proj: &Tensor<T>) -> Result<Tensor<T>> {
    let s = f.shape();
    if s.len() != 3 || proj.rank() != 2 || proj.shape()[0] != s[1] * s[2] {
        return Err(Error::dim("project_to_nodes", s, proj.shape()));
    }
    let flat = f.reshape(&[s[0], s[1] * s[2]])?;
    flat.matmul(proj)?.l2_normalize(0, T::from_f64_lossy(NODE_EPS))
}

/// Soft pixel→node assignment followed by normalized aggregation.
pub fn embed_nodes<T: Scalar>(f: &Tensor<T>, convs: &ProjectionConvs<T>) -> Result<NodeSet<T>> {
    let s = f.shape();
    if s.len() != 3 {
        return Err(Error::contract("embed_nodes", format!("expected c×h×w, got {s:?}")));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let logits = convs.logits(f)?;
    let k = logits.shape()[0];
    let proj = logits.reshape(&[k, h * w])?.t()?.softmax(1)?;
    let nodes = project_to_nodes(f, &proj)?;
    Ok(NodeSet {
        nodes,
        proj,
        source_shape: (c, h, w),
    })
}

/// `A = vᵀ v`
pub fn build_adjacency<T: Scalar>(v: &NodeSet<T>) -> Result<Adjacency<T>> {
    Ok(Adjacency {
        matrix: v.nodes.t()?.matmul(&v.nodes)?,
        kind: AdjacencyKind::Plain,
    })
}

/// One graph convolution: `relu(A · vᵀ · w)`, returned as `C×K`.
pub fn gcn_step<T: Scalar>(v: &Tensor<T>, adj: &Adjacency<T>, weight: &Tensor<T>) -> Result<Tensor<T>> {
    let (vs, a) = (v.shape(), adj.matrix.shape());
    if vs.len() != 2 || a != [vs[1], vs[1]] {
        return Err(Error::dim("gcn_step", vs, a));
    }
    if weight.shape() != [vs[0], vs[0]] {
        return Err(Error::dim("gcn_step", vs, weight.shape()));
    }
    adj.matrix.matmul(&v.t()?)?.matmul(weight)?.relu().t()
}

fn iterate_gcn<T: Scalar>(v: &Tensor<T>, adj: &Adjacency<T>, weight: &Tensor<T>, steps: usize, op: &'static str) -> Result<Tensor<T>> {
    if steps == 0 {
        return Err(Error::contract(op, "at least one reasoning step is required"));
    }
    let mut out = v.clone();
    for _ in 0..steps {
        out = gcn_step(&out, adj, weight)?;
    }
    Ok(out)
}

/// Context reasoning: adjacency from the initial nodes, `steps` GCN passes.
pub fn reason_context<T: Scalar>(v_c: &NodeSet<T>, weight: &Tensor<T>, steps: usize) -> Result<Tensor<T>> {
    let adj = build_adjacency(v_c)?;
    iterate_gcn(&v_c.nodes, &adj, weight, steps, "reason_context")
}

/// Motion reasoning over a given (usually adapted) adjacency.
pub fn reason_motion<T: Scalar>(v_m: &NodeSet<T>, adj: &Adjacency<T>, weight: &Tensor<T>, steps: usize) -> Result<Tensor<T>> {
    iterate_gcn(&v_m.nodes, adj, weight, steps, "reason_motion")
}

/// Treats a `C×K` node matrix as a `C×1×K` image so channel convolutions
/// apply per node.
fn node_conv<T: Scalar>(conv: &Conv2d<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, k) = (v.shape()[0], v.shape()[1]);
    let y = conv.forward(&v.reshape(&[c, 1, k])?)?;
    y.reshape(&[y.shape()[0], k])
}

/// Parameter learner: channel projection `C → K` over the context nodes,
/// softmax over the last axis. Row `i` is the `i`-th output row of the
/// adapter's second layer.
pub fn predict_adapter_kernel<T: Scalar>(v_c: &Tensor<T>, theta: &Conv2d<T>) -> Result<Tensor<T>> {
    let logits = node_conv(theta, v_c)?;
    let k = v_c.shape()[1];
    if logits.shape() != [k, k] {
        return Err(Error::dim("predict_adapter_kernel", v_c.shape(), theta.weight.shape()));
    }
    logits.softmax(1)
}

/// Context-to-motion adapter: `v' = relu(W₁ v_m + b₁) · kernel`,
/// `Ǎ = v'ᵀ v'`.
pub fn graph_adapter<T: Scalar>(v_m: &NodeSet<T>, kernel: &Tensor<T>, layer1: &Conv2d<T>) -> Result<Adjacency<T>> {
    let k = v_m.num_nodes();
    if kernel.shape() != [k, k] {
        return Err(Error::dim("graph_adapter", v_m.nodes.shape(), kernel.shape()));
    }
    let hidden = node_conv(layer1, &v_m.nodes)?.relu();
    let adapted = hidden.matmul(kernel)?;
    Ok(Adjacency {
        matrix: adapted.t()?.matmul(&adapted)?,
        kind: AdjacencyKind::Adapted,
    })
}

/// Node→pixel projection reusing the embedding's assignment matrix.
pub fn readout<T: Scalar>(v_hat: &Tensor<T>, proj: &Tensor<T>, source_shape: (usize, usize, usize)) -> Result<Tensor<T>> {
    let (_, h, w) = source_shape;
    if v_hat.rank() != 2 || proj.shape() != [h * w, v_hat.shape()[1]] {
        return Err(Error::dim("readout", v_hat.shape(), proj.shape()));
    }
    let c = v_hat.shape()[0];
    v_hat.matmul(&proj.t()?)?.reshape(&[c, h, w])
}

/// `f + gate · r`
pub fn residual_merge<T: Scalar>(f: &Tensor<T>, r: &Tensor<T>, gate: &Tensor<T>) -> Result<Tensor<T>> {
    if f.shape() != r.shape() {
        return Err(Error::dim("residual_merge", f.shape(), r.shape()));
    }
    f.add(&gate.mul(r)?)
}

/// Channel attention: global average pool, two 1×1 convs (ReLU, sigmoid).
#[derive(Clone)]
pub struct ChannelAttention<T: Scalar> {
    pub squeeze: Conv2d<T>,
    pub excite: Conv2d<T>,
}

impl<T: Scalar> ChannelAttention<T> {
    pub fn new(init: &mut Init<'_, T>, name: &str, c: usize, reduction: usize) -> Self {
        let mid = reduced_width(c, reduction);
        ChannelAttention {
            squeeze: init.conv(&format!("{name}.0"), c, mid, 1, 1),
            excite: init.conv(&format!("{name}.1"), mid, c, 1, 1),
        }
    }

    /// Per-channel scales in `(0, 1)`, shape `[C]`.
    pub fn scales(&self, f: &Tensor<T>) -> Result<Tensor<T>> {
        let s = f.shape();
        let pooled = f.reshape(&[s[0], s[1] * s[2]])?.mean_axis(1)?.reshape(&[s[0], 1, 1])?;
        let z = self.excite.forward(&self.squeeze.forward(&pooled)?.relu())?.sigmoid();
        z.reshape(&[s[0]])
    }
}

fn reduced_width(c: usize, reduction: usize) -> usize {
    (c / reduction.max(1)).max(1)
}

/// `concat((1 + s)·f̂_c, f̂_m)` with `s = F_CA(f̂_m)`.
pub fn attentive_fuse<T: Scalar>(f_c: &Tensor<T>, f_m: &Tensor<T>, ca: &ChannelAttention<T>) -> Result<Tensor<T>> {
    if f_c.shape() != f_m.shape() || f_c.rank() != 3 {
        return Err(Error::dim("attentive_fuse", f_c.shape(), f_m.shape()));
    }
    let s = ca.scales(f_m)?.add_scalar(T::one());
    Tensor::concat(&[f_c.scale_channels(&s)?, f_m.clone()], 0)
}

/// Hyperparameters of the reasoning block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgrConfig {
    /// Grid and node channels (`C = c`).
    pub channels: usize,
    pub nodes: usize,
    pub context_steps: usize,
    pub motion_steps: usize,
    /// Channel-attention reduction ratio.
    pub reduction: usize,
    pub mode: GraphMode,
}

impl Default for AgrConfig {
    fn default() -> Self {
        AgrConfig {
            channels: 128,
            nodes: 128,
            context_steps: 2,
            motion_steps: 1,
            reduction: 4,
            mode: GraphMode::Agr,
        }
    }
}

/// Adapter weights: channel-wise first layer and the kernel learner.
#[derive(Clone)]
pub struct AdapterParams<T: Scalar> {
    pub layer1: Conv2d<T>,
    pub theta: Conv2d<T>,
}

/// All learned state of the reasoning block.
#[derive(Clone)]
pub struct AgrParams<T: Scalar> {
    pub cfg: AgrConfig,
    pub proj_context: ProjectionConvs<T>,
    pub gcn_context: Tensor<T>,
    /// `None` in [`GraphMode::Base`], where the context weights are shared.
    pub proj_motion: Option<ProjectionConvs<T>>,
    pub gcn_motion: Option<Tensor<T>>,
    pub adapter: Option<AdapterParams<T>>,
    pub alpha: Tensor<T>,
    pub beta: Tensor<T>,
    pub attention: ChannelAttention<T>,
}

impl<T: Scalar> AgrParams<T> {
    /// Registers parameters under `prefix` (e.g. `agr`). Gates start at 0.
    pub fn new(init: &mut Init<'_, T>, prefix: &str, cfg: AgrConfig) -> Self {
        let (c, k) = (cfg.channels, cfg.nodes);
        let separate = cfg.mode != GraphMode::Base;
        let proj_context = ProjectionConvs::new(init, &format!("{prefix}.proj_c"), c, k);
        let gcn_context = init.matrix(&format!("{prefix}.gcn_c"), c, c);
        let proj_motion = separate.then(|| ProjectionConvs::new(init, &format!("{prefix}.proj_m"), c, k));
        let gcn_motion = separate.then(|| init.matrix(&format!("{prefix}.gcn_m"), c, c));
        let adapter = (cfg.mode == GraphMode::Agr).then(|| AdapterParams {
            layer1: init.conv(&format!("{prefix}.adapter.layer1"), c, c, 1, 1),
            theta: init.conv(&format!("{prefix}.adapter.theta"), c, k, 1, 1),
        });
        AgrParams {
            cfg,
            proj_context,
            gcn_context,
            proj_motion,
            gcn_motion,
            adapter,
            alpha: init.constant(&format!("{prefix}.alpha"), &[1], 0.0),
            beta: init.constant(&format!("{prefix}.beta"), &[1], 0.0),
            attention: ChannelAttention::new(init, &format!("{prefix}.ca"), c, cfg.reduction),
        }
    }

    fn motion_proj(&self) -> &ProjectionConvs<T> {
        self.proj_motion.as_ref().unwrap_or(&self.proj_context)
    }

    fn motion_gcn(&self) -> &Tensor<T> {
        self.gcn_motion.as_ref().unwrap_or(&self.gcn_context)
    }

    /// Context side of the block; depends only on `f_c`, so it is computed
    /// once per image pair.
    pub fn prepare_context(&self, f_c: &Tensor<T>) -> Result<ContextState<T>> {
        let v_c = embed_nodes(f_c, &self.proj_context)?;
        let v_hat = reason_context(&v_c, &self.gcn_context, self.cfg.context_steps)?;
        let kernel = match &self.adapter {
            Some(a) => Some(predict_adapter_kernel(&v_hat, &a.theta)?),
            None => None,
        };
        let back = readout(&v_hat, &v_c.proj, v_c.source_shape)?;
        let enhanced = residual_merge(f_c, &back, &self.alpha)?;
        Ok(ContextState {
            enhanced,
            kernel,
            nodes: v_c,
        })
    }

    /// Motion side plus fusion, run every refinement iteration.
    pub fn fuse(&self, ctx: &ContextState<T>, f_m: &Tensor<T>) -> Result<Tensor<T>> {
        let enhanced_m = self.enhance_motion(ctx, f_m)?;
        attentive_fuse(&ctx.enhanced, &enhanced_m, &self.attention)
    }

    /// `f̂_m`
    pub fn enhance_motion(&self, ctx: &ContextState<T>, f_m: &Tensor<T>) -> Result<Tensor<T>> {
        let v_m = embed_nodes(f_m, self.motion_proj())?;
        let adj = match (&self.adapter, &ctx.kernel) {
            (Some(a), Some(kernel)) => graph_adapter(&v_m, kernel, &a.layer1)?,
            _ => build_adjacency(&v_m)?,
        };
        let v_hat = reason_motion(&v_m, &adj, self.motion_gcn(), self.cfg.motion_steps)?;
        let back = readout(&v_hat, &v_m.proj, v_m.source_shape)?;
        residual_merge(f_m, &back, &self.beta)
    }

    /// `f_o = F_G(f_c, f_m)`, shape `2C×h×w`.
    pub fn forward(&self, f_c: &Tensor<T>, f_m: &Tensor<T>) -> Result<Tensor<T>> {
        let ctx = self.prepare_context(f_c)?;
        self.fuse(&ctx, f_m)
    }
}

/// Cached context-side results.
#[derive(Clone, Debug)]
pub struct ContextState<T: Scalar> {
    /// `f̂_c`
    pub enhanced: Tensor<T>,
    /// Adapter kernel `Θ(v̂_c)`, present in [`GraphMode::Agr`].
    pub kernel: Option<Tensor<T>>,
    pub nodes: NodeSet<T>,
}

/// Closed-form parameter counts of the reasoning block, by part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgrParamCount {
    pub projections: usize,
    pub gcn: usize,
    pub adapter: usize,
    pub attention: usize,
    pub gates: usize,
}

impl AgrParamCount {
    pub fn total(&self) -> usize {
        self.projections + self.gcn + self.adapter + self.attention + self.gates
    }
}

/// Parameter count of the reasoning block computed from its dimensions
/// alone.
pub fn agr_param_count(cfg: &AgrConfig) -> AgrParamCount {
    let (c, k) = (cfg.channels, cfg.nodes);
    let graphs = if cfg.mode == GraphMode::Base { 1 } else { 2 };
    let mid = hidden_width(c);
    AgrParamCount {
        projections: graphs * (conv_params(c, mid, 1) + conv_params(mid, k, 1)),
        gcn: graphs * c * c,
        adapter: if cfg.mode == GraphMode::Agr {
            adapter_param_count(c, k)
        } else {
            0
        },
        attention: {
            let r = reduced_width(c, cfg.reduction);
            conv_params(c, r, 1) + conv_params(r, c, 1)
        },
        gates: 2,
    }
}

/// Adapter first layer (`C→C`) plus kernel learner (`C→K`), both biased.
pub fn adapter_param_count(c: usize, k: usize) -> usize {
    conv_params(c, c, 1) + conv_params(c, k, 1)
}

/// Analytic `2·MAC` counts of the reasoning block on an `h×w` grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgrFlops {
    /// Context side, once per image pair.
    pub context: u64,
    /// Motion side and fusion, per refinement iteration.
    pub per_iteration: u64,
}

pub fn agr_flops(cfg: &AgrConfig, h: usize, w: usize) -> AgrFlops {
    let (c, k, n) = (cfg.channels as u64, cfg.nodes as u64, (h * w) as u64);
    let mid = hidden_width(cfg.channels) as u64;
    let embed = 2 * n * (c * mid + mid * k) + 2 * c * n * k;
    let adjacency = 2 * k * c * k;
    let gcn = 2 * k * k * c + 2 * k * c * c;
    let read = 2 * c * k * n;
    let context = embed
        + adjacency
        + cfg.context_steps as u64 * gcn
        + read
        + if cfg.mode == GraphMode::Agr { 2 * k * c * k } else { 0 };
    let motion_adjacency = if cfg.mode == GraphMode::Agr {
        // layer 1, kernel product, Gram matrix
        2 * c * c * k + 2 * c * k * k + 2 * k * c * k
    } else {
        adjacency
    };
    let r = reduced_width(cfg.channels, cfg.reduction) as u64;
    let attention = 2 * (c * r + r * c);
    AgrFlops {
        context,
        per_iteration: embed + motion_adjacency + cfg.motion_steps as u64 * gcn + read + attention,
    }
}
