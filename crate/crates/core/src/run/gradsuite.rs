//! Finite-difference checks of every differentiable operation, the graph
//! reasoning block end to end, and a miniature of the whole network.
//!
//! Each case reduces its output to a scalar with a fixed random weighting,
//! `L = Σ out ⊙ R`, so no gradient entry cancels by symmetry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::flow::{build_corr_pyramid, sequence_loss, upsample_flow, ConvGru, FlowHead, FlowModel, ModelConfig, MotionEncoder};
use crate::graph::{
    attentive_fuse, build_adjacency, embed_nodes, gcn_step, graph_adapter, predict_adapter_kernel, readout,
    residual_merge, AgrConfig, AgrParams, ChannelAttention, GraphMode, ProjectionConvs,
};
use crate::nn::{Init, ParamStore};
use crate::tensor::{gradcheck, no_grad, GradCheckOptions, GradReport, Tensor};

/// Tolerance for single operations and the reasoning block.
pub const OP_TOLERANCE: f64 = 1e-4;
/// Tolerance for the whole-network miniature.
pub const MODEL_TOLERANCE: f64 = 1e-3;

/// Dimensions of the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteDims {
    /// Feature / node channels `c = C`.
    pub channels: usize,
    pub nodes: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for SuiteDims {
    fn default() -> Self {
        SuiteDims {
            channels: 4,
            nodes: 3,
            height: 3,
            width: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub name: String,
    pub report: GradReport,
    pub tolerance: f64,
}

impl CaseReport {
    pub fn passes(&self) -> bool {
        self.report.passes(self.tolerance)
    }
}

struct Cases {
    rng: ChaCha8Rng,
    opts: GradCheckOptions,
    out: Vec<CaseReport>,
}

type Named = Vec<(String, Tensor<f64>)>;

impl Cases {
    fn uniform(&mut self, shape: &[usize], lo: f64, hi: f64) -> Vec<f64> {
        let n: usize = shape.iter().product();
        (0..n).map(|_| self.rng.gen_range(lo..hi)).collect()
    }

    fn leaf(&mut self, shape: &[usize]) -> Tensor<f64> {
        self.leaf_in(shape, -1.0, 1.0)
    }

    fn leaf_in(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        let v = self.uniform(shape, lo, hi);
        Tensor::param(shape, v).expect("valid shape")
    }

    fn run<F>(&mut self, name: &str, tolerance: f64, params: Named, f: F) -> Result<()>
    where
        F: Fn() -> Result<Tensor<f64>>,
    {
        let shape = no_grad(&f)?.shape().to_vec();
        let weights = self.uniform(&shape, -1.0, 1.0);
        let r = Tensor::from_vec(&shape, weights)?;
        let report = gradcheck(|| Ok(f()?.mul(&r)?.sum()), &params, &self.opts)?;
        self.out.push(CaseReport {
            name: name.to_string(),
            report,
            tolerance,
        });
        Ok(())
    }

    fn op<F>(&mut self, name: &str, params: &[(&str, &Tensor<f64>)], f: F) -> Result<()>
    where
        F: Fn() -> Result<Tensor<f64>>,
    {
        let named = params.iter().map(|(n, t)| (n.to_string(), (*t).clone())).collect();
        self.run(name, OP_TOLERANCE, named, f)
    }
}

fn store_params(store: &ParamStore<f64>) -> Named {
    store.iter().map(|(n, t)| (n.to_string(), t.clone())).collect()
}

/// Sets every scalar gate (`*.alpha`, `*.beta`) so gated paths carry
/// gradient.
fn open_gates(store: &ParamStore<f64>, alpha: f64, beta: f64) {
    for (name, t) in store.iter() {
        if name.ends_with(".alpha") {
            t.data_mut()[0] = alpha;
        } else if name.ends_with(".beta") {
            t.data_mut()[0] = beta;
        }
    }
}

/// Runs the complete suite. `seed` fixes all inputs and weights.
pub fn gradcheck_suite(dims: SuiteDims, seed: u64) -> Result<Vec<CaseReport>> {
    let mut cases = tensor_cases(dims, seed)?;
    cases.extend(graph_cases(dims, seed)?);
    cases.extend(flow_cases(dims, seed)?);
    cases.push(model_case(seed)?);
    Ok(cases)
}

fn new_cases(seed: u64) -> Cases {
    Cases {
        rng: ChaCha8Rng::seed_from_u64(seed),
        opts: GradCheckOptions::default(),
        out: Vec::new(),
    }
}

/// Elementwise, reduction, shape, linear-algebra, convolution and sampling
/// operations.
pub fn tensor_cases(dims: SuiteDims, seed: u64) -> Result<Vec<CaseReport>> {
    let mut cs = new_cases(seed);
    let (c, h, w) = (dims.channels, dims.height, dims.width);
    let a = cs.leaf(&[c, h, w]);
    let b = cs.leaf(&[c, h, w]);
    let row = cs.leaf(&[h, w]);
    let lane = cs.leaf(&[1, w]);
    let pos = cs.leaf_in(&[c, h, w], 0.5, 2.0);

    cs.op("add", &[("a", &a), ("b", &b)], || a.add(&b))?;
    cs.op("add_broadcast", &[("a", &a), ("row", &row)], || a.add(&row))?;
    cs.op("sub", &[("a", &a), ("b", &b)], || a.sub(&b))?;
    cs.op("mul", &[("a", &a), ("b", &b)], || a.mul(&b))?;
    cs.op("mul_broadcast", &[("a", &a), ("lane", &lane)], || a.mul(&lane))?;
    cs.op("scale", &[("a", &a)], || Ok(a.scale(-1.7)))?;
    cs.op("add_scalar", &[("a", &a)], || Ok(a.add_scalar(0.3)))?;
    cs.op("neg", &[("a", &a)], || Ok(a.neg()))?;
    cs.op("relu", &[("a", &a)], || Ok(a.relu()))?;
    cs.op("sigmoid", &[("a", &a)], || Ok(a.sigmoid()))?;
    cs.op("tanh", &[("a", &a)], || Ok(a.tanh()))?;
    cs.op("abs", &[("a", &a)], || Ok(a.abs()))?;
    cs.op("square", &[("a", &a)], || Ok(a.square()))?;
    cs.op("sum", &[("a", &a)], || Ok(a.sum()))?;
    cs.op("mean", &[("a", &a)], || Ok(a.mean()))?;
    for axis in 0..3 {
        cs.op(&format!("sum_axis{axis}"), &[("a", &a)], || a.sum_axis(axis))?;
        cs.op(&format!("mean_axis{axis}"), &[("a", &a)], || a.mean_axis(axis))?;
        cs.op(&format!("softmax{axis}"), &[("a", &a)], || a.softmax(axis))?;
        cs.op(&format!("l2_normalize{axis}"), &[("pos", &pos)], || pos.l2_normalize(axis, 1e-12))?;
    }
    cs.op("reshape", &[("a", &a)], || a.reshape(&[c, h * w]))?;

    let m = cs.leaf(&[c, h * w]);
    let n = cs.leaf(&[h * w, dims.nodes]);
    cs.op("transpose", &[("m", &m)], || m.t())?;
    cs.op("matmul", &[("m", &m), ("n", &n)], || m.matmul(&n))?;
    cs.op("concat", &[("a", &a), ("b", &b)], || Tensor::concat(&[a.clone(), b.clone()], 0))?;
    cs.op("concat_axis2", &[("a", &a), ("b", &b)], || Tensor::concat(&[a.clone(), b.clone()], 2))?;
    cs.op("narrow", &[("a", &a)], || a.narrow(0, 1, c - 1))?;
    let s = cs.leaf(&[c]);
    cs.op("scale_channels", &[("a", &a), ("s", &s)], || a.scale_channels(&s))?;

    let w3 = cs.leaf(&[3, c, 3, 3]);
    let b3 = cs.leaf(&[3]);
    cs.op("conv3x3", &[("x", &a), ("w", &w3), ("b", &b3)], || a.conv2d(&w3, Some(&b3), 1, 1))?;
    cs.op("conv3x3_stride2", &[("x", &a), ("w", &w3), ("b", &b3)], || a.conv2d(&w3, Some(&b3), 2, 1))?;
    let w1 = cs.leaf(&[2, c, 1, 1]);
    cs.op("conv1x1", &[("x", &a), ("w", &w1)], || a.conv2d(&w1, None, 1, 0))?;
    cs.op("avg_pool2x", &[("a", &a)], || a.avg_pool2x())?;
    cs.op("upsample_bilinear", &[("a", &a)], || a.upsample_bilinear(2))?;

    // Sample positions kept away from integer lattice kinks.
    let coords = {
        let mut v = Vec::with_capacity(2 * h * w);
        for _ in 0..2 * h * w {
            let base = cs.rng.gen_range(-1..(h.max(w) as i32)) as f64;
            v.push(base + cs.rng.gen_range(0.1..0.9));
        }
        Tensor::param(&[2, h, w], v)?
    };
    cs.op("bilinear_sample", &[("img", &a), ("coords", &coords)], || a.bilinear_sample(&coords))?;
    let volume = cs.leaf(&[h * w, h, w]);
    cs.op("window_sample", &[("volume", &volume), ("centers", &coords)], || volume.window_sample(&coords, 1))?;
    Ok(cs.out)
}

/// Graph reasoning stages and the reasoning block end to end.
pub fn graph_cases(dims: SuiteDims, seed: u64) -> Result<Vec<CaseReport>> {
    let mut cs = new_cases(seed ^ 0x9a9a);
    let (c, k, h, w) = (dims.channels, dims.nodes, dims.height, dims.width);
    let f = cs.leaf(&[c, h, w]);
    let g = cs.leaf(&[c, h, w]);

    let mut store = ParamStore::<f64>::default();
    let mut init = Init::new(&mut store, seed);
    let convs = ProjectionConvs::new(&mut init, "proj", c, k);
    let weight = init.matrix("gcn", c, c);
    let theta = init.conv("theta", c, k, 1, 1);
    let layer1 = init.conv("layer1", c, c, 1, 1);
    let ca = ChannelAttention::new(&mut init, "ca", c, 2);
    let gate = init.constant("gate", &[1], 0.6);
    let with = |extra: &[(&str, &Tensor<f64>)], prefixes: &[&str]| -> Named {
        let mut v: Named = extra.iter().map(|(n, t)| (n.to_string(), (*t).clone())).collect();
        v.extend(store_params(&store).into_iter().filter(|(n, _)| prefixes.iter().any(|p| n.starts_with(p))));
        v
    };

    cs.run("embed_nodes", OP_TOLERANCE, with(&[("f", &f)], &["proj"]), || Ok(embed_nodes(&f, &convs)?.nodes))?;
    cs.run("node_assignment", OP_TOLERANCE, with(&[("f", &f)], &["proj"]), || Ok(embed_nodes(&f, &convs)?.proj))?;
    cs.run("adjacency", OP_TOLERANCE, with(&[("f", &f)], &["proj"]), || {
        Ok(build_adjacency(&embed_nodes(&f, &convs)?)?.matrix)
    })?;
    let v = cs.leaf(&[c, k]);
    cs.run("gcn_step", OP_TOLERANCE, with(&[("f", &f), ("v", &v)], &["proj", "gcn"]), || {
        let adj = build_adjacency(&embed_nodes(&f, &convs)?)?;
        gcn_step(&v, &adj, &weight)
    })?;
    cs.run("adapter_kernel", OP_TOLERANCE, with(&[("v", &v)], &["theta"]), || predict_adapter_kernel(&v, &theta))?;
    cs.run("graph_adapter", OP_TOLERANCE, with(&[("f", &f), ("v", &v)], &["proj", "theta", "layer1"]), || {
        let kernel = predict_adapter_kernel(&v, &theta)?;
        Ok(graph_adapter(&embed_nodes(&f, &convs)?, &kernel, &layer1)?.matrix)
    })?;
    cs.run("readout", OP_TOLERANCE, with(&[("f", &f), ("v", &v)], &["proj"]), || {
        let nodes = embed_nodes(&f, &convs)?;
        readout(&v, &nodes.proj, nodes.source_shape)
    })?;
    cs.run("residual_merge", OP_TOLERANCE, with(&[("f", &f), ("g", &g)], &["gate"]), || residual_merge(&f, &g, &gate))?;
    cs.run("attentive_fuse", OP_TOLERANCE, with(&[("f", &f), ("g", &g)], &["ca"]), || attentive_fuse(&f, &g, &ca))?;

    for mode in GraphMode::ALL {
        let mut store = ParamStore::<f64>::default();
        let cfg = AgrConfig {
            channels: c,
            nodes: k,
            context_steps: 2,
            motion_steps: 1,
            reduction: 2,
            mode,
        };
        let block = AgrParams::new(&mut Init::new(&mut store, seed.wrapping_add(1)), "agr", cfg);
        open_gates(&store, 0.7, -0.4);
        let mut params = store_params(&store);
        params.push(("f_c".into(), f.clone()));
        params.push(("f_m".into(), g.clone()));
        cs.run(&format!("agr_block_{mode}"), OP_TOLERANCE, params, || block.forward(&f, &g))?;
    }
    Ok(cs.out)
}

/// Matching-substrate components.
pub fn flow_cases(dims: SuiteDims, seed: u64) -> Result<Vec<CaseReport>> {
    let mut cs = new_cases(seed ^ 0xf10e);
    let (c, h, w) = (dims.channels, dims.height + 1, dims.width + 1);
    let f1 = cs.leaf(&[c, h, w]);
    let f2 = cs.leaf(&[c, h, w]);
    let flow = {
        let mut v = cs.uniform(&[2, h, w], -1.0, 1.0);
        for x in &mut v {
            *x += if *x >= 0.0 { 0.3 } else { -0.3 };
        }
        Tensor::param(&[2, h, w], v)?
    };
    cs.op("corr_pyramid_lookup", &[("f1", &f1), ("f2", &f2), ("flow", &flow)], || {
        build_corr_pyramid(&f1, &f2, 2)?.lookup(&flow, 1)
    })?;

    let mut store = ParamStore::<f64>::default();
    let mut init = Init::new(&mut store, seed);
    let corr_ch = 2 * 9;
    let menc = MotionEncoder::new(&mut init, "menc", corr_ch, c);
    let gru = ConvGru::new(&mut init, "gru", c, 2 * c);
    let head = FlowHead::new(&mut init, "head", c);
    let corr = cs.leaf(&[corr_ch, h, w]);
    let hidden = cs.leaf(&[c, h, w]);
    let input = cs.leaf(&[2 * c, h, w]);
    let part = |prefix: &str, extra: Vec<(&str, &Tensor<f64>)>| -> Named {
        let mut v: Named = extra.into_iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
        v.extend(store_params(&store).into_iter().filter(|(n, _)| n.starts_with(prefix)));
        v
    };
    cs.run("motion_encoder", OP_TOLERANCE, part("menc", vec![("corr", &corr), ("flow", &flow)]), || {
        menc.forward(&corr, &flow)
    })?;
    cs.run("conv_gru", OP_TOLERANCE, part("gru", vec![("hidden", &hidden), ("input", &input)]), || {
        gru.forward(&hidden, &input)
    })?;
    cs.run("flow_head", OP_TOLERANCE, part("head", vec![("hidden", &hidden)]), || head.forward(&hidden))?;
    cs.op("upsample_flow", &[("flow", &flow)], || upsample_flow(&flow, 2))?;

    let gt = Tensor::from_vec(&[2, h, w], cs.uniform(&[2, h, w], -3.0, 3.0))?;
    let mask = Tensor::from_vec(&[h, w], (0..h * w).map(|i| if i % 3 == 0 { 0.0 } else { 1.0 }).collect())?;
    let p2 = cs.leaf(&[2, h, w]);
    cs.op("sequence_loss", &[("p0", &flow), ("p1", &p2)], || {
        sequence_loss(&[flow.clone(), p2.clone()], &gt, Some(&mask), 0.8)
    })?;
    Ok(cs.out)
}

/// Configuration of the whole-network miniature: 8×8 images,
/// `c_f = c = 4`, `K = 3`, two refinement iterations.
pub fn micro_config(seed: u64) -> ModelConfig {
    ModelConfig {
        feature_channels: 4,
        channels: 4,
        nodes: 3,
        iters: 2,
        radius: 1,
        downsample: 4,
        levels: 2,
        attention_reduction: 2,
        graph: GraphMode::Agr,
        seed,
        ..ModelConfig::default()
    }
}

/// Whole-network check on the miniature, loss = sequence loss against a
/// random target. At most 4 entries per parameter tensor are probed.
pub fn model_case(seed: u64) -> Result<CaseReport> {
    let mut cs = new_cases(seed ^ 0x30de1);
    cs.opts.max_entries = Some(4);
    let model = FlowModel::<f64>::new(micro_config(seed))?;
    open_gates(&model.params, 0.5, 0.5);
    let i1 = Tensor::from_vec(&[3, 8, 8], cs.uniform(&[3, 8, 8], 0.0, 1.0))?;
    let i2 = Tensor::from_vec(&[3, 8, 8], cs.uniform(&[3, 8, 8], 0.0, 1.0))?;
    let gt = Tensor::from_vec(&[2, 8, 8], cs.uniform(&[2, 8, 8], -2.0, 2.0))?;
    let params = store_params(&model.params);
    let report = gradcheck(
        || sequence_loss(&model.forward(&i1, &i2)?, &gt, None, 0.8),
        &params,
        &cs.opts,
    )?;
    Ok(CaseReport {
        name: "model_micro".into(),
        report,
        tolerance: MODEL_TOLERANCE,
    })
}

/// Suite output as TSV: `case	max_rel_err	tolerance	status`.
pub fn format_suite(cases: &[CaseReport]) -> String {
    let mut s = String::from("case\tmax_rel_err\ttolerance\tstatus\n");
    for c in cases {
        s.push_str(&format!(
            "{}\t{:.3e}\t{:.0e}\t{}\n",
            c.name,
            c.report.max_rel_err(),
            c.tolerance,
            if c.passes() { "ok" } else { "FAIL" }
        ));
    }
    s
}
