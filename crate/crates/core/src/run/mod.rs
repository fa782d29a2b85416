//! Commands behind the `agflow` binary: dataset generation, training,
//! evaluation, gradient checking, benchmarking and visualization.
//!
//! Every command returns its result as a value and also writes it to disk,
//! so the same functions serve the binary, the examples and the tests.

pub mod config;
pub mod gradsuite;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{GenConfig, Precision, RunConfig};
pub use gradsuite::{gradcheck_suite, CaseReport, SuiteDims};
pub use train::{train, TrainSummary};

use crate::data::manifest::write_dataset;
use crate::data::ppm::write_ppm;
use crate::data::{flow_to_color, gen_pair, read_flo, Dataset, EvalResult, FlowField, Image};
use crate::error::{Error, Result};
use crate::flow::{Breakdown, FlowModel, ModelConfig};
use crate::graph::GraphMode;
use crate::tensor::{no_grad, Scalar, Tensor};
use train::{load_model, TensorSample};

/// Command-line overrides applied on top of a configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub graph: Option<GraphMode>,
    pub precision: Option<Precision>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.model.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(g) = self.graph {
            cfg.model.graph = g;
        }
        if let Some(p) = self.precision {
            cfg.precision = p;
        }
        cfg.validate()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Generates `cfg.pairs` synthetic pairs into `out` (images as PPM, ground
/// truth as `.flo`, masks as PPM, `manifest.tsv`, and the effective spec
/// as `gen_config.txt`).
pub fn cmd_gen(cfg: &GenConfig, out: &Path) -> Result<Dataset> {
    cfg.validate()?;
    let mut pairs = Vec::with_capacity(cfg.pairs);
    for i in 0..cfg.pairs {
        let mut spec = cfg.spec.clone();
        spec.seed = cfg.pair_seed(i);
        pairs.push((format!("pair_{i:04}"), gen_pair(&spec)?));
    }
    let ds = write_dataset(out, &pairs)?;
    write_text(&out.join("gen_config.txt"), &cfg.to_text())?;
    Ok(ds)
}

/// Scores the final refinement iteration of `model` on every pair of
/// `samples`, fanning out over `threads` workers. Results are identical for
/// any thread count.
pub fn evaluate<T: Scalar>(
    model: &FlowModel<T>,
    samples: &[TensorSample<T>],
    threads: usize,
    crit: crate::data::F1Criterion,
) -> Result<EvalResult> {
    let predict = |s: &TensorSample<T>| -> Result<FlowField> {
        no_grad(|| FlowField::from_tensor(model.forward(&s.image1, &s.image2)?.last().expect("iters > 0")))
    };
    let threads = threads.clamp(1, samples.len().max(1));
    let preds: Vec<Result<FlowField>> = if threads == 1 {
        samples.iter().map(predict).collect()
    } else {
        let chunk = samples.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = samples
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(predict).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        })
    };
    let mut result = EvalResult::default();
    for (s, pred) in samples.iter().zip(preds) {
        result.add(s.pair_id.clone(), &pred?, &s.gt, crit)?;
    }
    Ok(result)
}

pub const EVAL_FILE: &str = "eval.tsv";

/// Loads `cfg.checkpoint` (required) and evaluates on `cfg.data`; writes
/// `eval.tsv` into `cfg.out`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalResult> {
    match cfg.precision {
        Precision::F32 => eval_with::<f32>(cfg),
        Precision::F64 => eval_with::<f64>(cfg),
    }
}

fn eval_with<T: Scalar>(cfg: &RunConfig) -> Result<EvalResult> {
    let ck = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("eval needs `checkpoint = <path>`".into()))?;
    let model = load_model::<T>(cfg, ck)?;
    let dataset = Dataset::open(&cfg.data)?;
    let samples: Vec<TensorSample<T>> = dataset.load_all()?.iter().map(TensorSample::new).collect();
    let result = evaluate(&model, &samples, cfg.threads, cfg.f1_criterion())?;
    create_dir(&cfg.out)?;
    write_text(&cfg.out.join(EVAL_FILE), &result.to_string())?;
    Ok(result)
}

/// Runs the 64-bit gradient suite; writes `gradcheck.tsv` into `out` when
/// given.
pub fn cmd_gradcheck(dims: SuiteDims, seed: u64, out: Option<&Path>) -> Result<Vec<CaseReport>> {
    let cases = gradcheck_suite(dims, seed)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join("gradcheck.tsv"), &gradsuite::format_suite(&cases))?;
    }
    Ok(cases)
}

/// Parameter/FLOP accounting and forward latency for one configuration.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub graph: GraphMode,
    pub params: Breakdown<usize>,
    pub flops: Breakdown<u64>,
    /// Median forward latency in milliseconds; `None` when timing was skipped.
    pub latency_ms: Option<f64>,
    pub runs: usize,
}

impl BenchReport {
    /// Long-format TSV rows `graph	kind	component	value` with kinds
    /// `params`, `flops` (per component, then `total`) and
    /// `latency_ms_median`.
    pub fn to_tsv(&self) -> String {
        let g = self.graph;
        let mut s = String::new();
        for (k, n) in &self.params.parts {
            s.push_str(&format!("{g}\tparams\t{k}\t{n}\n"));
        }
        s.push_str(&format!("{g}\tparams\ttotal\t{}\n", self.params.total()));
        for (k, n) in &self.flops.parts {
            s.push_str(&format!("{g}\tflops\t{k}\t{n}\n"));
        }
        s.push_str(&format!("{g}\tflops\ttotal\t{}\n", self.flops.total()));
        if let Some(ms) = self.latency_ms {
            s.push_str(&format!("{g}\tlatency_ms_median\truns={}\t{ms:.3}\n", self.runs));
        }
        s
    }
}

pub const BENCH_WARMUP: usize = 3;

/// Accounts one model; times `runs` forward passes on `h×w` random images
/// after [`BENCH_WARMUP`] warm-ups, when `runs > 0`.
pub fn bench_model<T: Scalar>(model_cfg: &ModelConfig, h: usize, w: usize, runs: usize) -> Result<BenchReport> {
    model_cfg.check_image_size(h, w)?;
    let model = FlowModel::<T>::new(model_cfg.clone())?;
    let params = model.count_params();
    let flops = model.count_flops(h, w);
    let latency_ms = if runs > 0 {
        let img = |phase: usize| {
            let v = (0..3 * h * w).map(|i| T::from_f64_lossy(((i * 7919 + phase * 104729) % 1000) as f64 / 1000.0)).collect();
            Tensor::from_vec(&[3, h, w], v).expect("image shape")
        };
        let (i1, i2) = (img(0), img(1));
        let mut times = Vec::with_capacity(runs);
        no_grad(|| -> Result<()> {
            for i in 0..BENCH_WARMUP + runs {
                let t = Instant::now();
                model.forward(&i1, &i2)?;
                if i >= BENCH_WARMUP {
                    times.push(t.elapsed().as_secs_f64() * 1e3);
                }
            }
            Ok(())
        })?;
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        Some(if times.len() % 2 == 1 { times[mid] } else { 0.5 * (times[mid - 1] + times[mid]) })
    } else {
        None
    };
    Ok(BenchReport {
        graph: model_cfg.graph,
        params,
        flops,
        latency_ms,
        runs,
    })
}

/// Benchmarks the graph variants of `cfg.model` (all three, or only
/// `only`); writes `bench.tsv` into `cfg.out`.
pub fn cmd_bench(cfg: &RunConfig, only: Option<GraphMode>) -> Result<Vec<BenchReport>> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for graph in GraphMode::ALL.into_iter().filter(|g| only.is_none_or(|o| o == *g)) {
        let m = ModelConfig { graph, ..cfg.model.clone() };
        let r = match cfg.precision {
            Precision::F32 => bench_model::<f32>(&m, cfg.bench_height, cfg.bench_width, cfg.bench_runs)?,
            Precision::F64 => bench_model::<f64>(&m, cfg.bench_height, cfg.bench_width, cfg.bench_runs)?,
        };
        reports.push(r);
    }
    create_dir(&cfg.out)?;
    let mut tsv = String::from("graph\tkind\tcomponent\tvalue\n");
    for r in &reports {
        tsv.push_str(&r.to_tsv());
    }
    write_text(&cfg.out.join("bench.tsv"), &tsv)?;
    Ok(reports)
}

/// Renders a `.flo` file as a PPM colour image.
pub fn cmd_viz(flo: &Path, out: &Path, cap: Option<f64>) -> Result<Image> {
    let flow = read_flo(flo)?;
    let img = flow_to_color(&flow, cap);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_ppm(&img, out)?;
    Ok(img)
}
