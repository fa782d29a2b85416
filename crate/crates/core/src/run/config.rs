//! Line-oriented `key = value` configuration files.
//!
//! `#` starts a comment, blank lines are ignored, every key has a default
//! and unknown or repeated keys are rejected. [`RunConfig::to_text`] echoes
//! the effective configuration in the same syntax so a run can be repeated
//! from its own output directory.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{F1Criterion, Motion, SyntheticSpec, Texture};
use crate::error::{Error, Result};
use crate::flow::optim::Schedule;
use crate::flow::ModelConfig;
use crate::graph::GraphMode;

/// Parses `key = value` lines into `(key, value, line number)` triples.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {line_no}: empty key")));
        }
        if let Some((_, _, first)) = out.iter().find(|(key, _, _)| key == k) {
            return Err(Error::Config(format!("line {line_no}: key `{k}` already set on line {first}")));
        }
        out.push((k.to_string(), v.to_string(), line_no));
    }
    Ok(out)
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "32",
            Precision::F64 => "64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "32" => Ok(Precision::F32),
            "64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("precision must be 32 or 64, got `{s}`"))),
        }
    }
}

/// Latency is a median over at least this many timed forward passes.
pub const MIN_BENCH_RUNS: usize = 20;

/// Everything a `train` / `eval` / `bench` run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub precision: Precision,
    /// Dataset directory containing `manifest.tsv`.
    pub data: PathBuf,
    pub out: PathBuf,
    pub steps: usize,
    pub batch_size: usize,
    /// Peak learning rate.
    pub lr: f64,
    pub weight_decay: f64,
    /// `onecycle` or `constant`.
    pub one_cycle: bool,
    /// Warm-up fraction of the one-cycle schedule.
    pub pct_start: f64,
    /// Global gradient-norm bound.
    pub clip: f64,
    /// Weight decay between refinement iterations in the sequence loss.
    pub gamma: f64,
    pub log_every: usize,
    /// 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
    /// Checkpoint to continue training from.
    pub resume: Option<PathBuf>,
    /// Checkpoint to evaluate or benchmark.
    pub checkpoint: Option<PathBuf>,
    pub threads: usize,
    pub kitti_f1: bool,
    /// Timed forward passes in `bench` (after 3 warm-ups).
    pub bench_runs: usize,
    pub bench_height: usize,
    pub bench_width: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            precision: Precision::F32,
            data: "data".into(),
            out: "runs/train".into(),
            steps: 2000,
            batch_size: 1,
            lr: 4e-4,
            weight_decay: 1e-5,
            one_cycle: true,
            pct_start: 0.05,
            clip: 1.0,
            gamma: 0.8,
            log_every: 10,
            checkpoint_every: 500,
            resume: None,
            checkpoint: None,
            threads: 1,
            kitti_f1: false,
            bench_runs: 20,
            bench_height: 64,
            bench_width: 64,
        }
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v, line) in parse_kv(text)? {
            cfg.set(&k, &v)
                .map_err(|e| Error::Config(format!("line {line}: {}", e.to_string().trim_start_matches("invalid config: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let m = &mut self.model;
        match key {
            "feature_channels" => m.feature_channels = parse_value(key, v)?,
            "channels" => m.channels = parse_value(key, v)?,
            "nodes" => m.nodes = parse_value(key, v)?,
            "context_steps" => m.context_steps = parse_value(key, v)?,
            "motion_steps" => m.motion_steps = parse_value(key, v)?,
            "iters" => m.iters = parse_value(key, v)?,
            "radius" => m.radius = parse_value(key, v)?,
            "downsample" => m.downsample = parse_value(key, v)?,
            "levels" => m.levels = parse_value(key, v)?,
            "attention_reduction" => m.attention_reduction = parse_value(key, v)?,
            "graph" => m.graph = v.parse::<GraphMode>()?,
            "seed" => m.seed = parse_value(key, v)?,
            "precision" => self.precision = v.parse()?,
            "data" => self.data = v.into(),
            "out" => self.out = v.into(),
            "steps" => self.steps = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "lr" => self.lr = parse_value(key, v)?,
            "weight_decay" => self.weight_decay = parse_value(key, v)?,
            "schedule" => {
                self.one_cycle = match v {
                    "onecycle" => true,
                    "constant" => false,
                    _ => return Err(Error::Config(format!("schedule must be onecycle or constant, got `{v}`"))),
                }
            }
            "pct_start" => self.pct_start = parse_value(key, v)?,
            "clip" => self.clip = parse_value(key, v)?,
            "gamma" => self.gamma = parse_value(key, v)?,
            "log_every" => self.log_every = parse_value(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, v)?,
            "resume" => self.resume = opt_path(v),
            "checkpoint" => self.checkpoint = opt_path(v),
            "threads" => self.threads = parse_value(key, v)?,
            "f1" => {
                self.kitti_f1 = match v {
                    "abs" => false,
                    "kitti" => true,
                    _ => return Err(Error::Config(format!("f1 must be abs or kitti, got `{v}`"))),
                }
            }
            "bench_runs" => self.bench_runs = parse_value(key, v)?,
            "bench_height" => self.bench_height = parse_value(key, v)?,
            "bench_width" => self.bench_width = parse_value(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let positive = [
            ("batch_size", self.batch_size),
            ("log_every", self.log_every),
            ("threads", self.threads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let finite_nonneg = [("lr", self.lr), ("weight_decay", self.weight_decay), ("clip", self.clip), ("gamma", self.gamma)];
        for (name, v) in finite_nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.bench_runs < MIN_BENCH_RUNS {
            return Err(Error::Config(format!(
                "bench_runs must be at least {MIN_BENCH_RUNS}, got {}",
                self.bench_runs
            )));
        }
        if !(0.0..1.0).contains(&self.pct_start) {
            return Err(Error::Config(format!("pct_start must lie in [0, 1), got {}", self.pct_start)));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        if self.one_cycle {
            Schedule::OneCycle {
                total_steps: self.steps,
                pct_start: self.pct_start,
            }
        } else {
            Schedule::Constant
        }
    }

    pub fn f1_criterion(&self) -> F1Criterion {
        if self.kitti_f1 {
            F1Criterion::KITTI
        } else {
            F1Criterion::DEFAULT
        }
    }

    /// Every key with its effective value, parseable by [`from_text`](Self::from_text).
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let rows: Vec<(&str, String)> = vec![
            ("feature_channels", m.feature_channels.to_string()),
            ("channels", m.channels.to_string()),
            ("nodes", m.nodes.to_string()),
            ("context_steps", m.context_steps.to_string()),
            ("motion_steps", m.motion_steps.to_string()),
            ("iters", m.iters.to_string()),
            ("radius", m.radius.to_string()),
            ("downsample", m.downsample.to_string()),
            ("levels", m.levels.to_string()),
            ("attention_reduction", m.attention_reduction.to_string()),
            ("graph", m.graph.to_string()),
            ("seed", m.seed.to_string()),
            ("precision", self.precision.to_string()),
            ("data", self.data.display().to_string()),
            ("out", self.out.display().to_string()),
            ("steps", self.steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", format!("{:e}", self.lr)),
            ("weight_decay", format!("{:e}", self.weight_decay)),
            ("schedule", if self.one_cycle { "onecycle" } else { "constant" }.into()),
            ("pct_start", self.pct_start.to_string()),
            ("clip", self.clip.to_string()),
            ("gamma", self.gamma.to_string()),
            ("log_every", self.log_every.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("resume", show_path(&self.resume)),
            ("checkpoint", show_path(&self.checkpoint)),
            ("threads", self.threads.to_string()),
            ("f1", if self.kitti_f1 { "kitti" } else { "abs" }.into()),
            ("bench_runs", self.bench_runs.to_string()),
            ("bench_height", self.bench_height.to_string()),
            ("bench_width", self.bench_width.to_string()),
        ];
        let mut s = String::from("# effective configuration\n");
        for (k, v) in rows {
            writeln!(s, "{k} = {v}").expect("write to string");
        }
        s
    }
}

/// Specification of a synthetic dataset for `gen`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub pairs: usize,
    /// Per-pair template; its seed is replaced by [`pair_seed`](Self::pair_seed).
    pub spec: SyntheticSpec,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            pairs: 8,
            spec: SyntheticSpec::default(),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = GenConfig::default();
        for (k, v, line) in parse_kv(text)? {
            let s = &mut cfg.spec;
            let r = match k.as_str() {
                "pairs" => parse_value(&k, &v).map(|x| cfg.pairs = x),
                "height" => parse_value(&k, &v).map(|x| s.height = x),
                "width" => parse_value(&k, &v).map(|x| s.width = x),
                "texture" => v.parse::<Texture>().map(|x| s.texture = x),
                "motion" => v.parse::<Motion>().map(|x| s.motion = x),
                "mag_min" => parse_value(&k, &v).map(|x| s.magnitude.0 = x),
                "mag_max" => parse_value(&k, &v).map(|x| s.magnitude.1 = x),
                "seed" => parse_value(&k, &v).map(|x| cfg.seed = x),
                _ => Err(Error::Config(format!("unknown key `{k}`"))),
            };
            r.map_err(|e| Error::Config(format!("line {line}: {}", e.to_string().trim_start_matches("invalid config: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::Config("pairs must be positive".into()));
        }
        self.spec.validate()
    }

    /// Seed of pair `i`, decorrelated from neighbouring indices and seeds.
    pub fn pair_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64).rotate_left(17)
    }

    pub fn to_text(&self) -> String {
        let s = &self.spec;
        format!(
            "# effective configuration\npairs = {}\nheight = {}\nwidth = {}\ntexture = {}\nmotion = {}\nmag_min = {}\nmag_max = {}\nseed = {}\n",
            self.pairs, s.height, s.width, s.texture, s.motion, s.magnitude.0, s.magnitude.1, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_defaults() {
        let cfg = RunConfig::from_text("# run\nsteps = 5   # short\n\ngraph=sgr\nlr = 1e-3\n").unwrap();
        assert_eq!(cfg.steps, 5);
        assert_eq!(cfg.model.graph, GraphMode::Sgr);
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.batch_size, RunConfig::default().batch_size);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        for bad in ["stepz = 3", "steps = 1\nsteps = 2", "steps 3", "steps = x", "precision = 16", "batch_size = 0"] {
            assert!(matches!(RunConfig::from_text(bad), Err(Error::Config(_))), "{bad}");
        }
        let e = RunConfig::from_text("\n\nbogus = 1").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("bogus"), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.model.nodes = 7;
        cfg.resume = Some("a/b.agfw".into());
        cfg.lr = 3.5e-4;
        cfg.kitti_f1 = true;
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);

        let mut g = GenConfig::default();
        g.spec.motion = Motion::Translate(1.5, -2.0);
        g.pairs = 3;
        assert_eq!(GenConfig::from_text(&g.to_text()).unwrap(), g);
    }
}
