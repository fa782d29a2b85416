//! Score a checkpoint on a dataset: per-pair and aggregate EPE / F1-all,
//! with both the single-threshold and the dual (KITTI-style) outlier
//! criterion, fanned out over worker threads.
//!
//! ```text
//! cargo run --release --example evaluate
//! ```

use agflow::data::{F1Criterion, Motion, SyntheticSpec};
use agflow::flow::ModelConfig;
use agflow::run::train::{load_model, TensorSample};
use agflow::run::{cmd_gen, evaluate, train, GenConfig, RunConfig};
use agflow::Result;

fn main() -> Result<()> {
    let root = std::env::temp_dir().join("agflow_evaluate");
    let gen = GenConfig {
        pairs: 3,
        spec: SyntheticSpec { height: 32, width: 32, motion: Motion::Constant, magnitude: (2.0, 6.0), ..SyntheticSpec::default() },
        seed: 9,
    };
    let ds = cmd_gen(&gen, &root.join("data"))?;
    let cfg = RunConfig {
        model: ModelConfig { feature_channels: 16, channels: 16, nodes: 4, iters: 3, ..ModelConfig::default() },
        data: root.join("data"),
        out: root.join("run"),
        steps: 50,
        checkpoint_every: 0,
        ..RunConfig::default()
    };
    let summary = train(&cfg)?;

    let model = load_model::<f32>(&cfg, &summary.final_checkpoint)?;
    let samples: Vec<TensorSample<f32>> = ds.load_all()?.iter().map(TensorSample::new).collect();
    for (label, crit) in [("F1-all (>3 px)", F1Criterion::DEFAULT), ("F1-all (>3 px and >5%)", F1Criterion::KITTI)] {
        let result = evaluate(&model, &samples, 2, crit)?;
        println!("{label}\n{result}");
    }
    Ok(())
}
