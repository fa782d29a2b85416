//! Parameter and FLOP accounting for the three graph variants at full
//! width, plus median forward latency of a narrower model.
//!
//! ```text
//! cargo run --release --example bench_ablation
//! ```

use agflow::flow::{FlowModel, ModelConfig};
use agflow::graph::{adapter_param_count, GraphMode};
use agflow::run::bench_model;
use agflow::Result;

fn main() -> Result<()> {
    println!("graph\tparams\tagr_params\tGFLOPs@368x496");
    let mut totals = Vec::new();
    for graph in GraphMode::ALL {
        let cfg = ModelConfig { feature_channels: 128, channels: 128, nodes: 128, graph, ..ModelConfig::default() };
        let model = FlowModel::<f32>::new(cfg)?;
        let params = model.count_params();
        let flops = model.count_flops(368, 496).total() as f64 / 1e9;
        println!("{graph}\t{}\t{}\t{flops:.2}", params.total(), params.prefixed("agr"));
        totals.push(params.total());
    }
    println!(
        "sgr − base = {}, agr − sgr = {} (adapter learner: {})",
        totals[1] - totals[0],
        totals[2] - totals[1],
        adapter_param_count(128, 128)
    );

    let small = ModelConfig { feature_channels: 32, channels: 32, nodes: 16, ..ModelConfig::default() };
    for graph in GraphMode::ALL {
        let r = bench_model::<f32>(&ModelConfig { graph, ..small.clone() }, 64, 64, 20)?;
        println!("{graph}: median forward {:.2} ms over {} runs", r.latency_ms.unwrap_or(f64::NAN), r.runs);
    }
    Ok(())
}
