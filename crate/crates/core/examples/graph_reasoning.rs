//! The adaptive graph reasoning block on its own: project features to
//! nodes, inspect the assignment and adjacency, run the block in each
//! mode, and see the residual gates at work.
//!
//! ```text
//! cargo run --example graph_reasoning
//! ```

use agflow::graph::{build_adjacency, embed_nodes, AgrConfig, AgrParams, GraphMode};
use agflow::nn::{Init, ParamStore};
use agflow::{Result, Tensor};

fn features(seed: u64, c: usize, h: usize, w: usize) -> Result<Tensor<f64>> {
    let data = (0..c * h * w).map(|i| (((i as u64 + seed) * 2654435761 % 1000) as f64 / 500.0) - 1.0).collect();
    Tensor::from_vec(&[c, h, w], data)
}

fn main() -> Result<()> {
    let (c, k, h, w) = (16, 6, 8, 8);
    let f_c = features(1, c, h, w)?;
    let f_m = features(2, c, h, w)?;

    for mode in GraphMode::ALL {
        let mut store = ParamStore::<f64>::default();
        let cfg = AgrConfig { channels: c, nodes: k, mode, ..AgrConfig::default() };
        let block = AgrParams::new(&mut Init::new(&mut store, 7), "agr", cfg);
        println!("{mode}: {} parameters", store.count());

        let nodes = embed_nodes(&f_m, &block.proj_context)?;
        let assignment = nodes.proj.to_vec();
        println!("  pixel 0 → node weights {:.3?}", &assignment[..k]);
        let adj = build_adjacency(&nodes)?.matrix.to_vec();
        println!("  adjacency diagonal {:.3?}", (0..k).map(|i| adj[i * k + i]).collect::<Vec<_>>());

        // Fresh gates are zero: the block passes features through.
        let ctx = block.prepare_context(&f_c)?;
        let unchanged = block.enhance_motion(&ctx, &f_m)?.to_vec() == f_m.to_vec();
        println!("  identity at initialisation: {unchanged}");

        // Open the gates to see the graph contribution.
        block.alpha.data_mut()[0] = 0.5;
        block.beta.data_mut()[0] = 0.5;
        let ctx = block.prepare_context(&f_c)?;
        let delta = block.enhance_motion(&ctx, &f_m)?.sub(&f_m)?.abs().mean().item();
        println!("  mean |f̂_m − f_m| with gates at 0.5: {delta:.4}");
        if let Some(kernel) = &ctx.kernel {
            println!("  adapter kernel {:?} (rows sum to 1)", kernel.shape());
        }
    }
    Ok(())
}
