//! Graph reasoning: structural invariants over many seeds, loop oracles,
//! parameter accounting and the zero-gate identity.

mod common;

use agflow::graph::{
    adapter_param_count, agr_param_count, build_adjacency, embed_nodes, gcn_step, graph_adapter, predict_adapter_kernel,
    readout, AgrConfig, AgrParams, GraphMode, ProjectionConvs,
};
use agflow::nn::{Init, ParamStore};
use agflow::Tensor;
use common::*;

struct Block {
    store: ParamStore<f64>,
    convs: ProjectionConvs<f64>,
    theta: agflow::nn::Conv2d<f64>,
    layer1: agflow::nn::Conv2d<f64>,
}

fn block(seed: u64, c: usize, k: usize) -> Block {
    let mut store = ParamStore::default();
    let mut init = Init::new(&mut store, seed);
    let convs = ProjectionConvs::new(&mut init, "proj", c, k);
    let theta = init.conv("theta", c, k, 1, 1);
    let layer1 = init.conv("layer1", c, c, 1, 1);
    Block { store, convs, theta, layer1 }
}

#[test]
fn jacobi_oracle_recovers_known_spectrum() {
    // [[2,1],[1,2]] has eigenvalues 1 and 3.
    let mut ev = jacobi_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    // Diagonal matrix with a negative entry.
    let mut ev = jacobi_eigenvalues(&[-1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.5], 3);
    ev.sort_by(f64::total_cmp);
    assert_eq!(ev, vec![-1.0, 0.5, 4.0]);
}

fn check_invariants(seed: u64, c: usize, k: usize, h: usize, w: usize) {
    let b = block(seed, c, k);
    let mut r = rng(seed ^ 0xabc);
    let f = tensor(&mut r, &[c, h, w]);
    let g = tensor(&mut r, &[c, h, w]);
    let v_c = embed_nodes(&f, &b.convs).unwrap();
    let v_m = embed_nodes(&g, &b.convs).unwrap();

    let proj = v_c.proj.to_vec();
    for row in proj.chunks(k) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6, "seed {seed}: assignment row sum");
    }
    let a = build_adjacency(&v_m).unwrap().matrix.to_vec();
    for i in 0..k {
        for j in 0..k {
            assert!((a[i * k + j] - a[j * k + i]).abs() <= 1e-6, "seed {seed}: adjacency symmetry");
        }
    }
    let kernel = predict_adapter_kernel(&v_c.nodes, &b.theta).unwrap();
    for row in kernel.to_vec().chunks(k) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6, "seed {seed}: kernel row sum");
    }
    let adapted = graph_adapter(&v_m, &kernel, &b.layer1).unwrap().matrix.to_vec();
    let min = jacobi_eigenvalues(&adapted, k).into_iter().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-6, "seed {seed}: adapted adjacency eigenvalue {min}");
}

#[test]
fn invariants_hold_over_100_seeds() {
    for seed in 0..100 {
        check_invariants(seed, 8, 6, 5, 4);
    }
}

#[test]
fn invariants_hold_across_node_counts() {
    for k in [32, 64, 128, 256] {
        for seed in 0..3 {
            check_invariants(seed, 8, k, 8, 8);
        }
    }
}

#[test]
fn embedding_gcn_and_readout_match_loop_oracles_exactly() {
    for seed in 0..10 {
        let (c, k, h, w) = (6, 5, 7, 9);
        let n = h * w;
        let b = block(seed, c, k);
        let mut r = rng(seed);
        let f = tensor(&mut r, &[c, h, w]);
        let nodes = embed_nodes(&f, &b.convs).unwrap();
        let (proj, v) = embed_nodes_oracle(&f, &b);
        assert_eq!(bits(&nodes.proj.to_vec()), bits(&proj), "assignment");
        assert_eq!(bits(&nodes.nodes.to_vec()), bits(&v), "nodes");

        let adj = build_adjacency(&nodes).unwrap();
        let a = matmul(&transpose(&v, c, k), &v, k, c, k);
        assert_eq!(bits(&adj.matrix.to_vec()), bits(&a), "adjacency");

        let wt = tensor(&mut r, &[c, c]);
        let got = gcn_step(&nodes.nodes, &adj, &wt).unwrap().to_vec();
        assert_eq!(bits(&got), bits(&common::gcn_step(&v, &a, &wt.to_vec(), c, k)), "gcn");

        let back = readout(&nodes.nodes, &nodes.proj, nodes.source_shape).unwrap();
        assert_eq!(back.shape(), &[c, h, w]);
        assert_eq!(bits(&back.to_vec()), bits(&common::readout(&v, &proj, c, k, n)), "readout");
    }
}

fn embed_nodes_oracle(f: &Tensor<f64>, b: &Block) -> (Vec<f64>, Vec<f64>) {
    let s = f.shape();
    common::embed_nodes(&f.to_vec(), s[0], s[1], s[2], &b.convs)
}

#[test]
fn adapter_kernel_matches_oracle() {
    let (c, k) = (4, 3);
    let b = block(5, c, k);
    let v = tensor(&mut rng(1), &[c, k]);
    let got = predict_adapter_kernel(&v, &b.theta).unwrap().to_vec();
    let (logits, _, _) = conv2d(&v.to_vec(), (c, 1, k), &b.theta.weight.to_vec(), k, 1, Some(&b.theta.bias.to_vec()), 1, 0);
    let want = softmax_rows(&logits, k, k);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-14);
    }
    assert_eq!(b.store.count_prefix("theta"), adapter_param_count(c, k) - c * c - c);
}

fn cfg(mode: GraphMode, c: usize, k: usize) -> AgrConfig {
    AgrConfig {
        channels: c,
        nodes: k,
        mode,
        ..AgrConfig::default()
    }
}

fn built_count(cfg: AgrConfig) -> usize {
    let mut store = ParamStore::<f64>::default();
    AgrParams::new(&mut Init::new(&mut store, 0), "agr", cfg);
    store.count()
}

#[test]
fn parameter_counts_follow_the_formula() {
    for (c, k) in [(4, 3), (16, 8), (128, 128)] {
        let counts: Vec<usize> = GraphMode::ALL.iter().map(|&m| built_count(cfg(m, c, k))).collect();
        for (i, &m) in GraphMode::ALL.iter().enumerate() {
            assert_eq!(counts[i], agr_param_count(&cfg(m, c, k)).total(), "{m} c={c} k={k}");
        }
        assert!(counts[0] < counts[1] && counts[1] < counts[2]);
        assert_eq!(counts[2] - counts[1], adapter_param_count(c, k));
    }
}

#[test]
fn parameter_count_grows_with_node_count() {
    let totals: Vec<usize> = [32, 64, 128, 256].iter().map(|&k| agr_param_count(&cfg(GraphMode::Agr, 128, k)).total()).collect();
    assert!(totals.windows(2).all(|p| p[0] < p[1]), "{totals:?}");
}

#[test]
fn zero_gates_leave_features_unchanged() {
    for mode in GraphMode::ALL {
        let mut store = ParamStore::<f64>::default();
        let block = AgrParams::new(&mut Init::new(&mut store, 3), "agr", cfg(mode, 8, 4));
        let mut r = rng(9);
        let f_c = tensor(&mut r, &[8, 5, 5]);
        let f_m = tensor(&mut r, &[8, 5, 5]);
        let ctx = block.prepare_context(&f_c).unwrap();
        assert_eq!(bits(&ctx.enhanced.to_vec()), bits(&f_c.to_vec()));
        let m = block.enhance_motion(&ctx, &f_m).unwrap();
        assert_eq!(bits(&m.to_vec()), bits(&f_m.to_vec()));
    }
}

#[test]
fn mode_controls_which_parameters_exist() {
    let names = |mode| {
        let mut store = ParamStore::<f64>::default();
        AgrParams::new(&mut Init::new(&mut store, 0), "agr", cfg(mode, 8, 4));
        store.iter().map(|(n, _)| n.to_string()).collect::<Vec<_>>()
    };
    let base = names(GraphMode::Base);
    let sgr = names(GraphMode::Sgr);
    let agr = names(GraphMode::Agr);
    assert!(!base.iter().any(|n| n.starts_with("agr.proj_m") || n.starts_with("agr.adapter")));
    assert!(sgr.iter().any(|n| n.starts_with("agr.proj_m")) && !sgr.iter().any(|n| n.starts_with("agr.adapter")));
    assert!(agr.iter().any(|n| n.starts_with("agr.adapter.theta")));
}
