//! Matching substrate: correlation pyramid and lookup against loop
//! oracles, upsampling, the sequence loss, GRU gating, an end-to-end
//! finite-difference check, and a dead-parameter check.

mod common;

use agflow::flow::optim::{AdamW, Schedule};
use agflow::flow::{build_corr_pyramid, sequence_loss, upsample_flow, ConvGru, FlowModel, ModelConfig};
use agflow::graph::GraphMode;
use agflow::nn::{Init, ParamStore};
use agflow::run::gradsuite::{micro_config, model_case, MODEL_TOLERANCE};
use agflow::Tensor;
use common::*;

#[test]
fn pyramid_and_lookup_match_loop_oracles_exactly() {
    for (seed, (c, h, w)) in [(0u64, (3, 4, 4)), (1, (5, 7, 6)), (2, (4, 16, 16)), (3, (2, 5, 9))].into_iter() {
        let mut r = rng(seed);
        let f1 = tensor(&mut r, &[c, h, w]);
        let f2 = tensor(&mut r, &[c, h, w]);
        let levels = 4;
        let pyr = build_corr_pyramid(&f1, &f2, levels).unwrap();
        let want = corr_pyramid(&f1.to_vec(), &f2.to_vec(), c, h, w, levels);
        for (l, (got, (wv, lh, lw))) in pyr.levels.iter().zip(&want).enumerate() {
            assert_eq!(got.shape(), &[h * w, *lh, *lw], "level {l}");
            assert_eq!(bits(&got.to_vec()), bits(wv), "level {l}");
        }
        let flow = Tensor::from_vec(&[2, h, w], uniform(&mut r, 2 * h * w, -3.0, 3.0)).unwrap();
        for radius in [1, 2] {
            let got = pyr.lookup(&flow, radius).unwrap();
            let side = 2 * radius + 1;
            assert_eq!(got.shape(), &[levels * side * side, h, w]);
            assert_eq!(bits(&got.to_vec()), bits(&lookup(&want, &flow.to_vec(), h, w, radius)));
        }
    }
}

#[test]
fn zero_flow_lookup_centre_reads_the_diagonal() {
    let mut r = rng(4);
    let (c, h, w) = (3, 5, 5);
    let f1 = tensor(&mut r, &[c, h, w]);
    let pyr = build_corr_pyramid(&f1, &f1, 1).unwrap();
    let out = pyr.lookup(&Tensor::zeros(&[2, h, w]), 1).unwrap().to_vec();
    let n = h * w;
    let l0 = pyr.levels[0].to_vec();
    for p in 0..n {
        // channel 4 is the window centre for radius 1
        assert_eq!(out[4 * n + p], l0[p * n + p]);
    }
}

#[test]
fn upsampled_flow_is_scaled_and_constant_preserving() {
    let flow = Tensor::<f64>::from_vec(&[2, 2, 3], vec![1.5; 6].into_iter().chain(vec![-0.5; 6]).collect()).unwrap();
    let up = upsample_flow(&flow, 4).unwrap();
    assert_eq!(up.shape(), &[2, 8, 12]);
    let v = up.to_vec();
    assert!(v[..96].iter().all(|&x| x == 6.0));
    assert!(v[96..].iter().all(|&x| x == -2.0));

    // A horizontal ramp upsamples to the half-pixel interpolated ramp,
    // repeated on both output rows.
    let ramp = Tensor::<f64>::from_vec(&[1, 1, 2], vec![0.0, 1.0]).unwrap();
    let got = ramp.upsample_bilinear(2).unwrap().to_vec();
    assert_eq!(got, vec![0.0, 0.25, 0.75, 1.0, 0.0, 0.25, 0.75, 1.0]);
}

#[test]
fn sequence_loss_matches_closed_form() {
    let gt = Tensor::<f64>::from_vec(&[2, 1, 2], vec![1.0, 2.0, 0.0, -1.0]).unwrap();
    let p0 = Tensor::from_vec(&[2, 1, 2], vec![0.0; 4]).unwrap();
    let p1 = Tensor::from_vec(&[2, 1, 2], vec![1.0, 2.0, 0.0, 0.0]).unwrap();
    // iteration 0: |err| sum 4, 2 pixels, weight 0.8; iteration 1: sum 1, weight 1.
    let loss = sequence_loss(&[p0.clone(), p1.clone()], &gt, None, 0.8).unwrap().item();
    assert!((loss - (0.8 * 4.0 / 2.0 + 1.0 / 2.0)).abs() < 1e-12);
    let mask = Tensor::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
    let masked = sequence_loss(&[p0, p1], &gt, Some(&mask), 0.8).unwrap().item();
    assert!((masked - 0.8).abs() < 1e-12);
}

#[test]
fn gru_update_gate_interpolates_hidden_and_candidate() {
    let mut store = ParamStore::<f64>::default();
    let gru = ConvGru::new(&mut Init::new(&mut store, 1), "gru", 3, 4);
    let mut r = rng(2);
    let h = tensor(&mut r, &[3, 4, 4]);
    let x = tensor(&mut r, &[4, 4, 4]);
    let step = gru.step(&h, &x).unwrap();
    for z in [step.update_gate.to_vec(), step.reset_gate.to_vec()] {
        assert!(z.iter().all(|&v| v > 0.0 && v < 1.0));
    }
    let q = tensor(&mut r, &[3, 4, 4]);
    let zeros = Tensor::zeros(&[3, 4, 4]);
    let ones = Tensor::full(&[3, 4, 4], 1.0);
    assert_eq!(gru.combine(&h, &zeros, &q).unwrap().to_vec(), h.to_vec());
    let full = gru.combine(&h, &ones, &q).unwrap().to_vec();
    for (a, b) in full.iter().zip(q.to_vec()) {
        assert!((a - b).abs() < 1e-15);
    }
    // Output is a convex combination of h and the tanh candidate, so bounded.
    let mixed = step.hidden.to_vec();
    for (i, v) in mixed.iter().enumerate() {
        let hv = h.to_vec()[i];
        assert!(*v >= hv.min(-1.0) - 1e-12 && *v <= hv.max(1.0) + 1e-12);
    }
}

#[test]
fn end_to_end_micro_gradcheck() {
    for seed in [0, 1] {
        let case = model_case(seed).unwrap();
        assert!(case.passes(), "seed {seed}: {}", case.report);
        assert!(case.report.max_rel_err() < MODEL_TOLERANCE);
    }
}

#[test]
fn every_parameter_receives_gradient_after_one_step() {
    for graph in GraphMode::ALL {
        // Wide enough that no layer is entirely behind dead ReLUs; the
        // first pass leaves the graph branches behind zero gates, the
        // second (after one update) must reach every parameter.
        let cfg = ModelConfig {
            graph,
            feature_channels: 16,
            channels: 16,
            nodes: 4,
            iters: 3,
            radius: 2,
            levels: 3,
            attention_reduction: 4,
            ..micro_config(7)
        };
        let model = FlowModel::<f64>::new(cfg).unwrap();
        let mut r = rng(11);
        let i1 = Tensor::from_vec(&[3, 32, 32], uniform(&mut r, 3072, 0.0, 1.0)).unwrap();
        let i2 = Tensor::from_vec(&[3, 32, 32], uniform(&mut r, 3072, 0.0, 1.0)).unwrap();
        let gt = Tensor::from_vec(&[2, 32, 32], uniform(&mut r, 2048, -2.0, 2.0)).unwrap();
        let mut opt = AdamW::new(&model.params, 1e-2, 0.0, Schedule::Constant);
        let pass = || {
            sequence_loss(&model.forward(&i1, &i2).unwrap(), &gt, None, 0.8).unwrap().backward().unwrap();
        };
        pass();
        opt.update(&model.params);
        model.params.zero_grad();
        pass();
        for (name, p) in model.params.iter() {
            let g = p.grad().unwrap_or_else(|| panic!("{graph}: `{name}` has no gradient"));
            assert!(g.iter().any(|&v| v != 0.0), "{graph}: `{name}` gradient is identically zero");
        }
    }
}

#[test]
fn forward_is_deterministic_and_shaped() {
    let cfg = micro_config(3);
    let a = FlowModel::<f32>::new(cfg.clone()).unwrap();
    let b = FlowModel::<f32>::new(cfg).unwrap();
    let img = Tensor::<f32>::from_vec(&[3, 8, 8], (0..192).map(|i| (i % 17) as f32 / 17.0).collect()).unwrap();
    let pa = a.forward(&img, &img).unwrap();
    let pb = b.forward(&img, &img).unwrap();
    assert_eq!(pa.len(), 2);
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(x.shape(), &[2, 8, 8]);
        assert_eq!(x.to_vec(), y.to_vec());
    }
    assert!(a.forward(&img, &Tensor::zeros(&[3, 8, 4])).is_err());
    let odd = Tensor::<f32>::zeros(&[3, 10, 8]);
    assert!(matches!(a.forward(&odd, &odd), Err(agflow::Error::Config(_))));
}
