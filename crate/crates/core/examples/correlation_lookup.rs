//! Correlation pyramid and windowed lookup: for features shifted by a
//! known displacement, the lookup at the true flow peaks at the window
//! centre.
//!
//! ```text
//! cargo run --example correlation_lookup
//! ```

use agflow::flow::build_corr_pyramid;
use agflow::{Result, Tensor};

fn main() -> Result<()> {
    let (c, h, w) = (8usize, 12usize, 12usize);
    // Pseudo-random features, unit length per pixel, so a pixel's best
    // match under the dot product is itself.
    let mut f2: Vec<f64> = (0..(c * h * w) as u64)
        .map(|i| {
            let z = (i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            ((z ^ (z >> 29)) % 2001) as f64 / 1000.0 - 1.0
        })
        .collect();
    for p in 0..h * w {
        let norm = (0..c).map(|ch| f2[ch * h * w + p].powi(2)).sum::<f64>().sqrt();
        (0..c).for_each(|ch| f2[ch * h * w + p] /= norm);
    }
    // f1(y, x) = f2(y, x + 2): the true flow is (+2, 0).
    let mut f1 = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let sx = (x + 2).min(w - 1);
                f1[(ch * h + y) * w + x] = f2[(ch * h + y) * w + sx];
            }
        }
    }
    let f1 = Tensor::from_vec(&[c, h, w], f1)?;
    let f2 = Tensor::from_vec(&[c, h, w], f2)?;
    let pyramid = build_corr_pyramid(&f1, &f2, 3)?;
    for (l, level) in pyramid.levels.iter().enumerate() {
        println!("level {l}: cost volume {:?}", level.shape());
    }

    let radius = 1;
    let side = 2 * radius + 1;
    let pixel = 5 * w + 4; // (x=4, y=5)
    for (label, u) in [("zero flow", 0.0), ("true flow", 2.0)] {
        let mut flow = vec![0.0; 2 * h * w];
        flow[..h * w].iter_mut().for_each(|v| *v = u);
        let samples = pyramid.lookup(&Tensor::from_vec(&[2, h, w], flow)?, radius)?.to_vec();
        // Level-0 window around (x=4, y=5).
        let window: Vec<f64> = (0..side * side).map(|q| samples[q * h * w + pixel]).collect();
        let best = window.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
        println!(
            "{label}: best window offset (dx, dy) = ({}, {})",
            best as isize % side as isize - radius as isize,
            best as isize / side as isize - radius as isize
        );
    }
    Ok(())
}
