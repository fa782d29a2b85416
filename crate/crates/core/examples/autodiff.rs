//! Reverse-mode autodiff on small tensors: build an expression, call
//! `backward`, read gradients, and confirm them by finite differences.
//!
//! ```text
//! cargo run --example autodiff
//! ```

use agflow::tensor::gradcheck::{gradcheck, GradCheckOptions};
use agflow::{no_grad, Result, Tensor};

fn main() -> Result<()> {
    // y = Σ softmax(W x)ᵢ · tᵢ  with a 3×2 weight and a 2×4 input.
    let w = Tensor::<f64>::param(&[3, 2], vec![0.5, -1.0, 0.25, 2.0, -0.75, 0.1])?;
    let x = Tensor::<f64>::from_vec(&[2, 4], vec![1.0, 2.0, -1.0, 0.5, 0.0, -0.5, 1.5, 1.0])?;
    let t = Tensor::<f64>::from_vec(&[3, 4], (0..12).map(|i| i as f64 / 12.0).collect())?;

    let y = w.matmul(&x)?.softmax(0)?.mul(&t)?.sum();
    y.backward()?;
    println!("y = {:.6}", y.item());
    println!("dy/dW = {:?}", w.grad().unwrap_or_default());

    // Under no_grad nothing is recorded, so the result is a plain leaf.
    let frozen = no_grad(|| w.matmul(&x).map(|z| z.relu()))?;
    println!("no_grad result is a leaf: {}", frozen.is_leaf());

    // The same function, checked against central differences.
    let report = gradcheck(
        || Ok(w.matmul(&x)?.softmax(0)?.mul(&t)?.sum()),
        &[("w".to_string(), w.clone())],
        &GradCheckOptions::default(),
    )?;
    println!("finite-difference max relative error: {:.2e}", report.max_rel_err());
    Ok(())
}
