//! Central-difference gradient checking.

use std::fmt;

use super::{no_grad, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Probe at most this many entries per parameter (evenly strided).
    pub max_entries: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-6,
            max_entries: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub entries: Vec<GradEntry>,
    pub step: f64,
    pub precision_bits: u32,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn passes(&self, tol: f64) -> bool {
        !self.is_empty() && self.max_rel_err() < tol
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}\t{:.3e}\t{}", e.name, e.max_rel_err, e.checked)?;
        }
        write!(f, "max\t{:.3e}\tstep={:e}\tf{}", self.max_rel_err(), self.step, self.precision_bits)
    }
}

/// `|a − b| / max(1, |a|, |b|)`
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Compares analytic gradients of the scalar `f` against central
/// differences for every named leaf in `params`.
///
/// `f` is re-evaluated for each probe, so it must rebuild its graph from the
/// current parameter values.
pub fn gradcheck<F>(f: F, params: &[(String, Tensor<f64>)], opts: &GradCheckOptions) -> Result<GradReport>
where
    F: Fn() -> Result<Tensor<f64>>,
{
    for (name, p) in params {
        if !p.is_leaf() || !p.requires_grad() {
            return Err(Error::contract("gradcheck", format!("`{name}` is not a trainable leaf")));
        }
        p.zero_grad();
    }
    let loss = f()?;
    loss.backward()?;

    let h = opts.step;
    let mut entries = Vec::with_capacity(params.len());
    for (name, p) in params {
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        let n = p.numel();
        let stride = match opts.max_entries {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        let mut worst = 0.0f64;
        let mut checked = 0;
        for i in (0..n).step_by(stride) {
            let orig = p.data()[i];
            p.data_mut()[i] = orig + h;
            let plus = no_grad(&f)?.item();
            p.data_mut()[i] = orig - h;
            let minus = no_grad(&f)?.item();
            p.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(analytic[i], numeric));
            checked += 1;
        }
        entries.push(GradEntry {
            name: name.clone(),
            max_rel_err: worst,
            checked,
        });
        p.zero_grad();
    }
    Ok(GradReport {
        entries,
        step: h,
        precision_bits: 64,
    })
}
