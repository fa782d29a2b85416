//! End-point error and F1-all.
//!
//! The ground truth's valid mask selects the pixels that are scored; the
//! prediction's own mask, if any, is ignored.

use std::fmt;

use super::FlowField;
use crate::error::{Error, Result};

/// Outlier threshold used by F1-all, in pixels.
pub const F1_TAU: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum F1Criterion {
    /// Error strictly above `tau` pixels.
    Absolute { tau: f64 },
    /// Error above `tau` pixels and above `rel` of the true magnitude.
    Dual { tau: f64, rel: f64 },
}

impl F1Criterion {
    pub const DEFAULT: F1Criterion = F1Criterion::Absolute { tau: F1_TAU };
    pub const KITTI: F1Criterion = F1Criterion::Dual { tau: F1_TAU, rel: 0.05 };

    pub fn is_outlier(&self, err: f64, gt_mag: f64) -> bool {
        match *self {
            F1Criterion::Absolute { tau } => err > tau,
            F1Criterion::Dual { tau, rel } => err > tau && err > rel * gt_mag,
        }
    }
}

/// Euclidean length by the textbook formula; inputs come from `f32`, so
/// the squares cannot overflow.
fn norm(u: f64, v: f64) -> f64 {
    (u * u + v * v).sqrt()
}

/// Per-pixel error sums for one pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Tally {
    err_sum: f64,
    outliers: usize,
    pixels: usize,
}

fn tally(pred: &FlowField, gt: &FlowField, crit: F1Criterion) -> Result<Tally> {
    if pred.height != gt.height || pred.width != gt.width {
        return Err(Error::dim(
            "flow metric",
            &[2, pred.height, pred.width],
            &[2, gt.height, gt.width],
        ));
    }
    let mut t = Tally::default();
    for i in 0..gt.pixels() {
        if !gt.is_valid(i) {
            continue;
        }
        let (pu, pv) = pred.at(i);
        let (gu, gv) = gt.at(i);
        let err = norm(f64::from(pu) - f64::from(gu), f64::from(pv) - f64::from(gv));
        t.err_sum += err;
        t.outliers += usize::from(crit.is_outlier(err, norm(f64::from(gu), f64::from(gv))));
        t.pixels += 1;
    }
    if t.pixels == 0 {
        return Err(Error::contract("flow metric", "no valid pixels to evaluate"));
    }
    Ok(t)
}

/// Mean end-point error over valid pixels.
pub fn epe(pred: &FlowField, gt: &FlowField) -> Result<f64> {
    let t = tally(pred, gt, F1Criterion::DEFAULT)?;
    Ok(t.err_sum / t.pixels as f64)
}

/// Percentage of valid pixels whose error exceeds `tau` pixels.
pub fn f1_all(pred: &FlowField, gt: &FlowField, tau: f64) -> Result<f64> {
    f1_all_with(pred, gt, F1Criterion::Absolute { tau })
}

pub fn f1_all_with(pred: &FlowField, gt: &FlowField, crit: F1Criterion) -> Result<f64> {
    let t = tally(pred, gt, crit)?;
    Ok(100.0 * t.outliers as f64 / t.pixels as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairScore {
    pub pair_id: String,
    pub epe: f64,
    pub f1_all: f64,
    pub pixels: usize,
}

/// Aggregate over a set of pairs. Aggregates weight every valid pixel
/// equally.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalResult {
    pub epe: f64,
    pub f1_all: f64,
    pub pixels: usize,
    pub per_pair: Vec<PairScore>,
    err_sum: f64,
    outliers: usize,
}

impl EvalResult {
    pub fn add(&mut self, pair_id: impl Into<String>, pred: &FlowField, gt: &FlowField, crit: F1Criterion) -> Result<()> {
        let t = tally(pred, gt, crit)?;
        self.per_pair.push(PairScore {
            pair_id: pair_id.into(),
            epe: t.err_sum / t.pixels as f64,
            f1_all: 100.0 * t.outliers as f64 / t.pixels as f64,
            pixels: t.pixels,
        });
        self.err_sum += t.err_sum;
        self.outliers += t.outliers;
        self.pixels += t.pixels;
        self.epe = self.err_sum / self.pixels as f64;
        self.f1_all = 100.0 * self.outliers as f64 / self.pixels as f64;
        Ok(())
    }
}

/// TSV: a `pair_id	epe	f1_all	pixels` header, one row per pair, then an
/// `ALL` row with the aggregate.
impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pair_id\tepe\tf1_all\tpixels")?;
        for p in &self.per_pair {
            writeln!(f, "{}\t{:.6}\t{:.4}\t{}", p.pair_id, p.epe, p.f1_all, p.pixels)?;
        }
        writeln!(f, "ALL\t{:.6}\t{:.4}\t{}", self.epe, self.f1_all, self.pixels)
    }
}
