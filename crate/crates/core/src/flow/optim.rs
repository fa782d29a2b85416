//! AdamW with a one-cycle learning-rate policy.

use crate::error::{Error, Result};
use crate::flow::checkpoint::Checkpoint;
use crate::nn::ParamStore;
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// Linear warm-up from `peak/25` over the first `pct_start` of
    /// `total_steps`, then linear decay to `peak/25/1e4`.
    OneCycle { total_steps: usize, pct_start: f64 },
}

impl Schedule {
    pub fn lr(&self, peak: f64, step: usize) -> f64 {
        match *self {
            Schedule::Constant => peak,
            Schedule::OneCycle { total_steps, pct_start } => {
                let initial = peak / 25.0;
                let min = initial / 1e4;
                let warm = (pct_start * total_steps as f64).max(1.0);
                let s = step as f64;
                if s <= warm {
                    initial + (peak - initial) * s / warm
                } else {
                    let rest = (total_steps as f64 - warm).max(1.0);
                    let t = ((s - warm) / rest).min(1.0);
                    peak + (min - peak) * t
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamW<T: Scalar> {
    pub peak_lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: Schedule,
    /// Completed updates.
    pub step: usize,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(store: &ParamStore<T>, peak_lr: f64, weight_decay: f64, schedule: Schedule) -> Self {
        let moments = store
            .iter()
            .map(|(_, p)| (vec![T::zero(); p.numel()], vec![T::zero(); p.numel()]))
            .collect();
        AdamW {
            peak_lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule,
            step: 0,
            moments,
        }
    }

    pub fn current_lr(&self) -> f64 {
        self.schedule.lr(self.peak_lr, self.step)
    }

    /// Applies one update from the accumulated gradients. Parameters
    /// without a gradient are left untouched.
    pub fn update(&mut self, store: &ParamStore<T>) {
        let lr = self.current_lr();
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let cast = T::from_f64_lossy;
        let (b1, b2) = (cast(self.beta1), cast(self.beta2));
        let (one, eps) = (T::one(), cast(self.eps));
        let decay = cast(1.0 - lr * self.weight_decay);
        let step_size = cast(lr / bc1);
        let bc2_sqrt = cast(bc2.sqrt());
        for ((_, p), (m, v)) in store.iter().zip(self.moments.iter_mut()) {
            let Some(g) = p.grad() else {
                continue;
            };
            let mut data = p.data_mut();
            for i in 0..data.len() {
                data[i] *= decay;
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let denom = v[i].sqrt() / bc2_sqrt + eps;
                data[i] -= step_size * m[i] / denom;
            }
        }
    }

    /// Adds moment buffers and the step counter under `opt.`.
    pub fn save_state(&self, store: &ParamStore<T>, ck: &mut Checkpoint) {
        let to32 = |v: &Vec<T>| v.iter().map(|x| x.to_f64_lossy() as f32).collect::<Vec<_>>();
        for ((name, p), (m, v)) in store.iter().zip(&self.moments) {
            ck.insert(format!("opt.m.{name}"), p.shape(), to32(m));
            ck.insert(format!("opt.v.{name}"), p.shape(), to32(v));
        }
        ck.insert("opt.step", &[1], vec![self.step as f32]);
    }

    pub fn load_state(&mut self, store: &ParamStore<T>, ck: &Checkpoint) -> Result<()> {
        let step = ck.get("opt.step").ok_or_else(|| Error::MissingParam("opt.step".into()))?;
        self.step = step.values[0] as usize;
        for ((name, p), (m, v)) in store.iter().zip(self.moments.iter_mut()) {
            for (key, buf) in [(format!("opt.m.{name}"), m), (format!("opt.v.{name}"), v)] {
                let e = ck.get(&key).ok_or_else(|| Error::MissingParam(key.clone()))?;
                if e.shape != p.shape() {
                    return Err(Error::ParamShape {
                        name: key,
                        expected: p.shape().to_vec(),
                        found: e.shape.clone(),
                    });
                }
                *buf = e.values.iter().map(|&x| T::from_f64_lossy(f64::from(x))).collect();
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// `max_norm = 0` disables clipping. Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(store: &ParamStore<T>, max_norm: f64) -> f64 {
    let mut sq = 0.0f64;
    for (_, p) in store.iter() {
        if let Some(g) = p.grad() {
            sq += g.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if max_norm > 0.0 && norm > max_norm && norm.is_finite() {
        let s = T::from_f64_lossy(max_norm / (norm + 1e-6));
        for (_, p) in store.iter() {
            if let Some(g) = p.grad() {
                let scaled: Vec<T> = g.iter().map(|&v| v * s).collect();
                p.zero_grad();
                p.set_grad(scaled);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Init;

    #[test]
    fn one_cycle_shape() {
        let s = Schedule::OneCycle { total_steps: 100, pct_start: 0.1 };
        assert!((s.lr(1.0, 0) - 0.04).abs() < 1e-12);
        assert!((s.lr(1.0, 10) - 1.0).abs() < 1e-12);
        assert!(s.lr(1.0, 50) < 1.0 && s.lr(1.0, 50) > s.lr(1.0, 90));
        assert!(s.lr(1.0, 100) < 1e-5);
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let mut store = ParamStore::<f64>::default();
        let p = Init::new(&mut store, 0).constant("p", &[2], 1.0);
        p.sum().backward().unwrap();
        let mut opt = AdamW::new(&store, 0.1, 0.0, Schedule::Constant);
        opt.update(&store);
        // m̂/√v̂ = 1 on the first step
        for v in p.to_vec() {
            assert!((v - 0.9).abs() < 1e-6);
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut store = ParamStore::<f64>::default();
        let p = Init::new(&mut store, 0).constant("p", &[4], 1.0);
        p.scale(10.0).sum().backward().unwrap();
        let before = clip_grad_norm(&store, 1.0);
        assert!((before - 20.0).abs() < 1e-9);
        let g = p.grad().unwrap();
        let after = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(after <= 1.0);
    }
}
