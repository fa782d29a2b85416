//! Training loop: seeded epoch-permutation sampling, gradient accumulation
//! over the batch, norm clipping, AdamW with the configured schedule, TSV
//! logging and periodic `AGFW` checkpoints that also carry optimizer state.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Precision, RunConfig};
use crate::data::{Dataset, EvalResult, F1Criterion, FlowField, Sample};
use crate::error::{Error, Result};
use crate::flow::checkpoint::Checkpoint;
use crate::flow::optim::{clip_grad_norm, AdamW};
use crate::flow::{sequence_loss, FlowModel};
use crate::tensor::{no_grad, Scalar, Tensor};

pub const LOG_FILE: &str = "train_log.tsv";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const CONFIG_FILE: &str = "config.txt";
pub const FINAL_CHECKPOINT: &str = "final.agfw";

/// Prefix of optimizer entries inside a checkpoint.
pub const OPT_PREFIX: &str = "opt.";

/// One pair converted to tensors of the working precision.
pub struct TensorSample<T: Scalar> {
    pub pair_id: String,
    pub image1: Tensor<T>,
    pub image2: Tensor<T>,
    pub flow: Tensor<T>,
    pub mask: Option<Tensor<T>>,
    pub gt: FlowField,
}

impl<T: Scalar> TensorSample<T> {
    pub fn new(s: &Sample) -> Self {
        TensorSample {
            pair_id: s.pair_id.clone(),
            image1: s.image1.to_tensor(),
            image2: s.image2.to_tensor(),
            flow: s.flow.to_tensor(),
            mask: s.flow.mask_tensor(),
            gt: s.flow.clone(),
        }
    }
}

/// One logged training step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub epe: f64,
}

/// Whole-dataset loss and metrics for one set of weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetScore {
    /// Mean sequence loss over all pairs.
    pub loss: f64,
    pub eval: EvalResult,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    /// Every executed step, in order (the log holds every `log_every`-th).
    pub steps: Vec<StepRecord>,
    pub initial: DatasetScore,
    pub final_score: DatasetScore,
    pub final_checkpoint: PathBuf,
    pub out_dir: PathBuf,
}

/// Dataset indices used by step `step` for a dataset of `n` pairs: the
/// stream of per-epoch permutations, consumed `batch` at a time.
pub fn batch_indices(seed: u64, step: usize, batch: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(batch);
    let mut cached: Option<(usize, Vec<usize>)> = None;
    for b in 0..batch {
        let k = step * batch + b;
        let (epoch, pos) = (k / n, k % n);
        if cached.as_ref().is_none_or(|(e, _)| *e != epoch) {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000_0000 ^ epoch as u64);
            perm.shuffle(&mut rng);
            cached = Some((epoch, perm));
        }
        out.push(cached.as_ref().expect("set above").1[pos]);
    }
    out
}

/// Scores `model` on `samples` without recording gradients: mean sequence
/// loss plus EPE / F1-all of the final refinement iteration.
pub fn score_dataset<T: Scalar>(
    model: &FlowModel<T>,
    samples: &[TensorSample<T>],
    gamma: f64,
    crit: F1Criterion,
) -> Result<DatasetScore> {
    no_grad(|| {
        let mut eval = EvalResult::default();
        let mut loss = 0.0;
        for s in samples {
            let preds = model.forward(&s.image1, &s.image2)?;
            loss += sequence_loss(&preds, &s.flow, s.mask.as_ref(), gamma)?.item().to_f64_lossy();
            let last = FlowField::from_tensor(preds.last().expect("iters > 0"))?;
            eval.add(s.pair_id.clone(), &last, &s.gt, crit)?;
        }
        Ok(DatasetScore {
            loss: loss / samples.len() as f64,
            eval,
        })
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains according to `cfg`, writing into `cfg.out`.
pub fn train(cfg: &RunConfig) -> Result<TrainSummary> {
    match cfg.precision {
        Precision::F32 => train_with::<f32>(cfg),
        Precision::F64 => train_with::<f64>(cfg),
    }
}

pub fn train_with<T: Scalar>(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let dataset = Dataset::open(&cfg.data)?;
    let samples: Vec<TensorSample<T>> = dataset.load_all()?.iter().map(TensorSample::new).collect();
    for s in &samples {
        cfg.model.check_image_size(s.gt.height, s.gt.width)?;
    }
    let model = FlowModel::<T>::new(cfg.model.clone())?;
    let mut opt = AdamW::new(&model.params, cfg.lr, cfg.weight_decay, cfg.schedule());
    if let Some(path) = &cfg.resume {
        let ck = Checkpoint::load(path)?;
        ck.apply_to(&model.params, OPT_PREFIX)?;
        opt.load_state(&model.params, &ck)?;
    }
    let start = opt.step;
    if start > cfg.steps {
        return Err(Error::Config(format!(
            "resume checkpoint is at step {start}, beyond steps = {}",
            cfg.steps
        )));
    }

    create_dir(&cfg.out)?;
    write_file(&cfg.out.join(CONFIG_FILE), &cfg.to_text())?;
    let log_path = cfg.out.join(LOG_FILE);
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;

    let crit = cfg.f1_criterion();
    let initial = score_dataset(&model, &samples, cfg.gamma, crit)?;
    log::info!("initial loss {:.6} epe {:.4}", initial.loss, initial.eval.epe);

    let mut steps = Vec::with_capacity(cfg.steps - start);
    let inv_batch = T::from_f64_lossy(1.0 / cfg.batch_size as f64);
    for step in start..cfg.steps {
        let mut loss_sum = 0.0;
        let mut eval = EvalResult::default();
        for idx in batch_indices(cfg.model.seed, step, cfg.batch_size, samples.len()) {
            let s = &samples[idx];
            let preds = model.forward(&s.image1, &s.image2)?;
            let loss = sequence_loss(&preds, &s.flow, s.mask.as_ref(), cfg.gamma)?;
            let value = loss.item().to_f64_lossy();
            if !value.is_finite() {
                return Err(Error::NonFinite { step, value });
            }
            loss_sum += value;
            loss.scale(inv_batch).backward()?;
            let last = FlowField::from_tensor(preds.last().expect("iters > 0"))?;
            eval.add(s.pair_id.clone(), &last, &s.gt, crit)?;
        }
        clip_grad_norm(&model.params, cfg.clip);
        opt.update(&model.params);
        model.params.zero_grad();

        let rec = StepRecord {
            step,
            loss: loss_sum / cfg.batch_size as f64,
            epe: eval.epe,
        };
        steps.push(rec);
        if step % cfg.log_every == 0 {
            writeln!(log, "{}\t{:.6}\t{:.6}", rec.step, rec.loss, rec.epe).map_err(|e| Error::io(&log_path, e))?;
            log::info!("step {} loss {:.6} epe {:.4} lr {:.3e}", rec.step, rec.loss, rec.epe, opt.current_lr());
        }
        if cfg.checkpoint_every > 0 && opt.step % cfg.checkpoint_every == 0 && opt.step < cfg.steps {
            save_checkpoint(&model, &opt, &cfg.out.join(format!("step_{:06}.agfw", opt.step)))?;
        }
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    let final_checkpoint = cfg.out.join(FINAL_CHECKPOINT);
    save_checkpoint(&model, &opt, &final_checkpoint)?;
    let final_score = score_dataset(&model, &samples, cfg.gamma, crit)?;
    let summary = format!(
        "metric\tinitial\tfinal\nloss\t{:.6}\t{:.6}\nepe\t{:.6}\t{:.6}\nf1_all\t{:.4}\t{:.4}\n",
        initial.loss, final_score.loss, initial.eval.epe, final_score.eval.epe, initial.eval.f1_all, final_score.eval.f1_all
    );
    write_file(&cfg.out.join(SUMMARY_FILE), &summary)?;
    Ok(TrainSummary {
        steps,
        initial,
        final_score,
        final_checkpoint,
        out_dir: cfg.out.clone(),
    })
}

pub fn save_checkpoint<T: Scalar>(model: &FlowModel<T>, opt: &AdamW<T>, path: &Path) -> Result<()> {
    let mut ck = Checkpoint::from_store(&model.params);
    opt.save_state(&model.params, &mut ck);
    ck.save(path)
}

/// Builds a model for `cfg` and loads weights from `path` (optimizer
/// entries, if any, are ignored).
pub fn load_model<T: Scalar>(cfg: &RunConfig, path: &Path) -> Result<FlowModel<T>> {
    let model = FlowModel::<T>::new(cfg.model.clone())?;
    Checkpoint::load(path)?.apply_to(&model.params, OPT_PREFIX)?;
    Ok(model)
}
