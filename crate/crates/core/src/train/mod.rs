//! Mini-batch SGD against the pose loss, hyperparameter sweeps and the
//! leave-one-out trajectory curriculum.

mod curriculum;
mod sweep;

use std::sync::mpsc::sync_channel;
use std::time::Instant;

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::input::{InputError, SampleSource};
use crate::model::{Gradients, Model, ModelError, Provenance};
use crate::pose::{align_hemisphere, angular_error, position_error, quat_normalize, PoseError, PoseVector, DEFAULT_BETA};

pub use curriculum::{finetune, run_curriculum, CurriculumSpec};
pub use sweep::{sweep, SweepEntry, SweepGrid, SweepResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta: f64,
    pub epochs: usize,
    pub seed: u64,
    pub momentum: f64,
    /// Flip each target quaternion into the prediction's hemisphere before the loss.
    pub align_hemisphere: bool,
    /// Prepared batches buffered ahead of the optimizer; 0 means 2.
    pub prefetch: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            batch_size: 30,
            learning_rate: 1e-6,
            weight_decay: 5e-1,
            beta: DEFAULT_BETA,
            epochs: 250,
            seed: 0,
            momentum: 0.9,
            align_hemisphere: false,
            prefetch: 2,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidHyperParams(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be nonnegative and finite");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive and finite");
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_position_error: Option<f64>,
    pub val_angle_error: Option<f64>,
}

/// Per-epoch record of a run. Wall times are kept apart from the serialized
/// form so that identical runs produce identical history files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the best-validation snapshot, if any epoch completed.
    pub best_epoch: Option<usize>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub wall_seconds: Vec<f64>,
}

impl TrainHistory {
    fn new(provenance: Provenance) -> Self {
        Self { epochs: Vec::new(), best_epoch: None, provenance, wall_seconds: Vec::new() }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.epochs.iter().find(|r| r.epoch == e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serializes")
    }

    /// Wall time per epoch as CSV (`epoch,seconds`).
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("epoch,seconds\n");
        for (r, t) in self.epochs.iter().zip(&self.wall_seconds) {
            out.push_str(&format!("{},{t}\n", r.epoch));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("batch size {batch} exceeds training set size {len}")]
    BatchTooLarge { batch: usize, len: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("diverged: non-finite loss in epoch {epoch} with learning rate {lr:e}")]
    Diverged {
        epoch: usize,
        lr: f64,
        /// Model as it was before the failing epoch.
        last_good: Box<Model>,
        history: TrainHistory,
    },
    #[error("empty hyperparameter grid: {0}")]
    EmptyGrid(String),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Snapshot with the lowest validation position error (angle breaks ties);
    /// the final model when no validation set is given.
    pub best: Model,
    pub history: TrainHistory,
}

/// Mean position and angle error of `model` on `val`.
pub fn validation_errors(model: &Model, val: &dyn SampleSource) -> Result<(f64, f64), TrainError> {
    let errs = (0..val.len())
        .into_par_iter()
        .map(|i| {
            let s = val.sample(i)?;
            let p = model.predict(&s.input)?;
            let q = quat_normalize(p.quaternion())?;
            Ok((position_error(s.target.position(), p.position()), angular_error(s.target.quaternion(), q)?))
        })
        .collect::<Result<Vec<(f64, f64)>, TrainError>>()?;
    let n = errs.len().max(1) as f64;
    let (p, a) = errs.iter().fold((0.0, 0.0), |acc, e| (acc.0 + e.0, acc.1 + e.1));
    Ok((p / n, a / n))
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

type Batch = Vec<(Array3<f64>, PoseVector)>;

/// SGD with momentum and L2 weight decay (weights only, not biases).
fn sgd_step(model: &mut Model, velocity: &mut Gradients, grads: &Gradients, hp: &HyperParams) {
    for ((p, v), g) in model.params.iter_mut().zip(velocity.layers.iter_mut()).zip(&grads.layers) {
        let (Some(p), Some(v), Some(g)) = (p, v, g) else { continue };
        ndarray::Zip::from(&mut p.weight).and(&mut v.weight).and(&g.weight).for_each(|w, v, &g| {
            *v = hp.momentum * *v - hp.learning_rate * (g + hp.weight_decay * *w);
            *w += *v;
        });
        ndarray::Zip::from(&mut p.bias).and(&mut v.bias).and(&g.bias).for_each(|b, v, &g| {
            *v = hp.momentum * *v - hp.learning_rate * g;
            *b += *v;
        });
    }
}

/// Trains `model` for `hp.epochs` epochs, validating after each one.
///
/// Sample assembly runs on a producer thread that feeds prepared batches
/// through a bounded queue; the optimizer consumes them in a fixed order, so a
/// run is a deterministic function of its inputs and `hp.seed`.
pub fn train(
    model: Model,
    train_set: &dyn SampleSource,
    val_set: Option<&dyn SampleSource>,
    hp: &HyperParams,
) -> Result<TrainOutcome, TrainError> {
    hp.validate()?;
    let n = train_set.len();
    if n == 0 {
        return Err(TrainError::EmptyTrainSet);
    }
    if hp.batch_size > n {
        return Err(TrainError::BatchTooLarge { batch: hp.batch_size, len: n });
    }
    let mut history = TrainHistory::new(model.provenance.clone());
    let mut model = model;
    let mut best = model.clone();
    let mut best_key: Option<(f64, f64)> = None;
    let mut velocity = Gradients::zeros_like(&model);
    velocity.fill_zero();
    let mut grads = Gradients::zeros_like(&model);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    dropout_rng.set_stream(2);
    let depth = if hp.prefetch == 0 { 2 } else { hp.prefetch };

    for epoch in 1..=hp.epochs {
        let started = Instant::now();
        let epoch_start = model.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let batches: Vec<Vec<usize>> = order.chunks(hp.batch_size).map(<[usize]>::to_vec).collect();
        let mut loss_sum = 0.0;
        let mut diverged = false;

        let result: Result<(), TrainError> = std::thread::scope(|scope| {
            let (tx, rx) = sync_channel::<Result<Batch, InputError>>(depth);
            scope.spawn(move || {
                for idx in &batches {
                    let batch = idx
                        .par_iter()
                        .map(|&i| train_set.sample(i).map(|s| (s.input, s.target)))
                        .collect::<Result<Batch, InputError>>();
                    let failed = batch.is_err();
                    if tx.send(batch).is_err() || failed {
                        break;
                    }
                }
            });
            for batch in rx {
                let batch = batch?;
                grads.fill_zero();
                let mut batch_loss = 0.0;
                for (input, target) in &batch {
                    let target = if hp.align_hemisphere {
                        let pred = model.predict(input)?;
                        align_hemisphere(target, &pred)
                    } else {
                        *target
                    };
                    let (loss, _) = model.loss_and_grad(input, &target, hp.beta, Some(&mut dropout_rng), &mut grads)?;
                    batch_loss += loss;
                }
                if !batch_loss.is_finite() || !grads.is_finite() {
                    diverged = true;
                    return Ok(());
                }
                grads.scale(1.0 / batch.len() as f64);
                sgd_step(&mut model, &mut velocity, &grads, hp);
                loss_sum += batch_loss;
            }
            Ok(())
        });
        result?;

        let weights_finite = model.values().all(f64::is_finite);
        if diverged || !weights_finite {
            log::warn!("diverged in epoch {epoch} (lr {:e})", hp.learning_rate);
            return Err(TrainError::Diverged {
                epoch,
                lr: hp.learning_rate,
                last_good: Box::new(epoch_start),
                history,
            });
        }

        let (vp, va) = match val_set {
            Some(v) if !v.is_empty() => {
                let (p, a) = validation_errors(&model, v)?;
                (Some(p), Some(a))
            }
            _ => (None, None),
        };
        history.epochs.push(EpochRecord { epoch, train_loss: loss_sum / n as f64, val_position_error: vp, val_angle_error: va });
        history.wall_seconds.push(started.elapsed().as_secs_f64());
        update_best(&mut best, &mut best_key, &mut history, &model, epoch, vp.zip(va));
        log::debug!("epoch {epoch}: loss {:.6} val {:?}", loss_sum / n as f64, vp);
    }
    if history.epochs.is_empty() {
        best = model.clone();
    }
    Ok(TrainOutcome { model, best, history })
}

fn update_best(
    best: &mut Model,
    best_key: &mut Option<(f64, f64)>,
    history: &mut TrainHistory,
    model: &Model,
    epoch: usize,
    key: Option<(f64, f64)>,
) {
    match key {
        Some(k) if best_key.is_none_or(|b| better(k, b)) => {
            *best_key = Some(k);
            *best = model.clone();
            history.best_epoch = Some(epoch);
        }
        Some(_) => {}
        None => {
            *best = model.clone();
            history.best_epoch = Some(epoch);
        }
    }
}
