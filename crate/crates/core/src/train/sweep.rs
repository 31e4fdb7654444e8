use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, HyperParams, TrainError};
use crate::input::SampleSource;
use crate::model::{build_model, ArchSpec, Init};

/// Search space: log-uniform learning rate, fixed lists for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub lr_min: f64,
    pub lr_max: f64,
    pub batch_sizes: Vec<usize>,
    pub weight_decays: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { lr_min: 1e-10, lr_max: 1e-6, batch_sizes: vec![30], weight_decays: vec![5e-1] }
    }
}

impl SweepGrid {
    fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::EmptyGrid(m.to_string()));
        if self.batch_sizes.is_empty() {
            return bad("no batch sizes");
        }
        if self.weight_decays.is_empty() {
            return bad("no weight decays");
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return bad("learning-rate range must satisfy 0 < lr_min <= lr_max");
        }
        Ok(())
    }

    /// Draws `combos` settings. A grid with a single learning rate is finite and
    /// is enumerated without repetition, so at most its size is returned.
    pub fn sample(&self, base: &HyperParams, combos: usize) -> Result<Vec<HyperParams>, TrainError> {
        self.validate()?;
        if combos == 0 {
            return Err(TrainError::EmptyGrid("zero combinations requested".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
        rng.set_stream(7);
        let with = |lr: f64, b: usize, wd: f64| HyperParams { learning_rate: lr, batch_size: b, weight_decay: wd, ..base.clone() };
        if self.lr_min == self.lr_max {
            let mut all: Vec<HyperParams> = self
                .batch_sizes
                .iter()
                .flat_map(|&b| self.weight_decays.iter().map(move |&wd| (b, wd)))
                .map(|(b, wd)| with(self.lr_min, b, wd))
                .collect();
            all.shuffle(&mut rng);
            all.truncate(combos);
            return Ok(all);
        }
        let (lo, hi) = (self.lr_min.ln(), self.lr_max.ln());
        Ok((0..combos)
            .map(|_| {
                let lr = rng.random_range(lo..=hi).exp().clamp(self.lr_min, self.lr_max);
                let b = *self.batch_sizes.choose(&mut rng).expect("nonempty");
                let wd = *self.weight_decays.choose(&mut rng).expect("nonempty");
                with(lr, b, wd)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub hp: HyperParams,
    /// Validation errors of the best snapshot; infinite when diverged.
    pub val_position_error: f64,
    pub val_angle_error: f64,
    pub diverged: bool,
}

/// Entries ranked by validation position error, then angle error; diverged runs last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&SweepEntry> {
        self.entries.first()
    }
}

/// Trains one fresh model per sampled setting. Every run uses `base.seed`;
/// without a validation set the training set is used for ranking.
pub fn sweep(
    arch: &ArchSpec,
    init: &Init,
    train_set: &dyn SampleSource,
    val_set: Option<&dyn SampleSource>,
    grid: &SweepGrid,
    base: &HyperParams,
    combos: usize,
) -> Result<SweepResult, TrainError> {
    let settings = grid.sample(base, combos)?;
    let val = val_set.unwrap_or(train_set);
    let run = |hp: HyperParams| -> Result<SweepEntry, TrainError> {
        let model = build_model(arch.clone(), init.clone())?;
        match train(model, train_set, Some(val), &hp) {
            Ok(out) => {
                let (p, a) = match out.history.best() {
                    Some(r) => (r.val_position_error.unwrap_or(f64::INFINITY), r.val_angle_error.unwrap_or(f64::INFINITY)),
                    None => super::validation_errors(&out.best, val)?,
                };
                Ok(SweepEntry { hp, val_position_error: p, val_angle_error: a, diverged: false })
            }
            Err(TrainError::Diverged { .. }) => Ok(SweepEntry {
                hp,
                val_position_error: f64::INFINITY,
                val_angle_error: f64::INFINITY,
                diverged: true,
            }),
            Err(e) => Err(e),
        }
    };
    // Plain threads rather than the rayon pool: each run blocks on its own
    // batch producer, which itself uses rayon.
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(settings.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SweepEntry, TrainError>>>> = settings.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(hp) = settings.get(i) else { break };
                let r = run(hp.clone());
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let mut entries = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every setting ran"))
        .collect::<Result<Vec<_>, TrainError>>()?;
    entries.sort_by(|a, b| {
        a.diverged
            .cmp(&b.diverged)
            .then(a.val_position_error.total_cmp(&b.val_position_error))
            .then(a.val_angle_error.total_cmp(&b.val_angle_error))
    });
    Ok(SweepResult { entries })
}
