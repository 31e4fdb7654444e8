use serde::{Deserialize, Serialize};

use super::{train, HyperParams, TrainError, TrainOutcome};
use crate::dataset::Curriculum;
use crate::eval::{evaluate, StageReport};
use crate::input::{compute_channel_means, FrameSamples, Modality, PipelineConfig, SampleSource, DEFAULT_SIDE};
use crate::model::{build_model, ArchSpec, Init, InitScheme, WeightContainer};

/// Input settings shared by every curriculum stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumSpec {
    pub modality: Modality,
    pub side: usize,
    pub scene_scale: f64,
    /// Subtract per-channel means of each stage's training data.
    pub center: bool,
    /// Dataset label written into the reports.
    pub dataset: String,
}

impl Default for CurriculumSpec {
    fn default() -> Self {
        Self { modality: Modality::Rgb, side: DEFAULT_SIDE, scene_scale: 1.0, center: true, dataset: String::new() }
    }
}

/// Trains one model per stage from the same initialization and evaluates
/// each final model on the held-out trajectory.
pub fn run_curriculum(
    arch: &ArchSpec,
    init: &Init,
    curriculum: &Curriculum,
    spec: &CurriculumSpec,
    hp: &HyperParams,
) -> Result<Vec<StageReport>, TrainError> {
    if curriculum.num_stages() == 0 {
        return Err(TrainError::EmptyTrainSet);
    }
    let mut reports = Vec::with_capacity(curriculum.num_stages());
    for stage in 0..curriculum.num_stages() {
        let trajectories: Vec<_> = curriculum.stage(stage).iter().collect();
        let means = if spec.center {
            Some(compute_channel_means(&trajectories, spec.modality, spec.side, spec.scene_scale)?)
        } else {
            None
        };
        let config = PipelineConfig { side: spec.side, scene_scale: spec.scene_scale, channel_means: means };
        let samples = FrameSamples::new(&trajectories, spec.modality, config.clone()).materialize()?;
        log::info!("curriculum stage {} of {}: {} frames", stage + 1, curriculum.num_stages(), samples.len());
        let model = build_model(arch.clone(), init.clone())?;
        let out = train(model, &samples, None, hp)?;
        let mut report = evaluate(&out.model, &curriculum.test, spec.modality, &config, &spec.dataset)?;
        report.meta.stage = Some(stage);
        report.meta.hp = Some(hp.clone());
        reports.push(StageReport { stage, trajectories: curriculum.stage_names(stage), report });
    }
    Ok(reports)
}

/// Trains from a pretrained container; reshaped layers are redrawn with `scheme`.
pub fn finetune(
    container: &WeightContainer,
    arch: &ArchSpec,
    scheme: InitScheme,
    train_set: &dyn SampleSource,
    val_set: Option<&dyn SampleSource>,
    hp: &HyperParams,
) -> Result<TrainOutcome, TrainError> {
    let init = Init::Pretrained { container: Box::new(container.clone()), scheme, seed: hp.seed };
    let model = build_model(arch.clone(), init)?;
    train(model, train_set, val_set, hp)
}
