//! Relocalisation statistics, comparison tables and plot data.

mod plot;
mod table;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Trajectory;
use crate::input::{FrameSamples, InputError, Modality, PipelineConfig, SampleSource};
use crate::model::{Model, ModelError};
use crate::pose::{angular_error_with, position_error, quat_normalize, AngleMetric, PoseError, PoseVector};
use crate::train::HyperParams;

pub use plot::{export_trajectory_plot_data, render_plot_png, PlotFiles, PLOT_HEADER};
pub use table::{build_comparison, Cell, ComparisonTable, Reference, ReferenceSet, TableMetric, TableRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTest,
    #[error("network expects {expected} input channels but modality {modality} has {got}")]
    ChannelMismatch { expected: usize, modality: Modality, got: usize },
    #[error("duplicate table cell for architecture '{arch}' on dataset '{dataset}'")]
    DuplicateCell { arch: String, dataset: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io { path: path.to_path_buf(), source }
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Population statistics (divides by `N`); zero for an empty slice.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Stat::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_id: String,
    pub position_error: f64,
    pub angle_error: f64,
    /// Prediction with the quaternion normalized.
    pub predicted: PoseVector,
    /// Network output as produced.
    pub raw: PoseVector,
    pub target: PoseVector,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalMeta {
    pub arch: String,
    pub modality: Option<Modality>,
    pub dataset: String,
    pub param_count: usize,
    pub hp: Option<HyperParams>,
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: EvalMeta,
    pub metric: AngleMetric,
    pub position: Stat,
    pub angle: Stat,
    pub frames: Vec<FrameResult>,
}

impl EvalReport {
    pub fn from_frames(meta: EvalMeta, metric: AngleMetric, frames: Vec<FrameResult>) -> Self {
        let p: Vec<f64> = frames.iter().map(|f| f.position_error).collect();
        let a: Vec<f64> = frames.iter().map(|f| f.angle_error).collect();
        EvalReport { meta, metric, position: Stat::of(&p), angle: Stat::of(&a), frames }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json()).map_err(|e| EvalError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        Self::from_json(&text).map_err(|e| EvalError::Format { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Errors of one prediction against its target.
pub fn frame_result(frame_id: &str, raw: PoseVector, target: &PoseVector, metric: AngleMetric) -> Result<FrameResult, EvalError> {
    let q = quat_normalize(raw.quaternion())?;
    let predicted = PoseVector::from_parts(raw.position(), q);
    Ok(FrameResult {
        frame_id: frame_id.to_string(),
        position_error: position_error(target.position(), raw.position()),
        angle_error: angular_error_with(target.quaternion(), q, metric)?,
        predicted,
        raw,
        target: *target,
    })
}

/// Runs `model` on every sample. Frames are evaluated in parallel; results keep sample order.
pub fn evaluate_samples(
    model: &Model,
    test: &dyn SampleSource,
    meta: EvalMeta,
    metric: AngleMetric,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let frames = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let s = test.sample(i)?;
            let raw = model.predict(&s.input)?;
            frame_result(&s.frame_id, raw, &s.target, metric)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(EvalReport::from_frames(meta, metric, frames))
}

/// Evaluates on a trajectory, assembling inputs with `config`.
pub fn evaluate(
    model: &Model,
    test: &Trajectory,
    modality: Modality,
    config: &PipelineConfig,
    dataset: &str,
) -> Result<EvalReport, EvalError> {
    let expected = model.arch.in_channels();
    if expected != modality.channels() {
        return Err(EvalError::ChannelMismatch { expected, modality, got: modality.channels() });
    }
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let meta = EvalMeta {
        arch: model.arch.name.clone(),
        modality: Some(modality),
        dataset: dataset.to_string(),
        param_count: model.param_count(),
        hp: None,
        stage: None,
    };
    let samples = FrameSamples::new(&[test], modality, config.clone());
    evaluate_samples(model, &samples, meta, AngleMetric::default())
}

/// Result of one curriculum stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// 0-based stage index; the stage trains on `stage + 1` trajectories.
    pub stage: usize,
    pub trajectories: Vec<String>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub trajectories: usize,
    pub position_mean: f64,
    pub angle_mean: f64,
    pub param_count: usize,
}

/// Error against number of training trajectories. The network size must not change across stages.
pub fn curriculum_curve(stages: &[StageReport]) -> Result<Vec<CurvePoint>, EvalError> {
    let Some(first) = stages.first() else {
        return Err(EvalError::Contract("curriculum has no stages".into()));
    };
    let size = first.report.meta.param_count;
    stages
        .iter()
        .map(|s| {
            if s.report.meta.param_count != size {
                return Err(EvalError::Contract(format!(
                    "stage {} has {} parameters, stage {} has {size}",
                    s.stage, s.report.meta.param_count, first.stage
                )));
            }
            Ok(CurvePoint {
                trajectories: s.trajectories.len(),
                position_mean: s.report.position.mean,
                angle_mean: s.report.angle.mean,
                param_count: s.report.meta.param_count,
            })
        })
        .collect()
}
