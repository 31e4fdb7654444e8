//! Dataset ingestion: TUM RGB-D, 7-Scenes and Cambridge Landmarks layouts,
//! the crate's own JSON trajectory manifests, procedurally rendered
//! synthetic scenes, and leave-one-out curricula.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::input::{Intrinsics, Modality};
use crate::pose::{quat_normalize, Pose, PoseError, Quaternion, Vec3};

mod cambridge;
mod curriculum;
mod manifest;
mod seven_scenes;
mod synthetic;
mod tum;

pub use cambridge::{load_cambridge_scene, load_cambridge_sequence, ST_MARYS_TEST_FRAMES, ST_MARYS_TRAIN_FRAMES};
pub use curriculum::{make_leave_one_out, Curriculum};
pub use manifest::{
    bundle_hash, load_bundle_dir, load_manifest, save_bundle, save_manifest, trajectory_hash, FrameEntry,
    TrajectoryManifest, MANIFEST_FORMAT,
};
pub use seven_scenes::{load_7scenes_scene, load_7scenes_sequence, SEVEN_SCENES_DEPTH_SCALE};
pub use synthetic::{generate_synthetic_scene, scene_diameter, Geometry, SceneSpec, SyntheticScene};
pub use tum::{
    associate_nearest, load_tum_sequence, load_tum_sequence_with_report, TumLoadReport, DEFAULT_ASSOC_TOLERANCE,
    TUM_DEPTH_SCALE, TUM_LONG_OFFICE_TRAIN_FRAMES, TUM_LONG_OFFICE_VALIDATION_FRAMES,
};

/// Quaternions whose norm deviates from one by more than this at ingest are reported.
pub const INGEST_UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{what}: zero frames")]
    ZeroFrames { what: String },
    #[error("frame {frame}: {source}")]
    BadPose {
        frame: String,
        #[source]
        source: PoseError,
    },
    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },
    #[error("unknown trajectory '{0}'")]
    UnknownTrajectory(String),
    #[error("curriculum needs at least two trajectories, bundle has {0}")]
    TooFewTrajectories(usize),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        DatasetError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }
}

/// Where the color image of a frame lives.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    /// `(row, column, channel)` array with values in `[0, 1]`.
    Memory(Arc<Array3<f64>>),
}

/// Where the depth map of a frame lives.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthSource {
    /// 16-bit single-channel image; meters = raw / `scale`; raw 0 (and 65535) is invalid.
    File { path: PathBuf, scale: f64 },
    Memory(Arc<Array2<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: String,
    pub rgb: ImageSource,
    pub depth: Option<DepthSource>,
    pub pose: Pose,
    /// Seconds.
    pub timestamp: Option<f64>,
}

impl FrameRecord {
    pub fn load_rgb(&self) -> Result<Array3<f64>, DatasetError> {
        match &self.rgb {
            ImageSource::Memory(a) => Ok(a.as_ref().clone()),
            ImageSource::File(path) => read_rgb_png(path),
        }
    }

    pub fn load_depth(&self) -> Result<Option<Array2<f64>>, DatasetError> {
        match &self.depth {
            None => Ok(None),
            Some(DepthSource::Memory(a)) => Ok(Some(a.as_ref().clone())),
            Some(DepthSource::File { path, scale }) => read_depth_png(path, *scale).map(Some),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Role::Train),
            "validation" | "val" => Ok(Role::Validation),
            "test" => Ok(Role::Test),
            other => Err(format!("unknown role '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub name: String,
    pub frames: Vec<FrameRecord>,
    pub role: Role,
    pub intrinsics: Option<Intrinsics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_depth(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.depth.is_some())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.frames.iter().map(|f| f.pose.position).collect()
    }

    /// Sorts frames by timestamp when every frame carries one.
    pub(crate) fn sort_by_timestamp(&mut self) {
        if self.frames.iter().all(|f| f.timestamp.is_some()) {
            self.frames.sort_by(|a, b| a.timestamp.unwrap().total_cmp(&b.timestamp.unwrap()));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub scene: String,
    pub trajectories: Vec<Trajectory>,
    pub modalities: BTreeSet<Modality>,
}

impl DatasetBundle {
    pub fn new(scene: impl Into<String>, trajectories: Vec<Trajectory>) -> Self {
        let depth = !trajectories.is_empty() && trajectories.iter().all(|t| t.has_depth());
        let intr = trajectories.iter().all(|t| t.intrinsics.is_some());
        let modalities = Modality::ALL
            .into_iter()
            .filter(|m| {
                let geometric_ok = !m.needs_depth() || depth;
                let cloud_ok = !matches!(m, Modality::PointCloud | Modality::RgbPointCloud) || intr;
                geometric_ok && cloud_ok
            })
            .collect();
        Self { scene: scene.into(), trajectories, modalities }
    }

    pub fn trajectory(&self, name: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.name == name)
    }

    pub fn with_role(&self, role: Role) -> Vec<&Trajectory> {
        self.trajectories.iter().filter(|t| t.role == role).collect()
    }

    /// Ensures the bundle can drive a training run.
    pub fn check_trainable(&self) -> Result<(), DatasetError> {
        if self.with_role(Role::Train).is_empty() || self.with_role(Role::Test).is_empty() {
            return Err(DatasetError::InvalidSpec(format!(
                "scene {} needs at least one train and one test trajectory",
                self.scene
            )));
        }
        Ok(())
    }
}

/// Builds a unit orientation from file values, normalizing when needed.
///
/// Quaternions already unit to 1e-9 are kept bit-exact. Returns whether the
/// norm deviated by more than [`INGEST_UNIT_TOLERANCE`].
pub(crate) fn ingest_orientation(q: Quaternion, frame: &str) -> Result<(Quaternion, bool), DatasetError> {
    let n = q.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(DatasetError::BadPose { frame: frame.to_string(), source: PoseError::DegenerateQuaternion });
    }
    let off = (n - 1.0).abs() > INGEST_UNIT_TOLERANCE;
    let q = if q.is_unit() {
        q
    } else {
        quat_normalize(q).map_err(|source| DatasetError::BadPose { frame: frame.to_string(), source })?
    };
    Ok((q, off))
}

pub(crate) fn warn_off_unit(what: &str, count: usize) {
    if count > 0 {
        warn!("{what}: {count} ground-truth quaternions deviated from unit norm by more than {INGEST_UNIT_TOLERANCE:e}; re-normalized");
    }
}

/// Checks an observed frame count against a documented expectation, warning on mismatch.
pub fn check_expected_count(what: &str, observed: usize, expected: usize) -> bool {
    if observed != expected {
        warn!("{what}: expected {expected} frames, found {observed}");
        false
    } else {
        true
    }
}

pub fn read_rgb_png(path: &Path) -> Result<Array3<f64>, DatasetError> {
    let img = image::open(path)
        .map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let raw = img.into_raw();
    Ok(Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
        raw[(y * w as usize + x) * 3 + c] as f64 / 255.0
    }))
}

pub fn read_depth_png(path: &Path, scale: f64) -> Result<Array2<f64>, DatasetError> {
    let img = image::open(path)
        .map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })?
        .to_luma16();
    let (w, h) = img.dimensions();
    let raw = img.into_raw();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| match raw[y * w as usize + x] {
        0 | u16::MAX => 0.0,
        v => v as f64 / scale,
    }))
}

pub fn write_rgb_png(path: &Path, rgb: &Array3<f64>) -> Result<(), DatasetError> {
    let (h, w, _) = rgb.dim();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        for c in 0..3 {
            px.0[c] = (rgb[[y as usize, x as usize, c]].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    buf.save(path).map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })
}

pub fn write_depth_png(path: &Path, depth: &Array2<f64>, scale: f64) -> Result<(), DatasetError> {
    let (h, w) = depth.dim();
    let mut buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> = image::ImageBuffer::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let v = (depth[[y as usize, x as usize]] * scale).round();
        px.0[0] = v.clamp(0.0, (u16::MAX - 1) as f64) as u16;
    }
    buf.save(path).map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })
}

pub(crate) fn read_text(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))
}
