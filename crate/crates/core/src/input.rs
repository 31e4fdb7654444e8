//! Conversion of frame records into fixed-size n-channel network inputs.
//!
//! Images are `ndarray` arrays in `(row, column, channel)` layout. Depth maps
//! are `(row, column)` in meters with `0.0` marking invalid pixels.
//!
//! Channel stacking order is RGB first, then depth or XYZ. Depth and XYZ
//! channels are divided by the scene scale before per-channel mean
//! subtraction, and are resized with nearest-neighbour sampling so no
//! geometry is invented across depth discontinuities. Back-projection runs
//! on the full-resolution depth with the original intrinsics; the XYZ image
//! is cropped afterwards.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, FrameRecord, Trajectory};
use crate::pose::PoseVector;

/// Network input side length used by the VGG family.
pub const DEFAULT_SIDE: usize = 224;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("output side must be positive")]
    ZeroSide,
    #[error("empty image")]
    EmptyImage,
    #[error("expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("frame {frame}: modality {modality} needs depth but the frame has none")]
    MissingDepth { frame: String, modality: Modality },
    #[error("frame {frame}: modality {modality} needs camera intrinsics")]
    MissingIntrinsics { frame: String, modality: Modality },
    #[error("channel means have {got} entries, modality needs {expected}")]
    MeansMismatch { expected: usize, got: usize },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Pinhole camera parameters in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, InputError> {
        let intr = Self { fx, fy, cx, cy };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), InputError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(InputError::InvalidIntrinsics(format!("fx = {}, fy = {}", self.fx, self.fy)));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(InputError::InvalidIntrinsics("non-finite principal point".into()));
        }
        Ok(())
    }

    /// TUM RGB-D Freiburg 3 color camera (factory calibration published with the dataset).
    pub fn tum_freiburg3() -> Self {
        Self { fx: 535.4, fy: 539.2, cx: 320.1, cy: 247.6 }
    }

    /// 7-Scenes Kinect nominal calibration (published with the dataset).
    pub fn seven_scenes() -> Self {
        Self { fx: 585.0, fy: 585.0, cx: 320.0, cy: 240.0 }
    }

    /// Reads a TOML file with keys `fx`, `fy`, `cx`, `cy`.
    pub fn from_file(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError::InvalidIntrinsics(format!("{}: {e}", path.display())))?;
        let intr: Intrinsics =
            toml::from_str(&text).map_err(|e| InputError::InvalidIntrinsics(format!("{}: {e}", path.display())))?;
        intr.validate()?;
        Ok(intr)
    }

    /// Pixel coordinates `(u, v)` of a camera-frame point with `Z > 0`.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy)
    }
}

/// Input channel configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "depth")]
    Depth,
    #[serde(rename = "gray")]
    Gray,
    #[serde(rename = "rgb")]
    Rgb,
    #[serde(rename = "pointcloud")]
    PointCloud,
    #[serde(rename = "rgb+depth")]
    RgbDepth,
    #[serde(rename = "rgb+pointcloud")]
    RgbPointCloud,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Depth,
        Modality::Gray,
        Modality::Rgb,
        Modality::PointCloud,
        Modality::RgbDepth,
        Modality::RgbPointCloud,
    ];

    pub fn channels(self) -> usize {
        match self {
            Modality::Depth | Modality::Gray => 1,
            Modality::Rgb | Modality::PointCloud => 3,
            Modality::RgbDepth => 4,
            Modality::RgbPointCloud => 6,
        }
    }

    pub fn needs_depth(self) -> bool {
        matches!(self, Modality::Depth | Modality::PointCloud | Modality::RgbDepth | Modality::RgbPointCloud)
    }

    pub fn needs_rgb(self) -> bool {
        !matches!(self, Modality::Depth | Modality::PointCloud)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Depth => "depth",
            Modality::Gray => "gray",
            Modality::Rgb => "rgb",
            Modality::PointCloud => "pointcloud",
            Modality::RgbDepth => "rgb+depth",
            Modality::RgbPointCloud => "rgb+pointcloud",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown modality '{s}'"))
    }
}

/// A network-ready input array.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub data: Array3<f64>,
    pub modality: Modality,
    pub frame_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub side: usize,
    /// Divisor applied to depth and XYZ channels, in meters.
    pub scene_scale: f64,
    /// Per-channel means subtracted after scaling; `None` skips centering.
    pub channel_means: Option<Vec<f64>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { side: DEFAULT_SIDE, scene_scale: 1.0, channel_means: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

/// Offsets `(row0, col0, side)` of the largest centered square in an `h × w` image.
pub fn centered_square(h: usize, w: usize) -> (usize, usize, usize) {
    let side = h.min(w);
    ((h - side) / 2, (w - side) / 2, side)
}

/// Crops the largest centered square and resizes it to `side × side` (bilinear).
pub fn center_crop_resize(image: &Array3<f64>, side: usize) -> Result<Array3<f64>, InputError> {
    center_crop_resize_with(image, side, Interpolation::Bilinear)
}

pub fn center_crop_resize_with(
    image: &Array3<f64>,
    side: usize,
    interp: Interpolation,
) -> Result<Array3<f64>, InputError> {
    if side == 0 {
        return Err(InputError::ZeroSide);
    }
    let (h, w, c) = image.dim();
    if h == 0 || w == 0 || c == 0 {
        return Err(InputError::EmptyImage);
    }
    let (r0, c0, sq) = centered_square(h, w);
    let crop = image.slice(s![r0..r0 + sq, c0..c0 + sq, ..]);
    if sq == side {
        return Ok(crop.to_owned());
    }
    // Half-pixel-center mapping: dst pixel d samples source coordinate (d + 0.5)·scale − 0.5.
    let scale = sq as f64 / side as f64;
    let mut out = Array3::zeros((side, side, c));
    match interp {
        Interpolation::Nearest => {
            let idx: Vec<usize> =
                (0..side).map(|d| (((d as f64 + 0.5) * scale).floor() as usize).min(sq - 1)).collect();
            for (oy, &sy) in idx.iter().enumerate() {
                for (ox, &sx) in idx.iter().enumerate() {
                    for ch in 0..c {
                        out[[oy, ox, ch]] = crop[[sy, sx, ch]];
                    }
                }
            }
        }
        Interpolation::Bilinear => {
            let taps: Vec<(usize, usize, f64)> = (0..side)
                .map(|d| {
                    let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (sq - 1) as f64);
                    let i0 = src.floor() as usize;
                    let i1 = (i0 + 1).min(sq - 1);
                    (i0, i1, src - i0 as f64)
                })
                .collect();
            for (oy, &(y0, y1, fy)) in taps.iter().enumerate() {
                for (ox, &(x0, x1, fx)) in taps.iter().enumerate() {
                    for ch in 0..c {
                        let top = crop[[y0, x0, ch]] * (1.0 - fx) + crop[[y0, x1, ch]] * fx;
                        let bottom = crop[[y1, x0, ch]] * (1.0 - fx) + crop[[y1, x1, ch]] * fx;
                        out[[oy, ox, ch]] = top * (1.0 - fy) + bottom * fy;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Back-projects a depth map into an organized `H × W × 3` point cloud in the camera frame.
pub fn depth_to_pointcloud(depth: &Array2<f64>, intr: &Intrinsics) -> Array3<f64> {
    let (h, w) = depth.dim();
    let mut out = Array3::zeros((h, w, 3));
    for ((v, u), &z) in depth.indexed_iter() {
        if z > 0.0 {
            out[[v, u, 0]] = (u as f64 - intr.cx) * z / intr.fx;
            out[[v, u, 1]] = (v as f64 - intr.cy) * z / intr.fy;
            out[[v, u, 2]] = z;
        }
    }
    out
}

/// Luma `0.299 R + 0.587 G + 0.114 B`.
pub fn to_gray(rgb: &Array3<f64>) -> Result<Array3<f64>, InputError> {
    let (h, w, c) = rgb.dim();
    if c != 3 {
        return Err(InputError::ChannelMismatch { expected: 3, got: c });
    }
    let mut out = Array3::zeros((h, w, 1));
    for y in 0..h {
        for x in 0..w {
            out[[y, x, 0]] = 0.299 * rgb[[y, x, 0]] + 0.587 * rgb[[y, x, 1]] + 0.114 * rgb[[y, x, 2]];
        }
    }
    Ok(out)
}

/// Builds the uncentered channel stack for a frame.
pub fn stack_channels(
    frame: &FrameRecord,
    modality: Modality,
    intrinsics: Option<&Intrinsics>,
    side: usize,
    scene_scale: f64,
) -> Result<Array3<f64>, InputError> {
    let depth = if modality.needs_depth() {
        let d = frame
            .load_depth()?
            .ok_or_else(|| InputError::MissingDepth { frame: frame.frame_id.clone(), modality })?;
        Some(d)
    } else {
        None
    };
    let mut parts: Vec<Array3<f64>> = Vec::with_capacity(2);
    if modality.needs_rgb() {
        let rgb = frame.load_rgb()?;
        let rgb = center_crop_resize_with(&rgb, side, Interpolation::Bilinear)?;
        parts.push(if modality == Modality::Gray { to_gray(&rgb)? } else { rgb });
    }
    if let Some(depth) = depth {
        let geometric = match modality {
            Modality::Depth | Modality::RgbDepth => depth.insert_axis(Axis(2)),
            _ => {
                let intr = intrinsics
                    .ok_or_else(|| InputError::MissingIntrinsics { frame: frame.frame_id.clone(), modality })?;
                depth_to_pointcloud(&depth, intr)
            }
        };
        let mut geometric = center_crop_resize_with(&geometric, side, Interpolation::Nearest)?;
        geometric.mapv_inplace(|v| v / scene_scale);
        parts.push(geometric);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let stacked = ndarray::concatenate(Axis(2), &views).expect("channel groups share spatial size");
    debug_assert_eq!(stacked.dim().2, modality.channels());
    Ok(stacked)
}

/// Produces the network input for one frame, applying mean subtraction when configured.
pub fn assemble_input(
    frame: &FrameRecord,
    modality: Modality,
    intrinsics: Option<&Intrinsics>,
    config: &PipelineConfig,
) -> Result<NetInput, InputError> {
    let mut data = stack_channels(frame, modality, intrinsics, config.side, config.scene_scale)?;
    if let Some(means) = &config.channel_means {
        subtract_means(&mut data, means)?;
    }
    Ok(NetInput { data, modality, frame_id: frame.frame_id.clone() })
}

pub fn subtract_means(data: &mut Array3<f64>, means: &[f64]) -> Result<(), InputError> {
    let c = data.dim().2;
    if means.len() != c {
        return Err(InputError::MeansMismatch { expected: c, got: means.len() });
    }
    for mut lane in data.lanes_mut(Axis(2)) {
        for (v, m) in lane.iter_mut().zip(means) {
            *v -= m;
        }
    }
    Ok(())
}

/// Per-channel means of the uncentered inputs over every frame of `trajectories`.
pub fn compute_channel_means(
    trajectories: &[&Trajectory],
    modality: Modality,
    side: usize,
    scene_scale: f64,
) -> Result<Vec<f64>, InputError> {
    let jobs: Vec<(&FrameRecord, Option<&Intrinsics>)> = trajectories
        .iter()
        .flat_map(|t| t.frames.iter().map(move |f| (f, t.intrinsics.as_ref())))
        .collect();
    let sums: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|(f, intr)| {
            let data = stack_channels(f, modality, *intr, side, scene_scale)?;
            Ok(data.lanes(Axis(2)).into_iter().fold(vec![0.0; modality.channels()], |mut acc, lane| {
                for (a, v) in acc.iter_mut().zip(lane) {
                    *a += v;
                }
                acc
            }))
        })
        .collect::<Result<_, InputError>>()?;
    let mut total = vec![0.0; modality.channels()];
    for s in &sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let count = (jobs.len() * side * side).max(1) as f64;
    Ok(total.into_iter().map(|t| t / count).collect())
}

/// A network input paired with its regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Array3<f64>,
    pub target: PoseVector,
    pub frame_id: String,
}

/// Random-access provider of training or evaluation samples.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, index: usize) -> Result<Sample, InputError>;

    /// Ground-truth target of a sample without building its input.
    fn target(&self, index: usize) -> PoseVector;

    fn frame_id(&self, index: usize) -> String;
}

/// Samples held fully in memory.
#[derive(Debug, Clone, Default)]
pub struct InMemorySamples(pub Vec<Sample>);

impl SampleSource for InMemorySamples {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn sample(&self, index: usize) -> Result<Sample, InputError> {
        Ok(self.0[index].clone())
    }

    fn target(&self, index: usize) -> PoseVector {
        self.0[index].target
    }

    fn frame_id(&self, index: usize) -> String {
        self.0[index].frame_id.clone()
    }
}

/// Samples assembled lazily from frame records on request.
pub struct FrameSamples<'a> {
    frames: Vec<(&'a FrameRecord, Option<&'a Intrinsics>)>,
    modality: Modality,
    config: PipelineConfig,
}

impl<'a> FrameSamples<'a> {
    pub fn new(trajectories: &[&'a Trajectory], modality: Modality, config: PipelineConfig) -> Self {
        let frames = trajectories
            .iter()
            .flat_map(|t| t.frames.iter().map(move |f| (f, t.intrinsics.as_ref())))
            .collect();
        Self { frames, modality, config }
    }

    /// Assembles every sample up front.
    pub fn materialize(&self) -> Result<InMemorySamples, InputError> {
        let samples = (0..self.len()).into_par_iter().map(|i| self.sample(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(InMemorySamples(samples))
    }
}

impl SampleSource for FrameSamples<'_> {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn sample(&self, index: usize) -> Result<Sample, InputError> {
        let (frame, intr) = self.frames[index];
        let input = assemble_input(frame, self.modality, intr, &self.config)?;
        Ok(Sample { input: input.data, target: frame.pose.to_vector(), frame_id: frame.frame_id.clone() })
    }

    fn target(&self, index: usize) -> PoseVector {
        self.frames[index].0.pose.to_vector()
    }

    fn frame_id(&self, index: usize) -> String {
        self.frames[index].0.frame_id.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DepthSource, ImageSource};
    use crate::pose::Pose;
    use std::sync::Arc;

    fn frame(rgb: Array3<f64>, depth: Option<Array2<f64>>) -> FrameRecord {
        FrameRecord {
            frame_id: "f0".into(),
            rgb: ImageSource::Memory(Arc::new(rgb)),
            depth: depth.map(|d| DepthSource::Memory(Arc::new(d))),
            pose: Pose::identity(),
            timestamp: None,
        }
    }

    #[test]
    fn crop_resize_identity_at_native_side() {
        let img = Array3::from_shape_fn((224, 224, 3), |(y, x, c)| (y * 7 + x * 3 + c) as f64);
        assert_eq!(center_crop_resize(&img, 224).unwrap(), img);
    }

    #[test]
    fn crop_resize_constant_image() {
        let img = Array3::from_elem((480, 640, 3), 0.37);
        let out = center_crop_resize(&img, 224).unwrap();
        assert_eq!(out.dim(), (224, 224, 3));
        assert!(out.iter().all(|v| (*v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn crop_resize_rejects_zero_side() {
        let img = Array3::from_elem((4, 4, 1), 1.0);
        assert!(matches!(center_crop_resize(&img, 0), Err(InputError::ZeroSide)));
    }

    #[test]
    fn backprojection_examples() {
        let intr = Intrinsics::new(100.0, 100.0, 2.0, 1.0).unwrap();
        let mut depth = Array2::zeros((3, 5));
        depth[[1, 2]] = 2.0;
        let pc = depth_to_pointcloud(&depth, &intr);
        assert_eq!([pc[[1, 2, 0]], pc[[1, 2, 1]], pc[[1, 2, 2]]], [0.0, 0.0, 2.0]);

        let intr = Intrinsics::new(2.0, 2.0, 1.0, 1.0).unwrap();
        let mut depth = Array2::zeros((3, 4));
        depth[[1, 3]] = 1.0;
        let pc = depth_to_pointcloud(&depth, &intr);
        assert_eq!([pc[[1, 3, 0]], pc[[1, 3, 1]], pc[[1, 3, 2]]], [1.0, 0.0, 1.0]);
        // invalid pixels stay at the origin
        assert_eq!([pc[[0, 0, 0]], pc[[0, 0, 1]], pc[[0, 0, 2]]], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn gray_examples() {
        let white = Array3::from_elem((1, 1, 3), 1.0);
        assert!((to_gray(&white).unwrap()[[0, 0, 0]] - 1.0).abs() < 1e-15);
        let mut red = Array3::zeros((1, 1, 3));
        red[[0, 0, 0]] = 1.0;
        assert_eq!(to_gray(&red).unwrap()[[0, 0, 0]], 0.299);
        assert!(matches!(to_gray(&Array3::zeros((2, 2, 4))), Err(InputError::ChannelMismatch { .. })));
    }

    #[test]
    fn assemble_channel_counts() {
        let intr = Intrinsics::new(10.0, 10.0, 4.0, 4.0).unwrap();
        let f = frame(Array3::from_elem((8, 8, 3), 0.5), Some(Array2::from_elem((8, 8), 2.0)));
        let cfg = PipelineConfig { side: 4, ..Default::default() };
        for m in Modality::ALL {
            let input = assemble_input(&f, m, Some(&intr), &cfg).unwrap();
            assert_eq!(input.data.dim(), (4, 4, m.channels()), "{m}");
        }
        let rgb_only = frame(Array3::from_elem((8, 8, 3), 0.5), None);
        assert!(matches!(
            assemble_input(&rgb_only, Modality::Depth, Some(&intr), &cfg),
            Err(InputError::MissingDepth { .. })
        ));
    }

    #[test]
    fn channel_order_is_rgb_then_geometry() {
        let intr = Intrinsics::new(10.0, 10.0, 4.0, 4.0).unwrap();
        let f = frame(Array3::from_elem((8, 8, 3), 0.25), Some(Array2::from_elem((8, 8), 3.0)));
        let cfg = PipelineConfig { side: 8, scene_scale: 2.0, channel_means: Some(vec![0.25, 0.25, 0.25, 1.0]) };
        let input = assemble_input(&f, Modality::RgbDepth, Some(&intr), &cfg).unwrap();
        assert_eq!(input.data[[0, 0, 0]], 0.0);
        assert_eq!(input.data[[0, 0, 3]], 0.5);
    }

    #[test]
    fn modality_parse_roundtrip() {
        for m in Modality::ALL {
            assert_eq!(m.as_str().parse::<Modality>().unwrap(), m);
        }
        assert_eq!(
            Modality::ALL.map(|m| m.channels()),
            [1, 1, 3, 3, 4, 6]
        );
    }
}
