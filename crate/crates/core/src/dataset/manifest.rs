//! The crate's own JSON trajectory manifest.
//!
//! One document per trajectory:
//!
//! ```json
//! {
//!   "format": "relocnet-trajectory/1",
//!   "name": "traj-00",
//!   "role": "train",
//!   "intrinsics": { "fx": 28.8, "fy": 28.8, "cx": 16.0, "cy": 16.0 },
//!   "frames": [
//!     { "frame_id": "traj-00/000000", "rgb": "traj-00/rgb/000000.png",
//!       "depth": "traj-00/depth/000000.png", "depth_scale": 5000.0,
//!       "pose": [x, y, z, qw, qx, qy, qz], "timestamp": 0.0 }
//!   ]
//! }
//! ```
//!
//! Relative image paths resolve against the manifest's directory. A bundle
//! directory additionally holds `bundle.json` listing the scene name and the
//! trajectory manifests in order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    ingest_orientation, read_text, write_depth_png, write_rgb_png, DatasetBundle, DatasetError, DepthSource,
    FrameRecord, ImageSource, Role, Trajectory,
};
use crate::input::Intrinsics;
use crate::pose::{Pose, PoseVector};

pub const MANIFEST_FORMAT: &str = "relocnet-trajectory/1";
const BUNDLE_FILE: &str = "bundle.json";

/// Depth scale used when writing in-memory depth maps to 16-bit PNG.
const WRITE_DEPTH_SCALE: f64 = 5000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_id: String,
    pub rgb: PathBuf,
    #[serde(default)]
    pub depth: Option<PathBuf>,
    #[serde(default)]
    pub depth_scale: Option<f64>,
    pub pose: PoseVector,
    #[serde(default)]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub format: String,
    pub name: String,
    pub role: Role,
    pub intrinsics: Option<Intrinsics>,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleIndex {
    scene: String,
    trajectories: Vec<PathBuf>,
}

fn manifest_err(path: &Path, message: impl Into<String>) -> DatasetError {
    DatasetError::Manifest { path: path.to_path_buf(), message: message.into() }
}

fn create_dir(path: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(path).map_err(|e| DatasetError::io(path, e))
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

/// Writes `traj` as `<dir>/<name>.json`; in-memory images are written as PNG
/// under `<dir>/<name>/`. File-backed images are referenced, never copied.
pub fn save_manifest(traj: &Trajectory, dir: &Path) -> Result<PathBuf, DatasetError> {
    create_dir(dir)?;
    let mut frames = Vec::with_capacity(traj.frames.len());
    for (i, f) in traj.frames.iter().enumerate() {
        let rgb = match &f.rgb {
            ImageSource::File(p) => absolute(p),
            ImageSource::Memory(img) => {
                let rel = PathBuf::from(&traj.name).join("rgb").join(format!("{i:06}.png"));
                create_dir(&dir.join(&traj.name).join("rgb"))?;
                write_rgb_png(&dir.join(&rel), img)?;
                rel
            }
        };
        let (depth, depth_scale) = match &f.depth {
            None => (None, None),
            Some(DepthSource::File { path, scale }) => (Some(absolute(path)), Some(*scale)),
            Some(DepthSource::Memory(d)) => {
                let rel = PathBuf::from(&traj.name).join("depth").join(format!("{i:06}.png"));
                create_dir(&dir.join(&traj.name).join("depth"))?;
                write_depth_png(&dir.join(&rel), d, WRITE_DEPTH_SCALE)?;
                (Some(rel), Some(WRITE_DEPTH_SCALE))
            }
        };
        frames.push(FrameEntry {
            frame_id: f.frame_id.clone(),
            rgb,
            depth,
            depth_scale,
            pose: f.pose.to_vector(),
            timestamp: f.timestamp,
        });
    }
    let manifest = TrajectoryManifest {
        format: MANIFEST_FORMAT.into(),
        name: traj.name.clone(),
        role: traj.role,
        intrinsics: traj.intrinsics,
        frames,
    };
    let path = dir.join(format!("{}.json", traj.name));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| manifest_err(&path, e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}

pub fn load_manifest(path: &Path) -> Result<Trajectory, DatasetError> {
    let text = read_text(path)?;
    let manifest: TrajectoryManifest = serde_json::from_str(&text).map_err(|e| manifest_err(path, e.to_string()))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(manifest_err(path, format!("unsupported format '{}'", manifest.format)));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for e in &manifest.frames {
        let (orientation, _) = ingest_orientation(e.pose.quaternion(), &e.frame_id)?;
        let depth = match (&e.depth, e.depth_scale) {
            (None, _) => None,
            (Some(p), Some(scale)) if scale > 0.0 => Some(DepthSource::File { path: resolve(p), scale }),
            (Some(_), _) => return Err(manifest_err(path, format!("frame {}: depth without positive depth_scale", e.frame_id))),
        };
        frames.push(FrameRecord {
            frame_id: e.frame_id.clone(),
            rgb: ImageSource::File(resolve(&e.rgb)),
            depth,
            pose: Pose { position: e.pose.position(), orientation },
            timestamp: e.timestamp,
        });
    }
    if frames.is_empty() {
        return Err(DatasetError::ZeroFrames { what: path.display().to_string() });
    }
    Ok(Trajectory { name: manifest.name, frames, role: manifest.role, intrinsics: manifest.intrinsics })
}

/// Writes every trajectory plus a `bundle.json` index into `dir`.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<PathBuf, DatasetError> {
    create_dir(dir)?;
    let mut names = Vec::new();
    for t in &bundle.trajectories {
        let p = save_manifest(t, dir)?;
        names.push(PathBuf::from(p.file_name().expect("manifest file name")));
    }
    let index = BundleIndex { scene: bundle.scene.clone(), trajectories: names };
    let path = dir.join(BUNDLE_FILE);
    let text = serde_json::to_string_pretty(&index).map_err(|e| manifest_err(&path, e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}

pub fn load_bundle_dir(dir: &Path) -> Result<DatasetBundle, DatasetError> {
    let path = dir.join(BUNDLE_FILE);
    let index: BundleIndex =
        serde_json::from_str(&read_text(&path)?).map_err(|e| manifest_err(&path, e.to_string()))?;
    let trajectories =
        index.trajectories.iter().map(|p| load_manifest(&dir.join(p))).collect::<Result<Vec<_>, _>>()?;
    Ok(DatasetBundle::new(index.scene, trajectories))
}

fn hash_file(hasher: &mut Sha256, path: &Path) -> Result<(), DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(&bytes);
    Ok(())
}

fn hash_floats<'a>(hasher: &mut Sha256, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        hasher.update(v.to_le_bytes());
    }
}

/// SHA-256 over a trajectory's identity, poses and image contents (hex).
pub fn trajectory_hash(traj: &Trajectory) -> Result<String, DatasetError> {
    let mut h = Sha256::new();
    h.update(traj.name.as_bytes());
    h.update(traj.role.to_string().as_bytes());
    if let Some(i) = &traj.intrinsics {
        hash_floats(&mut h, &[i.fx, i.fy, i.cx, i.cy]);
    }
    for f in &traj.frames {
        h.update(f.frame_id.as_bytes());
        hash_floats(&mut h, f.pose.to_vector().as_slice());
        if let Some(t) = f.timestamp {
            h.update(t.to_le_bytes());
        }
        match &f.rgb {
            ImageSource::File(p) => hash_file(&mut h, p)?,
            ImageSource::Memory(a) => hash_floats(&mut h, a.iter()),
        }
        match &f.depth {
            None => {}
            Some(DepthSource::File { path, scale }) => {
                hash_file(&mut h, path)?;
                h.update(scale.to_le_bytes());
            }
            Some(DepthSource::Memory(d)) => hash_floats(&mut h, d.iter()),
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// SHA-256 over the scene name and every trajectory hash in bundle order.
pub fn bundle_hash(bundle: &DatasetBundle) -> Result<String, DatasetError> {
    let mut h = Sha256::new();
    h.update(bundle.scene.as_bytes());
    for t in &bundle.trajectories {
        h.update(trajectory_hash(t)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}
