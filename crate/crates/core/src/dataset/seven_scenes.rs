use std::path::Path;

use super::{
    ingest_orientation, read_text, DatasetBundle, DatasetError, DepthSource, FrameRecord, ImageSource, Role,
    Trajectory,
};
use crate::input::Intrinsics;
use crate::pose::{rotmat_to_quat, Mat3, Pose};

/// 7-Scenes depth images store millimeters.
pub const SEVEN_SCENES_DEPTH_SCALE: f64 = 1000.0;

fn parse_pose_matrix(path: &Path, frame: &str) -> Result<Pose, DatasetError> {
    let text = read_text(path)?;
    let values: Vec<f64> = text
        .split_whitespace()
        .enumerate()
        .map(|(i, s)| s.parse().map_err(|_| DatasetError::parse(path, 1 + i / 4, format!("bad number '{s}'"))))
        .collect::<Result<_, _>>()?;
    if values.len() != 16 {
        return Err(DatasetError::parse(path, 1, format!("expected 16 values, found {}", values.len())));
    }
    let r: Mat3 = [
        [values[0], values[1], values[2]],
        [values[4], values[5], values[6]],
        [values[8], values[9], values[10]],
    ];
    let q = rotmat_to_quat(&r).map_err(|source| DatasetError::BadPose { frame: frame.to_string(), source })?;
    let (orientation, _) = ingest_orientation(q, frame)?;
    Ok(Pose { position: [values[3], values[7], values[11]], orientation })
}

/// Loads one 7-Scenes sequence directory of `frame-NNNNNN.{color.png,depth.png,pose.txt}` files.
///
/// Pose files hold a row-major 4×4 camera-to-world matrix.
pub fn load_7scenes_sequence(root: &Path) -> Result<Trajectory, DatasetError> {
    let entries = std::fs::read_dir(root).map_err(|e| DatasetError::io(root, e))?;
    let mut stems: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".pose.txt")).map(str::to_owned))
        .filter(|stem| stem.starts_with("frame-"))
        .collect();
    stems.sort();
    let name = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "7scenes".into());
    if stems.is_empty() {
        return Err(DatasetError::ZeroFrames { what: name });
    }
    let frames = stems
        .iter()
        .map(|stem| {
            let frame_id = format!("{name}/{stem}");
            let pose = parse_pose_matrix(&root.join(format!("{stem}.pose.txt")), &frame_id)?;
            Ok(FrameRecord {
                frame_id,
                rgb: ImageSource::File(root.join(format!("{stem}.color.png"))),
                depth: Some(DepthSource::File {
                    path: root.join(format!("{stem}.depth.png")),
                    scale: SEVEN_SCENES_DEPTH_SCALE,
                }),
                pose,
                timestamp: None,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok(Trajectory { name, frames, role: Role::Train, intrinsics: Some(Intrinsics::seven_scenes()) })
}

fn read_split(path: &Path) -> Result<Vec<String>, DatasetError> {
    let text = read_text(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            let n: usize = l
                .trim_start_matches("sequence")
                .parse()
                .map_err(|_| DatasetError::parse(path, i + 1, format!("expected 'sequenceN', got '{l}'")))?;
            Ok(format!("seq-{n:02}"))
        })
        .collect()
}

/// Loads a whole 7-Scenes scene using its `TrainSplit.txt` / `TestSplit.txt` lists.
pub fn load_7scenes_scene(root: &Path) -> Result<DatasetBundle, DatasetError> {
    let mut trajectories = Vec::new();
    for (file, role) in [("TrainSplit.txt", Role::Train), ("TestSplit.txt", Role::Test)] {
        for seq in read_split(&root.join(file))? {
            let mut t = load_7scenes_sequence(&root.join(&seq))?;
            t.role = role;
            trajectories.push(t);
        }
    }
    let scene = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DatasetBundle::new(scene, trajectories))
}
