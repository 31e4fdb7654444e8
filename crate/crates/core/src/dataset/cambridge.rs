use std::path::Path;

use super::{ingest_orientation, read_text, warn_off_unit, DatasetBundle, DatasetError, FrameRecord, ImageSource, Role, Trajectory};
use crate::pose::{Pose, Quaternion};

/// Reference split sizes of the St Marys Church scene.
pub const ST_MARYS_TRAIN_FRAMES: usize = 1487;
pub const ST_MARYS_TEST_FRAMES: usize = 530;

/// Lines preceding the data in a Cambridge Landmarks split file.
const HEADER_LINES: usize = 3;

/// Loads `dataset_train.txt`-style split files: a three-line header followed by
/// `image_path x y z qw qx qy qz` lines.
pub fn load_cambridge_sequence(root: &Path, split_file: &str) -> Result<Trajectory, DatasetError> {
    let path = root.join(split_file);
    let text = read_text(&path)?;
    let mut frames = Vec::new();
    let mut off_unit = 0;
    for (i, line) in text.lines().enumerate().skip(HEADER_LINES) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| DatasetError::parse(&path, i + 1, format!("{msg}: '{line}'"));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let v: Vec<f64> = fields[1..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("non-numeric pose value"))?;
        let frame_id = fields[0].to_string();
        let (orientation, off) = ingest_orientation(Quaternion::new(v[3], v[4], v[5], v[6]), &frame_id)?;
        off_unit += off as usize;
        frames.push(FrameRecord {
            rgb: ImageSource::File(root.join(fields[0])),
            depth: None,
            pose: Pose { position: [v[0], v[1], v[2]], orientation },
            timestamp: None,
            frame_id,
        });
    }
    let name = split_file.trim_end_matches(".txt").to_string();
    warn_off_unit(&name, off_unit);
    if frames.is_empty() {
        return Err(DatasetError::ZeroFrames { what: path.display().to_string() });
    }
    let role = if name.contains("test") { Role::Test } else { Role::Train };
    Ok(Trajectory { name, frames, role, intrinsics: None })
}

/// Loads `dataset_train.txt` and `dataset_test.txt` of a Cambridge Landmarks scene.
pub fn load_cambridge_scene(root: &Path) -> Result<DatasetBundle, DatasetError> {
    let train = load_cambridge_sequence(root, "dataset_train.txt")?;
    let test = load_cambridge_sequence(root, "dataset_test.txt")?;
    let scene = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DatasetBundle::new(scene, vec![train, test]))
}
