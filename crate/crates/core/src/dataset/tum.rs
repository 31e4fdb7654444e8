use std::path::Path;

use log::warn;

use super::{
    ingest_orientation, read_text, warn_off_unit, DatasetError, DepthSource, FrameRecord, ImageSource, Role,
    Trajectory,
};
use crate::input::Intrinsics;
use crate::pose::{Pose, Quaternion};

/// Default rgb/depth/groundtruth association window, seconds.
pub const DEFAULT_ASSOC_TOLERANCE: f64 = 0.02;

/// TUM depth images store meters × 5000.
pub const TUM_DEPTH_SCALE: f64 = 5000.0;

/// Reference frame counts for the long office household sequence.
pub const TUM_LONG_OFFICE_TRAIN_FRAMES: usize = 2585;
pub const TUM_LONG_OFFICE_VALIDATION_FRAMES: usize = 2676;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TumLoadReport {
    pub matched: usize,
    pub dropped: usize,
}

/// For each query timestamp, the index of the nearest reference timestamp and the
/// absolute difference. `references` must be sorted ascending and nonempty.
pub fn associate_nearest(queries: &[f64], references: &[f64]) -> Vec<(usize, f64)> {
    queries
        .iter()
        .map(|&t| {
            let i = references.partition_point(|&r| r < t);
            let mut best = (usize::MAX, f64::INFINITY);
            for j in [i.wrapping_sub(1), i] {
                if let Some(&r) = references.get(j) {
                    let d = (r - t).abs();
                    if d < best.1 {
                        best = (j, d);
                    }
                }
            }
            best
        })
        .collect()
}

struct Stamped<T> {
    time: f64,
    value: T,
}

fn read_list<T>(
    path: &Path,
    min_fields: usize,
    parse: impl Fn(&[&str]) -> Option<T>,
) -> Result<Vec<Stamped<T>>, DatasetError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || DatasetError::parse(path, lineno + 1, format!("malformed line '{line}'"));
        if fields.len() < min_fields {
            return Err(bad());
        }
        let time: f64 = fields[0].parse().map_err(|_| bad())?;
        let value = parse(&fields[1..]).ok_or_else(bad)?;
        out.push(Stamped { time, value });
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

/// Loads a TUM RGB-D sequence directory (`rgb.txt`, `depth.txt`, `groundtruth.txt`).
pub fn load_tum_sequence(root: &Path, assoc_tolerance: f64) -> Result<Trajectory, DatasetError> {
    load_tum_sequence_with_report(root, assoc_tolerance).map(|(t, _)| t)
}

pub fn load_tum_sequence_with_report(
    root: &Path,
    assoc_tolerance: f64,
) -> Result<(Trajectory, TumLoadReport), DatasetError> {
    let rgb = read_list(&root.join("rgb.txt"), 2, |f| Some(f[0].to_string()))?;
    let depth = read_list(&root.join("depth.txt"), 2, |f| Some(f[0].to_string()))?;
    let gt = read_list(&root.join("groundtruth.txt"), 8, |f| {
        let v: Vec<f64> = f[..7].iter().map(|s| s.parse().ok()).collect::<Option<_>>()?;
        // file order: tx ty tz qx qy qz qw
        Some(([v[0], v[1], v[2]], Quaternion::new(v[6], v[3], v[4], v[5])))
    })?;
    let name = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "tum".into());
    if rgb.is_empty() || depth.is_empty() || gt.is_empty() {
        return Err(DatasetError::ZeroFrames { what: name });
    }

    let depth_times: Vec<f64> = depth.iter().map(|d| d.time).collect();
    let gt_times: Vec<f64> = gt.iter().map(|g| g.time).collect();
    let rgb_times: Vec<f64> = rgb.iter().map(|r| r.time).collect();
    let depth_match = associate_nearest(&rgb_times, &depth_times);
    let gt_match = associate_nearest(&rgb_times, &gt_times);

    let intrinsics = match root.join("intrinsics.toml") {
        p if p.exists() => Intrinsics::from_file(&p).map_err(|e| DatasetError::Manifest {
            path: p.clone(),
            message: e.to_string(),
        })?,
        _ => Intrinsics::tum_freiburg3(),
    };

    let mut report = TumLoadReport::default();
    let mut off_unit = 0;
    let mut frames = Vec::new();
    for (i, r) in rgb.iter().enumerate() {
        let (di, dd) = depth_match[i];
        let (gi, gd) = gt_match[i];
        if dd > assoc_tolerance || gd > assoc_tolerance {
            report.dropped += 1;
            continue;
        }
        let frame_id = format!("{:.6}", r.time);
        let (position, q) = gt[gi].value;
        let (orientation, off) = ingest_orientation(q, &frame_id)?;
        off_unit += off as usize;
        frames.push(FrameRecord {
            frame_id,
            rgb: ImageSource::File(root.join(&r.value)),
            depth: Some(DepthSource::File { path: root.join(&depth[di].value), scale: TUM_DEPTH_SCALE }),
            pose: Pose { position, orientation },
            timestamp: Some(r.time),
        });
    }
    report.matched = frames.len();
    if report.dropped > 0 {
        warn!("{name}: dropped {} of {} rgb frames without depth/groundtruth within {assoc_tolerance} s", report.dropped, rgb.len());
    }
    warn_off_unit(&name, off_unit);
    if frames.is_empty() {
        return Err(DatasetError::ZeroFrames { what: name });
    }
    let mut traj = Trajectory { name, frames, role: Role::Train, intrinsics: Some(intrinsics) };
    traj.sort_by_timestamp();
    Ok((traj, report))
}
