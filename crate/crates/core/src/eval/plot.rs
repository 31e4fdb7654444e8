use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::{EvalError, EvalReport};
use crate::dataset::Trajectory;
use crate::pose::Vec3;

pub const PLOT_HEADER: &str = "x,y,z,role";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub train: PathBuf,
    pub test: PathBuf,
    pub predicted: PathBuf,
}

fn csv(points: &[Vec3], role: &str) -> String {
    let mut out = String::with_capacity(32 * (points.len() + 1));
    out.push_str(PLOT_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{},{role}", p[0], p[1], p[2]);
    }
    out
}

fn write(path: &Path, text: &str) -> Result<(), EvalError> {
    std::fs::write(path, text).map_err(|e| EvalError::io(path, e))
}

/// Writes `train.csv`, `test.csv` and `predicted.csv` into `dir`, roles tagged
/// `train`, `test` and `predicted` (drawn red, green and blue).
pub fn export_trajectory_plot_data(
    report: &EvalReport,
    train: &[&Trajectory],
    test: &Trajectory,
    dir: &Path,
) -> Result<PlotFiles, EvalError> {
    std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let files = PlotFiles { train: dir.join("train.csv"), test: dir.join("test.csv"), predicted: dir.join("predicted.csv") };
    let train_pts: Vec<Vec3> = train.iter().flat_map(|t| t.positions()).collect();
    let predicted: Vec<Vec3> = report.frames.iter().map(|f| f.predicted.position()).collect();
    write(&files.train, &csv(&train_pts, "train"))?;
    write(&files.test, &csv(&test.positions(), "test"))?;
    write(&files.predicted, &csv(&predicted, "predicted"))?;
    Ok(files)
}

const RED: Rgb<u8> = Rgb([220, 40, 40]);
const GREEN: Rgb<u8> = Rgb([30, 170, 60]);
const BLUE: Rgb<u8> = Rgb([40, 70, 230]);

/// Renders a top view (the two axes of largest extent) of the three point sets as PNG.
pub fn render_plot_png(
    report: &EvalReport,
    train: &[&Trajectory],
    test: &Trajectory,
    path: &Path,
    side: u32,
) -> Result<(), EvalError> {
    let train_paths: Vec<Vec<Vec3>> = train.iter().map(|t| t.positions()).collect();
    let test_path = test.positions();
    let predicted: Vec<Vec3> = report.frames.iter().map(|f| f.predicted.position()).collect();
    let all = train_paths.iter().flatten().chain(&test_path).chain(&predicted);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in all {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let side = side.max(16);
    let mut img = RgbImage::from_pixel(side, side, Rgb([255, 255, 255]));
    if lo[0] <= hi[0] {
        let mut axes = [0usize, 1, 2];
        axes.sort_by(|&a, &b| (hi[b] - lo[b]).total_cmp(&(hi[a] - lo[a])));
        let (ax, ay) = (axes[0].min(axes[1]), axes[0].max(axes[1]));
        let span = (hi[ax] - lo[ax]).max(hi[ay] - lo[ay]).max(1e-9);
        let margin = side as f64 * 0.05;
        let scale = (side as f64 - 2.0 * margin) / span;
        let to_px = |p: &Vec3| {
            let u = margin + (p[ax] - lo[ax]) * scale;
            let v = side as f64 - 1.0 - margin - (p[ay] - lo[ay]) * scale;
            (u, v)
        };
        let dot = |img: &mut RgbImage, (u, v): (f64, f64), r: i64, c: Rgb<u8>| {
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (u.round() as i64 + dx, v.round() as i64 + dy);
                    if x >= 0 && y >= 0 && (x as u32) < side && (y as u32) < side {
                        img.put_pixel(x as u32, y as u32, c);
                    }
                }
            }
        };
        let line = |img: &mut RgbImage, pts: &[Vec3], c: Rgb<u8>| {
            for w in pts.windows(2) {
                let (a, b) = (to_px(&w[0]), to_px(&w[1]));
                let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
                for s in 0..=steps {
                    let t = s as f64 / steps as f64;
                    dot(img, (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)), 0, c);
                }
            }
        };
        for p in &train_paths {
            line(&mut img, p, RED);
        }
        line(&mut img, &test_path, GREEN);
        for p in &predicted {
            dot(&mut img, to_px(p), 1, BLUE);
        }
    }
    img.save(path).map_err(|e| EvalError::Format { path: path.to_path_buf(), message: e.to_string() })
}
