//! Desk-scale synthetic scenes: procedurally textured surfaces observed by a
//! pinhole camera moving along smooth random paths.
//!
//! World frame: the back wall is the plane `Z = wall_z`; cameras live in an
//! axis-aligned region in front of it and look roughly along `+Z`. In
//! [`Geometry::Room`] the camera sits inside a box whose far face is the back
//! wall and whose other faces carry differently tinted copies of the texture.
//! Poses are camera-to-world, so a camera-frame point `p` maps to `R p + t`.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetBundle, DatasetError, DepthSource, FrameRecord, ImageSource, Role, Trajectory};
use crate::input::Intrinsics;
use crate::pose::{Pose, Quaternion, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// A single textured plane at `Z = wall_z`.
    Wall,
    /// The interior of the box `[room_min, room_max]` with the far face at `Z = wall_z`.
    #[default]
    Room,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub geometry: Geometry,
    pub width: usize,
    pub height: usize,
    pub trajectories: usize,
    pub frames_per_trajectory: usize,
    pub texture_seed: u64,
    /// Defaults to `fx = fy = 0.9·width`, principal point at `(width/2, height/2)`.
    pub intrinsics: Option<Intrinsics>,
    pub wall_z: f64,
    /// Room corners; `room_max[2]` is ignored in favour of `wall_z`.
    pub room_min: Vec3,
    pub room_max: Vec3,
    /// Camera position box, meters.
    pub region_min: Vec3,
    pub region_max: Vec3,
    /// Peak yaw/pitch/roll excursions, degrees.
    pub max_angles_deg: Vec3,
    /// Share of the motion range given to trajectory-specific deviation from the shared loop, in [0, 1].
    pub path_jitter: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            geometry: Geometry::Room,
            width: 32,
            height: 32,
            trajectories: 4,
            frames_per_trajectory: 40,
            texture_seed: 1,
            intrinsics: None,
            wall_z: 4.0,
            room_min: [-1.5, -1.0, -2.0],
            room_max: [4.5, 3.0, 4.0],
            region_min: [0.5, 0.5, 0.0],
            region_max: [2.5, 2.0, 1.5],
            max_angles_deg: [12.0, 8.0, 4.0],
            path_jitter: 0.15,
        }
    }
}

impl SceneSpec {
    pub fn camera(&self) -> Intrinsics {
        self.intrinsics.unwrap_or(Intrinsics {
            fx: 0.9 * self.width as f64,
            fy: 0.9 * self.width as f64,
            cx: self.width as f64 / 2.0,
            cy: self.height as f64 / 2.0,
        })
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidSpec(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if self.trajectories == 0 {
            return bad("trajectory count must be positive");
        }
        if self.frames_per_trajectory == 0 {
            return bad("frames per trajectory must be positive");
        }
        if !(0.0..=1.0).contains(&self.path_jitter) {
            return bad("path_jitter must lie in [0, 1]");
        }
        if (0..3).any(|i| self.region_min[i] > self.region_max[i]) {
            return bad("region_min exceeds region_max");
        }
        if self.region_max[2] >= self.wall_z {
            return bad("camera region must lie in front of the wall");
        }
        if self.geometry == Geometry::Room {
            let inside = (0..3).all(|i| self.room_min[i] < self.region_min[i])
                && (0..2).all(|i| self.room_max[i] > self.region_max[i]);
            if !inside {
                return bad("camera region must lie strictly inside the room");
            }
        }
        self.camera().validate().map_err(|e| DatasetError::InvalidSpec(e.to_string()))
    }
}

/// A sum of oriented sinusoids per color channel.
#[derive(Debug, Clone)]
struct Texture {
    waves: [Vec<(f64, f64, f64, f64)>; 3],
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut channel = || {
            (0..4)
                .map(|k| {
                    // wavelengths from 1.5 m to 6 m, amplitude decaying with frequency
                    let wavelength = rng.random_range(1.5..6.0) / (1.0 + k as f64 * 0.5);
                    let dir = rng.random_range(0.0..TAU);
                    let phase = rng.random_range(0.0..TAU);
                    let amp = 0.25 / (1.0 + k as f64);
                    (TAU / wavelength * dir.cos(), TAU / wavelength * dir.sin(), phase, amp)
                })
                .collect()
        };
        Texture { waves: [channel(), channel(), channel()] }
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let mut out = [0.5; 3];
        for (c, waves) in self.waves.iter().enumerate() {
            for &(kx, ky, phase, amp) in waves {
                out[c] += amp * (kx * x + ky * y + phase).sin();
            }
            out[c] = out[c].clamp(0.0, 1.0);
        }
        out
    }
}

const FACE_TINTS: [[f64; 3]; 6] = [
    [1.0, 0.75, 0.75],
    [0.75, 1.0, 0.75],
    [0.85, 0.85, 0.85],
    [0.7, 0.7, 1.0],
    [1.0, 1.0, 0.7],
    [1.0, 1.0, 1.0],
];

/// A rendered scene plus the renderer state needed to re-render views.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    texture: Texture,
}

impl SyntheticScene {
    pub fn new(spec: SceneSpec) -> Result<Self, DatasetError> {
        spec.validate()?;
        let texture = Texture::new(spec.texture_seed);
        Ok(Self { spec, texture })
    }

    /// Renders color and z-depth for a camera-to-world pose. Rays that hit
    /// nothing yield black color and zero depth.
    pub fn render(&self, pose: &Pose) -> (Array3<f64>, Array2<f64>) {
        let (w, h) = (self.spec.width, self.spec.height);
        let intr = self.spec.camera();
        let r = pose.orientation.to_rotation_matrix();
        let c = pose.position;
        let mut rgb = Array3::zeros((h, w, 3));
        let mut depth = Array2::zeros((h, w));
        for v in 0..h {
            for u in 0..w {
                let ray = [(u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0];
                let d = [0, 1, 2].map(|i| r[i][0] * ray[0] + r[i][1] * ray[1] + r[i][2] * ray[2]);
                // the camera-frame ray has unit z, so the ray parameter is the z-depth
                let Some((t, face)) = self.intersect(c, d) else { continue };
                let p = [c[0] + t * d[0], c[1] + t * d[1], c[2] + t * d[2]];
                let col = self.shade(p, face);
                for ch in 0..3 {
                    rgb[[v, u, ch]] = col[ch];
                }
                depth[[v, u]] = t;
            }
        }
        (rgb, depth)
    }

    /// First surface hit along `c + t·d`: ray parameter and face index
    /// (`2·axis + side`, the back wall being face 5).
    fn intersect(&self, c: Vec3, d: Vec3) -> Option<(f64, usize)> {
        let spec = &self.spec;
        match spec.geometry {
            Geometry::Wall => {
                if d[2] <= 1e-9 {
                    return None;
                }
                let t = (spec.wall_z - c[2]) / d[2];
                (t > 0.0).then_some((t, 5))
            }
            Geometry::Room => {
                let hi = [spec.room_max[0], spec.room_max[1], spec.wall_z];
                let mut best: Option<(f64, usize)> = None;
                for axis in 0..3 {
                    if d[axis].abs() <= 1e-12 {
                        continue;
                    }
                    let (bound, side) = if d[axis] > 0.0 { (hi[axis], 1) } else { (spec.room_min[axis], 0) };
                    let t = (bound - c[axis]) / d[axis];
                    if t > 0.0 && best.is_none_or(|(b, _)| t < b) {
                        best = Some((t, 2 * axis + side));
                    }
                }
                best
            }
        }
    }

    fn shade(&self, p: Vec3, face: usize) -> [f64; 3] {
        // in-plane texture coordinates, offset per face so faces differ
        let axis = face / 2;
        let (a, b) = match axis {
            0 => (p[2], p[1]),
            1 => (p[0], p[2]),
            _ => (p[0], p[1]),
        };
        let off = face as f64 * 7.31;
        let col = self.texture.color(a + off, b - 0.5 * off);
        let tint = FACE_TINTS[face];
        [0, 1, 2].map(|ch| (col[ch] * tint[ch]).clamp(0.0, 1.0))
    }

    /// Trajectory `k`: a shared closed loop through the camera region, entered
    /// at a random offset, plus a smaller trajectory-specific wobble.
    fn path(&self, seed: u64, k: usize) -> impl Fn(f64) -> Pose {
        let spec = &self.spec;
        let mut shared = ChaCha8Rng::seed_from_u64(seed);
        let mut own = ChaCha8Rng::seed_from_u64(seed);
        own.set_stream(k as u64 + 1);
        let jitter = spec.path_jitter;
        let mut pos_terms = [(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0); 3];
        for (i, term) in pos_terms.iter_mut().enumerate() {
            let center = 0.5 * (spec.region_min[i] + spec.region_max[i]);
            let half = 0.5 * (spec.region_max[i] - spec.region_min[i]);
            let amp = half * (1.0 - jitter) * shared.random_range(0.8..1.0);
            let freq = shared.random_range(1..=2) as f64;
            let phase = shared.random_range(0.0..TAU);
            let wobble = half * jitter * own.random_range(0.5..1.0);
            *term = (center, amp, freq, phase, wobble, own.random_range(1.0..3.0), own.random_range(0.0..TAU));
        }
        let mut ang_terms = [(0.0, 0.0, 0.0, 0.0, 0.0, 0.0); 3];
        for (i, term) in ang_terms.iter_mut().enumerate() {
            let max = spec.max_angles_deg[i].to_radians();
            *term = (
                max * (1.0 - jitter) * shared.random_range(0.6..1.0),
                shared.random_range(1..=3) as f64,
                shared.random_range(0.0..TAU),
                max * jitter * own.random_range(0.5..1.0),
                own.random_range(1.0..3.0),
                own.random_range(0.0..TAU),
            );
        }
        let start = own.random_range(0.0..1.0);
        move |s: f64| {
            let u = s + start;
            let position = pos_terms.map(|(c, a, f, p, wa, wf, wp)| {
                c + a * (TAU * f * u + p).sin() + wa * (TAU * wf * s + wp).sin()
            });
            let [yaw, pitch, roll] =
                ang_terms.map(|(a, f, p, wa, wf, wp)| a * (TAU * f * u + p).sin() + wa * (TAU * wf * s + wp).sin());
            let qy = Quaternion::from_axis_angle([0.0, 1.0, 0.0], yaw).expect("unit axis");
            let qx = Quaternion::from_axis_angle([1.0, 0.0, 0.0], pitch).expect("unit axis");
            let qz = Quaternion::from_axis_angle([0.0, 0.0, 1.0], roll).expect("unit axis");
            let q = qy.mul(&qx).mul(&qz);
            Pose::new(position, q).expect("product of unit quaternions")
        }
    }

    pub fn generate(&self, seed: u64) -> DatasetBundle {
        let spec = &self.spec;
        let n = spec.frames_per_trajectory;
        let trajectories = (0..spec.trajectories)
            .map(|k| {
                let path = self.path(seed, k);
                let name = format!("traj-{k:02}");
                let frames = (0..n)
                    .map(|i| {
                        let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                        let pose = path(s);
                        let (rgb, depth) = self.render(&pose);
                        FrameRecord {
                            frame_id: format!("{name}/{i:06}"),
                            rgb: ImageSource::Memory(Arc::new(rgb)),
                            depth: Some(DepthSource::Memory(Arc::new(depth))),
                            pose,
                            timestamp: Some(i as f64 / 30.0),
                        }
                    })
                    .collect();
                let role = if k + 1 == spec.trajectories && spec.trajectories > 1 { Role::Test } else { Role::Train };
                Trajectory { name, frames, role, intrinsics: Some(spec.camera()) }
            })
            .collect();
        DatasetBundle::new(format!("synthetic-{}", spec.texture_seed), trajectories)
    }
}

/// Renders a synthetic bundle. A pure function of `(spec, seed)`.
pub fn generate_synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<DatasetBundle, DatasetError> {
    Ok(SyntheticScene::new(spec.clone())?.generate(seed))
}

/// Diagonal of the bounding box of every camera position in `trajectories`, meters.
pub fn scene_diameter<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for t in trajectories {
        for f in &t.frames {
            for i in 0..3 {
                lo[i] = lo[i].min(f.pose.position[i]);
                hi[i] = hi[i].max(f.pose.position[i]);
            }
        }
    }
    if lo[0] > hi[0] {
        return 0.0;
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt()
}
