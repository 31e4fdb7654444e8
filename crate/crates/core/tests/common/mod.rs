#![allow(dead_code)]

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relocnet::input::{InMemorySamples, Sample};
use relocnet::model::{ArchSpec, ArchTemplate, POSE_HEAD};
use relocnet::pose::{PoseVector, Quaternion};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_array(rng: &mut ChaCha8Rng, dim: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_simple_fn(dim, || rng.random_range(-1.0..1.0))
}

pub fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return Quaternion::new(v[0] / n, v[1] / n, v[2] / n, v[3] / n);
        }
    }
}

pub fn random_pose_vector(rng: &mut ChaCha8Rng) -> PoseVector {
    let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    PoseVector::from_parts(x, random_unit_quaternion(rng))
}

pub fn arch_from_toml(text: &str, in_channels: usize, side: usize) -> ArchSpec {
    ArchTemplate::from_toml(text).unwrap().resolve(in_channels, side, POSE_HEAD).unwrap()
}

/// Conv → relu → maxpool → conv → lrn → fc → relu → fc, no dropout.
pub const TOY_ARCH: &str = r#"
name = "toy"
[[layers]]
type = "conv"
name = "conv1"
out = 4
kernel = 3
stride = 1
pad = 1
[[layers]]
type = "relu"
[[layers]]
type = "maxpool"
size = 2
stride = 2
[[layers]]
type = "conv"
name = "conv2"
out = 5
kernel = 2
stride = 1
pad = 0
[[layers]]
type = "lrn"
size = 3
k = 2.0
alpha = 1e-2
beta = 0.75
[[layers]]
type = "fc"
name = "fc3"
out = 6
[[layers]]
type = "relu"
[[layers]]
type = "fc"
name = "fc4"
out = 7
"#;

pub fn toy_arch() -> ArchSpec {
    arch_from_toml(TOY_ARCH, 2, 8)
}

pub fn samples(inputs: Vec<Array3<f64>>, targets: Vec<PoseVector>) -> InMemorySamples {
    InMemorySamples(
        inputs
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (input, target))| Sample { input, target, frame_id: format!("f{i:03}") })
            .collect(),
    )
}

pub fn random_samples(arch: &ArchSpec, n: usize, seed: u64) -> InMemorySamples {
    let mut r = rng(seed);
    let inputs = (0..n).map(|_| random_array(&mut r, arch.input)).collect();
    let targets = (0..n).map(|_| random_pose_vector(&mut r)).collect();
    samples(inputs, targets)
}

/// Relative error with an absolute floor for near-zero values.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Direct nested-loop evaluation of a model, written independently of the
/// library kernels. Weights are read as `(out, ky, kx, in)`.
pub fn scalar_forward(model: &relocnet::Model, input: &Array3<f64>) -> Vec<f64> {
    use relocnet::model::LayerSpec;
    let mut x = input.clone();
    for (layer, params) in model.arch.layers.iter().zip(&model.params) {
        let (h, w, c) = x.dim();
        x = match layer {
            LayerSpec::Conv { conv, .. } => {
                let p = params.as_ref().unwrap();
                let k = conv.kernel;
                let oh = (h + conv.pad[0] + conv.pad[1] - k) / conv.stride + 1;
                let ow = (w + conv.pad[2] + conv.pad[3] - k) / conv.stride + 1;
                let mut y = Array3::zeros((oh, ow, conv.out_depth));
                for o in 0..conv.out_depth {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = p.bias[o];
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * conv.stride + ky) as isize - conv.pad[0] as isize;
                                    let ix = (ox * conv.stride + kx) as isize - conv.pad[2] as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    for ci in 0..c {
                                        let wi = (ky * k + kx) * c + ci;
                                        acc += p.weight[[o, wi]] * x[[iy as usize, ix as usize, ci]];
                                    }
                                }
                            }
                            y[[oy, ox, o]] = acc;
                        }
                    }
                }
                y
            }
            LayerSpec::Relu => x.mapv(|v| if v > 0.0 { v } else { 0.0 }),
            LayerSpec::MaxPool(pool) => {
                let oh = (h + pool.pad[0] + pool.pad[1] - pool.size) / pool.stride + 1;
                let ow = (w + pool.pad[2] + pool.pad[3] - pool.size) / pool.stride + 1;
                let mut y = Array3::zeros((oh, ow, c));
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ci in 0..c {
                            let mut best: Option<f64> = None;
                            for ky in 0..pool.size {
                                for kx in 0..pool.size {
                                    let iy = (oy * pool.stride + ky) as isize - pool.pad[0] as isize;
                                    let ix = (ox * pool.stride + kx) as isize - pool.pad[2] as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    let v = x[[iy as usize, ix as usize, ci]];
                                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                                }
                            }
                            y[[oy, ox, ci]] = best.unwrap_or(0.0);
                        }
                    }
                }
                y
            }
            LayerSpec::Lrn(l) => {
                let mut y = x.clone();
                let half = (l.size / 2) as isize;
                for i in 0..h {
                    for j in 0..w {
                        for ci in 0..c as isize {
                            let mut s = 0.0;
                            for cj in (ci - half)..=(ci + half) {
                                if cj >= 0 && cj < c as isize {
                                    s += x[[i, j, cj as usize]].powi(2);
                                }
                            }
                            y[[i, j, ci as usize]] = x[[i, j, ci as usize]] / (l.k + l.alpha * s).powf(l.beta);
                        }
                    }
                }
                y
            }
            LayerSpec::FullyConnected { in_dim, out_dim, .. } => {
                let p = params.as_ref().unwrap();
                let flat: Vec<f64> = x.iter().copied().collect();
                assert_eq!(flat.len(), *in_dim);
                let mut y = Array3::zeros((1, 1, *out_dim));
                for o in 0..*out_dim {
                    let mut acc = p.bias[o];
                    for (i, v) in flat.iter().enumerate() {
                        acc += p.weight[[o, i]] * v;
                    }
                    y[[0, 0, o]] = acc;
                }
                y
            }
            LayerSpec::Dropout { .. } => x,
        };
    }
    x.iter().copied().collect()
}

/// A random small architecture: 1–2 conv layers with random kernel, stride and
/// padding, optional pooling and normalization, then 1–2 fc layers.
pub fn random_toy_arch(rng: &mut ChaCha8Rng) -> ArchSpec {
    loop {
        let mut text = String::from("name = \"random-toy\"\n");
        let convs = rng.random_range(1..=2);
        for i in 0..convs {
            let k = rng.random_range(1..=4);
            let stride = rng.random_range(1..=2);
            let pads: [usize; 4] = std::array::from_fn(|_| rng.random_range(0..=2));
            text += &format!(
                "[[layers]]\ntype = \"conv\"\nname = \"conv{}\"\nout = {}\nkernel = {k}\nstride = {stride}\npad = {:?}\n",
                i + 1,
                rng.random_range(2..=5),
                pads
            );
            text += "[[layers]]\ntype = \"relu\"\n";
            if rng.random_bool(0.5) {
                text += &format!(
                    "[[layers]]\ntype = \"maxpool\"\nsize = {}\nstride = {}\npad = {}\n",
                    rng.random_range(2..=3),
                    rng.random_range(1..=2),
                    rng.random_range(0..=1)
                );
            }
            if rng.random_bool(0.5) {
                text += "[[layers]]\ntype = \"lrn\"\nsize = 5\nk = 1.5\nalpha = 0.05\nbeta = 0.75\n";
            }
        }
        if rng.random_bool(0.5) {
            text += &format!("[[layers]]\ntype = \"fc\"\nname = \"fc_hidden\"\nout = {}\n", rng.random_range(3..=9));
            text += "[[layers]]\ntype = \"relu\"\n";
        }
        text += "[[layers]]\ntype = \"fc\"\nname = \"fc_out\"\nout = 7\n";
        let channels = rng.random_range(1..=4);
        let side = rng.random_range(6..=11);
        if let Ok(a) = ArchTemplate::from_toml(&text).unwrap().resolve(channels, side, POSE_HEAD) {
            return a;
        }
    }
}

/// Rendered scene with centered RGB samples for its train and test trajectories.
pub struct SyntheticSet {
    pub bundle: relocnet::dataset::DatasetBundle,
    pub config: relocnet::input::PipelineConfig,
    pub train: InMemorySamples,
    pub test: InMemorySamples,
}

pub fn synthetic_set(trajectories: usize, frames: usize, seed: u64) -> SyntheticSet {
    use relocnet::dataset::{generate_synthetic_scene, Role, SceneSpec};
    use relocnet::input::{compute_channel_means, FrameSamples, PipelineConfig};
    use relocnet::Modality;
    let spec = SceneSpec { trajectories, frames_per_trajectory: frames, width: 32, height: 32, ..SceneSpec::default() };
    let bundle = generate_synthetic_scene(&spec, seed).unwrap();
    let train_t = bundle.with_role(Role::Train);
    let test_t = bundle.with_role(Role::Test);
    let means = compute_channel_means(&train_t, Modality::Rgb, 32, 1.0).unwrap();
    let config = PipelineConfig { side: 32, scene_scale: 1.0, channel_means: Some(means) };
    let train = FrameSamples::new(&train_t, Modality::Rgb, config.clone()).materialize().unwrap();
    let test = FrameSamples::new(&test_t, Modality::Rgb, config.clone()).materialize().unwrap();
    SyntheticSet { bundle, config, train, test }
}
