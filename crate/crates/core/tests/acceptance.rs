//! Acceptance checks, one line per criterion. Runs without the libtest harness
//! so the summary is always printed; exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relocnet::dataset::{
    load_7scenes_sequence, load_cambridge_sequence, load_tum_sequence_with_report, scene_diameter, Role,
};
use relocnet::eval::{build_comparison, frame_result, Cell, EvalMeta, EvalReport, ReferenceSet, Stat, TableMetric};
use relocnet::experiment::{load_dataset, run_curriculum_experiment, run_train, ExperimentConfig};
use relocnet::input::{depth_to_pointcloud, Intrinsics};
use relocnet::model::{
    build_model, export_weights, preset, preset_with, Dtype, Gradients, Init, ModelError, Preset, WeightContainer,
};
use relocnet::pose::{
    angular_error, loss_gradient, position_error, posenet_loss, quat_to_rotmat, rotmat_to_quat, AngleMetric,
    PoseVector, Quaternion,
};
use relocnet::Model;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn c1_gradients() -> Outcome {
    let mut r = rng(101);
    let h = 1e-6;
    let mut worst_op: f64 = 0.0;
    for _ in 0..100 {
        let target = random_pose_vector(&mut r);
        let pred: [f64; 7] = std::array::from_fn(|_| r.random_range(-2.0..2.0));
        let beta = r.random_range(1.0..300.0);
        let g = loss_gradient(&PoseVector(pred), &target, beta).map_err(|e| e.to_string())?;
        let i = r.random_range(0..7);
        let (mut up, mut down) = (pred, pred);
        up[i] += h;
        down[i] -= h;
        let fd = (posenet_loss(&PoseVector(up), &target, beta).unwrap()
            - posenet_loss(&PoseVector(down), &target, beta).unwrap())
            / (2.0 * h);
        worst_op = worst_op.max(rel_err(g[i], fd));
    }
    ensure!(worst_op < 1e-4, "loss_gradient max rel err {worst_op:.2e}");

    let mut model = build_model(toy_arch(), Init::random(3)).unwrap();
    for p in model.params.iter_mut().flatten() {
        p.bias.mapv_inplace(|_| r.random_range(-0.3..0.3));
    }
    let input = random_array(&mut r, model.arch.input);
    let target = random_pose_vector(&mut r);
    let beta = 7.0;
    let mut grads = Gradients::zeros_like(&model);
    grads.fill_zero();
    model.loss_and_grad(&input, &target, beta, None::<&mut ChaCha8Rng>, &mut grads).unwrap();
    let analytic: Vec<f64> = grads.values().collect();
    let mut worst_net: f64 = 0.0;
    for _ in 0..20 {
        let i = r.random_range(0..model.param_count());
        let w = model.get_param(i);
        model.set_param(i, w + h);
        let up = posenet_loss(&model.predict(&input).unwrap(), &target, beta).unwrap();
        model.set_param(i, w - h);
        let down = posenet_loss(&model.predict(&input).unwrap(), &target, beta).unwrap();
        model.set_param(i, w);
        worst_net = worst_net.max(rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    ensure!(worst_net < 1e-3, "network gradient max rel err {worst_net:.2e}");
    Ok(format!("op {worst_op:.1e}, net {worst_net:.1e}"))
}

fn c2_metrics() -> Outcome {
    let mut r = rng(102);
    for _ in 0..1000 {
        let q = random_unit_quaternion(&mut r);
        let p = random_unit_quaternion(&mut r);
        let a = angular_error(q, p).unwrap();
        ensure!((0.0..=90.0).contains(&a), "angle {a} out of range");
        ensure!((a - angular_error(p, q).unwrap()).abs() < 1e-12, "asymmetric");
        let neg = Quaternion::new(-q.w, -q.x, -q.y, -q.z);
        ensure!(angular_error(q, neg).unwrap() < 1e-6, "q vs -q nonzero");
        let v: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| r.random_range(-5.0..5.0)));
        let (ab, bc, ac) = (position_error(v[0], v[1]), position_error(v[1], v[2]), position_error(v[0], v[2]));
        ensure!(ac <= ab + bc + 1e-12, "triangle inequality");
    }
    ensure!(position_error([0.0; 3], [3.0, 4.0, 0.0]) == 5.0, "position example");
    ensure!(angular_error(Quaternion::IDENTITY, Quaternion::IDENTITY).unwrap() == 0.0, "identity angle");
    let a = angular_error(Quaternion::IDENTITY, Quaternion::new(0.0, 1.0, 0.0, 0.0)).unwrap();
    ensure!((a - 90.0).abs() < 1e-12, "90 degree example gave {a}");
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let a = angular_error(Quaternion::IDENTITY, Quaternion::new(half, half, 0.0, 0.0)).unwrap();
    ensure!((a - 45.0).abs() < 1e-12, "45 degree example gave {a}");
    Ok("1000 samples".into())
}

fn c3_param_counts() -> Outcome {
    let bands = [
        (Preset::VggF, 61e6 * 0.98, 61e6 * 1.02),
        (Preset::VggM, 100e6 * 0.97, 100e6 * 1.03),
        (Preset::VggS, 100e6 * 0.97, 100e6 * 1.03),
        (Preset::Vgg16, 138e6 * 0.99, 138e6 * 1.01),
        (Preset::Vgg19, 138e6, 148e6),
    ];
    let mut summary = Vec::new();
    for (p, lo, hi) in bands {
        let full = preset_with(p.name(), 3, 224, 1000).unwrap().param_count();
        let pose = preset(p.name(), 3).unwrap().param_count();
        ensure!((lo..=hi).contains(&(full as f64)), "{} has {full}", p.name());
        ensure!(pose < full, "{} pose head not smaller", p.name());
        summary.push(format!("{} {:.1}M", p.name(), full as f64 / 1e6));
    }
    Ok(summary.join(", "))
}

fn c4_channels() -> Outcome {
    for p in Preset::VGG {
        let base = preset(p.name(), 3).unwrap();
        let c1 = *base.first_conv().unwrap();
        for n in [1usize, 3, 4, 6] {
            let a = preset(p.name(), n).unwrap();
            ensure!(a.output_shape((224, 224, n)).unwrap() == (1, 1, 7), "{} n={n} output shape", p.name());
            let delta = a.param_count() as i64 - base.param_count() as i64;
            let expected = (n as i64 - 3) * (c1.kernel * c1.kernel * c1.out_depth) as i64;
            ensure!(delta == expected, "{} n={n}: delta {delta} vs {expected}", p.name());
        }
    }
    // full forward pass for the default architecture
    let mut r = rng(104);
    for n in [1usize, 3, 4, 6] {
        let m = build_model(preset("VGG-F", n).unwrap(), Init::random(n as u64)).unwrap();
        let out = m.forward_raw(&random_array(&mut r, (224, 224, n))).unwrap();
        ensure!(out.len() == 7, "VGG-F n={n} forward length {}", out.len());
    }
    Ok("5 presets x 4 modalities".into())
}

fn c5_conv_oracle() -> Outcome {
    let mut r = rng(105);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let arch = random_toy_arch(&mut r);
        let mut model = build_model(arch.clone(), Init::Zeros).unwrap();
        for p in model.params.iter_mut().flatten() {
            p.weight.mapv_inplace(|_| r.random_range(-0.5..0.5));
            p.bias.mapv_inplace(|_| r.random_range(-0.5..0.5));
        }
        let input = random_array(&mut r, arch.input);
        let fast = model.forward_raw(&input).unwrap();
        let slow = scalar_forward(&model, &input);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst < 1e-10, "max deviation {worst:.2e}");
    Ok(format!("max deviation {worst:.1e}"))
}

fn c6_parsers() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let tum = tmp.path().join("tum");
    std::fs::create_dir_all(&tum).unwrap();
    std::fs::write(tum.join("rgb.txt"), "# rgb\n1.0 rgb/a.png\n2.0 rgb/b.png\n3.0 rgb/c.png\n").unwrap();
    std::fs::write(tum.join("depth.txt"), "1.01 d/a.png\n2.05 d/b.png\n2.99 d/c.png\n").unwrap();
    std::fs::write(
        tum.join("groundtruth.txt"),
        "# t tx ty tz qx qy qz qw\n1.0 1 2 3 0 0 0 1\n2.0 0 0 0 0 0 0 1\n3.005 -1 0.5 2 0 1 0 0\n",
    )
    .unwrap();
    let (t, report) = load_tum_sequence_with_report(&tum, 0.02).map_err(|e| e.to_string())?;
    ensure!(report.matched == 2 && report.dropped == 1, "TUM report {report:?}");
    ensure!(t.frames[0].pose.position == [1.0, 2.0, 3.0], "TUM position");
    ensure!(t.frames[1].frame_id == "3.000000", "TUM frame id {}", t.frames[1].frame_id);
    ensure!(t.frames[1].pose.orientation == Quaternion::new(0.0, 0.0, 1.0, 0.0), "TUM quaternion order");

    let seq = tmp.path().join("seq-01");
    std::fs::create_dir_all(&seq).unwrap();
    std::fs::write(seq.join("frame-000000.pose.txt"), "0 -1 0 1.5\n1 0 0 -2\n0 0 1 0.25\n0 0 0 1\n").unwrap();
    let t = load_7scenes_sequence(&seq).map_err(|e| e.to_string())?;
    let q = t.frames[0].pose.orientation;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    ensure!(t.frames[0].pose.position == [1.5, -2.0, 0.25], "7-Scenes position");
    ensure!((q.w - half).abs() < 1e-12 && (q.z - half).abs() < 1e-12, "7-Scenes rotation {q:?}");

    std::fs::write(tmp.path().join("dataset_train.txt"), "h\nh\n\nimg/f1.png 10 20 30 0.5 0.5 0.5 0.5\n").unwrap();
    let t = load_cambridge_sequence(tmp.path(), "dataset_train.txt").map_err(|e| e.to_string())?;
    ensure!(t.frames[0].pose.position == [10.0, 20.0, 30.0], "Cambridge position");
    ensure!(t.frames[0].pose.orientation == Quaternion::new(0.5, 0.5, 0.5, 0.5), "Cambridge quaternion");

    // association against a brute-force nearest-timestamp oracle
    let mut r = rng(106);
    let rgb: Vec<f64> = (0..50).map(|i| 10.0 + i as f64 * 0.033).collect();
    let depth: Vec<f64> = rgb.iter().map(|t| t + r.random_range(-0.03..0.03)).collect();
    let gt: Vec<f64> = (0..150).map(|i| 10.0 + i as f64 * 0.011 + r.random_range(-0.02..0.02)).collect();
    let dir = tmp.path().join("jitter");
    std::fs::create_dir_all(&dir).unwrap();
    let list = |ts: &[f64]| ts.iter().map(|t| format!("{t:.6} x.png\n")).collect::<String>();
    std::fs::write(dir.join("rgb.txt"), list(&rgb)).unwrap();
    std::fs::write(dir.join("depth.txt"), list(&depth)).unwrap();
    let gt_text: String = gt.iter().enumerate().map(|(i, t)| format!("{t:.6} {i} 0 0 0 0 0 1\n")).collect();
    std::fs::write(dir.join("groundtruth.txt"), gt_text).unwrap();
    let round = |t: f64| format!("{t:.6}").parse::<f64>().unwrap();
    let nearest = |t: f64, refs: &[f64]| {
        refs.iter().enumerate().map(|(i, &x)| (i, (round(x) - t).abs())).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
    };
    let expected: Vec<(String, f64)> = rgb
        .iter()
        .filter_map(|&t| {
            let t = round(t);
            let (gi, gd) = nearest(t, &gt);
            (nearest(t, &depth).1 <= 0.02 && gd <= 0.02).then(|| (format!("{t:.6}"), gi as f64))
        })
        .collect();
    let (t, _) = load_tum_sequence_with_report(&dir, 0.02).map_err(|e| e.to_string())?;
    let got: Vec<(String, f64)> = t.frames.iter().map(|f| (f.frame_id.clone(), f.pose.position[0])).collect();
    ensure!(got == expected, "association differs from oracle ({} vs {} frames)", got.len(), expected.len());

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_unit_quaternion(&mut r);
        let m = quat_to_rotmat(q).unwrap();
        let back = quat_to_rotmat(rotmat_to_quat(&m).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((back[i][j] - m[i][j]).abs());
            }
        }
    }
    ensure!(worst < 1e-9, "rotation round trip {worst:.2e}");
    Ok(format!("{} of 50 frames associated, round trip {worst:.1e}", expected.len()))
}

fn c7_backprojection() -> Outcome {
    let mut r = rng(107);
    let intr = Intrinsics::new(525.0, 530.0, 319.5, 239.5).unwrap();
    let depth = Array2::from_shape_fn((48, 64), |_| if r.random_bool(0.1) { 0.0 } else { r.random_range(0.3..6.0) });
    let pc = depth_to_pointcloud(&depth, &intr);
    let mut worst: f64 = 0.0;
    for v in 0..48 {
        for u in 0..64 {
            let z = depth[[v, u]];
            let expected = if z > 0.0 {
                [(u as f64 - intr.cx) * z / intr.fx, (v as f64 - intr.cy) * z / intr.fy, z]
            } else {
                [0.0; 3]
            };
            let got = [pc[[v, u, 0]], pc[[v, u, 1]], pc[[v, u, 2]]];
            ensure!(got == expected, "pixel ({u}, {v}): {got:?} vs {expected:?}");
            if z > 0.0 {
                let (pu, pv) = intr.project(got);
                worst = worst.max((pu - u as f64).abs()).max((pv - v as f64).abs());
            }
        }
    }
    ensure!(worst < 1e-6, "reprojection error {worst:.2e}");
    Ok(format!("reprojection {worst:.1e} px"))
}

fn smoke(epochs: usize, out: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::recipe("smoke").unwrap();
    c.hp.epochs = epochs;
    c.output_dir = out.to_path_buf();
    c
}

fn c8_desk_learning() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let trained = run_train(&smoke(300, &tmp.path().join("trained"))).map_err(|e| e.to_string())?;
    let untrained = run_train(&smoke(0, &tmp.path().join("untrained"))).map_err(|e| e.to_string())?;
    let bundle = load_dataset(&trained.manifest.config.dataset, trained.manifest.config.seed).unwrap();
    ensure!(bundle.with_role(Role::Train).len() == 3, "expected 3 training trajectories");
    let d = scene_diameter(&bundle.trajectories);
    let e1 = trained.report.as_ref().ok_or("no test report")?.position.mean;
    let e0 = untrained.report.as_ref().ok_or("no test report")?.position.mean;
    ensure!(e1 < 0.10 * d, "trained error {e1:.3} m is {:.1}% of diameter {d:.3} m", 100.0 * e1 / d);
    ensure!(e0 > 0.25 * d, "untrained error {e0:.3} m is only {:.1}% of diameter", 100.0 * e0 / d);
    Ok(format!("trained {:.1}%, untrained {:.1}% of {d:.2} m", 100.0 * e1 / d, 100.0 * e0 / d))
}

fn c9_curriculum() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::recipe("smoke-curriculum").unwrap();
    c.output_dir = tmp.path().to_path_buf();
    let runs = run_curriculum_experiment(&c).map_err(|e| e.to_string())?;
    ensure!(runs.len() == 3, "expected 3 seeds");
    let stages = runs[0].len();
    ensure!(stages == 4, "expected 4 stages, got {stages}");
    let count = runs[0][0].report.meta.param_count;
    ensure!(
        runs.iter().flatten().all(|s| s.report.meta.param_count == count),
        "parameter count differs across stages"
    );
    let mean = |stage: usize| runs.iter().map(|r| r[stage].report.position.mean).sum::<f64>() / runs.len() as f64;
    let (first, last) = (mean(0), mean(stages - 1));
    ensure!(last <= first, "stage 4 {last:.3} m > stage 1 {first:.3} m");
    Ok(format!("stage 1 {first:.3} m, stage 4 {last:.3} m, {count} params"))
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_train(&smoke(30, &a)).map_err(|e| e.to_string())?;
    run_train(&smoke(30, &b)).map_err(|e| e.to_string())?;
    let read = |p: std::path::PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    ensure!(read(a.join("history.json"))? == read(b.join("history.json"))?, "history files differ");
    for ck in ["best", "final"] {
        let load = |d: &std::path::Path| WeightContainer::load(&d.join(format!("checkpoints/{ck}.toml")));
        let (x, y) = (load(&a).map_err(|e| e.to_string())?, load(&b).map_err(|e| e.to_string())?);
        ensure!(x.id() == y.id(), "{ck} checkpoint checksums differ");
    }
    ensure!(read(a.join("report.json"))? == read(b.join("report.json"))?, "reports differ");
    Ok("history and checkpoints identical".into())
}

fn c11_container() -> Outcome {
    let model = build_model(preset("reduced", 4).unwrap(), Init::random(11)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("w.toml");
    export_weights(&model, Some(vec![0.1, 0.2, 0.3, 0.4])).save(&path, Dtype::F64).unwrap();
    let back: Model = relocnet::model::import_weights(&WeightContainer::load(&path).unwrap()).unwrap();
    let bits = |m: &Model| m.values().map(f64::to_bits).collect::<Vec<_>>();
    ensure!(bits(&back) == bits(&model), "round trip not bit-exact");
    let bin = tmp.path().join("w.bin");
    let mut bytes = std::fs::read(&bin).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&bin, &bytes).unwrap();
    ensure!(
        matches!(WeightContainer::load(&path), Err(ModelError::Checksum { .. })),
        "corrupted payload accepted"
    );
    Ok(format!("{} parameters", model.param_count()))
}

fn c12_reports() -> Outcome {
    let mut r = rng(112);
    let make = |r: &mut ChaCha8Rng, arch: &str, dataset: &str| {
        let frames = (0..25)
            .map(|i| {
                let target = random_pose_vector(r);
                let raw = random_pose_vector(r);
                frame_result(&format!("f{i}"), raw, &target, AngleMetric::default()).unwrap()
            })
            .collect();
        let meta = EvalMeta {
            arch: arch.into(),
            modality: None,
            dataset: dataset.into(),
            param_count: 1000,
            hp: None,
            stage: None,
        };
        EvalReport::from_frames(meta, AngleMetric::default(), frames)
    };
    let reports = vec![make(&mut r, "VGG-F", "St Marys Church"), make(&mut r, "VGG-19", "Long Office")];
    for rep in &reports {
        let rep = EvalReport::from_json(&rep.to_json()).unwrap();
        let pos: Vec<f64> = rep.frames.iter().map(|f| f.position_error).collect();
        let ang: Vec<f64> = rep.frames.iter().map(|f| f.angle_error).collect();
        for (stored, values) in [(rep.position, &pos), (rep.angle, &ang)] {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            ensure!((stored.mean - mean).abs() < 1e-12 && (stored.std - std).abs() < 1e-12, "aggregate mismatch");
        }
    }

    let shipped: toml::Value = toml::from_str(include_str!("../data/references.toml")).unwrap();
    let refs = ReferenceSet::builtin();
    for metric in [TableMetric::Position, TableMetric::Angle] {
        let key = if metric == TableMetric::Position { "position" } else { "angle" };
        let table = build_comparison(&reports, &refs, metric).unwrap();
        ensure!(table.rows[0].cells[1] == Cell::Missing, "VGG-F Long Office should be NA");
        ensure!(matches!(table.rows[0].cells[0], Cell::Measured(Stat { .. })), "VGG-F St Marys measured");
        let entries = shipped["reference"].as_array().unwrap();
        ensure!(table.rows.len() == 2 + entries.len(), "reference rows missing");
        for (row, entry) in table.rows[2..].iter().zip(entries) {
            ensure!(row.label == entry["name"].as_str().unwrap(), "row order");
            for (cell, dataset) in row.cells.iter().zip(&table.datasets) {
                let want = entry.get(key).and_then(|t| t.get(dataset.as_str())).and_then(toml::Value::as_float);
                let ok = match (cell, want) {
                    (Cell::Reported { value }, Some(w)) => *value == w,
                    (Cell::Missing, None) => true,
                    _ => false,
                };
                ensure!(ok, "{} / {dataset}: {cell:?} vs {want:?}", row.label);
            }
        }
        let posenet = table.rows.iter().find(|r| r.label == "PoseNet").unwrap();
        let expected = if metric == TableMetric::Position { "2.65" } else { "4.24" };
        ensure!(posenet.cells[0].render(3) == expected, "PoseNet St Marys {}", posenet.cells[0].render(3));
        ensure!(posenet.cells[1].render(3) == "NA", "PoseNet Long Office should be NA");
        let md = table.to_markdown(3);
        ensure!(md.contains(&format!("*{expected}*")), "markdown lacks PoseNet value");
    }
    Ok("aggregates and reference rows match".into())
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 12] = [
        ("loss and gradient correctness", 30, c1_gradients),
        ("metric properties", 5, c2_metrics),
        ("parameter-count bands", 5, c3_param_counts),
        ("channel adaptation", 120, c4_channels),
        ("convolution oracle", 60, c5_conv_oracle),
        ("dataset parsers", 60, c6_parsers),
        ("backprojection", 60, c7_backprojection),
        ("desk-scale learning", 600, c8_desk_learning),
        ("curriculum trend", 1200, c9_curriculum),
        ("determinism", 300, c10_determinism),
        ("weight container round trip", 60, c11_container),
        ("report arithmetic", 60, c12_reports),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("{detail}; took {:.1}s, budget {budget}s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {n:>2} {name} ... PASS ({detail}; {:.1}s)", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} {name} ... FAIL ({why}; {:.1}s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
