//! Experiment recipes: a TOML configuration drives dataset loading, training,
//! sweeps, curricula and evaluation, and every run leaves a manifest that is
//! sufficient to replay it.
//!
//! Run directory layout:
//!
//! ```text
//! <output>/manifest.toml          config, command, data hashes, checksums
//! <output>/history.json           per-epoch record (no wall times)
//! <output>/timings.csv            per-epoch wall times
//! <output>/checkpoints/best.toml   weight container (+ best.bin)
//! <output>/checkpoints/final.toml  weight container (+ final.bin)
//! <output>/report.json            evaluation of the best snapshot
//! <output>/plot/{train,test,predicted}.csv
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    bundle_hash, load_7scenes_scene, load_bundle_dir, load_cambridge_scene, load_tum_sequence, make_leave_one_out,
    save_bundle, trajectory_hash, DatasetBundle, DatasetError, Role, SceneSpec, Trajectory, DEFAULT_ASSOC_TOLERANCE,
};
use crate::eval::{
    build_comparison, curriculum_curve, evaluate, export_trajectory_plot_data, render_plot_png, EvalError, EvalReport,
    ReferenceSet, StageReport, TableMetric,
};
use crate::input::{compute_channel_means, FrameSamples, InputError, Modality, PipelineConfig};
use crate::model::{build_model, export_weights, preset_with, Dtype, Init, InitScheme, Model, ModelError, Preset, WeightContainer, POSE_HEAD};
use crate::train::{run_curriculum, sweep, CurriculumSpec, HyperParams, SweepGrid, SweepResult, TrainError, TrainHistory};

/// Environment variable that relocates every run's output directory.
pub const OUTPUT_ROOT_ENV: &str = "RELOCNET_OUTPUT_ROOT";

const RUN_MANIFEST_FORMAT: &str = "relocnet-run/1";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Train(TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<TrainError> for ExperimentError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Dataset(d) => ExperimentError::Dataset(d),
            TrainError::Input(i) => ExperimentError::Input(i),
            other => ExperimentError::Train(other),
        }
    }
}

impl ExperimentError {
    /// Process exit status: 1 usage or configuration, 2 ingestion,
    /// 3 training divergence, 4 internal contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Dataset(_) | ExperimentError::Input(_) => 2,
            ExperimentError::Train(e) => train_code(e),
            ExperimentError::Model(e) => model_code(e),
            ExperimentError::Eval(e) => eval_code(e),
            ExperimentError::Io { .. } => 4,
        }
    }
}

fn model_code(e: &ModelError) -> i32 {
    match e {
        ModelError::InvalidArch(_) | ModelError::UnknownPreset(_) | ModelError::NotPoseHead(_) => 1,
        ModelError::Checksum { .. }
        | ModelError::Container { .. }
        | ModelError::Io { .. }
        | ModelError::ParamShape { .. }
        | ModelError::MissingLayer(_) => 2,
        ModelError::ShapeMismatch { .. } | ModelError::Pose(_) => 4,
    }
}

fn eval_code(e: &EvalError) -> i32 {
    match e {
        EvalError::ChannelMismatch { .. } => 1,
        EvalError::EmptyTest | EvalError::Format { .. } | EvalError::Input(_) => 2,
        EvalError::Model(m) => model_code(m),
        EvalError::DuplicateCell { .. } | EvalError::Contract(_) | EvalError::Io { .. } | EvalError::Pose(_) => 4,
    }
}

fn train_code(e: &TrainError) -> i32 {
    match e {
        TrainError::Diverged { .. } => 3,
        TrainError::BatchTooLarge { .. } | TrainError::InvalidHyperParams(_) | TrainError::EmptyGrid(_) => 1,
        TrainError::EmptyTrainSet | TrainError::Input(_) | TrainError::Dataset(_) => 2,
        TrainError::Model(m) => model_code(m),
        TrainError::Eval(v) => eval_code(v),
        TrainError::Pose(_) => 4,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Where the frames of an experiment come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// Rendered on the fly; `seed` defaults to the experiment seed.
    Synthetic {
        #[serde(default)]
        scene: SceneSpec,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// TUM RGB-D sequence directories.
    Tum {
        train: Vec<PathBuf>,
        #[serde(default)]
        validation: Vec<PathBuf>,
        #[serde(default)]
        test: Vec<PathBuf>,
        #[serde(default = "default_tolerance")]
        assoc_tolerance: f64,
    },
    /// A 7-Scenes scene directory with `TrainSplit.txt` / `TestSplit.txt`.
    #[serde(rename = "7scenes")]
    SevenScenes { root: PathBuf },
    /// A Cambridge Landmarks scene directory.
    Cambridge { root: PathBuf },
    /// A directory written by [`save_bundle`].
    Bundle { dir: PathBuf },
}

fn default_tolerance() -> f64 {
    DEFAULT_ASSOC_TOLERANCE
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic { scene: SceneSpec::default(), seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitSpec {
    Random {
        #[serde(default)]
        scheme: InitScheme,
        /// Defaults to the experiment seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Zeros,
    Pretrained {
        container: PathBuf,
        #[serde(default)]
        scheme: InitScheme,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Random { scheme: InitScheme::default(), seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub combos: usize,
    pub grid: SweepGrid,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { combos: 20, grid: SweepGrid::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    /// Held-out trajectory; defaults to the first test-role trajectory.
    pub test: Option<String>,
    /// Order in which the remaining trajectories are added; default lexicographic.
    pub order: Option<Vec<String>>,
    /// Training seeds; every stage sequence is repeated per seed. Defaults to the experiment seed.
    pub seeds: Vec<u64>,
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Relative paths resolve against the output root.
    pub output_dir: PathBuf,
    pub arch: String,
    pub modality: Modality,
    /// Network input side; the preset's native side when absent.
    pub side: Option<usize>,
    /// Divisor for depth and XYZ channels, meters.
    pub scene_scale: f64,
    /// Subtract per-channel means of the training split.
    pub center: bool,
    /// Hold out every n-th training frame for validation when no validation trajectories exist (0 disables).
    pub val_holdout_every: usize,
    /// Write a PNG rendering of the trajectory plot next to the CSV files.
    pub plot_png: bool,
    pub dataset: DatasetSpec,
    pub init: InitSpec,
    pub hp: HyperParams,
    pub sweep: SweepConfig,
    pub curriculum: CurriculumConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            output_dir: PathBuf::from("runs/experiment"),
            arch: "VGG-F".into(),
            modality: Modality::Rgb,
            side: None,
            scene_scale: 1.0,
            center: true,
            val_holdout_every: 0,
            plot_png: false,
            dataset: DatasetSpec::default(),
            init: InitSpec::default(),
            hp: HyperParams::default(),
            sweep: SweepConfig::default(),
            curriculum: CurriculumConfig::default(),
        }
    }
}

/// Shipped recipes: `(name, toml)`.
pub const RECIPES: [(&str, &str); 5] = [
    ("smoke", include_str!("../recipes/smoke.toml")),
    ("smoke-curriculum", include_str!("../recipes/smoke-curriculum.toml")),
    ("paper-tum", include_str!("../recipes/paper-tum.toml")),
    ("paper-st-marys-sweep", include_str!("../recipes/paper-st-marys-sweep.toml")),
    ("paper-7scenes-curriculum", include_str!("../recipes/paper-7scenes-curriculum.toml")),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEnvelope {
    config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn recipe(name: &str) -> Result<Self, ExperimentError> {
        let (_, text) = RECIPES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ExperimentError::Config(format!("unknown recipe '{name}'")))?;
        Self::from_toml(text)
    }

    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let value: toml::Table = toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        if value.get("format").and_then(|v| v.as_str()) == Some(RUN_MANIFEST_FORMAT) {
            let env: ManifestEnvelope =
                toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
            return Ok(env.config);
        }
        toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    }

    pub fn preset(&self) -> Result<Preset, ExperimentError> {
        Ok(Preset::from_name(&self.arch)?)
    }

    pub fn input_side(&self) -> Result<usize, ExperimentError> {
        Ok(self.side.unwrap_or(self.preset()?.default_side()))
    }

    /// Output directory after applying [`OUTPUT_ROOT_ENV`].
    pub fn resolved_output(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }

    fn init(&self) -> Result<Init, ExperimentError> {
        Ok(match &self.init {
            InitSpec::Random { scheme, seed } => Init::Random { scheme: *scheme, seed: seed.unwrap_or(self.seed) },
            InitSpec::Zeros => Init::Zeros,
            InitSpec::Pretrained { container, scheme, seed } => Init::Pretrained {
                container: Box::new(WeightContainer::load(container)?),
                scheme: *scheme,
                seed: seed.unwrap_or(self.seed),
            },
        })
    }

    fn hp(&self) -> HyperParams {
        HyperParams { seed: self.seed, ..self.hp.clone() }
    }
}

/// Joins a relative output path onto the root named by [`OUTPUT_ROOT_ENV`], if set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<DatasetBundle, ExperimentError> {
    let bundle = match spec {
        DatasetSpec::Synthetic { scene, seed: s } => crate::dataset::generate_synthetic_scene(scene, s.unwrap_or(seed))?,
        DatasetSpec::Tum { train, validation, test, assoc_tolerance } => {
            let mut trajectories = Vec::new();
            for (paths, role) in [(train, Role::Train), (validation, Role::Validation), (test, Role::Test)] {
                for p in paths {
                    let mut t = load_tum_sequence(p, *assoc_tolerance)?;
                    t.role = role;
                    trajectories.push(t);
                }
            }
            let scene = train
                .first()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "tum".into());
            DatasetBundle::new(scene, trajectories)
        }
        DatasetSpec::SevenScenes { root } => load_7scenes_scene(root)?,
        DatasetSpec::Cambridge { root } => load_cambridge_scene(root)?,
        DatasetSpec::Bundle { dir } => load_bundle_dir(dir)?,
    };
    Ok(bundle)
}

/// Splits every `every`-th frame of `train` off into a validation trajectory.
pub fn holdout_split(train: &[&Trajectory], every: usize) -> (Vec<Trajectory>, Vec<Trajectory>) {
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for t in train {
        let (mut a, mut b) = (t.frames.clone(), Vec::new());
        if every > 1 {
            let frames = std::mem::take(&mut a);
            for (i, f) in frames.into_iter().enumerate() {
                if i % every == every - 1 {
                    b.push(f);
                } else {
                    a.push(f);
                }
            }
        }
        kept.push(Trajectory { frames: a, ..(*t).clone() });
        if !b.is_empty() {
            held.push(Trajectory { name: format!("{}-val", t.name), frames: b, role: Role::Validation, intrinsics: t.intrinsics });
        }
    }
    (kept, held)
}

/// Everything needed to replay a run and check its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub version: String,
    pub scene: String,
    pub bundle_hash: String,
    pub trajectory_hashes: Vec<(String, String)>,
    pub param_count: usize,
    #[serde(default)]
    pub channel_means: Option<Vec<f64>>,
    #[serde(default)]
    pub checksums: Vec<(String, String)>,
    pub config: ExperimentConfig,
}

fn data_hashes(bundle: &DatasetBundle) -> Result<(String, Vec<(String, String)>), ExperimentError> {
    let per = bundle
        .trajectories
        .iter()
        .map(|t| Ok((t.name.clone(), trajectory_hash(t)?)))
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok((bundle_hash(bundle)?, per))
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn sha256_file(path: &Path) -> Result<String, ExperimentError> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(
    out: &Path,
    command: &str,
    config: &ExperimentConfig,
    bundle: &DatasetBundle,
    param_count: usize,
    channel_means: Option<Vec<f64>>,
    checksums: Vec<(String, String)>,
) -> Result<RunManifest, ExperimentError> {
    let (bundle_hash, trajectory_hashes) = data_hashes(bundle)?;
    let m = RunManifest {
        format: RUN_MANIFEST_FORMAT.into(),
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scene: bundle.scene.clone(),
        bundle_hash,
        trajectory_hashes,
        param_count,
        channel_means,
        checksums,
        config: config.clone(),
    };
    let text = toml::to_string(&m).map_err(|e| ExperimentError::Config(e.to_string()))?;
    write_text(&out.join("manifest.toml"), &text)?;
    Ok(m)
}

/// Prepared inputs shared by the commands.
struct Prepared {
    bundle: DatasetBundle,
    train: Vec<Trajectory>,
    val: Vec<Trajectory>,
    test: Vec<Trajectory>,
    pipeline: PipelineConfig,
    side: usize,
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    let bundle = load_dataset(&config.dataset, config.seed)?;
    if !bundle.modalities.contains(&config.modality) {
        return Err(ExperimentError::Config(format!(
            "dataset {} does not provide modality {}",
            bundle.scene, config.modality
        )));
    }
    let side = config.input_side()?;
    let train_refs = bundle.with_role(Role::Train);
    if train_refs.is_empty() {
        return Err(DatasetError::InvalidSpec(format!("scene {} has no training trajectory", bundle.scene)).into());
    }
    let mut val: Vec<Trajectory> = bundle.with_role(Role::Validation).into_iter().cloned().collect();
    let train = if val.is_empty() && config.val_holdout_every > 1 {
        let (kept, held) = holdout_split(&train_refs, config.val_holdout_every);
        val = held;
        kept
    } else {
        train_refs.into_iter().cloned().collect()
    };
    let test: Vec<Trajectory> = bundle.with_role(Role::Test).into_iter().cloned().collect();
    let means = if config.center {
        let refs: Vec<&Trajectory> = train.iter().collect();
        Some(compute_channel_means(&refs, config.modality, side, config.scene_scale)?)
    } else {
        None
    };
    let pipeline = PipelineConfig { side, scene_scale: config.scene_scale, channel_means: means };
    Ok(Prepared { bundle, train, val, test, pipeline, side })
}

/// Ingestion summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceSummary {
    pub name: String,
    pub role: Role,
    pub frames: usize,
    /// Frames dropped by timestamp association (TUM only).
    pub dropped: Option<usize>,
    pub has_depth: bool,
    /// Bounding-box diagonal of the camera positions, meters.
    pub diameter: f64,
    /// Largest distance between consecutive camera positions, meters.
    pub max_step: f64,
}

impl std::fmt::Display for SequenceSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {} frames", self.name, self.role, self.frames)?;
        if let Some(d) = self.dropped {
            write!(f, ", {d} dropped")?;
        }
        write!(
            f,
            ", depth {}, extent {:.3} m, max step {:.3} m",
            if self.has_depth { "yes" } else { "no" },
            self.diameter,
            self.max_step
        )
    }
}

fn summarize(t: &Trajectory, dropped: Option<usize>) -> SequenceSummary {
    let pos = t.positions();
    let max_step = pos
        .windows(2)
        .map(|w| crate::pose::position_error(w[0], w[1]))
        .fold(0.0, f64::max);
    SequenceSummary {
        name: t.name.clone(),
        role: t.role,
        frames: t.len(),
        dropped,
        has_depth: t.has_depth(),
        diameter: crate::dataset::scene_diameter([t]),
        max_step,
    }
}

/// Dataset families accepted by [`validate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFamily {
    /// One TUM sequence directory.
    Tum,
    #[serde(rename = "7scenes")]
    SevenScenes,
    Cambridge,
    Bundle,
}

impl std::str::FromStr for DatasetFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tum" => Ok(DatasetFamily::Tum),
            "7scenes" | "7-scenes" | "seven-scenes" => Ok(DatasetFamily::SevenScenes),
            "cambridge" => Ok(DatasetFamily::Cambridge),
            "bundle" | "manifest" => Ok(DatasetFamily::Bundle),
            other => Err(format!("unknown dataset family '{other}'")),
        }
    }
}

/// Loads a dataset read-only and summarizes every trajectory.
pub fn validate_dataset(family: DatasetFamily, path: &Path, tolerance: f64) -> Result<Vec<SequenceSummary>, ExperimentError> {
    if !path.exists() {
        return Err(ExperimentError::Dataset(DatasetError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        }));
    }
    let summaries = match family {
        DatasetFamily::Tum => {
            let (t, report) = crate::dataset::load_tum_sequence_with_report(path, tolerance)?;
            vec![summarize(&t, Some(report.dropped))]
        }
        DatasetFamily::SevenScenes => load_7scenes_scene(path)?.trajectories.iter().map(|t| summarize(t, None)).collect(),
        DatasetFamily::Cambridge => load_cambridge_scene(path)?.trajectories.iter().map(|t| summarize(t, None)).collect(),
        DatasetFamily::Bundle => load_bundle_dir(path)?.trajectories.iter().map(|t| summarize(t, None)).collect(),
    };
    Ok(summaries)
}

/// Outputs of a training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub output: PathBuf,
    pub manifest: RunManifest,
    pub history: TrainHistory,
    pub report: Option<EvalReport>,
    pub best: Model,
    pub model: Model,
}

/// Trains per `config`, writing checkpoints, history, report and plot data.
/// On divergence the pre-divergence snapshot is checkpointed before the error is returned.
pub fn run_train(config: &ExperimentConfig) -> Result<TrainRun, ExperimentError> {
    let out = config.resolved_output();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let p = prepare(config)?;
    let arch = preset_with(&config.arch, config.modality.channels(), p.side, POSE_HEAD)?;
    let model = build_model(arch, config.init()?)?;
    let param_count = model.param_count();
    let train_refs: Vec<&Trajectory> = p.train.iter().collect();
    let val_refs: Vec<&Trajectory> = p.val.iter().collect();
    let train_set = FrameSamples::new(&train_refs, config.modality, p.pipeline.clone()).materialize()?;
    let val_set = FrameSamples::new(&val_refs, config.modality, p.pipeline.clone()).materialize()?;
    let val = (!p.val.is_empty()).then_some(&val_set as &dyn crate::input::SampleSource);
    log::info!("training {} on {} frames ({} validation)", config.arch, train_set.0.len(), val_set.0.len());
    let hp = config.hp();
    let ckpt = out.join("checkpoints");
    let means = p.pipeline.channel_means.clone();

    let outcome = match crate::train::train(model, &train_set, val, &hp) {
        Ok(o) => o,
        Err(TrainError::Diverged { epoch, lr, last_good, history }) => {
            export_weights(&last_good, means.clone()).save(&ckpt.join("last-good.toml"), Dtype::F64)?;
            write_text(&out.join("history.json"), &history.to_json())?;
            write_manifest(&out, "train", config, &p.bundle, param_count, means, vec![])?;
            return Err(ExperimentError::Train(TrainError::Diverged { epoch, lr, last_good, history }));
        }
        Err(e) => return Err(e.into()),
    };

    let mut checksums = Vec::new();
    for (name, m) in [("best", &outcome.best), ("final", &outcome.model)] {
        let path = ckpt.join(format!("{name}.toml"));
        export_weights(m, means.clone()).save(&path, Dtype::F64)?;
        checksums.push((format!("checkpoints/{name}.bin"), sha256_file(&ckpt.join(format!("{name}.bin")))?));
    }
    write_text(&out.join("history.json"), &outcome.history.to_json())?;
    write_text(&out.join("timings.csv"), &outcome.history.timings_csv())?;
    checksums.push(("history.json".into(), sha256_file(&out.join("history.json"))?));

    let report = match p.test.first() {
        Some(test) => {
            let mut r = evaluate(&outcome.best, test, config.modality, &p.pipeline, &p.bundle.scene)?;
            r.meta.hp = Some(hp.clone());
            r.save(&out.join("report.json"))?;
            let plot_dir = out.join("plot");
            export_trajectory_plot_data(&r, &train_refs, test, &plot_dir)?;
            if config.plot_png {
                render_plot_png(&r, &train_refs, test, &plot_dir.join("trajectories.png"), 512)?;
            }
            Some(r)
        }
        None => None,
    };
    let manifest = write_manifest(&out, "train", config, &p.bundle, param_count, means, checksums)?;
    Ok(TrainRun { output: out, manifest, history: outcome.history, report, best: outcome.best, model: outcome.model })
}

/// Runs the hyperparameter search and writes `sweep.json`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let out = config.resolved_output();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let p = prepare(config)?;
    let arch = preset_with(&config.arch, config.modality.channels(), p.side, POSE_HEAD)?;
    let train_refs: Vec<&Trajectory> = p.train.iter().collect();
    let val_refs: Vec<&Trajectory> = p.val.iter().collect();
    let train_set = FrameSamples::new(&train_refs, config.modality, p.pipeline.clone()).materialize()?;
    let val_set = FrameSamples::new(&val_refs, config.modality, p.pipeline.clone()).materialize()?;
    let val = (!p.val.is_empty()).then_some(&val_set as &dyn crate::input::SampleSource);
    let result = sweep(&arch, &config.init()?, &train_set, val, &config.sweep.grid, &config.hp(), config.sweep.combos)?;
    let text = serde_json::to_string_pretty(&result).expect("sweep serializes");
    write_text(&out.join("sweep.json"), &text)?;
    write_manifest(&out, "sweep", config, &p.bundle, arch.param_count(), p.pipeline.channel_means, vec![])?;
    Ok(result)
}

/// Runs the leave-one-out curriculum for every configured seed and writes
/// `curriculum.json` and `curve.csv` (stage means averaged over seeds).
pub fn run_curriculum_experiment(config: &ExperimentConfig) -> Result<Vec<Vec<StageReport>>, ExperimentError> {
    let out = config.resolved_output();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let bundle = load_dataset(&config.dataset, config.seed)?;
    let test = match &config.curriculum.test {
        Some(t) => t.clone(),
        None => bundle
            .with_role(Role::Test)
            .first()
            .map(|t| t.name.clone())
            .ok_or_else(|| ExperimentError::Config("curriculum needs a test trajectory".into()))?,
    };
    let curriculum = make_leave_one_out(&bundle, &test, config.curriculum.order.as_deref())?;
    let side = config.input_side()?;
    let arch = preset_with(&config.arch, config.modality.channels(), side, POSE_HEAD)?;
    let spec = CurriculumSpec {
        modality: config.modality,
        side,
        scene_scale: config.scene_scale,
        center: config.center,
        dataset: bundle.scene.clone(),
    };
    let seeds = if config.curriculum.seeds.is_empty() { vec![config.seed] } else { config.curriculum.seeds.clone() };
    let mut runs = Vec::new();
    for &seed in &seeds {
        let cfg = ExperimentConfig { seed, ..config.clone() };
        runs.push(run_curriculum(&arch, &cfg.init()?, &curriculum, &spec, &cfg.hp())?);
    }
    let text = serde_json::to_string_pretty(&runs).expect("stage reports serialize");
    write_text(&out.join("curriculum.json"), &text)?;
    write_text(&out.join("curve.csv"), &curve_csv(&runs)?)?;
    write_manifest(&out, "curriculum", config, &bundle, arch.param_count(), None, vec![])?;
    Ok(runs)
}

/// `trajectories,position_mean,angle_mean,param_count`, averaged over runs.
pub fn curve_csv(runs: &[Vec<StageReport>]) -> Result<String, ExperimentError> {
    let curves = runs.iter().map(|r| curriculum_curve(r)).collect::<Result<Vec<_>, _>>()?;
    let Some(first) = curves.first() else {
        return Err(EvalError::Contract("no curriculum runs".into()).into());
    };
    let n = curves.len() as f64;
    let mut out = String::from("trajectories,position_mean,angle_mean,param_count\n");
    for (i, point) in first.iter().enumerate() {
        let (mut p, mut a) = (0.0, 0.0);
        for c in &curves {
            if c.len() != first.len() || c[i].param_count != point.param_count {
                return Err(EvalError::Contract("curriculum runs disagree in stages or network size".into()).into());
            }
            p += c[i].position_mean;
            a += c[i].angle_mean;
        }
        out.push_str(&format!("{},{},{},{}\n", point.trajectories, p / n, a / n, point.param_count));
    }
    Ok(out)
}

/// Evaluates a checkpoint on the test trajectories of the configured dataset.
pub fn run_eval(config: &ExperimentConfig, checkpoint: &Path) -> Result<Vec<EvalReport>, ExperimentError> {
    let container = WeightContainer::load(checkpoint)?;
    let model = crate::model::import_weights(&container)?;
    let bundle = load_dataset(&config.dataset, config.seed)?;
    let side = model.arch.input.0;
    let pipeline = PipelineConfig { side, scene_scale: config.scene_scale, channel_means: container.channel_means.clone() };
    let tests = bundle.with_role(Role::Test);
    if tests.is_empty() {
        return Err(ExperimentError::Config(format!("dataset {} has no test trajectory", bundle.scene)));
    }
    let out = config.resolved_output();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut reports = Vec::new();
    for t in tests {
        let r = evaluate(&model, t, config.modality, &pipeline, &bundle.scene)?;
        r.save(&out.join(format!("eval-{}.json", t.name)))?;
        reports.push(r);
    }
    Ok(reports)
}

/// Collected tables and curves over run directories.
#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub position_table: String,
    pub angle_table: String,
    pub curve: Option<String>,
}

/// Gathers `report.json` and `curriculum.json` from run directories into
/// comparison tables (`tables.md`) and, for curricula, `curve.csv`.
pub fn run_report(run_dirs: &[PathBuf], out: &Path) -> Result<ReportOutput, ExperimentError> {
    let mut reports = Vec::new();
    let mut curricula: Vec<Vec<StageReport>> = Vec::new();
    for dir in run_dirs {
        let report = dir.join("report.json");
        if report.exists() {
            reports.push(EvalReport::load(&report)?);
        }
        let cur = dir.join("curriculum.json");
        if cur.exists() {
            let text = std::fs::read_to_string(&cur).map_err(io_err(&cur))?;
            let runs: Vec<Vec<StageReport>> = serde_json::from_str(&text)
                .map_err(|e| EvalError::Format { path: cur.clone(), message: e.to_string() })?;
            curricula.extend(runs);
        }
    }
    if reports.is_empty() && curricula.is_empty() {
        return Err(ExperimentError::Config("no report.json or curriculum.json in the given run directories".into()));
    }
    let refs = ReferenceSet::builtin();
    let position_table = build_comparison(&reports, &refs, TableMetric::Position)?.to_markdown(3);
    let angle_table = build_comparison(&reports, &refs, TableMetric::Angle)?.to_markdown(2);
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    write_text(
        &out.join("tables.md"),
        &format!("## Position error\n\n{position_table}\n## Angle error\n\n{angle_table}"),
    )?;
    let curve = if curricula.is_empty() {
        None
    } else {
        let c = curve_csv(&curricula)?;
        write_text(&out.join("curve.csv"), &c)?;
        Some(c)
    };
    Ok(ReportOutput { position_table, angle_table, curve })
}

/// Renders a synthetic scene into a bundle directory; returns the bundle hash.
pub fn run_synth(spec: &SceneSpec, seed: u64, out: &Path) -> Result<String, ExperimentError> {
    let bundle = crate::dataset::generate_synthetic_scene(spec, seed)?;
    save_bundle(&bundle, out)?;
    Ok(bundle_hash(&bundle)?)
}
