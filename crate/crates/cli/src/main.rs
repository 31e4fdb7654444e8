use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relocnet::dataset::{SceneSpec, DEFAULT_ASSOC_TOLERANCE};
use relocnet::experiment::{
    resolve_output, run_curriculum_experiment, run_eval, run_report, run_sweep, run_synth, run_train, validate_dataset,
    DatasetFamily, DatasetSpec, ExperimentConfig, ExperimentError, InitSpec, RECIPES,
};
use relocnet::model::{Dtype, InitScheme, WeightContainer};
use relocnet::Modality;

/// CNN camera relocalisation experiments.
///
/// Experiment commands take a config file (`--config`) or a shipped recipe
/// (`--recipe`); flags given on the command line override values from either.
/// A run's `manifest.toml` is itself a valid `--config`.
#[derive(Debug, Parser)]
#[command(name = "relocnet", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a dataset and print per-sequence statistics.
    ValidateDataset {
        path: PathBuf,
        /// tum, 7scenes, cambridge or bundle.
        #[arg(long)]
        family: DatasetFamily,
        /// Maximum rgb/depth/pose timestamp gap for TUM association, seconds.
        #[arg(long, default_value_t = DEFAULT_ASSOC_TOLERANCE)]
        tolerance: f64,
    },
    /// Render a synthetic scene to a bundle directory and print its hash.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scene description (TOML); defaults are used for missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
    /// Train a network and evaluate its best snapshot.
    Train(RunArgs),
    /// Train starting from a weight container.
    Finetune {
        #[command(flatten)]
        run: RunArgs,
        /// Pretrained weight container (.toml).
        #[arg(long)]
        container: PathBuf,
    },
    /// Random hyperparameter search.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        combos: Option<usize>,
    },
    /// Leave-one-out curriculum over trajectories.
    Curriculum {
        #[command(flatten)]
        run: RunArgs,
        /// Held-out trajectory name.
        #[arg(long)]
        test: Option<String>,
        /// Repeat the curriculum for each seed (comma separated).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Evaluate a checkpoint on the test trajectories of a dataset.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Collect run directories into comparison tables and curves.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite a weight container, optionally changing its storage type.
    ConvertWeights {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "f64", value_parser = parse_dtype)]
        dtype: Dtype,
    },
    /// List shipped recipes, or print one.
    Recipes { name: Option<String> },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
    config: Option<PathBuf>,
    #[arg(long)]
    recipe: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (relative paths honour RELOCNET_OUTPUT_ROOT).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replaces the dataset root; TUM sequence directories keep their names under it.
    #[arg(long)]
    dataset_root: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    modality: Option<Modality>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
}

fn parse_dtype(s: &str) -> Result<Dtype, String> {
    match s {
        "f32" => Ok(Dtype::F32),
        "f64" => Ok(Dtype::F64),
        _ => Err(format!("unknown dtype '{s}', expected f32 or f64")),
    }
}

fn rebase(path: &Path, root: &Path) -> PathBuf {
    path.file_name().map(|n| root.join(n)).unwrap_or_else(|| root.to_path_buf())
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut c = match (&self.config, &self.recipe) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::recipe(name)?,
            (None, None) => return Err(ExperimentError::Config("one of --config or --recipe is required".into())),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.output {
            c.output_dir = v.clone();
        }
        if let Some(root) = &self.dataset_root {
            match &mut c.dataset {
                DatasetSpec::Tum { train, validation, test, .. } => {
                    for p in train.iter_mut().chain(validation.iter_mut()).chain(test.iter_mut()) {
                        *p = rebase(p, root);
                    }
                }
                DatasetSpec::SevenScenes { root: r } | DatasetSpec::Cambridge { root: r } | DatasetSpec::Bundle { dir: r } => {
                    *r = root.clone();
                }
                DatasetSpec::Synthetic { .. } => {
                    return Err(ExperimentError::Config("--dataset-root does not apply to synthetic datasets".into()));
                }
            }
        }
        if let Some(v) = &self.arch {
            c.arch = v.clone();
        }
        if let Some(v) = self.modality {
            c.modality = v;
        }
        if let Some(v) = self.side {
            c.side = Some(v);
        }
        if let Some(v) = self.epochs {
            c.hp.epochs = v;
        }
        if let Some(v) = self.lr {
            c.hp.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            c.hp.batch_size = v;
        }
        if let Some(v) = self.weight_decay {
            c.hp.weight_decay = v;
        }
        if let Some(v) = self.beta {
            c.hp.beta = v;
        }
        if let Some(v) = self.momentum {
            c.hp.momentum = v;
        }
        c.preset()?;
        Ok(c)
    }
}

fn print_train(run: &relocnet::experiment::TrainRun) {
    if let Some(best) = run.history.best() {
        println!("best epoch {} (train loss {:.6})", best.epoch, best.train_loss);
    }
    if let Some(r) = &run.report {
        println!(
            "test {}: position {:.4} ± {:.4} m, angle {:.3} ± {:.3} deg over {} frames",
            r.meta.dataset,
            r.position.mean,
            r.position.std,
            r.angle.mean,
            r.angle.std,
            r.frames.len()
        );
    }
    println!("output {}", run.output.display());
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::ValidateDataset { path, family, tolerance } => {
            let summaries = validate_dataset(family, &path, tolerance)?;
            for s in &summaries {
                println!("{s}");
            }
            let total: usize = summaries.iter().map(|s| s.frames).sum();
            println!("{} sequences, {total} frames", summaries.len());
        }
        Command::Synth { out, seed, spec, trajectories, frames, width, height } => {
            let mut scene = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|source| ExperimentError::Io { path: p.clone(), source })?;
                    toml::from_str::<SceneSpec>(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", p.display())))?
                }
                None => SceneSpec::default(),
            };
            scene.trajectories = trajectories.unwrap_or(scene.trajectories);
            scene.frames_per_trajectory = frames.unwrap_or(scene.frames_per_trajectory);
            scene.width = width.unwrap_or(scene.width);
            scene.height = height.unwrap_or(scene.height);
            let out = resolve_output(&out);
            let hash = run_synth(&scene, seed, &out)?;
            println!("{hash}");
        }
        Command::Train(args) => print_train(&run_train(&args.config()?)?),
        Command::Finetune { run, container } => {
            let mut c = run.config()?;
            let (scheme, seed) = match c.init {
                InitSpec::Random { scheme, seed } | InitSpec::Pretrained { scheme, seed, .. } => (scheme, seed),
                InitSpec::Zeros => (InitScheme::default(), None),
            };
            c.init = InitSpec::Pretrained { container, scheme, seed };
            print_train(&run_train(&c)?);
        }
        Command::Sweep { run, combos } => {
            let mut c = run.config()?;
            if let Some(n) = combos {
                c.sweep.combos = n;
            }
            let result = run_sweep(&c)?;
            for e in &result.entries {
                let status = if e.diverged { "diverged".to_string() } else { format!("{:.4} m {:.3} deg", e.val_position_error, e.val_angle_error) };
                println!(
                    "lr {:.3e} batch {} wd {:.1e}: {status}",
                    e.hp.learning_rate, e.hp.batch_size, e.hp.weight_decay
                );
            }
        }
        Command::Curriculum { run, test, seeds } => {
            let mut c = run.config()?;
            if test.is_some() {
                c.curriculum.test = test;
            }
            if !seeds.is_empty() {
                c.curriculum.seeds = seeds;
            }
            let runs = run_curriculum_experiment(&c)?;
            print!("{}", relocnet::experiment::curve_csv(&runs)?);
        }
        Command::Eval { run, checkpoint } => {
            for r in run_eval(&run.config()?, &checkpoint)? {
                println!(
                    "{}: position {:.4} ± {:.4} m, angle {:.3} ± {:.3} deg",
                    r.meta.dataset, r.position.mean, r.position.std, r.angle.mean, r.angle.std
                );
            }
        }
        Command::Report { runs, out } => {
            let r = run_report(&runs, &resolve_output(&out))?;
            println!("{}", r.position_table);
            println!("{}", r.angle_table);
            if let Some(curve) = r.curve {
                print!("{curve}");
            }
        }
        Command::ConvertWeights { input, output, dtype } => {
            let c = WeightContainer::load(&input)?;
            c.save(&output, dtype)?;
            println!("{}", c.id());
        }
        Command::Recipes { name: None } => {
            for (name, _) in RECIPES {
                println!("{name}");
            }
        }
        Command::Recipes { name: Some(name) } => {
            let (_, text) = RECIPES
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| ExperimentError::Config(format!("unknown recipe '{name}'")))?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
