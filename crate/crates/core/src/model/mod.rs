//! Convnet pose regressors: architectures, parameters, evaluation and gradients.

pub mod arch;
pub mod container;
mod ops;

use std::path::PathBuf;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::input::NetInput;
use crate::pose::{loss_gradient, posenet_loss, PoseError, PoseVector};

pub use arch::{
    preset, preset_with, ArchSpec, ArchTemplate, ConvSpec, LayerSpec, LayerTemplate, LrnSpec, Pad, PadSpec, PoolSpec,
    Preset, POSE_HEAD,
};
pub use container::{export_weights, import_weights, Dtype, NamedArray, WeightContainer};

/// Standard deviation of the default Gaussian initializer.
pub const DEFAULT_INIT_STD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("input shape {got:?} does not match expected {expected:?}")]
    ShapeMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("unknown architecture preset '{0}'")]
    UnknownPreset(String),
    #[error("layer '{name}' has shape {got:?}, expected {expected:?}")]
    ParamShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("weight container has no array for layer '{0}'")]
    MissingLayer(String),
    #[error("checksum mismatch in {path}: {message}")]
    Checksum { path: PathBuf, message: String },
    #[error("weight container {path}: {message}")]
    Container { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("network head has {0} outputs, a pose needs 7")]
    NotPoseHead(usize),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// Weights and biases of one conv or fc layer. Conv weights are stored as
/// `(out, k·k·in)` with the inner index ordered `(ky, kx, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    fn zeros(spec: &LayerSpec) -> Option<Self> {
        let shape = spec.weight_shape()?;
        let rows = shape[0];
        let cols = shape[1..].iter().product();
        Some(Self { weight: Array2::zeros((rows, cols)), bias: Array1::zeros(spec.bias_len()?) })
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitScheme {
    /// Zero-mean Gaussian with a fixed standard deviation.
    Gaussian { std: f64 },
    /// Zero-mean Gaussian with `std = sqrt(2 / fan_in)`.
    He,
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Gaussian { std: DEFAULT_INIT_STD }
    }
}

impl InitScheme {
    fn std(self, fan_in: usize) -> f64 {
        match self {
            InitScheme::Gaussian { std } => std,
            InitScheme::He => (2.0 / fan_in.max(1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Init {
    Random { scheme: InitScheme, seed: u64 },
    Zeros,
    /// Copy arrays from a container; the first and last parameterized layers
    /// are redrawn with `scheme` when their shape differs.
    Pretrained { container: Box<WeightContainer>, scheme: InitScheme, seed: u64 },
}

impl Init {
    pub fn random(seed: u64) -> Self {
        Init::Random { scheme: InitScheme::default(), seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Random { scheme: InitScheme, seed: u64 },
    Zeros,
    Pretrained { container_id: String, copied: Vec<String>, reinitialized: Vec<String> },
    Imported { container_id: String },
}

/// A network with concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: ArchSpec,
    /// One entry per layer; `Some` for conv and fc layers.
    pub params: Vec<Option<LayerParams>>,
    pub provenance: Provenance,
}

fn draw_layer(spec: &LayerSpec, index: usize, scheme: InitScheme, seed: u64) -> LayerParams {
    let mut p = LayerParams::zeros(spec).expect("parameterized layer");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let normal = Normal::new(0.0, scheme.std(p.weight.ncols())).expect("finite std");
    p.weight.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    p
}

pub fn build_model(arch: ArchSpec, init: Init) -> Result<Model, ModelError> {
    arch.validate()?;
    let mut params: Vec<Option<LayerParams>> = arch.layers.iter().map(LayerParams::zeros).collect();
    let provenance = match init {
        Init::Zeros => Provenance::Zeros,
        Init::Random { scheme, seed } => {
            for (i, (spec, slot)) in arch.layers.iter().zip(params.iter_mut()).enumerate() {
                if slot.is_some() {
                    *slot = Some(draw_layer(spec, i, scheme, seed));
                }
            }
            Provenance::Random { scheme, seed }
        }
        Init::Pretrained { container, scheme, seed } => {
            let first = arch.first_param_layer();
            let last = arch.last_param_layer();
            let (mut copied, mut reinitialized) = (Vec::new(), Vec::new());
            for (i, (spec, slot)) in arch.layers.iter().zip(params.iter_mut()).enumerate() {
                let Some(name) = spec.param_name() else { continue };
                let expected = spec.weight_shape().expect("parameterized layer");
                let found = container.layer(name, &expected, spec.bias_len().expect("parameterized layer"));
                match found {
                    Ok(p) => {
                        *slot = Some(p);
                        copied.push(name.to_string());
                    }
                    Err(e) if Some(i) == first || Some(i) == last => {
                        log::info!("re-initializing {name}: {e}");
                        *slot = Some(draw_layer(spec, i, scheme, seed));
                        reinitialized.push(name.to_string());
                    }
                    Err(e) => return Err(e),
                }
            }
            Provenance::Pretrained { container_id: container.id(), copied, reinitialized }
        }
    };
    Ok(Model { arch, params, provenance })
}

/// Per-layer gradients, shaped like [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerParams>>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self { layers: model.arch.layers.iter().map(LayerParams::zeros).collect() }
    }

    pub fn fill_zero(&mut self) {
        for p in self.layers.iter_mut().flatten() {
            p.weight.fill(0.0);
            p.bias.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for p in self.layers.iter_mut().flatten() {
            p.weight *= factor;
            p.bias *= factor;
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                a.weight += &b.weight;
                a.bias += &b.bias;
            }
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flatten().flat_map(|p| p.weight.iter().chain(p.bias.iter()).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }
}

/// Cached state from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Array3<f64>>,
    cache: Vec<LayerCache>,
    pub output: Array3<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    None,
    Cols(Array2<f64>),
    Argmax(Vec<usize>),
    Scale(Array3<f64>),
    Mask(Array3<f64>),
}

impl Model {
    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    pub fn layer_params(&self, name: &str) -> Option<&LayerParams> {
        self.arch
            .layers
            .iter()
            .position(|l| l.param_name() == Some(name))
            .and_then(|i| self.params[i].as_ref())
    }

    /// Every parameter value in layer order, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.params.iter().flatten().flat_map(|p| p.weight.iter().chain(p.bias.iter()).copied())
    }

    fn flat_slot(&mut self, mut index: usize) -> &mut f64 {
        for p in self.params.iter_mut().flatten() {
            if index < p.weight.len() {
                return p.weight.as_slice_mut().expect("standard layout").get_mut(index).expect("in range");
            }
            index -= p.weight.len();
            if index < p.bias.len() {
                return &mut p.bias[index];
            }
            index -= p.bias.len();
        }
        panic!("parameter index out of range")
    }

    /// Parameter at a flat index (the order of [`Model::values`]).
    pub fn get_param(&mut self, index: usize) -> f64 {
        *self.flat_slot(index)
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *self.flat_slot(index) = value;
    }

    fn check_input(&self, input: &Array3<f64>) -> Result<(), ModelError> {
        if input.dim() != self.arch.input {
            return Err(ModelError::ShapeMismatch { expected: self.arch.input, got: input.dim() });
        }
        Ok(())
    }

    /// Evaluation-mode forward pass (dropout disabled), returning the raw head output.
    pub fn forward_raw(&self, input: &Array3<f64>) -> Result<Vec<f64>, ModelError> {
        self.check_input(input)?;
        let shapes = self.arch.shapes()?;
        let mut x = input.as_standard_layout().into_owned();
        for ((layer, params), &shape) in self.arch.layers.iter().zip(&self.params).zip(&shapes) {
            x = match layer {
                LayerSpec::Conv { conv, .. } => {
                    let p = params.as_ref().expect("conv params");
                    ops::conv_forward(&x, conv, &p.weight, &p.bias, shape).0
                }
                LayerSpec::FullyConnected { .. } => {
                    let p = params.as_ref().expect("fc params");
                    ops::fc_forward(&x, &p.weight, &p.bias)
                }
                LayerSpec::Relu => ops::relu_forward(&x),
                LayerSpec::Lrn(l) => ops::lrn_forward(&x, l).0,
                LayerSpec::MaxPool(p) => ops::maxpool_forward(&x, p, shape).0,
                LayerSpec::Dropout { .. } => x,
            };
        }
        Ok(x.into_iter().collect())
    }

    /// Evaluation-mode forward pass; the quaternion part is returned unnormalized.
    pub fn forward(&self, input: &NetInput) -> Result<PoseVector, ModelError> {
        self.predict(&input.data)
    }

    pub fn predict(&self, input: &Array3<f64>) -> Result<PoseVector, ModelError> {
        let out = self.forward_raw(input)?;
        if out.len() != PoseVector::LEN {
            return Err(ModelError::NotPoseHead(out.len()));
        }
        Ok(PoseVector::from_slice(&out)?)
    }

    /// Forward pass that keeps what [`Model::backward`] needs. Dropout is
    /// active only when `dropout` supplies an RNG.
    pub fn forward_trace<R: Rng>(&self, input: &Array3<f64>, mut dropout: Option<&mut R>) -> Result<Trace, ModelError> {
        self.check_input(input)?;
        let shapes = self.arch.shapes()?;
        let n = self.arch.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut cache = Vec::with_capacity(n);
        let mut x = input.as_standard_layout().into_owned();
        for ((layer, params), &shape) in self.arch.layers.iter().zip(&self.params).zip(&shapes) {
            let (y, c) = match layer {
                LayerSpec::Conv { conv, .. } => {
                    let p = params.as_ref().expect("conv params");
                    let (y, cols) = ops::conv_forward(&x, conv, &p.weight, &p.bias, shape);
                    (y, LayerCache::Cols(cols))
                }
                LayerSpec::FullyConnected { .. } => {
                    let p = params.as_ref().expect("fc params");
                    (ops::fc_forward(&x, &p.weight, &p.bias), LayerCache::None)
                }
                LayerSpec::Relu => (ops::relu_forward(&x), LayerCache::None),
                LayerSpec::Lrn(l) => {
                    let (y, s) = ops::lrn_forward(&x, l);
                    (y, LayerCache::Scale(s))
                }
                LayerSpec::MaxPool(p) => {
                    let (y, a) = ops::maxpool_forward(&x, p, shape);
                    (y, LayerCache::Argmax(a))
                }
                LayerSpec::Dropout { rate } => match dropout.as_deref_mut() {
                    Some(rng) if *rate > 0.0 => {
                        let keep = 1.0 / (1.0 - rate);
                        let mask = x.mapv(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep });
                        (&x * &mask, LayerCache::Mask(mask))
                    }
                    _ => (x.clone(), LayerCache::None),
                },
            };
            inputs.push(x);
            cache.push(c);
            x = y;
        }
        Ok(Trace { inputs, cache, output: x })
    }

    /// Accumulates parameter gradients for `d_output` into `grads`.
    pub fn backward(&self, trace: &Trace, d_output: &[f64], grads: &mut Gradients) {
        let mut dy = Array3::from_shape_vec(trace.output.dim(), d_output.to_vec()).expect("gradient matches output");
        let first = self.arch.first_param_layer().unwrap_or(0);
        for i in (0..self.arch.layers.len()).rev() {
            let x = &trace.inputs[i];
            let need = i > first;
            let dx = match (&self.arch.layers[i], &trace.cache[i]) {
                (LayerSpec::Conv { conv, .. }, LayerCache::Cols(cols)) => {
                    let p = self.params[i].as_ref().expect("conv params");
                    let g = grads.layers[i].as_mut().expect("conv grads");
                    ops::conv_backward(&dy, cols, conv, &p.weight, x.dim(), &mut g.weight, &mut g.bias, need)
                }
                (LayerSpec::FullyConnected { .. }, _) => {
                    let p = self.params[i].as_ref().expect("fc params");
                    let g = grads.layers[i].as_mut().expect("fc grads");
                    ops::fc_backward(&dy, x, &p.weight, &mut g.weight, &mut g.bias, need)
                }
                (LayerSpec::Relu, _) => Some(ops::relu_backward(&dy, x)),
                (LayerSpec::Lrn(l), LayerCache::Scale(s)) => Some(ops::lrn_backward(&dy, x, s, l)),
                (LayerSpec::MaxPool(_), LayerCache::Argmax(a)) => Some(ops::maxpool_backward(&dy, a, x.dim())),
                (LayerSpec::Dropout { .. }, LayerCache::Mask(m)) => Some(&dy * m),
                (LayerSpec::Dropout { .. }, _) => Some(dy.clone()),
                _ => unreachable!("trace cache matches layer kind"),
            };
            match dx {
                Some(d) => dy = d,
                None => break,
            }
        }
    }

    /// Loss on one sample; its gradient is accumulated into `grads`.
    pub fn loss_and_grad<R: Rng>(
        &self,
        input: &Array3<f64>,
        target: &PoseVector,
        beta: f64,
        dropout: Option<&mut R>,
        grads: &mut Gradients,
    ) -> Result<(f64, PoseVector), ModelError> {
        let trace = self.forward_trace(input, dropout)?;
        let out: Vec<f64> = trace.output.iter().copied().collect();
        if out.len() != PoseVector::LEN {
            return Err(ModelError::NotPoseHead(out.len()));
        }
        let pred = PoseVector::from_slice(&out)?;
        let loss = posenet_loss(&pred, target, beta)?;
        let d = loss_gradient(&pred, target, beta)?;
        self.backward(&trace, &d, grads);
        Ok((loss, pred))
    }
}
