//! Declarative layer lists and the named VGG-family presets.
//!
//! Preset tables live in `archs/*.toml` as templates without input sizes;
//! [`ArchTemplate::resolve`] chains them for a concrete input depth and side.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Output dimension of the pose head.
pub const POSE_HEAD: usize = 7;

/// Padding as `[top, bottom, left, right]`.
pub type Pad = [usize; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PadSpec {
    Uniform(usize),
    Explicit(Pad),
}

impl Default for PadSpec {
    fn default() -> Self {
        PadSpec::Uniform(0)
    }
}

impl PadSpec {
    pub fn expand(self) -> Pad {
        match self {
            PadSpec::Uniform(p) => [p; 4],
            PadSpec::Explicit(p) => p,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerTemplate {
    Conv {
        name: String,
        out: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: PadSpec,
    },
    Relu,
    Lrn { size: usize, k: f64, alpha: f64, beta: f64 },
    #[serde(rename = "maxpool")]
    MaxPool {
        size: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: PadSpec,
    },
    #[serde(rename = "fc")]
    FullyConnected { name: String, out: usize },
    Dropout { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchTemplate {
    pub name: String,
    pub layers: Vec<LayerTemplate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_depth: usize,
    pub out_depth: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: Pad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
    pub pad: Pad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrnSpec {
    pub size: usize,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// A resolved layer with its input dimensions fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv {
        name: String,
        #[serde(flatten)]
        conv: ConvSpec,
    },
    Relu,
    Lrn(LrnSpec),
    #[serde(rename = "maxpool")]
    MaxPool(PoolSpec),
    #[serde(rename = "fc")]
    FullyConnected { name: String, in_dim: usize, out_dim: usize },
    Dropout { rate: f64 },
}

impl LayerSpec {
    pub fn param_name(&self) -> Option<&str> {
        match self {
            LayerSpec::Conv { name, .. } | LayerSpec::FullyConnected { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Weight shape: `[out, k, k, in]` for conv, `[out, in]` for fc.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match self {
            LayerSpec::Conv { conv, .. } => Some(vec![conv.out_depth, conv.kernel, conv.kernel, conv.in_depth]),
            LayerSpec::FullyConnected { in_dim, out_dim, .. } => Some(vec![*out_dim, *in_dim]),
            _ => None,
        }
    }

    pub fn bias_len(&self) -> Option<usize> {
        match self {
            LayerSpec::Conv { conv, .. } => Some(conv.out_depth),
            LayerSpec::FullyConnected { out_dim, .. } => Some(*out_dim),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        match (self.weight_shape(), self.bias_len()) {
            (Some(shape), Some(b)) => shape.iter().product::<usize>() + b,
            _ => 0,
        }
    }

    /// Output `(h, w, c)` for an input of `(h, w, c)`.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize), ModelError> {
        let (h, w, c) = input;
        match self {
            LayerSpec::Conv { name, conv } => {
                if c != conv.in_depth {
                    return Err(ModelError::InvalidArch(format!(
                        "{name}: input depth {c} but layer expects {}",
                        conv.in_depth
                    )));
                }
                let (oh, ow) = window_output(h, w, conv.kernel, conv.stride, conv.pad)
                    .ok_or_else(|| ModelError::InvalidArch(format!("{name}: kernel larger than padded input {h}x{w}")))?;
                Ok((oh, ow, conv.out_depth))
            }
            LayerSpec::MaxPool(p) => {
                let (oh, ow) = window_output(h, w, p.size, p.stride, p.pad)
                    .ok_or_else(|| ModelError::InvalidArch(format!("maxpool window larger than input {h}x{w}")))?;
                Ok((oh, ow, c))
            }
            LayerSpec::FullyConnected { name, in_dim, out_dim } => {
                if h * w * c != *in_dim {
                    return Err(ModelError::InvalidArch(format!(
                        "{name}: input has {} values but layer expects {in_dim}",
                        h * w * c
                    )));
                }
                Ok((1, 1, *out_dim))
            }
            LayerSpec::Relu | LayerSpec::Lrn(_) | LayerSpec::Dropout { .. } => Ok(input),
        }
    }
}

pub(crate) fn window_output(h: usize, w: usize, k: usize, stride: usize, pad: Pad) -> Option<(usize, usize)> {
    let ph = h + pad[0] + pad[1];
    let pw = w + pad[2] + pad[3];
    if k == 0 || stride == 0 || ph < k || pw < k {
        return None;
    }
    Some(((ph - k) / stride + 1, (pw - k) / stride + 1))
}

/// A resolved network: chained layers for a fixed `side × side × channels` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    /// `(h, w, c)` of the network input.
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub head_dim: usize,
}

impl ArchSpec {
    pub fn in_channels(&self) -> usize {
        self.input.2
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Shape of every layer's output, in order.
    pub fn shapes(&self) -> Result<Vec<(usize, usize, usize)>, ModelError> {
        let mut shape = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            shape = l.output_shape(shape)?;
            out.push(shape);
        }
        Ok(out)
    }

    /// Output shape for an input without evaluating the network.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize), ModelError> {
        if input != self.input {
            return Err(ModelError::ShapeMismatch { expected: self.input, got: input });
        }
        self.shapes().map(|s| s.last().copied().unwrap_or(input))
    }

    /// Checks the chaining invariants and the head dimension.
    pub fn validate(&self) -> Result<(), ModelError> {
        let shapes = self.shapes()?;
        let last = shapes.last().copied().unwrap_or(self.input);
        if last != (1, 1, self.head_dim) {
            return Err(ModelError::InvalidArch(format!(
                "network output {:?} does not match head dimension {}",
                last, self.head_dim
            )));
        }
        let first = self.layers.iter().find_map(|l| match l {
            LayerSpec::Conv { conv, .. } => Some(conv.in_depth),
            _ => None,
        });
        if let Some(d) = first {
            if d != self.input.2 {
                return Err(ModelError::InvalidArch("first conv depth differs from input channels".into()));
            }
        }
        Ok(())
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count()
    }

    pub fn fc_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::FullyConnected { .. })).count()
    }

    /// Index of the first parameterized layer (the input-depth-dependent one).
    pub fn first_param_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.param_name().is_some())
    }

    /// Index of the last parameterized layer (the head).
    pub fn last_param_layer(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| l.param_name().is_some())
    }

    pub fn first_conv(&self) -> Option<&ConvSpec> {
        self.layers.iter().find_map(|l| match l {
            LayerSpec::Conv { conv, .. } => Some(conv),
            _ => None,
        })
    }
}

impl ArchTemplate {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::InvalidArch(e.to_string()))
    }

    /// Chains the template for a `side × side × in_channels` input; the last fc
    /// layer's output is replaced by `head_dim`.
    pub fn resolve(&self, in_channels: usize, side: usize, head_dim: usize) -> Result<ArchSpec, ModelError> {
        if in_channels == 0 || side == 0 || head_dim == 0 {
            return Err(ModelError::InvalidArch("input channels, side and head must be positive".into()));
        }
        let last_fc = self.layers.iter().rposition(|l| matches!(l, LayerTemplate::FullyConnected { .. }));
        let mut shape = (side, side, in_channels);
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, t) in self.layers.iter().enumerate() {
            let spec = match t {
                LayerTemplate::Conv { name, out, kernel, stride, pad } => LayerSpec::Conv {
                    name: name.clone(),
                    conv: ConvSpec { in_depth: shape.2, out_depth: *out, kernel: *kernel, stride: *stride, pad: pad.expand() },
                },
                LayerTemplate::Relu => LayerSpec::Relu,
                LayerTemplate::Lrn { size, k, alpha, beta } => {
                    LayerSpec::Lrn(LrnSpec { size: *size, k: *k, alpha: *alpha, beta: *beta })
                }
                LayerTemplate::MaxPool { size, stride, pad } => {
                    LayerSpec::MaxPool(PoolSpec { size: *size, stride: *stride, pad: pad.expand() })
                }
                LayerTemplate::FullyConnected { name, out } => LayerSpec::FullyConnected {
                    name: name.clone(),
                    in_dim: shape.0 * shape.1 * shape.2,
                    out_dim: if Some(i) == last_fc { head_dim } else { *out },
                },
                LayerTemplate::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            };
            shape = spec.output_shape(shape)?;
            layers.push(spec);
        }
        let arch = ArchSpec { name: self.name.clone(), input: (side, side, in_channels), layers, head_dim };
        arch.validate()?;
        Ok(arch)
    }
}

/// Named architectures shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "VGG-F")]
    VggF,
    #[serde(rename = "VGG-M")]
    VggM,
    #[serde(rename = "VGG-S")]
    VggS,
    #[serde(rename = "VGG-16")]
    Vgg16,
    #[serde(rename = "VGG-19")]
    Vgg19,
    /// 3 conv + 2 fc network for 32×32 desk-scale experiments.
    #[serde(rename = "reduced")]
    Reduced,
}

impl Preset {
    pub const VGG: [Preset; 5] = [Preset::VggF, Preset::VggM, Preset::VggS, Preset::Vgg16, Preset::Vgg19];

    pub fn name(self) -> &'static str {
        match self {
            Preset::VggF => "VGG-F",
            Preset::VggM => "VGG-M",
            Preset::VggS => "VGG-S",
            Preset::Vgg16 => "VGG-16",
            Preset::Vgg19 => "VGG-19",
            Preset::Reduced => "reduced",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ModelError> {
        let norm = name.to_ascii_uppercase().replace('_', "-");
        match norm.as_str() {
            "VGG-F" | "VGGF" | "CNN-F" => Ok(Preset::VggF),
            "VGG-M" | "VGGM" | "CNN-M" => Ok(Preset::VggM),
            "VGG-S" | "VGGS" | "CNN-S" => Ok(Preset::VggS),
            "VGG-16" | "VGG16" => Ok(Preset::Vgg16),
            "VGG-19" | "VGG19" => Ok(Preset::Vgg19),
            "REDUCED" => Ok(Preset::Reduced),
            _ => Err(ModelError::UnknownPreset(name.to_string())),
        }
    }

    fn table(self) -> &'static str {
        match self {
            Preset::VggF => include_str!("../../archs/vgg-f.toml"),
            Preset::VggM => include_str!("../../archs/vgg-m.toml"),
            Preset::VggS => include_str!("../../archs/vgg-s.toml"),
            Preset::Vgg16 => include_str!("../../archs/vgg-16.toml"),
            Preset::Vgg19 => include_str!("../../archs/vgg-19.toml"),
            Preset::Reduced => include_str!("../../archs/reduced.toml"),
        }
    }

    pub fn template(self) -> ArchTemplate {
        ArchTemplate::from_toml(self.table()).expect("shipped architecture tables parse")
    }

    /// Native input side: 224 for the VGG family, 32 for the reduced network.
    pub fn default_side(self) -> usize {
        match self {
            Preset::Reduced => 32,
            _ => crate::input::DEFAULT_SIDE,
        }
    }
}

/// A preset with the pose head at its native input side.
pub fn preset(name: &str, in_channels: usize) -> Result<ArchSpec, ModelError> {
    let p = Preset::from_name(name)?;
    p.template().resolve(in_channels, p.default_side(), POSE_HEAD)
}

/// A preset with an explicit input side and head size (1000 reproduces the classification head).
pub fn preset_with(name: &str, in_channels: usize, side: usize, head_dim: usize) -> Result<ArchSpec, ModelError> {
    Preset::from_name(name)?.template().resolve(in_channels, side, head_dim)
}
