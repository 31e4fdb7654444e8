//! Neutral weight container: a TOML manifest next to a raw little-endian data file.
//!
//! ```toml
//! format = "relocnet-weights/1"
//! dtype = "f64"
//! data_file = "model.bin"
//! total_bytes = 1234
//! checksum = "sha256:…"
//! channel_means = [0.48, 0.45, 0.41]
//!
//! [[arrays]]
//! name = "conv1.weight"
//! shape = [64, 11, 11, 3]
//! offset = 0
//! len = 23232
//! ```
//!
//! `offset` is in bytes, `len` in elements. An optional `[arch]` table embeds
//! the resolved architecture so a model can be rebuilt from the container alone.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ArchSpec, LayerParams, Model, ModelError, Provenance};

pub const CONTAINER_FORMAT: &str = "relocnet-weights/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightContainer {
    pub arch: Option<ArchSpec>,
    pub channel_means: Option<Vec<f64>>,
    pub arrays: Vec<NamedArray>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    dtype: Dtype,
    data_file: PathBuf,
    total_bytes: usize,
    checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel_means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arch: Option<ArchSpec>,
    arrays: Vec<ArrayEntry>,
}

fn container_err(path: &Path, message: impl Into<String>) -> ModelError {
    ModelError::Container { path: path.to_path_buf(), message: message.into() }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl WeightContainer {
    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Content identifier: SHA-256 over the names, shapes and `f64` values.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.arrays {
            h.update(a.name.as_bytes());
            for s in &a.shape {
                h.update((*s as u64).to_le_bytes());
            }
            for v in &a.data {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Weights and bias of layer `name`, checked against the expected shapes.
    pub fn layer(&self, name: &str, weight_shape: &[usize], bias_len: usize) -> Result<LayerParams, ModelError> {
        let w = self.get(&format!("{name}.weight")).ok_or_else(|| ModelError::MissingLayer(name.to_string()))?;
        let b = self.get(&format!("{name}.bias")).ok_or_else(|| ModelError::MissingLayer(name.to_string()))?;
        if w.shape != weight_shape {
            return Err(ModelError::ParamShape { name: w.name.clone(), expected: weight_shape.to_vec(), got: w.shape.clone() });
        }
        if b.shape != [bias_len] {
            return Err(ModelError::ParamShape { name: b.name.clone(), expected: vec![bias_len], got: b.shape.clone() });
        }
        let cols = weight_shape[1..].iter().product();
        Ok(LayerParams {
            weight: Array2::from_shape_vec((weight_shape[0], cols), w.data.clone()).expect("checked shape"),
            bias: Array1::from(b.data.clone()),
        })
    }

    /// Array names that no layer of `arch` reads.
    pub fn unused_by(&self, arch: &ArchSpec) -> Vec<String> {
        let used: Vec<String> = arch
            .layers
            .iter()
            .filter_map(|l| l.param_name())
            .flat_map(|n| [format!("{n}.weight"), format!("{n}.bias")])
            .collect();
        self.arrays.iter().filter(|a| !used.contains(&a.name)).map(|a| a.name.clone()).collect()
    }

    /// Writes the manifest to `path` and the data to a sibling `.bin` file.
    pub fn save(&self, path: &Path, dtype: Dtype) -> Result<(), ModelError> {
        let data_file = PathBuf::from(path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "weights".into()))
            .with_extension("bin");
        let mut bytes = Vec::new();
        let mut arrays = Vec::with_capacity(self.arrays.len());
        for a in &self.arrays {
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(container_err(path, format!("array {} has {} values for shape {:?}", a.name, a.data.len(), a.shape)));
            }
            arrays.push(ArrayEntry { name: a.name.clone(), shape: a.shape.clone(), offset: bytes.len(), len: a.data.len() });
            match dtype {
                Dtype::F64 => a.data.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes())),
                Dtype::F32 => a.data.iter().for_each(|v| bytes.extend_from_slice(&(*v as f32).to_le_bytes())),
            }
        }
        let manifest = Manifest {
            format: CONTAINER_FORMAT.into(),
            dtype,
            data_file: data_file.clone(),
            total_bytes: bytes.len(),
            checksum: format!("sha256:{}", sha256_hex(&bytes)),
            channel_means: self.channel_means.clone(),
            arch: self.arch.clone(),
            arrays,
        };
        let text = toml::to_string(&manifest).map_err(|e| container_err(path, e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| ModelError::Io { path: dir.to_path_buf(), source: e })?;
        }
        let data_path = dir.join(&data_file);
        std::fs::write(&data_path, &bytes).map_err(|e| ModelError::Io { path: data_path, source: e })?;
        std::fs::write(path, text).map_err(|e| ModelError::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io { path: path.to_path_buf(), source: e })?;
        let m: Manifest = toml::from_str(&text).map_err(|e| container_err(path, e.to_string()))?;
        if m.format != CONTAINER_FORMAT {
            return Err(container_err(path, format!("unsupported format '{}'", m.format)));
        }
        let data_path = path.parent().unwrap_or(Path::new("")).join(&m.data_file);
        let bytes = std::fs::read(&data_path).map_err(|e| ModelError::Io { path: data_path.clone(), source: e })?;
        if bytes.len() != m.total_bytes {
            return Err(ModelError::Checksum {
                path: data_path,
                message: format!("data has {} bytes, manifest declares {}", bytes.len(), m.total_bytes),
            });
        }
        let digest = format!("sha256:{}", sha256_hex(&bytes));
        if digest != m.checksum {
            return Err(ModelError::Checksum { path: data_path, message: format!("expected {}, got {digest}", m.checksum) });
        }
        let size = m.dtype.size();
        let mut arrays = Vec::with_capacity(m.arrays.len());
        for e in m.arrays {
            let end = e.offset + e.len * size;
            if end > bytes.len() || e.shape.iter().product::<usize>() != e.len {
                return Err(container_err(path, format!("array {} is out of bounds or misshaped", e.name)));
            }
            let chunk = &bytes[e.offset..end];
            let data = match m.dtype {
                Dtype::F64 => chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
                Dtype::F32 => chunk.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect(),
            };
            arrays.push(NamedArray { name: e.name, shape: e.shape, data });
        }
        Ok(WeightContainer { arch: m.arch, channel_means: m.channel_means, arrays })
    }
}

/// Packs a model's parameters and architecture into a container.
pub fn export_weights(model: &Model, channel_means: Option<Vec<f64>>) -> WeightContainer {
    let mut arrays = Vec::new();
    for (spec, p) in model.arch.layers.iter().zip(&model.params) {
        let (Some(name), Some(p)) = (spec.param_name(), p) else { continue };
        arrays.push(NamedArray {
            name: format!("{name}.weight"),
            shape: spec.weight_shape().expect("parameterized layer"),
            data: p.weight.iter().copied().collect(),
        });
        arrays.push(NamedArray { name: format!("{name}.bias"), shape: vec![p.bias.len()], data: p.bias.to_vec() });
    }
    WeightContainer { arch: Some(model.arch.clone()), channel_means, arrays }
}

/// Rebuilds the model stored in a container. Arrays no layer reads are
/// reported in a warning and otherwise ignored.
pub fn import_weights(container: &WeightContainer) -> Result<Model, ModelError> {
    let arch = container
        .arch
        .clone()
        .ok_or_else(|| container_err(Path::new("<memory>"), "container carries no architecture"))?;
    arch.validate()?;
    let mut params = Vec::with_capacity(arch.layers.len());
    for spec in &arch.layers {
        params.push(match (spec.param_name(), spec.weight_shape(), spec.bias_len()) {
            (Some(name), Some(shape), Some(b)) => Some(container.layer(name, &shape, b)?),
            _ => None,
        });
    }
    let extras = container.unused_by(&arch);
    if !extras.is_empty() {
        log::warn!("weight container has unused arrays: {}", extras.join(", "));
    }
    Ok(Model { arch, params, provenance: Provenance::Imported { container_id: container.id() } })
}
