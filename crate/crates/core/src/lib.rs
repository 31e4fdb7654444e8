//! Camera relocalisation by convnet pose regression.
//!
//! A scene map is a network trained to regress `[x, q]` (position and
//! orientation quaternion) from an image-like input. The crate covers pose
//! algebra and metrics, dataset ingestion, input assembly, VGG-family
//! architectures, training, evaluation and reporting.

pub mod dataset;
pub mod eval;
pub mod experiment;
pub mod input;
pub mod model;
pub mod pose;
pub mod train;

pub use eval::{EvalError, EvalReport};
pub use train::{HyperParams, TrainError, TrainHistory};
pub use dataset::{DatasetBundle, DatasetError, FrameRecord, Role, Trajectory};
pub use input::{Modality, NetInput, PipelineConfig};
pub use model::{build_model, ArchSpec, Init, Model, ModelError};
pub use pose::{Pose, PoseVector, Quaternion};
