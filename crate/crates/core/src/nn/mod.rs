//! Minimal fp64 tensor/backprop engine and the four reference 1D
//! architectures (FC, CNN, FullCNN, MHCNN) with Adam training.
//!
//! Everything is scalar fp64: gradient-check rigor outranks speed at these
//! sizes. Networks are deterministic functions of (spec, seed); training is
//! deterministic given a [`TrainConfig`].

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

pub use model::{build_model, ArchName, LayerSpec, ModelSpec, Network, Shape, ShapeTrace};
pub use tensor::Tensor;
pub use train::{batch_tensor, train, Adam, EpochStats, TrainConfig, TrainHistory};
