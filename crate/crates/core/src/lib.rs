//! Generalized CP (GCP) tensor decomposition with stochastic gradients.
//!
//! The crate provides sparse and dense tensor containers, a catalog of
//! elementwise losses, MTTKRP kernels, the uniform / stratified /
//! semi-stratified gradient samplers, an epoch-based Adam driver with
//! rollback, synthetic problem generators, a factor-matching score and text
//! and binary file formats.

pub mod error;
pub mod io;
pub mod loss;
pub mod mttkrp;
pub mod optimizer;
pub mod rng;
pub mod sampling;
pub mod score;
pub mod synthetic;
pub mod tensor;

pub use error::{GcpError, Result};
pub use loss::{LossFunction, LossKind};
pub use mttkrp::{GradientSet, KernelOptions, SampledY};
pub use rng::{GcpRng, IndexSource, ScriptedIndices};
pub use tensor::{DataTensor, DenseTensor, KruskalModel, Matrix, MultiIndex, Shape, SparseTensor};
pub use sampling::{EstimatorKind, EstimatorSamples, GradientSampler, SamplerKind, SamplerName};
pub use optimizer::{fit_gcp_adam, fit_gcp_adam_with, FitConfig, FitHooks, FitResult, FitTrace};
pub use score::{cosine_similarity_score, RECOVERY_THRESHOLD};
pub use synthetic::{gen_binary_problem, gen_gamma_problem, BinaryProblemSpec};
