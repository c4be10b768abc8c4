//! Tools for two-player Bell functionals on the Boolean cube: the noise-kernel
//! game built on Hadamard cosets, classical and maximally entangled values,
//! and question reduction through the vector-valued empirical method.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The root
//! re-exports `f64` aliases for the common types.

// `!(x > 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boolean_cube;
pub mod empirical;
mod error;
pub mod games;
pub mod numkit;
pub mod pipeline;
pub mod rng;
mod scalar;
pub mod values;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CubeFunction = boolean_cube::CubeFunction<f64>;
pub type NoiseParams = boolean_cube::NoiseParams<f64>;
pub type DenseMatrix = numkit::DenseMatrix<f64>;
pub type BellTensor = games::BellTensor<f64>;
pub type GameTensor = games::GameTensor<f64>;
pub type KvGame = games::KvGame<f64>;
pub type OhMap = values::OhMap<f64>;
pub type ProjectiveStrategyME = values::ProjectiveStrategyME<f64>;
pub type SubspaceL1X = empirical::SubspaceL1X<f64>;
pub type SamplingMap = empirical::SamplingMap<f64>;
pub type Density = empirical::Density<f64>;
pub type DistortionReport = empirical::DistortionReport<f64>;

pub type CubeFunctionF32 = boolean_cube::CubeFunction<f32>;
pub type DenseMatrixF32 = numkit::DenseMatrix<f32>;
pub type BellTensorF32 = games::BellTensor<f32>;
pub type OhMapF32 = values::OhMap<f32>;
