//! Linear diffusion as a correlation machine.
//!
//! This crate implements a fully linear generative diffusion pipeline:
//! training data is drawn from a low-rank ("spiked") covariance model,
//! a PCA projection denoiser is fitted at every noise level of a forward
//! corruption schedule, and samples are generated by chaining those
//! projections from the noisiest level down to the clean one, with or
//! without noise injected between steps.
//!
//! The crate also ships the diagnostics used to study that chain: the
//! sine of the angle between noisy-level principal components and their
//! clean counterparts, consecutive-basis correlation matrices and their
//! running products, spectral presence coefficients of generated samples,
//! and a power-iteration baseline the chain converges towards.
//!
//! All numerics are generic over the scalar type via [`Scalar`]; concrete
//! `f64` aliases are exported at the crate root and are what the CLI and
//! the file formats use.

pub mod analysis;
pub mod diffusion;
pub mod eigen;
pub mod error;
pub mod io;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod spiked;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use analysis::{AngleProfile, BasisCorrelation, ComponentMatching, SpectrumReport};
pub use diffusion::{DenoiserChain, NoiseCoupling, PcaDenoiser, TrainOptions};
pub use eigen::EigenDecomposition;
pub use matrix::Matrix;
pub use schedule::{NoiseSchedule, ScheduleKind};
pub use spiked::{Dataset, DatasetSource, LatentDist, SpikedModelSpec};

/// Double-precision matrix, the storage type of the LDMX file format.
pub type Matrix64 = Matrix<f64>;
/// Single-precision matrix.
pub type Matrix32 = Matrix<f32>;
pub type EigenDecomposition64 = EigenDecomposition<f64>;
pub type NoiseSchedule64 = NoiseSchedule<f64>;
pub type SpikedModelSpec64 = SpikedModelSpec<f64>;
pub type Dataset64 = Dataset<f64>;
pub type DenoiserChain64 = DenoiserChain<f64>;
