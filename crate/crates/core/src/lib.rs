//! One-bit target detection for colocated MIMO radar in colored Gaussian noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`], [`normal`], [`rng`], [`qmc`]: small dense linear algebra, the
//!   complex-to-real covariance embedding, the standard normal law, reproducible
//!   random streams and randomized low-discrepancy points.
//! - [`orthant`]: multivariate normal orthant probabilities and their
//!   derivatives with respect to the mean and to correlation coefficients.
//! - [`radar`]: steering vectors, LFM waveforms, noise covariance models and the
//!   one-bit quantized snapshot simulator.
//! - [`detector`]: sign-pattern enumeration, symmetry-reduced detector tables
//!   and the Rao score statistic.
//! - [`analysis`]: null and non-null distributions, covariance mismatch,
//!   prior-averaged false alarm, Imhof inversion and one-bit covariance
//!   estimation.

pub mod analysis;
pub mod detector;
pub mod error;
pub mod linalg;
pub mod normal;
pub mod orthant;
pub mod qmc;
pub mod radar;
pub mod rng;

pub use analysis::{AvgPfaMode, CovariancePrior, MismatchAnalysis, NonNullMoments, PerturbationPrior, PriorNullDraws};
pub use detector::{DetectorTables, NoiseTables, SignPattern};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, CompositeCovariance, RealMatrix, RealVector};
pub use num_complex::Complex64;
pub use orthant::{OrthantOptions, OrthantResult};
pub use radar::{QuantizedData, Scenario, SnapshotSampler};
pub use rng::RngStream;

