//! Simulation and validation toolkit for planar aggregation clusters encoded
//! as compositions of exterior-disk conformal maps: ALE(alpha, eta), with
//! HL(alpha) and HL(0) as special cases.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below are the instantiations used by the command-line tools and
//! the statistical test suite.

pub mod diagnostics;
pub mod error;
mod fourier;
pub mod growth;
mod logderiv;
pub mod ou;
pub mod particle;
pub mod scalar;
pub mod spectral;

pub use error::{AleError, Result};
pub use scalar::Scalar;

pub use num_complex::Complex;

pub type Complex64 = Complex<f64>;

pub type ParticleMap64 = particle::ParticleMap<f64>;
pub type ParticleMap32 = particle::ParticleMap<f32>;

pub type ModelParams64 = growth::ModelParams<f64>;
pub type ClusterState64 = growth::ClusterState<f64>;
