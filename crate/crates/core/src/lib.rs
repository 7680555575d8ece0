//! Bayesian dephasing-noise spectroscopy for a single qubit.
//!
//! The crate simulates CPMG noise-spectroscopy experiments and estimates the
//! noise power spectrum from single-shot data with three estimators: a naive
//! delta-function inversion, Gaussian-process regression on linearized data,
//! and sequential Monte Carlo over a hyperparameterized `A/(ω^α + c)` model.
//! The [`bench`] module runs randomized-truth trials comparing them.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

// `!(x > 0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod filters;
pub mod forward;
pub mod gp;
pub mod grid;
pub mod linalg;
pub mod naive;
pub mod scalar;
pub mod smc;
pub mod spectra;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FrequencyGrid = grid::FrequencyGrid<f64>;
pub type FilterFunction = filters::FilterFunction<f64>;
pub type FilterBank = filters::FilterBank<f64>;
pub type PulseSequence = filters::PulseSequence<f64>;
pub type SpectrumVector = spectra::SpectrumVector<f64>;
pub type OneOnFParams = spectra::OneOnFParams<f64>;
pub type ChiVector = forward::ChiVector<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type NaiveEstimate = naive::NaiveEstimate<f64>;
pub type GaussianProcessState = gp::GaussianProcessState<f64>;
pub type DesignMatrix = gp::DesignMatrix<f64>;
pub type ParticleEnsemble = smc::ParticleEnsemble<f64>;
