//! Differentially private training that generalizes distributionally.
//!
//! The crate bundles the pieces needed to train and audit small models under
//! differential privacy with group-aware importance sampling:
//!
//! - [`numerics`]: dense matrices, seeded random streams, Φ, finite differences
//! - [`data`]: group-structured datasets, CSV ingestion, synthetic mixtures
//! - [`models`]: logistic/softmax regression and a one-hidden-layer tanh MLP
//!   with exact per-example gradients
//! - [`sampling`]: uniform and non-uniform Poisson subsampling, importance
//!   resampling and weights
//! - [`privacy`]: DP → TV-stability bounds, subsampling amplification and a
//!   Gaussian-DP accountant
//! - [`trainers`]: SGD, IS-SGD, IW-SGD, DP-SGD, DP-IS-SGD and PGD adversarial
//!   training
//! - [`metrics`]: group reports, disparity, worst-group gaps, calibration gap
//! - [`mechanisms`]: exact finite-distribution calculus and toy learners used to
//!   check the generalization bounds numerically
//!
//! Array-valued code is generic over [`numerics::Scalar`]; the aliases below fix
//! the scalar to `f64`, which is what the CLI uses.

pub mod data;
pub mod error;
pub mod mechanisms;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod privacy;
pub mod sampling;
pub mod trainers;

pub use error::{Error, Result};

pub type Vec64 = Vec<f64>;
pub type Mat64 = numerics::Matrix<f64>;
pub type Dataset64 = data::Dataset<f64>;
pub type ModelParams64 = models::ModelParams<f64>;
pub type PerSampleGrads64 = models::PerSampleGrads<f64>;
pub type DiscreteMechanism64 = mechanisms::DiscreteMechanism<f64>;
