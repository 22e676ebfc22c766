//! Expected winner-take-all rewards for two competing linear predictors of a
//! shared Gaussian target, and the maxmin search over model-symmetric
//! coefficient strategies.
//!
//! The target is `y = x_1 + ... + x_n` with iid standard normal features.
//! Player A predicts from the features in `S1`, player B from those in `S2`.
//! Whoever has the strictly smaller absolute error collects `|y|`; ties go to B.
//!
//! Everything here is pure computation over `alloc`. File formats, the CLI and
//! thread-level parallelism live in the `rivalfit` crate.

#![no_std]

extern crate alloc;

pub mod cubature;
pub mod discrete;
mod error;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod reward;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    build_covariance_general, build_covariance_symmetric, consistency_check, FeatureRegime,
    FeatureSets, GameCovariance, GeneralStrategyPair, SymmetricStrategyPair,
};
pub use reward::{Method, RewardEstimate};

/// `E|Z|` for a standard normal `Z`, i.e. `sqrt(2/pi)`.
pub const MEAN_ABS_NORMAL: f64 = 0.797_884_560_802_865_4;
