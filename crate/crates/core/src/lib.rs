//! Differentially private principal component analysis via deflation.

pub mod baselines;
pub mod datagen;
pub mod dp_pca;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod oja;
pub mod privacy;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
