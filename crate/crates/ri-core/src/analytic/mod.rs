//! Periodic-grid numerics: semigroup, kernels, noises, models and estimators.

pub mod config;
pub mod estimate;
pub mod grid;
pub mod model;
pub mod noise;
pub mod operator;

pub use grid::{Field, Grid};
pub use model::{build_model, ModelContext, ModelData};
pub use noise::{mollify, sample_noise, NoiseSpec};
pub use operator::{Operator, OperatorSpec, Quadrature};
