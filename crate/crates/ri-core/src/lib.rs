//! Decorated-tree algebra for regularity-integrability structures, with a
//! periodic-grid backend for building and checking models.

pub mod analytic;
pub mod error;
pub mod grading;
pub mod hopf;
pub mod lincomb;
pub mod multiindex;
pub mod rational;
pub mod renorm;
pub mod sector;
pub mod tree;

pub use error::{Error, Result};
pub use grading::{DegreeForm, DegreeMap, Exponent, Params, RIPair};
pub use hopf::{Character, Hopf};
pub use lincomb::{Lin, LinComb, Scalar, TensorSum};
pub use multiindex::MultiIndex;
pub use rational::Q;
pub use tree::{Edge, Label, RawTree, Tree, TreeStats};
