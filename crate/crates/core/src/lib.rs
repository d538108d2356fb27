//! Rough-path numerics: truncated tensor groups, step-N signatures,
//! Carnot–Carathéodory norm bounds, step-N Euler and geodesic schemes, and
//! the Monte Carlo experiments built on top of them.

pub mod error;
pub mod euler_scheme;
pub mod geodesic;
pub mod path_signature;
pub mod rde_lab;
pub mod regression;
pub mod stochastic_driver;
pub mod tensor_group;

pub use error::{Error, Result};
pub use path_signature::{path_signature, segment_signature, PiecewiseLinearPath, RoughPathGrid};
pub use tensor_group::{AlgebraShape, GroupElement, LieSeries, TensorSeries};
