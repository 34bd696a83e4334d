//! Numerical tools for averaging operators along non-degenerate curves:
//! curve geometry, oscillatory multipliers, frequency decompositions,
//! plate geometry and grid experiments.

pub mod curve;
pub mod cone;
pub mod cutoff;
pub mod error;
pub mod experiment;
pub mod frenet;
pub mod grid;
pub mod plates;
pub mod sharpness;
pub mod oscillatory;
pub mod quad;
pub mod stats;
pub mod symbols;

pub use curve::{moment_curve, Curve, CurveKind, CurveSpec};
pub use cutoff::SmoothCutoff;
pub use error::{Error, Result};
