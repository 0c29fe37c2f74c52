//! Gaussian beams, reflection and three-wave interaction for nonlinear
//! isotropic elastodynamics, with the algebra that recovers the linear and
//! third-order moduli from interaction amplitudes.

pub mod beams;
pub mod domain;
pub mod error;
pub mod expr;
pub mod field;
pub mod geodesics;
pub mod interaction;
pub mod jet;
pub mod medium;
pub mod ode;
pub mod recovery;
pub mod reflection;
pub mod riccati;

pub use domain::ConvexDomain;
pub use error::{Error, Result};
pub use medium::{IsotropicMedium, PointModuli, WaveMode};
