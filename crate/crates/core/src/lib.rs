//! Numerical machinery for the sigma_2-metric on conformal factors of the
//! round S^4 with rotational symmetry: symmetric-function matrix algebra,
//! Schouten eigenvalue fields, the quartic-curvature energy, the regularized
//! geodesic boundary-value problem, and the smoothing flow.

pub mod band;
pub mod conformal;
pub mod geodesic;
pub mod gwflow;
pub mod pipeline;
pub mod rng;
pub mod spacetime;
pub mod spheremodel;
pub mod symcone;
pub mod verify;

pub use spacetime::SpacetimeField;
pub use spheremodel::{RadialField, RadialGrid};
