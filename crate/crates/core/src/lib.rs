//! Numerical laboratory for SRB measures of chaotic attractors.
//!
//! The crate builds physical measures by pushing Lebesgue measure (or leaf
//! volume on a local unstable manifold) forward, and checks the hyperbolicity,
//! density and singularity conditions under which such measures exist.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod hyperbolicity;
pub mod linalg;
pub mod measures;
pub mod singular;
pub mod systems;

pub use dynamics::{
    distance_to_singularity, evaluate_jacobian, evaluate_map, iterate_orbit, HaltReason, Orbit,
    Region, SystemHandle,
};
pub use error::{Result, SrbError};
pub use exec::Execution;
pub use linalg::{Point, Subspace};

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
