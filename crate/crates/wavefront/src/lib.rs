//! Traveling wavefronts of
//!
//! ```text
//! n_t = n_xx − n b,    b_t = (D n b b_x)_x + n b
//! ```
//!
//! in the traveling coordinate ξ = x − ct with profile (η, β). The crate
//! shoots the heteroclinic connection from (η, β) = (0, 1) to (1, 0),
//! classifies its end (classical, sharp, or failed), brackets the threshold
//! speed, builds the left semi-wavefront by an independent fixed-point
//! iteration, verifies the integral and pointwise identities a front must
//! satisfy, and cross-checks against direct simulation of the PDE.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod pde;
pub mod phase;
pub mod profile;
pub mod quad;
pub mod scalar;
pub mod semiwave;
pub mod threshold;
pub mod verify;

pub use error::{Result, WaveError};
pub use model::{FrontClassification, FrontKind, Profile, ProfileSample, SpeedBracket, Tau};
pub use scalar::Scalar;

/// Double-precision parameters.
pub type Params = model::Params<f64>;
/// Double-precision tolerances.
pub type ToleranceSet = model::ToleranceSet<f64>;
