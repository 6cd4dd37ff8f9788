//! Isotropic and elementwise activations, Jacobians and the radial normaliser.

mod block;
mod normalizer;
mod profile;

pub use block::{
    aniso_apply, aniso_jacobian, equivariance_check, equivariance_deviation, iso_apply,
    iso_jacobian, IsoBlock, DEFAULT_INTRINSIC_LENGTH,
};
pub use normalizer::{mean_radius, radial_normalize, Normalized, RadialNormalizer};
pub use profile::{RadialProfile, SERIES_SWITCH};
