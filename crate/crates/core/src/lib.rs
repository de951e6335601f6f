//! Numerical laboratory for Kac's N-particle collision model.

pub mod conditioned;
pub mod density;
pub mod error;
pub mod inequalities;
pub mod kac_process;
pub mod limit;
pub mod normalization;
pub mod quadrature;
pub mod sphere;

pub use density::{gaussian, gaussian_on, mixture, mixture_on, GridDensity1D, GridSpec, MixtureSpec, Profile};
pub use error::{KacError, Result};
pub use sphere::{apply_rotation, uniform_sphere_sample, RotationSpec, VelocityEnsemble};
