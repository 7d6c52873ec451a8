//! Precomputed importance sampling for parametric microfacet BSDFs.
//!
//! The pipeline tabulates a BSDF slice for fixed parameters and incident
//! direction, converts it into a smooth square-to-square sampling map by
//! solving a discrete optimal-transport assignment, compresses a corpus of
//! such maps with three small feed-forward networks (sample / eval / pdf),
//! and validates everything inside a minimal renderer with full multiple
//! importance sampling.
//!
//! Modules follow the data flow:
//!
//! * [`math`] — directions, equal-area square maps, deterministic RNG.
//! * [`bsdf`] — anisotropic GGX models, single-bounce analytic and
//!   multiple-bounce random-walk, with NDF/VNDF baseline samplers.
//! * [`slice`] — tabulated 2D slices and their discretization into point sets.
//! * [`transport`] — the assignment solver and baked importance maps.
//! * [`neural`] — MLP inference/training and the three sampling networks.
//! * [`render`] — scenes, integrators, and error metrics.
//! * [`io`] — binary file formats (slices, maps, weights) and image output.

pub mod bsdf;
pub mod io;
pub mod math;
pub mod neural;
pub mod render;
pub mod slice;
pub mod transport;

mod error;

pub use error::Error;
pub use math::{Direction, Domain, Rgb, RngStream, SquareCoord, Vec3};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
