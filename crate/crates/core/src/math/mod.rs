//! Shared math: vectors, shading frames, equal-area square maps, the
//! deterministic RNG contract, and small statistics helpers.

mod rng;
mod stats;
mod vec3;
mod warp;

pub use rng::RngStream;
pub use stats::{chi_square_test, mean_and_variance, regularized_gamma_q, ChiSquareResult};
pub use vec3::{Direction, Frame, Rgb, Vec3};
pub use warp::{
    direction_to_square, pdf_square_to_solid_angle, square_to_direction, Domain, SquareCoord,
};
