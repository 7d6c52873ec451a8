//! Equal-area mappings between the unit square and the (hemi)sphere.
//!
//! The square-to-hemisphere map is the concentric square-to-disk map followed
//! by the Lambert equal-area lift `z = 1 - r^2`. Both stages preserve area up
//! to a constant, so the full map has the constant Jacobian `dω/dA = 2π`
//! (hemisphere) or `4π` (sphere) and pdf conversion between square-area and
//! solid-angle measure is a single multiply.
//!
//! The sphere domain stacks two hemisphere half-squares: `t < 0.5` is the
//! reflection side (z ≥ 0), `t ≥ 0.5` the refraction side (z < 0). The seam
//! set is the square boundary (the equator) plus the `t = 0.5` line.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::vec3::{Direction, Vec3};
use crate::Error;

/// Point in the unit square `[0,1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SquareCoord {
    pub s: f64,
    pub t: f64,
}

impl SquareCoord {
    #[inline]
    pub fn new(s: f64, t: f64) -> Self {
        SquareCoord { s, t }
    }

    #[inline]
    pub fn clamped(self) -> Self {
        SquareCoord::new(self.s.clamp(0.0, 1.0), self.t.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn dist(self, other: SquareCoord) -> f64 {
        let ds = self.s - other.s;
        let dt = self.t - other.t;
        (ds * ds + dt * dt).sqrt()
    }
}

/// Direction domain of a slice or map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Reflection side only, z ≥ 0.
    Hemisphere,
    /// Both sides; used by dielectrics.
    Sphere,
}

impl Domain {
    /// Constant `dω / dA_square` of the equal-area map.
    #[inline]
    pub fn jacobian(self) -> f64 {
        match self {
            Domain::Hemisphere => 2.0 * PI,
            Domain::Sphere => 4.0 * PI,
        }
    }

    pub fn contains(self, d: Direction) -> bool {
        self.contains_z(d.z())
    }

    #[inline]
    pub fn contains_z(self, z: f64) -> bool {
        match self {
            Domain::Hemisphere => z >= 0.0,
            Domain::Sphere => true,
        }
    }
}

/// Concentric square-to-disk map. The returned radius is signed; a negative
/// radius encodes the half-turn so the map stays continuous across quadrants.
#[inline]
fn square_to_disk(c: SquareCoord) -> (f64, f64) {
    let a = 2.0 * c.s - 1.0;
    let b = 2.0 * c.t - 1.0;
    if a == 0.0 && b == 0.0 {
        return (0.0, 0.0);
    }
    let (r, phi) = if a * a > b * b {
        (a, FRAC_PI_4 * (b / a))
    } else {
        (b, FRAC_PI_2 - FRAC_PI_4 * (a / b))
    };
    (r * phi.cos(), r * phi.sin())
}

/// Inverse of [`square_to_disk`].
#[inline]
fn disk_to_square(dx: f64, dy: f64) -> SquareCoord {
    let rho = (dx * dx + dy * dy).sqrt();
    if rho == 0.0 {
        return SquareCoord::new(0.5, 0.5);
    }
    // Wrap atan2 into [-π/4, 7π/4) so the four wedge cases are contiguous.
    let mut theta = dy.atan2(dx);
    if theta < -FRAC_PI_4 {
        theta += 2.0 * PI;
    }
    let (a, b) = if theta <= FRAC_PI_4 {
        (rho, rho * theta / FRAC_PI_4)
    } else if theta <= 3.0 * FRAC_PI_4 {
        (rho * (FRAC_PI_2 - theta) / FRAC_PI_4, rho)
    } else if theta <= 5.0 * FRAC_PI_4 {
        (-rho, -rho * (theta - PI) / FRAC_PI_4)
    } else {
        (-rho * (FRAC_PI_2 - (theta - PI)) / FRAC_PI_4, -rho)
    };
    SquareCoord::new(0.5 * (a + 1.0), 0.5 * (b + 1.0)).clamped()
}

#[inline]
fn half_square_to_hemisphere(c: SquareCoord) -> Direction {
    let (dx, dy) = square_to_disk(c);
    let r2 = dx * dx + dy * dy;
    let z = 1.0 - r2;
    let k = (2.0 - r2).max(0.0).sqrt();
    Direction::from_unit_unchecked(Vec3::new(dx * k, dy * k, z))
}

#[inline]
fn hemisphere_to_half_square(d: Direction) -> SquareCoord {
    let z = d.z().clamp(0.0, 1.0);
    let k = (1.0 + z).sqrt();
    disk_to_square(d.x() / k, d.y() / k)
}

/// Area-preserving map from the unit square onto the chosen domain.
pub fn square_to_direction(c: SquareCoord, domain: Domain) -> Direction {
    let c = c.clamped();
    match domain {
        Domain::Hemisphere => half_square_to_hemisphere(c),
        Domain::Sphere => {
            if c.t < 0.5 {
                half_square_to_hemisphere(SquareCoord::new(c.s, 2.0 * c.t))
            } else {
                half_square_to_hemisphere(SquareCoord::new(c.s, 2.0 * c.t - 1.0)).flip_z()
            }
        }
    }
}

/// Exact inverse of [`square_to_direction`].
pub fn direction_to_square(d: Direction, domain: Domain) -> crate::Result<SquareCoord> {
    let norm = d.vec().length();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotUnit { norm });
    }
    match domain {
        Domain::Hemisphere => {
            if d.z() < -1e-9 {
                return Err(Error::WrongHemisphere { z: d.z() });
            }
            Ok(hemisphere_to_half_square(d))
        }
        Domain::Sphere => {
            if d.z() >= 0.0 {
                let c = hemisphere_to_half_square(d);
                Ok(SquareCoord::new(c.s, 0.5 * c.t))
            } else {
                let c = hemisphere_to_half_square(d.flip_z());
                Ok(SquareCoord::new(c.s, 0.5 * (c.t + 1.0)))
            }
        }
    }
}

/// Converts a density per unit square area into a density per steradian.
///
/// The map is equal-area, so the factor is the constant `1/(2π)` for the
/// hemisphere and `1/(4π)` for the sphere, independent of position.
#[inline]
pub fn pdf_square_to_solid_angle(p_sq: f64, _c: SquareCoord, domain: Domain) -> f64 {
    debug_assert!(p_sq >= 0.0);
    p_sq / domain.jacobian()
}
