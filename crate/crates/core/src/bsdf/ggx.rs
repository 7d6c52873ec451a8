//! Anisotropic GGX: distribution terms, visible-normal sampling, and the
//! analytic single-bounce conductor/dielectric evaluation.

use std::f64::consts::PI;

use super::fresnel::{fresnel_dielectric, fresnel_schlick};
use super::{BsdfParams, BsdfSample, MaterialKind};
use crate::math::{Direction, Rgb, RngStream, Vec3};

/// Anisotropic GGX normal distribution, zero below the horizon.
pub fn ggx_ndf(params: &BsdfParams, wh: Direction) -> f64 {
    if wh.z() <= 0.0 {
        return 0.0;
    }
    let sx = wh.x() / params.alpha_x;
    let sy = wh.y() / params.alpha_y;
    let d = sx * sx + sy * sy + wh.z() * wh.z();
    1.0 / (PI * params.alpha_x * params.alpha_y * d * d)
}

/// Smith Λ for an arbitrary direction. Negative-z directions use the
/// analytic continuation `Λ(-w) = -1 - Λ(w)`, which keeps the projected-area
/// formula `σ(w) = w.z (1 + Λ(w))` valid on the whole sphere.
pub fn ggx_lambda(params: &BsdfParams, w: Direction) -> f64 {
    let z = w.z();
    if z > 0.9999 {
        return 0.0;
    }
    if z < -0.9999 {
        return -1.0;
    }
    let ax = params.alpha_x * w.x();
    let ay = params.alpha_y * w.y();
    let inv_a2 = (ax * ax + ay * ay) / (z * z);
    0.5 * (-1.0 + z.signum() * (1.0 + inv_a2).sqrt())
}

/// Monostatic Smith masking for an up-facing direction.
pub fn smith_g1(params: &BsdfParams, w: Direction) -> f64 {
    if w.z() <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + ggx_lambda(params, w))
}

/// Height-correlated Smith shadowing-masking. Directions below the horizon
/// are folded up, which covers the transmission configuration.
pub fn smith_g2(params: &BsdfParams, wi: Direction, wo: Direction) -> f64 {
    let fold = |w: Direction| if w.z() < 0.0 { w.flip_z() } else { w };
    1.0 / (1.0 + ggx_lambda(params, fold(wi)) + ggx_lambda(params, fold(wo)))
}

/// Projected microsurface area seen from `w`: `σ(w) = w.z (1 + Λ(w))`.
pub fn ggx_projected_area(params: &BsdfParams, w: Direction) -> f64 {
    (w.z() * (1.0 + ggx_lambda(params, w))).max(0.0)
}

/// Density of visible normals from `v`: `⟨v,m⟩₊ D(m) / σ(v)`.
pub fn vndf_density(params: &BsdfParams, v: Direction, m: Direction) -> f64 {
    let sigma = ggx_projected_area(params, v);
    if sigma <= 0.0 {
        return 0.0;
    }
    v.dot(m).max(0.0) * ggx_ndf(params, m) / sigma
}

/// Samples the visible-normal distribution of `v`, valid for any direction
/// with positive projected area (the microsurface walk needs `v.z < 0`).
///
/// Up-facing views use the exact spherical-cap construction; down-facing
/// views fall back to slope-space sampling with the fitted conditional
/// inverse for the `α = 1` configuration.
pub fn sample_vndf_direction(params: &BsdfParams, v: Direction, u1: f64, u2: f64) -> Direction {
    if v.z() > 1e-7 {
        sample_vndf_cap(params, v, u1, u2)
    } else {
        sample_vndf_slopes(params, v, u1, u2)
    }
}

fn sample_vndf_cap(params: &BsdfParams, v: Direction, u1: f64, u2: f64) -> Direction {
    // Warp to the hemisphere configuration.
    let vh = Vec3::new(
        params.alpha_x * v.x(),
        params.alpha_y * v.y(),
        v.z(),
    )
    .normalized();
    let lensq = vh.x * vh.x + vh.y * vh.y;
    let t1 = if lensq > 1e-18 {
        Vec3::new(-vh.y, vh.x, 0.0) / lensq.sqrt()
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let t2 = vh.cross(t1);
    // Sample the projected area, tilting the disk toward the view.
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let p1 = r * phi.cos();
    let mut p2 = r * phi.sin();
    let s = 0.5 * (1.0 + vh.z);
    p2 = (1.0 - s) * (1.0 - p1 * p1).max(0.0).sqrt() + s * p2;
    let nh = t1 * p1 + t2 * p2 + vh * (1.0 - p1 * p1 - p2 * p2).max(0.0).sqrt();
    // Back to the ellipsoid configuration.
    Direction::from_normalizing(Vec3::new(
        params.alpha_x * nh.x,
        params.alpha_y * nh.y,
        nh.z.max(1e-9),
    ))
}

fn sample_vndf_slopes(params: &BsdfParams, v: Direction, u1: f64, u2: f64) -> Direction {
    // Stretch so the configuration has unit roughness.
    let sv = Vec3::new(
        params.alpha_x * v.x(),
        params.alpha_y * v.y(),
        v.z(),
    )
    .normalized();
    let (sx, sy) = sample_visible_slopes_11(sv.z, u1, u2);
    // Rotate slopes into the view azimuth, then unstretch.
    let r = (sv.x * sv.x + sv.y * sv.y).sqrt();
    let (cos_phi, sin_phi) = if r > 1e-12 {
        (sv.x / r, sv.y / r)
    } else {
        (1.0, 0.0)
    };
    let slope_x = (cos_phi * sx - sin_phi * sy) * params.alpha_x;
    let slope_y = (sin_phi * sx + cos_phi * sy) * params.alpha_y;
    if !(slope_x.is_finite() && slope_y.is_finite()) {
        // Degenerate configuration; return the geometric normal.
        return Direction::NORMAL;
    }
    Direction::from_normalizing(Vec3::new(-slope_x, -slope_y, 1.0))
}

/// Visible-slope sampling in the `α = 1` configuration, valid for any polar
/// angle (the projected area there is `(1 + cos θ)/2` on the whole sphere).
fn sample_visible_slopes_11(cos_theta: f64, u1: f64, u2: f64) -> (f64, f64) {
    if cos_theta > 0.9999 {
        // Normal incidence: the visible slopes are the full slope density.
        let r = (u1 / (1.0 - u1)).sqrt();
        let phi = 2.0 * PI * u2;
        return (r * phi.cos(), r * phi.sin());
    }
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let tan_theta = sin_theta / cos_theta;
    let projected_area = 0.5 * (cos_theta + 1.0);
    if projected_area < 1e-7 || !projected_area.is_finite() {
        return (0.0, 0.0);
    }
    // Invert the marginal CDF of the visible x-slope:
    //   F(x) = ((cosθ·x + sinθ)/sqrt(1+x²) + cosθ) / (1 + cosθ)
    // which reduces to A·sqrt(1+x²) = x + B with the constants below.
    let a = 2.0 * u1 * projected_area / cos_theta - 1.0;
    let b = tan_theta;
    let a2 = a * a;
    let tmp = if (a2 - 1.0).abs() < 1e-12 {
        1e12
    } else {
        1.0 / (a2 - 1.0)
    };
    let det = (b * b * tmp * tmp - (a2 - b * b) * tmp).max(0.0).sqrt();
    let slope_x_1 = b * tmp - det;
    let slope_x_2 = b * tmp + det;
    // Squaring introduced spurious roots. The valid slope satisfies the
    // unsquared equation (sign check) and the visibility bound x ≤ cot θ,
    // where the marginal CDF is monotone; exactly one root passes both.
    let bound = 1.0 / tan_theta;
    let score = |x: f64| {
        if !x.is_finite() || x > bound + 1e-9 {
            return f64::INFINITY;
        }
        (a * (1.0 + x * x).sqrt() - (x + b)).abs()
    };
    let (s1, s2) = (score(slope_x_1), score(slope_x_2));
    let slope_x = if s1.is_infinite() && s2.is_infinite() {
        slope_x_1.min(bound)
    } else if s1 <= s2 {
        slope_x_1
    } else {
        slope_x_2
    };

    // Conditional inverse CDF for the second slope (rational fit).
    let (sign, u2) = if u2 > 0.5 {
        (1.0, 2.0 * (u2 - 0.5))
    } else {
        (-1.0, 2.0 * (0.5 - u2))
    };
    let z = (u2 * (u2 * (u2 * 0.27385 - 0.73369) + 0.46341))
        / (u2 * (u2 * (u2 * 0.093073 + 0.309420) - 1.0) + 0.597999);
    let slope_y = sign * z * (1.0 + slope_x * slope_x).sqrt();
    (slope_x, slope_y)
}

/// Samples a microfacet normal proportional to `D(m)·cos θm` via slope space.
fn sample_ndf_normal(params: &BsdfParams, u1: f64, u2: f64) -> Direction {
    let r = (u1 / (1.0 - u1)).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let slope_x = params.alpha_x * r * phi.cos();
    let slope_y = params.alpha_y * r * phi.sin();
    Direction::from_normalizing(Vec3::new(-slope_x, -slope_y, 1.0))
}

/// Refraction of `w` (pointing away from the surface) about `m`, with the
/// relative index `eta` of the far side. `None` on total internal reflection.
pub fn refract(w: Direction, m: Direction, eta: f64) -> Option<Direction> {
    let cos_i = w.dot(m);
    let sin2_t = (1.0 - cos_i * cos_i).max(0.0) / (eta * eta);
    if sin2_t >= 1.0 {
        return None;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    let v = -w.vec() / eta + m.vec() * (cos_i / eta - cos_t);
    if v.length_squared() < 1e-16 {
        return None;
    }
    Some(Direction::from_normalizing(v))
}

/// Analytic single-bounce BSDF times |cos θo|.
///
/// Conductors use Schlick Fresnel from `r0`; dielectrics use the exact
/// unpolarized Fresnel from `eta`, with the microfacet transmission term in
/// the radiance convention (the η² factor), matching the multiple-bounce
/// walk. Grazing-degenerate incidence (`wi.z < 1e-6`) evaluates to zero.
pub fn eval_single(params: &BsdfParams, wi: Direction, wo: Direction) -> Rgb {
    if wi.z() < 1e-6 {
        return Rgb::BLACK;
    }
    match params.kind {
        MaterialKind::Conductor => {
            if wo.z() <= 0.0 {
                return Rgb::BLACK;
            }
            let wh = match half_vector(wi, wo) {
                Some(wh) => wh,
                None => return Rgb::BLACK,
            };
            let d = ggx_ndf(params, wh);
            if d == 0.0 {
                return Rgb::BLACK;
            }
            let g = smith_g2(params, wi, wo);
            let f = fresnel_schlick(params.r0, wi.dot(wh));
            // f_s·cos = F G D / (4 cosθi cosθo) · cosθo
            f * (g * d / (4.0 * wi.z()))
        }
        MaterialKind::Dielectric => {
            if wo.z() > 0.0 {
                let wh = match half_vector(wi, wo) {
                    Some(wh) => wh,
                    None => return Rgb::BLACK,
                };
                let d = ggx_ndf(params, wh);
                if d == 0.0 {
                    return Rgb::BLACK;
                }
                let g = smith_g2(params, wi, wo);
                let f = fresnel_dielectric(wi.dot(wh), params.eta);
                Rgb::splat(f * g * d / (4.0 * wi.z()))
            } else {
                let eta = params.eta;
                let wh = match transmission_half_vector(wi, wo, eta) {
                    Some(wh) => wh,
                    None => return Rgb::BLACK,
                };
                let wi_dot_h = wi.dot(wh);
                let wo_dot_h = wo.dot(wh);
                if wi_dot_h <= 0.0 || wo_dot_h >= 0.0 {
                    return Rgb::BLACK;
                }
                let d = ggx_ndf(params, wh);
                if d == 0.0 {
                    return Rgb::BLACK;
                }
                let g = smith_g2(params, wi, wo);
                let f = fresnel_dielectric(wi_dot_h, eta);
                let denom = wi_dot_h + eta * wo_dot_h;
                if denom.abs() < 1e-12 {
                    return Rgb::BLACK;
                }
                // f_t·|cosθo| in the radiance convention.
                let value = (wi_dot_h * wo_dot_h.abs() / wi.z())
                    * (eta * eta * (1.0 - f) * g * d / (denom * denom));
                Rgb::splat(value.max(0.0))
            }
        }
    }
}

#[inline]
fn half_vector(wi: Direction, wo: Direction) -> Option<Direction> {
    let s = wi.vec() + wo.vec();
    if s.length_squared() < 1e-16 {
        return None;
    }
    let wh = Direction::from_normalizing(s);
    if wh.z() <= 0.0 {
        None
    } else {
        Some(wh)
    }
}

/// Half vector of a transmission configuration, flipped to the upper side.
#[inline]
fn transmission_half_vector(wi: Direction, wo: Direction, eta: f64) -> Option<Direction> {
    let s = -(wi.vec() + wo.vec() * eta);
    if s.length_squared() < 1e-16 {
        return None;
    }
    let wh = Direction::from_normalizing(s);
    Some(if wh.z() < 0.0 { -wh } else { wh })
}

/// Baseline half-vector sampler selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleSampler {
    /// Samples `D(m)·cos θm`; ignores visibility and Fresnel.
    Ndf,
    /// Samples the distribution of visible normals.
    Vndf,
}

/// Draws an outgoing direction with the chosen half-vector strategy.
///
/// Half-vector configurations that reflect below the horizon are returned as
/// zero-weight samples rather than rejected, so sample counts stay exact.
pub fn sample_single(
    params: &BsdfParams,
    wi: Direction,
    rng: &mut RngStream,
    which: SingleSampler,
) -> BsdfSample {
    debug_assert!(wi.z() > 0.0);
    let (u1, u2) = rng.next_2d();
    let m = match which {
        SingleSampler::Ndf => sample_ndf_normal(params, u1, u2),
        SingleSampler::Vndf => sample_vndf_direction(params, wi, u1, u2),
    };
    let wi_dot_m = wi.dot(m);
    if wi_dot_m <= 0.0 {
        return BsdfSample::absorbed(wi.flip_z(), None);
    }
    match params.kind {
        MaterialKind::Conductor => {
            let wo = wi.reflect_about(m);
            let pdf = pdf_single(params, wi, wo, which);
            if wo.z() <= 0.0 || pdf <= 0.0 {
                return BsdfSample::absorbed(wo, Some(pdf.max(0.0)));
            }
            let weight = eval_single(params, wi, wo) * (1.0 / pdf);
            BsdfSample {
                wo,
                weight,
                pdf: Some(pdf),
            }
        }
        MaterialKind::Dielectric => {
            let f = fresnel_dielectric(wi_dot_m, params.eta);
            let (wo, reflected) = if rng.next_f64() < f {
                (wi.reflect_about(m), true)
            } else {
                match refract(wi, m, params.eta) {
                    Some(wt) => (wt, false),
                    None => (wi.reflect_about(m), true),
                }
            };
            // A reflection that lands below the horizon (or a refraction
            // above it) is not covered by this sampler's pdf on that side;
            // report it as absorbed so sampling and pdf stay consistent.
            if reflected != (wo.z() > 0.0) {
                return BsdfSample::absorbed(wo, Some(0.0));
            }
            let pdf = pdf_single(params, wi, wo, which);
            if pdf <= 0.0 {
                return BsdfSample::absorbed(wo, Some(pdf.max(0.0)));
            }
            let weight = eval_single(params, wi, wo) * (1.0 / pdf);
            BsdfSample {
                wo,
                weight,
                pdf: Some(pdf),
            }
        }
    }
}

/// Solid-angle pdf realized by [`sample_single`] for the given direction.
pub fn pdf_single(params: &BsdfParams, wi: Direction, wo: Direction, which: SingleSampler) -> f64 {
    if wi.z() <= 0.0 {
        return 0.0;
    }
    let half_pdf = |m: Direction| -> f64 {
        match which {
            SingleSampler::Ndf => ggx_ndf(params, m) * m.z(),
            SingleSampler::Vndf => vndf_density(params, wi, m),
        }
    };
    match params.kind {
        MaterialKind::Conductor => {
            let wh = match half_vector(wi, wo) {
                Some(wh) => wh,
                None => return 0.0,
            };
            let wi_dot_h = wi.dot(wh);
            if wi_dot_h <= 0.0 || wo.z() <= 0.0 {
                return 0.0;
            }
            half_pdf(wh) / (4.0 * wi_dot_h)
        }
        MaterialKind::Dielectric => {
            if wo.z() > 0.0 {
                let wh = match half_vector(wi, wo) {
                    Some(wh) => wh,
                    None => return 0.0,
                };
                let wi_dot_h = wi.dot(wh);
                if wi_dot_h <= 0.0 {
                    return 0.0;
                }
                let f = fresnel_dielectric(wi_dot_h, params.eta);
                f * half_pdf(wh) / (4.0 * wi_dot_h)
            } else {
                let eta = params.eta;
                let wh = match transmission_half_vector(wi, wo, eta) {
                    Some(wh) => wh,
                    None => return 0.0,
                };
                let wi_dot_h = wi.dot(wh);
                let wo_dot_h = wo.dot(wh);
                if wi_dot_h <= 0.0 || wo_dot_h >= 0.0 {
                    return 0.0;
                }
                let f = fresnel_dielectric(wi_dot_h, eta);
                let denom = wi_dot_h + eta * wo_dot_h;
                if denom.abs() < 1e-12 {
                    return 0.0;
                }
                let jac = eta * eta * wo_dot_h.abs() / (denom * denom);
                (1.0 - f) * half_pdf(wh) * jac
            }
        }
    }
}
