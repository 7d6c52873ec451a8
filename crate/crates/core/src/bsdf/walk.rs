//! Stochastic multiple-bounce microfacet model.
//!
//! The surface is treated as a statistical Smith microsurface with a uniform
//! height distribution. A ray performs a random walk: sample the height of
//! the next intersection from the conditional visibility along the current
//! direction, scatter at a sampled visible normal, repeat until the ray
//! escapes. Evaluation adds a next-event contribution toward the query
//! direction at every bounce; sampling returns the exit direction with the
//! accumulated Fresnel throughput as its weight (no closed-form pdf exists,
//! so the sample reports `pdf: None`).

use super::fresnel::{fresnel_dielectric, fresnel_schlick};
use super::ggx::{ggx_lambda, ggx_ndf, ggx_projected_area, refract, sample_vndf_direction};
use super::{BsdfParams, BsdfSample, MaterialKind};
use crate::math::{Direction, Rgb, RngStream};

/// Hard cap on walk length; longer walks are truncated and counted.
pub const WALK_BOUNCE_CAP: usize = 16;

/// Diagnostics accumulated over random walks.
#[derive(Debug, Clone, Copy, Default)]
pub struct WalkStats {
    pub walks: u64,
    pub truncated: u64,
    pub total_bounces: u64,
}

impl WalkStats {
    pub fn merge(&mut self, other: WalkStats) {
        self.walks += other.walks;
        self.truncated += other.truncated;
        self.total_bounces += other.total_bounces;
    }
}

// Uniform height distribution on [-1, 1].
#[inline]
fn height_cdf(h: f64) -> f64 {
    (0.5 * (h + 1.0)).clamp(0.0, 1.0)
}

#[inline]
fn height_cdf_inv(u: f64) -> f64 {
    (2.0 * u - 1.0).clamp(-1.0, 1.0)
}

/// Masking from height `h` along the up-facing direction `w`.
#[inline]
fn g1_at_height(params: &BsdfParams, w: Direction, h: f64) -> f64 {
    if w.z() > 0.9999 {
        return 1.0;
    }
    if w.z() <= 0.0 {
        return 0.0;
    }
    height_cdf(h).powf(ggx_lambda(params, w))
}

/// Samples the height of the next microsurface intersection along `w` from
/// height `h`, or `None` when the ray escapes the surface.
fn sample_height(params: &BsdfParams, w: Direction, h: f64, u: f64) -> Option<f64> {
    if w.z() > 0.9999 {
        return None;
    }
    if w.z() < -0.9999 {
        return Some(height_cdf_inv(u * height_cdf(h)));
    }
    if w.z().abs() < 1e-4 {
        // Horizontal travel keeps the current height.
        return Some(h);
    }
    let lambda = ggx_lambda(params, w);
    if w.z() > 0.0 {
        let escape = height_cdf(h).powf(lambda);
        if u > 1.0 - escape {
            return None;
        }
    }
    let denom = (1.0 - u).powf(1.0 / lambda);
    if denom <= 0.0 || !denom.is_finite() {
        return Some(h);
    }
    Some(height_cdf_inv(height_cdf(h) / denom))
}

// Start just above the heightfield (C1 quantile 0.999, plus one).
const START_HEIGHT: f64 = 1.0 + 0.998;

/// Conductor phase function toward `wo`, including the Fresnel color:
/// `F(⟨v,m⟩) · D_v(m) / (4 ⟨v,m⟩)` with `m` the half vector of `(v, wo)`.
fn conductor_phase(params: &BsdfParams, v: Direction, wo: Direction) -> Rgb {
    let s = v.vec() + wo.vec();
    if s.length_squared() < 1e-16 {
        return Rgb::BLACK;
    }
    let m = Direction::from_normalizing(s);
    if m.z() <= 0.0 {
        return Rgb::BLACK;
    }
    let v_dot_m = v.dot(m);
    if v_dot_m <= 0.0 {
        return Rgb::BLACK;
    }
    let sigma = ggx_projected_area(params, v);
    if sigma <= 0.0 {
        return Rgb::BLACK;
    }
    let value = ggx_ndf(params, m) / (4.0 * sigma);
    fresnel_schlick(params.r0, v_dot_m) * value
}

/// Dielectric phase function between media sides. `v` points away from the
/// event back along the ray, `wo` away toward the query; the flags say on
/// which side of the interface each direction travels.
fn dielectric_phase(
    params: &BsdfParams,
    v: Direction,
    wo: Direction,
    v_outside: bool,
    wo_outside: bool,
) -> f64 {
    let eta = if v_outside {
        params.eta
    } else {
        1.0 / params.eta
    };
    // Fold into the frame where the incoming medium is on the +z side.
    let (v, wo) = if v_outside { (v, wo) } else { (-v, -wo) };
    let sigma = ggx_projected_area(params, v);
    if sigma <= 0.0 {
        return 0.0;
    }
    let dv = |m: Direction| v.dot(m).max(0.0) * ggx_ndf(params, m) / sigma;
    if v_outside == wo_outside {
        // Reflection event.
        let s = v.vec() + wo.vec();
        if s.length_squared() < 1e-16 {
            return 0.0;
        }
        let m = Direction::from_normalizing(s);
        if m.z() <= 0.0 {
            return 0.0;
        }
        let v_dot_m = v.dot(m);
        if v_dot_m <= 0.0 {
            return 0.0;
        }
        let f = fresnel_dielectric(v_dot_m, eta);
        f * dv(m) / (4.0 * v_dot_m)
    } else {
        // Transmission event.
        let s = -(v.vec() + wo.vec() * eta);
        if s.length_squared() < 1e-16 {
            return 0.0;
        }
        let mut m = Direction::from_normalizing(s);
        if m.z() < 0.0 {
            m = -m;
        }
        let v_dot_m = v.dot(m);
        let wo_dot_m = wo.dot(m);
        if v_dot_m <= 0.0 || wo_dot_m >= 0.0 {
            return 0.0;
        }
        let f = fresnel_dielectric(v_dot_m, eta);
        let denom = v_dot_m + eta * wo_dot_m;
        if denom.abs() < 1e-12 {
            return 0.0;
        }
        let jac = eta * eta * wo_dot_m.abs() / (denom * denom);
        (1.0 - f) * dv(m) * jac
    }
}

/// Scatter step shared by the dielectric eval and sample walks. Returns the
/// new travel direction; flips `outside` on refraction.
fn dielectric_scatter(
    params: &BsdfParams,
    v: Direction,
    outside: &mut bool,
    rng: &mut RngStream,
) -> Option<Direction> {
    let eta = if *outside {
        params.eta
    } else {
        1.0 / params.eta
    };
    let (u1, u2) = rng.next_2d();
    // When inside, the microsurface is seen mirrored; the facet normal then
    // points into the inside medium.
    let m = if *outside {
        sample_vndf_direction(params, v, u1, u2)
    } else {
        -sample_vndf_direction(params, -v, u1, u2)
    };
    let v_dot_m = v.dot(m);
    if v_dot_m <= 0.0 {
        return None;
    }
    let f = fresnel_dielectric(v_dot_m, eta);
    let wr = if rng.next_f64() < f {
        v.reflect_about(m)
    } else {
        match refract(v, m, eta) {
            Some(wt) => {
                *outside = !*outside;
                wt
            }
            None => v.reflect_about(m),
        }
    };
    wr.vec().is_finite().then_some(wr)
}

/// One conductor walk with next-event estimation toward `wo`; estimates
/// `f(wi,wo)·cosθo`.
fn eval_walk_conductor(
    params: &BsdfParams,
    wi: Direction,
    wo: Direction,
    rng: &mut RngStream,
    stats: &mut WalkStats,
) -> Rgb {
    let mut wr = -wi;
    let mut hr = START_HEIGHT;
    let mut throughput = Rgb::WHITE;
    let mut sum = Rgb::BLACK;
    stats.walks += 1;
    for bounce in 0..=WALK_BOUNCE_CAP {
        match sample_height(params, wr, hr, rng.next_f64()) {
            None => return sum,
            Some(h) => hr = h,
        }
        if bounce == WALK_BOUNCE_CAP {
            stats.truncated += 1;
            return sum;
        }
        stats.total_bounces += 1;
        let v = -wr;
        // Next-event estimation toward wo.
        let phase = conductor_phase(params, v, wo);
        let shadow = g1_at_height(params, wo, hr);
        sum += throughput * phase * shadow;
        // Continue the walk.
        let (u1, u2) = rng.next_2d();
        let m = sample_vndf_direction(params, v, u1, u2);
        let v_dot_m = v.dot(m);
        if v_dot_m <= 0.0 {
            return sum;
        }
        throughput = throughput * fresnel_schlick(params.r0, v_dot_m);
        wr = v.reflect_about(m);
        if !wr.vec().is_finite() {
            return sum;
        }
    }
    sum
}

/// One dielectric walk with next-event estimation toward `wo` (either side).
fn eval_walk_dielectric(
    params: &BsdfParams,
    wi: Direction,
    wo: Direction,
    rng: &mut RngStream,
    stats: &mut WalkStats,
) -> f64 {
    let mut wr = -wi;
    let mut hr = START_HEIGHT;
    let mut outside = true;
    let mut sum = 0.0;
    let wo_outside = wo.z() > 0.0;
    stats.walks += 1;
    for bounce in 0..=WALK_BOUNCE_CAP {
        let next = if outside {
            sample_height(params, wr, hr, rng.next_f64())
        } else {
            sample_height(params, -wr, -hr, rng.next_f64()).map(|h| -h)
        };
        match next {
            None => return sum,
            Some(h) => hr = h,
        }
        if bounce == WALK_BOUNCE_CAP {
            stats.truncated += 1;
            return sum;
        }
        stats.total_bounces += 1;
        let v = -wr;
        let phase = dielectric_phase(params, v, wo, outside, wo_outside);
        let shadow = if wo_outside {
            g1_at_height(params, wo, hr)
        } else {
            g1_at_height(params, -wo, -hr)
        };
        sum += phase * shadow;
        match dielectric_scatter(params, v, &mut outside, rng) {
            Some(dir) => wr = dir,
            None => return sum,
        }
    }
    sum
}

/// Unbiased stochastic estimate of the multiple-bounce BSDF × cosine,
/// averaging `n_walks` independent walks.
pub fn eval_multi(
    params: &BsdfParams,
    wi: Direction,
    wo: Direction,
    rng: &mut RngStream,
    n_walks: usize,
) -> Rgb {
    eval_multi_stats(params, wi, wo, rng, n_walks).0
}

/// [`eval_multi`] plus walk diagnostics (truncation counts).
pub fn eval_multi_stats(
    params: &BsdfParams,
    wi: Direction,
    wo: Direction,
    rng: &mut RngStream,
    n_walks: usize,
) -> (Rgb, WalkStats) {
    debug_assert!(n_walks >= 1);
    if wi.z() < 1e-6 || !params.domain().contains(wo) {
        return (Rgb::BLACK, WalkStats::default());
    }
    let mut stats = WalkStats::default();
    let mut sum = Rgb::BLACK;
    match params.kind {
        MaterialKind::Conductor => {
            if wo.z() <= 0.0 {
                return (Rgb::BLACK, WalkStats::default());
            }
            for _ in 0..n_walks {
                sum += eval_walk_conductor(params, wi, wo, rng, &mut stats);
            }
        }
        MaterialKind::Dielectric => {
            for _ in 0..n_walks {
                sum += Rgb::splat(eval_walk_dielectric(params, wi, wo, rng, &mut stats));
            }
        }
    }
    (sum * (1.0 / n_walks as f64), stats)
}

/// Samples an exit direction by walking the microsurface. The weight is the
/// accumulated Fresnel throughput; truncated walks are absorbed with zero
/// weight. The pdf has no closed form and is reported as `None`.
pub fn sample_multi(params: &BsdfParams, wi: Direction, rng: &mut RngStream) -> BsdfSample {
    sample_multi_stats(params, wi, rng).0
}

pub fn sample_multi_stats(
    params: &BsdfParams,
    wi: Direction,
    rng: &mut RngStream,
) -> (BsdfSample, WalkStats) {
    debug_assert!(wi.z() > 0.0);
    let mut stats = WalkStats {
        walks: 1,
        ..WalkStats::default()
    };
    let mut wr = -wi;
    let mut hr = START_HEIGHT;
    let mut outside = true;
    let mut throughput = Rgb::WHITE;
    let dielectric = params.kind == MaterialKind::Dielectric;
    for bounce in 0..=WALK_BOUNCE_CAP {
        let next = if outside {
            sample_height(params, wr, hr, rng.next_f64())
        } else {
            sample_height(params, -wr, -hr, rng.next_f64()).map(|h| -h)
        };
        match next {
            None => {
                return (
                    BsdfSample {
                        wo: wr,
                        weight: throughput,
                        pdf: None,
                    },
                    stats,
                );
            }
            Some(h) => hr = h,
        }
        if bounce == WALK_BOUNCE_CAP {
            break;
        }
        stats.total_bounces += 1;
        let v = -wr;
        if dielectric {
            match dielectric_scatter(params, v, &mut outside, rng) {
                Some(dir) => wr = dir,
                None => break,
            }
        } else {
            let (u1, u2) = rng.next_2d();
            let m = sample_vndf_direction(params, v, u1, u2);
            let v_dot_m = v.dot(m);
            if v_dot_m <= 0.0 {
                break;
            }
            throughput = throughput * fresnel_schlick(params.r0, v_dot_m);
            wr = v.reflect_about(m);
            if !wr.vec().is_finite() {
                break;
            }
        }
    }
    stats.truncated += 1;
    (BsdfSample::absorbed(wi.flip_z(), None), stats)
}
