use crate::math::Rgb;

/// Schlick approximation from the base color `r0`, used for conductors.
#[inline]
pub fn fresnel_schlick(r0: Rgb, cos_i: f64) -> Rgb {
    let c = (1.0 - cos_i.abs()).clamp(0.0, 1.0);
    let c5 = c * c * c * c * c;
    r0 + (Rgb::WHITE - r0) * c5
}

/// Exact unpolarized Fresnel reflectance for a dielectric interface.
///
/// `eta` is the relative index of refraction of the far side over the near
/// side along the incident ray; total internal reflection returns 1.
#[inline]
pub fn fresnel_dielectric(cos_i: f64, eta: f64) -> f64 {
    let cos_i = cos_i.abs().min(1.0);
    let sin2_t = (1.0 - cos_i * cos_i) / (eta * eta);
    if sin2_t >= 1.0 {
        return 1.0;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    let r_par = (eta * cos_i - cos_t) / (eta * cos_i + cos_t);
    let r_perp = (cos_i - eta * cos_t) / (cos_i + eta * cos_t);
    0.5 * (r_par * r_par + r_perp * r_perp)
}
