//! Ground-truth parametric BSDF models.
//!
//! Single-bounce anisotropic GGX conductors and dielectrics with analytic
//! evaluation and the classic NDF / visible-NDF baseline samplers, plus a
//! stochastic multiple-bounce model that walks the Smith microsurface.
//! All functions work in the local shading frame (normal = +z) and return
//! BSDF values premultiplied by |cos θo|.

mod fresnel;
mod ggx;
mod walk;

pub use fresnel::{fresnel_dielectric, fresnel_schlick};
pub use ggx::{
    eval_single, ggx_lambda, ggx_ndf, ggx_projected_area, pdf_single, sample_single,
    sample_vndf_direction, smith_g1, smith_g2, SingleSampler,
};
pub use walk::{
    eval_multi, eval_multi_stats, sample_multi, sample_multi_stats, WalkStats, WALK_BOUNCE_CAP,
};

use serde::{Deserialize, Serialize};

use crate::math::{Direction, Domain, Rgb};
use crate::Error;

/// Scattering model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterModel {
    SingleBounce,
    MultiBounce,
}

/// Material family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Conductor,
    Dielectric,
}

/// Roughness bounds of the training domain.
pub const ALPHA_MIN: f64 = 0.01;
pub const ALPHA_MAX: f64 = 1.0;
/// Relative index-of-refraction bounds for dielectrics.
pub const ETA_MIN: f64 = 1.1;
pub const ETA_MAX: f64 = 2.5;

/// Parameter vector of the BSDF family: base color, anisotropic roughness,
/// index of refraction, plus the model and material selectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsdfParams {
    /// Fresnel reflectance at normal incidence; conductors only.
    pub r0: Rgb,
    pub alpha_x: f64,
    pub alpha_y: f64,
    /// Relative index of refraction; dielectrics only, ignored for conductors.
    pub eta: f64,
    pub model: ScatterModel,
    pub kind: MaterialKind,
}

impl BsdfParams {
    pub fn conductor(r0: Rgb, alpha_x: f64, alpha_y: f64, model: ScatterModel) -> Self {
        BsdfParams {
            r0,
            alpha_x: alpha_x.clamp(ALPHA_MIN, ALPHA_MAX),
            alpha_y: alpha_y.clamp(ALPHA_MIN, ALPHA_MAX),
            eta: 1.5,
            model,
            kind: MaterialKind::Conductor,
        }
    }

    pub fn dielectric(eta: f64, alpha_x: f64, alpha_y: f64, model: ScatterModel) -> Self {
        BsdfParams {
            r0: Rgb::WHITE,
            alpha_x: alpha_x.clamp(ALPHA_MIN, ALPHA_MAX),
            alpha_y: alpha_y.clamp(ALPHA_MIN, ALPHA_MAX),
            eta,
            model,
            kind: MaterialKind::Dielectric,
        }
    }

    /// Checks the declared parameter bounds.
    pub fn validate(&self) -> crate::Result<()> {
        let check = |name: &'static str, value: f64, min: f64, max: f64| {
            if value < min || value > max || !value.is_finite() {
                Err(Error::ParamOutOfRange {
                    name,
                    value,
                    min,
                    max,
                })
            } else {
                Ok(())
            }
        };
        check("alpha_x", self.alpha_x, ALPHA_MIN, ALPHA_MAX)?;
        check("alpha_y", self.alpha_y, ALPHA_MIN, ALPHA_MAX)?;
        for (name, v) in [("r0.r", self.r0.r), ("r0.g", self.r0.g), ("r0.b", self.r0.b)] {
            check(name, v, 0.0, 1.0)?;
        }
        if self.kind == MaterialKind::Dielectric {
            check("eta", self.eta, ETA_MIN, ETA_MAX)?;
        }
        Ok(())
    }

    /// Outgoing-direction domain of this material's slices.
    pub fn domain(&self) -> Domain {
        match self.kind {
            MaterialKind::Conductor => Domain::Hemisphere,
            MaterialKind::Dielectric => Domain::Sphere,
        }
    }
}

/// One drawn outgoing direction with its Monte Carlo weight
/// (`f·cos / pdf`) and, when available, its solid-angle pdf.
///
/// The random-walk sampler has no closed-form pdf; it reports `pdf: None`,
/// which downstream MIS code rejects.
#[derive(Debug, Clone, Copy)]
pub struct BsdfSample {
    pub wo: Direction,
    pub weight: Rgb,
    pub pdf: Option<f64>,
}

impl BsdfSample {
    /// Zero-weight sample used for rejected half-vector configurations.
    pub fn absorbed(wo: Direction, pdf: Option<f64>) -> Self {
        BsdfSample {
            wo,
            weight: Rgb::BLACK,
            pdf,
        }
    }
}

/// Directional albedo `∫ f(wi,wo)·|cos θo| dωo` by midpoint quadrature over
/// `(cos θ, φ)`, covering both hemispheres for dielectrics. The grid is in
/// spherical coordinates, independent of the square parameterization.
pub fn directional_albedo(params: &BsdfParams, wi: Direction, n_cos: usize, n_phi: usize) -> Rgb {
    let mut total = Rgb::BLACK;
    let sides: &[f64] = match params.domain() {
        Domain::Hemisphere => &[1.0],
        Domain::Sphere => &[1.0, -1.0],
    };
    for &side in sides {
        for iz in 0..n_cos {
            let z = side * ((iz as f64 + 0.5) / n_cos as f64);
            let sin_theta = (1.0 - z * z).max(0.0).sqrt();
            for ip in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * (ip as f64 + 0.5) / n_phi as f64;
                let wo = Direction::from_spherical(sin_theta, z, phi);
                total += eval_single(params, wi, wo);
            }
        }
    }
    // dω = dz dφ on each side.
    total * (2.0 * std::f64::consts::PI / (n_cos * n_phi) as f64)
}
