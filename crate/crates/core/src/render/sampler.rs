//! Per-material dispatch of the sample / pdf / eval triple in the local
//! shading frame. Every binding keeps its sampling distribution and its
//! reported pdf consistent, so estimators stay unbiased regardless of which
//! sampler a material uses.

use super::scene::{Material, SamplerKind};
use crate::bsdf::{
    eval_multi, eval_single, pdf_single, sample_multi, sample_single, BsdfSample, ScatterModel,
    SingleSampler,
};
use crate::math::{direction_to_square, square_to_direction, Direction, Rgb, RngStream, SquareCoord};
use crate::neural::NeuralScratch;
use crate::Error;

/// Per-thread state for material sampling (network scratch lives here).
#[derive(Default)]
pub struct ShadingScratch {
    neural: Option<NeuralScratch>,
}

impl ShadingScratch {
    fn neural_for<'a>(
        &'a mut self,
        material: &'a Material,
    ) -> crate::Result<(&'a crate::neural::NeuralBsdf, &'a mut NeuralScratch)> {
        let nets = material.neural.as_deref().ok_or(Error::InvalidScene(
            "neural sampler without weights".into(),
        ))?;
        if self.neural.is_none() {
            self.neural = Some(nets.scratch());
        }
        Ok((nets, self.neural.as_mut().unwrap()))
    }
}

/// Floor for map/net pdfs used as divisors; avoids infinite weights where
/// interpolation overshoots into zero-density texels.
const PDF_FLOOR: f64 = 1e-9;

/// Draws an outgoing direction in the local frame.
pub fn sample_bsdf(
    material: &Material,
    wi: Direction,
    rng: &mut RngStream,
    scratch: &mut ShadingScratch,
) -> crate::Result<BsdfSample> {
    let params = &material.params;
    match material.sampler {
        SamplerKind::Ndf => Ok(hv_sample(material, wi, rng, SingleSampler::Ndf)),
        SamplerKind::Vndf => Ok(hv_sample(material, wi, rng, SingleSampler::Vndf)),
        SamplerKind::RandomWalk => Ok(sample_multi(params, wi, rng)),
        SamplerKind::BakedMap => {
            let family = material.baked.as_deref().ok_or(Error::InvalidScene(
                "baked_map sampler without maps".into(),
            ))?;
            let map = family.lookup(wi);
            let (u1, u2) = rng.next_2d();
            let (uv, _) = map.query(SquareCoord::new(u1, u2));
            let wo = square_to_direction(uv, map.domain);
            let pdf = map.pdf(uv);
            if pdf < PDF_FLOOR {
                return Ok(BsdfSample::absorbed(wo, Some(0.0)));
            }
            // Evaluate at the true incidence so snapping stays unbiased.
            let f_cos = eval_material(material, wi, wo, rng);
            Ok(BsdfSample {
                wo,
                weight: f_cos * (1.0 / pdf),
                pdf: Some(pdf),
            })
        }
        SamplerKind::Neural => {
            let (nets, net_scratch) = scratch.neural_for(material)?;
            let (u1, u2) = rng.next_2d();
            nets.sample(params, wi, SquareCoord::new(u1, u2), net_scratch)
        }
    }
}

fn hv_sample(
    material: &Material,
    wi: Direction,
    rng: &mut RngStream,
    which: SingleSampler,
) -> BsdfSample {
    let params = &material.params;
    let mut s = sample_single(params, wi, rng, which);
    if params.model == ScatterModel::MultiBounce {
        // Half-vector samplers draw from the single-bounce shape; re-weight
        // with the stochastic multiple-bounce evaluation.
        if let Some(pdf) = s.pdf {
            if pdf > 0.0 && s.weight != Rgb::BLACK {
                s.weight = eval_multi(params, wi, s.wo, rng, material.eval_walks) * (1.0 / pdf);
            }
        }
    }
    s
}

/// Solid-angle pdf of [`sample_bsdf`] in a given direction; `None` when the
/// binding has no closed-form pdf (the random walk).
pub fn pdf_bsdf(
    material: &Material,
    wi: Direction,
    wo: Direction,
    scratch: &mut ShadingScratch,
) -> crate::Result<Option<f64>> {
    let params = &material.params;
    match material.sampler {
        SamplerKind::Ndf => Ok(Some(pdf_single(params, wi, wo, SingleSampler::Ndf))),
        SamplerKind::Vndf => Ok(Some(pdf_single(params, wi, wo, SingleSampler::Vndf))),
        SamplerKind::RandomWalk => Ok(None),
        SamplerKind::BakedMap => {
            let family = material.baked.as_deref().ok_or(Error::InvalidScene(
                "baked_map sampler without maps".into(),
            ))?;
            let map = family.lookup(wi);
            if !map.domain.contains(wo) {
                return Ok(Some(0.0));
            }
            let uv = direction_to_square(wo, map.domain)?;
            Ok(Some(map.pdf(uv)))
        }
        SamplerKind::Neural => {
            let (nets, net_scratch) = scratch.neural_for(material)?;
            Ok(Some(nets.pdf_value(params, wi, wo, net_scratch)?))
        }
    }
}

/// `f·cos` for the direction pair; stochastic for the multiple-bounce model.
pub fn eval_material(material: &Material, wi: Direction, wo: Direction, rng: &mut RngStream) -> Rgb {
    let params = &material.params;
    match params.model {
        ScatterModel::SingleBounce => eval_single(params, wi, wo),
        ScatterModel::MultiBounce => eval_multi(params, wi, wo, rng, material.eval_walks),
    }
}

/// Eval used by light-sampling: the neural binding answers from its eval
/// network so the full pipeline is exercised; others use the ground truth.
pub fn eval_for_lighting(
    material: &Material,
    wi: Direction,
    wo: Direction,
    rng: &mut RngStream,
    scratch: &mut ShadingScratch,
) -> crate::Result<Rgb> {
    match material.sampler {
        SamplerKind::Neural => {
            let (nets, net_scratch) = scratch.neural_for(material)?;
            nets.eval_value(&material.params, wi, wo, net_scratch)
        }
        _ => Ok(eval_material(material, wi, wo, rng)),
    }
}
