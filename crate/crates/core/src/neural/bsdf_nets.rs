//! The compressed BSDF: three networks bundled behind the sampler/eval/pdf
//! interface a renderer expects.

use super::mlp::{MlpWeights, NetKind, Scratch};
use super::train::{encode_input, FeatureExtra};
use crate::bsdf::{BsdfParams, BsdfSample};
use crate::math::{square_to_direction, Direction, Domain, Rgb, SquareCoord};
use crate::Error;

/// Sample, eval, and pdf networks trained for one material family.
#[derive(Debug, Clone)]
pub struct NeuralBsdf {
    pub sample: MlpWeights,
    pub eval: MlpWeights,
    pub pdf: MlpWeights,
    /// Outgoing-direction domain the sample net's uv output lives on.
    pub domain: Domain,
}

/// Per-thread inference buffers for a [`NeuralBsdf`].
#[derive(Debug, Clone)]
pub struct NeuralScratch {
    sample: Scratch,
    eval: Scratch,
    pdf: Scratch,
}

impl NeuralBsdf {
    pub fn new(sample: MlpWeights, eval: MlpWeights, pdf: MlpWeights, domain: Domain) -> crate::Result<Self> {
        for (w, kind) in [
            (&sample, NetKind::Sample),
            (&eval, NetKind::Eval),
            (&pdf, NetKind::Pdf),
        ] {
            if w.kind != kind {
                return Err(Error::MalformedFile {
                    kind: "weights",
                    reason: format!("expected a {kind:?} network, found {:?}", w.kind),
                });
            }
            w.validate()?;
        }
        Ok(NeuralBsdf {
            sample,
            eval,
            pdf,
            domain,
        })
    }

    pub fn scratch(&self) -> NeuralScratch {
        NeuralScratch {
            sample: self.sample.scratch(),
            eval: self.eval.scratch(),
            pdf: self.pdf.scratch(),
        }
    }

    /// Draws an outgoing direction for the random pair `xi`: the sample net
    /// maps it to a square position and weight, and the pdf net supplies the
    /// matching solid-angle density for MIS.
    pub fn sample(
        &self,
        params: &BsdfParams,
        wi: Direction,
        xi: SquareCoord,
        scratch: &mut NeuralScratch,
    ) -> crate::Result<BsdfSample> {
        let feat = encode_input(params, wi, FeatureExtra::Random(xi), NetKind::Sample)?;
        self.sample.forward_unchecked(&feat, &mut scratch.sample);
        let out = &scratch.sample.output;
        let uv = SquareCoord::new(out[0] as f64, out[1] as f64).clamped();
        let weight = Rgb::new(out[2] as f64, out[3] as f64, out[4] as f64);
        let wo = square_to_direction(uv, self.domain);
        let pdf = self.pdf_value(params, wi, wo, scratch)?;
        Ok(BsdfSample {
            wo,
            weight,
            pdf: Some(pdf),
        })
    }

    /// Predicted `f·cos` for the direction pair.
    pub fn eval_value(
        &self,
        params: &BsdfParams,
        wi: Direction,
        wo: Direction,
        scratch: &mut NeuralScratch,
    ) -> crate::Result<Rgb> {
        let feat = encode_input(params, wi, FeatureExtra::Outgoing(wo), NetKind::Eval)?;
        self.eval.forward_unchecked(&feat, &mut scratch.eval);
        let out = &scratch.eval.output;
        Ok(Rgb::new(out[0] as f64, out[1] as f64, out[2] as f64))
    }

    /// Predicted solid-angle pdf of sampling `wo`.
    pub fn pdf_value(
        &self,
        params: &BsdfParams,
        wi: Direction,
        wo: Direction,
        scratch: &mut NeuralScratch,
    ) -> crate::Result<f64> {
        if !self.domain.contains(wo) {
            return Ok(0.0);
        }
        let feat = encode_input(params, wi, FeatureExtra::Outgoing(wo), NetKind::Pdf)?;
        self.pdf.forward_unchecked(&feat, &mut scratch.pdf);
        Ok(scratch.pdf.output[0].max(0.0) as f64)
    }
}
