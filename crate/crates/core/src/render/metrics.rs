//! Image error metrics and the sampler-comparison report.

use super::integrator::{render, RenderConfig, RenderOutput};
use super::scene::Scene;
use crate::Error;

/// Relative mean squared error against a reference image:
/// mean over pixels and channels of `(x - ref)² / (ref² + 0.01)`.
pub fn relmse(image: &RenderOutput, reference: &RenderOutput) -> crate::Result<f64> {
    if image.width != reference.width || image.height != reference.height {
        return Err(Error::ResolutionMismatch {
            lhs_w: image.width,
            lhs_h: image.height,
            rhs_w: reference.width,
            rhs_h: reference.height,
        });
    }
    let mut acc = 0.0f64;
    for (a, b) in image.pixels.iter().zip(&reference.pixels) {
        for (x, r) in [(a.r, b.r), (a.g, b.g), (a.b, b.b)] {
            let d = x - r;
            acc += d * d / (r * r + 0.01);
        }
    }
    Ok(acc / (image.pixels.len() * 3) as f64)
}

/// One row of a sampler-comparison table.
#[derive(Debug, Clone)]
pub struct VarianceRow {
    pub name: String,
    pub relmse: f64,
    pub seconds: f64,
    pub spp: usize,
    pub nan_count: u64,
}

/// Renders each named scene at equal sample count and reports relMSE against
/// that scene's own converged reference (`ref_spp_factor × spp`, distinct
/// seed), the equal-sample comparison mode.
pub fn variance_report(
    scenes: &[(String, Scene)],
    config: &RenderConfig,
    ref_spp_factor: usize,
) -> crate::Result<Vec<VarianceRow>> {
    let mut rows = Vec::with_capacity(scenes.len());
    for (name, scene) in scenes {
        let image = render(scene, config)?;
        let reference = render(
            scene,
            &RenderConfig {
                spp: config.spp * ref_spp_factor.max(2),
                seed: config.seed ^ 0x5EED_0000_0000,
                ..config.clone()
            },
        )?;
        rows.push(VarianceRow {
            name: name.clone(),
            relmse: relmse(&image, &reference)?,
            seconds: image.seconds,
            spp: image.spp,
            nan_count: image.nan_count,
        });
    }
    Ok(rows)
}

/// CSV serialization of a variance report (fixed column order).
pub fn variance_csv(rows: &[VarianceRow]) -> String {
    let mut out = String::from("name,spp,relmse,seconds,nan_count\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.name, row.spp, row.relmse, row.seconds, row.nan_count
        ));
    }
    out
}
