//! Direct lighting and bounded-depth path tracing with full MIS.
//!
//! Pixels own deterministic RNG streams keyed by `(seed, pixel, sample)`,
//! so images are bitwise-reproducible regardless of tiling or thread count.

use rayon::prelude::*;

use super::sampler::{eval_for_lighting, pdf_bsdf, sample_bsdf, ShadingScratch};
use super::scene::{Hit, Light, Ray, SamplerKind, Scene};
use crate::math::{Direction, Rgb, RngStream, Vec3};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    /// Next-event estimation only.
    LightOnly,
    /// BSDF sampling only.
    BsdfOnly,
    /// Both strategies combined with the power heuristic.
    Mis,
}

impl IntegratorKind {
    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::LightOnly => "light",
            IntegratorKind::BsdfOnly => "bsdf",
            IntegratorKind::Mis => "mis",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub integrator: IntegratorKind,
    pub spp: usize,
    pub seed: u64,
    /// 1 = direct lighting; larger values enable path tracing.
    pub max_depth: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            integrator: IntegratorKind::Mis,
            spp: 64,
            seed: 0,
            max_depth: 1,
        }
    }
}

/// Rendered image plus run metadata.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
    pub spp: usize,
    pub seconds: f64,
    pub nan_count: u64,
}

/// Power heuristic with exponent 2.
#[inline]
pub fn power_heuristic(pdf_a: f64, pdf_b: f64) -> f64 {
    let a2 = pdf_a * pdf_a;
    let b2 = pdf_b * pdf_b;
    if a2 + b2 <= 0.0 {
        0.0
    } else {
        a2 / (a2 + b2)
    }
}

pub fn render(scene: &Scene, config: &RenderConfig) -> crate::Result<RenderOutput> {
    scene.validate()?;
    if config.integrator == IntegratorKind::Mis {
        for obj in &scene.objects {
            if obj.material.sampler == SamplerKind::RandomWalk {
                return Err(Error::NoPdfForMis {
                    sampler: "random_walk",
                });
            }
        }
    }
    let width = scene.camera.width;
    let height = scene.camera.height;
    let start = std::time::Instant::now();
    let results: Vec<(Rgb, u64)> = (0..width * height)
        .into_par_iter()
        .map(|pixel| {
            let mut scratch = ShadingScratch::default();
            let mut acc = Rgb::BLACK;
            let mut nans = 0u64;
            for s in 0..config.spp {
                let stream = pixel as u64 + (s as u64) * (width * height) as u64;
                let mut rng = RngStream::new(config.seed, stream);
                let x = pixel % width;
                let y = pixel / width;
                let (jx, jy) = rng.next_2d();
                let ray = scene.camera.ray(x, y, jx, jy);
                match radiance(scene, ray, config, &mut rng, &mut scratch) {
                    Ok(value) if value.is_finite() => acc += value,
                    Ok(_) => nans += 1,
                    Err(_) => nans += 1,
                }
            }
            (acc * (1.0 / config.spp as f64), nans)
        })
        .collect();
    let mut pixels = Vec::with_capacity(width * height);
    let mut nan_count = 0;
    for (p, n) in results {
        pixels.push(p);
        nan_count += n;
    }
    Ok(RenderOutput {
        width,
        height,
        pixels,
        spp: config.spp,
        seconds: start.elapsed().as_secs_f64(),
        nan_count,
    })
}

/// Radiance carried by one camera ray.
fn radiance(
    scene: &Scene,
    mut ray: Ray,
    config: &RenderConfig,
    rng: &mut RngStream,
    scratch: &mut ShadingScratch,
) -> crate::Result<Rgb> {
    let mut total = Rgb::BLACK;
    let mut throughput = Rgb::WHITE;
    // Whether BSDF-sampled light hits still count fully (true for the
    // camera ray and after vertices without next-event estimation).
    let mut bsdf_weight_full = true;
    let mut prev_pdf = 0.0f64;

    let max_depth = config.max_depth.max(1);
    // One extra pass so the last vertex's BSDF sample still collects the
    // light it points at.
    for depth in 0..=max_depth {
        let hit = scene.intersect(&ray);
        let light_hit = nearest_light_hit(scene, &ray);
        // Emission reached along the current ray, if in front of geometry.
        if let Some((t_light, emitted, pdf_light)) = light_hit {
            if hit.map_or(true, |h| t_light < h.t) {
                let weight = if depth == 0 || bsdf_weight_full {
                    1.0
                } else {
                    power_heuristic(prev_pdf, pdf_light)
                };
                total += throughput * emitted * weight;
                break;
            }
        }
        let hit = match hit {
            Some(hit) => hit,
            None => {
                let env = scene.environment(ray.dir);
                if env != Rgb::BLACK {
                    let weight = if depth == 0 || bsdf_weight_full {
                        1.0
                    } else {
                        let pdf_light = light_pdf_for_dir(scene, ray.dir);
                        power_heuristic(prev_pdf, pdf_light)
                    };
                    total += throughput * env * weight;
                }
                break;
            }
        };
        if depth == max_depth {
            break; // depth budget exhausted; no more scattering
        }

        let material = &scene.objects[hit.object].material;
        let wi_world = -ray.dir;
        let wi_vec = hit.frame.to_local(wi_world);
        if wi_vec.z <= 1e-6 {
            break;
        }
        let wi = Direction::from_normalizing(wi_vec);

        let use_light = config.integrator != IntegratorKind::BsdfOnly;
        let use_bsdf = config.integrator != IntegratorKind::LightOnly;

        // Next-event estimation.
        if use_light {
            total += throughput
                * sample_lights(scene, &hit, material, wi, config, rng, scratch)?;
        }

        // BSDF continuation (also carries direct light under BsdfOnly/MIS).
        if !use_bsdf {
            break;
        }
        let sample = sample_bsdf(material, wi, rng, scratch)?;
        if sample.weight == Rgb::BLACK {
            break;
        }
        let wo_world = hit.frame.to_world(sample.wo.vec());
        let offset = if sample.wo.z() >= 0.0 {
            hit.frame.normal * 1e-6
        } else {
            hit.frame.normal * -1e-6
        };
        ray = Ray {
            origin: hit.point + offset,
            dir: wo_world,
        };
        throughput = throughput * sample.weight;
        bsdf_weight_full = !use_light;
        prev_pdf = sample.pdf.unwrap_or(0.0);
        if throughput.max_component() < 1e-9 {
            break;
        }
        let _ = depth;
    }
    Ok(total)
}

/// Closest emissive-geometry hit along a ray (area lights only), with the
/// light-strategy pdf of that direction for MIS.
fn nearest_light_hit(scene: &Scene, ray: &Ray) -> Option<(f64, Rgb, f64)> {
    let mut best: Option<(f64, Rgb, f64)> = None;
    let n_lights = scene.lights.len() as f64;
    for light in &scene.lights {
        if let Light::Rect {
            origin,
            edge_u,
            edge_v,
            radiance,
        } = light
        {
            let shape = super::scene::Shape::Rect {
                origin: *origin,
                edge_u: *edge_u,
                edge_v: *edge_v,
            };
            if let Some((t, point, frame)) = shape.intersect(ray, f64::INFINITY) {
                // One-sided emitter.
                if frame.normal.dot(ray.dir) < 0.0
                    && best.map_or(true, |(bt, _, _)| t < bt)
                {
                    let area = edge_u.cross(*edge_v).length();
                    let cos = frame.normal.dot(-ray.dir).abs().max(1e-9);
                    let dist2 = (point - ray.origin).length_squared();
                    let pdf = dist2 / (cos * area) / n_lights;
                    best = Some((t, *radiance, pdf));
                }
            }
        }
    }
    best
}

/// Solid-angle pdf of the light-sampling strategy for a given direction
/// (environment part only; area lights are resolved by intersection).
fn light_pdf_for_dir(scene: &Scene, dir: Vec3) -> f64 {
    let n_lights = scene.lights.len() as f64;
    let mut pdf = 0.0;
    for light in &scene.lights {
        if let Light::Env(env) = light {
            pdf += env.pdf(dir) / n_lights;
        }
    }
    pdf
}

/// One next-event estimation: pick a light uniformly, sample it, shadow
/// test, and weigh against the material pdf when running MIS.
fn sample_lights(
    scene: &Scene,
    hit: &Hit,
    material: &super::scene::Material,
    wi: Direction,
    config: &RenderConfig,
    rng: &mut RngStream,
    scratch: &mut ShadingScratch,
) -> crate::Result<Rgb> {
    let n_lights = scene.lights.len();
    let pick = rng.next_below(n_lights);
    let pick_pdf = 1.0 / n_lights as f64;
    let (dir_world, emitted, dist, light_pdf) = match &scene.lights[pick] {
        Light::Rect {
            origin,
            edge_u,
            edge_v,
            radiance,
        } => {
            let (u1, u2) = rng.next_2d();
            let p = *origin + *edge_u * u1 + *edge_v * u2;
            let to_light = p - hit.point;
            let dist2 = to_light.length_squared();
            let dist = dist2.sqrt();
            let dir = to_light / dist;
            let normal = edge_u.cross(*edge_v).normalized();
            let cos_light = normal.dot(-dir);
            if cos_light <= 0.0 {
                return Ok(Rgb::BLACK);
            }
            let area = edge_u.cross(*edge_v).length();
            let pdf = dist2 / (cos_light * area);
            (dir, *radiance, dist, pdf)
        }
        Light::Env(env) => {
            let (u1, u2) = rng.next_2d();
            let (dir, emitted, pdf) = env.sample(u1, u2);
            (dir, emitted, f64::INFINITY, pdf)
        }
    };
    if light_pdf <= 0.0 || emitted == Rgb::BLACK {
        return Ok(Rgb::BLACK);
    }
    let wo_vec = hit.frame.to_local(dir_world);
    if !material.params.domain().contains_z(wo_vec.z) {
        return Ok(Rgb::BLACK);
    }
    let offset = if wo_vec.z >= 0.0 {
        hit.frame.normal * 1e-6
    } else {
        hit.frame.normal * -1e-6
    };
    if scene.occluded(hit.point + offset, dir_world, dist) {
        return Ok(Rgb::BLACK);
    }
    let wo = Direction::from_normalizing(wo_vec);
    let f_cos = eval_for_lighting(material, wi, wo, rng, scratch)?;
    if f_cos == Rgb::BLACK {
        return Ok(Rgb::BLACK);
    }
    let total_light_pdf = light_pdf * pick_pdf;
    let mis = if config.integrator == IntegratorKind::Mis {
        let bsdf_pdf = pdf_bsdf(material, wi, wo, scratch)?.unwrap_or(0.0);
        power_heuristic(total_light_pdf, bsdf_pdf)
    } else {
        1.0
    };
    Ok(f_cos * emitted * (mis / total_light_pdf))
}
