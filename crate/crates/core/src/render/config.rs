//! On-disk scene description (JSON) and its conversion to a runtime scene.
//!
//! Materials that bind the baked-map or neural samplers reference a bake
//! directory (with its manifest) or a weights directory holding
//! `sample.otnw`, `eval.otnw`, and `pdf.otnw`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::integrator::{IntegratorKind, RenderConfig};
use super::scene::{BakedFamily, Camera, EnvMap, Light, Material, SamplerKind, Scene, SceneObject, Shape};
use crate::bsdf::{BsdfParams, MaterialKind, ScatterModel};
use crate::math::{Direction, Rgb, Vec3};
use crate::neural::NeuralBsdf;
use crate::Error;

/// Manifest written next to bake outputs; lists every lattice point with
/// its files and payload checksums.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BakeManifest {
    pub entries: Vec<BakeManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BakeManifestEntry {
    pub params: BsdfParams,
    pub wi: Direction,
    pub slice_file: String,
    pub map_file: String,
    pub slice_checksum: String,
    pub map_checksum: String,
}

impl BakeManifest {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Loads every map of a bake directory into a sampler family.
pub fn load_baked_family(dir: &Path) -> crate::Result<BakedFamily> {
    let manifest = BakeManifest::load(&dir.join("manifest.json"))?;
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let (slice, _, _) = crate::io::read_slice(&dir.join(&entry.slice_file))?;
        let map = crate::io::read_map(&dir.join(&entry.map_file), &slice)?;
        entries.push((entry.wi, map));
    }
    BakedFamily::new(entries)
}

/// Loads the three weight files of a directory into a bundle.
pub fn load_neural(dir: &Path, domain: crate::math::Domain) -> crate::Result<NeuralBsdf> {
    NeuralBsdf::new(
        crate::io::read_weights(&dir.join("sample.otnw"))?,
        crate::io::read_weights(&dir.join("eval.otnw"))?,
        crate::io::read_weights(&dir.join("pdf.otnw"))?,
        domain,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeConfig {
    Sphere { center: Vec3, radius: f64 },
    Rect { origin: Vec3, edge_u: Vec3, edge_v: Vec3 },
    Mesh { vertices: Vec<Vec3>, triangles: Vec<[u32; 3]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialConfig {
    pub r0: [f64; 3],
    pub alpha_x: f64,
    pub alpha_y: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub model: ScatterModel,
    pub kind: MaterialKind,
    pub sampler: SamplerKind,
    #[serde(default)]
    pub bake_dir: Option<String>,
    #[serde(default)]
    pub weights_dir: Option<String>,
    #[serde(default = "default_eval_walks")]
    pub eval_walks: usize,
}

fn default_eta() -> f64 {
    1.5
}

fn default_eval_walks() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LightConfig {
    EnvConstant {
        radiance: [f64; 3],
    },
    EnvSky {
        #[serde(default = "default_sky_res")]
        width: usize,
        #[serde(default = "default_sky_res_h")]
        height: usize,
        #[serde(default = "default_intensity")]
        intensity: f64,
    },
    EnvPfm {
        path: String,
    },
    Rect {
        origin: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        radiance: [f64; 3],
    },
}

fn default_sky_res() -> usize {
    128
}

fn default_sky_res_h() -> usize {
    64
}

fn default_intensity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectConfig {
    pub shape: ShapeConfig,
    pub material: MaterialConfig,
}

/// Complete scene file: camera, objects, lights, and render settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    pub camera: Camera,
    pub objects: Vec<ObjectConfig>,
    pub lights: Vec<LightConfig>,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorKind,
    #[serde(default = "default_spp")]
    pub spp: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
}

fn default_integrator() -> IntegratorKind {
    IntegratorKind::Mis
}

fn default_spp() -> usize {
    64
}

fn default_depth() -> usize {
    1
}

impl SceneConfig {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Builds the runtime scene, loading attachments relative to `base_dir`.
    pub fn build(&self, base_dir: &Path) -> crate::Result<(Scene, RenderConfig)> {
        let mut objects = Vec::with_capacity(self.objects.len());
        for obj in &self.objects {
            let params = BsdfParams {
                r0: Rgb::new(obj.material.r0[0], obj.material.r0[1], obj.material.r0[2]),
                alpha_x: obj.material.alpha_x,
                alpha_y: obj.material.alpha_y,
                eta: obj.material.eta,
                model: obj.material.model,
                kind: obj.material.kind,
            };
            params.validate()?;
            let mut material = Material::new(params, obj.material.sampler);
            material.eval_walks = obj.material.eval_walks;
            if obj.material.sampler == SamplerKind::BakedMap {
                let dir = obj.material.bake_dir.as_ref().ok_or_else(|| {
                    Error::InvalidScene("baked_map material needs `bake_dir`".into())
                })?;
                material.baked = Some(Arc::new(load_baked_family(&base_dir.join(dir))?));
            }
            if obj.material.sampler == SamplerKind::Neural {
                let dir = obj.material.weights_dir.as_ref().ok_or_else(|| {
                    Error::InvalidScene("neural material needs `weights_dir`".into())
                })?;
                material.neural = Some(Arc::new(load_neural(
                    &base_dir.join(dir),
                    params.domain(),
                )?));
            }
            let shape = match &obj.shape {
                ShapeConfig::Sphere { center, radius } => Shape::Sphere {
                    center: *center,
                    radius: *radius,
                },
                ShapeConfig::Rect {
                    origin,
                    edge_u,
                    edge_v,
                } => Shape::Rect {
                    origin: *origin,
                    edge_u: *edge_u,
                    edge_v: *edge_v,
                },
                ShapeConfig::Mesh {
                    vertices,
                    triangles,
                } => Shape::Mesh {
                    vertices: vertices.clone(),
                    triangles: triangles.clone(),
                },
            };
            objects.push(SceneObject { shape, material });
        }
        let mut lights = Vec::with_capacity(self.lights.len());
        for light in &self.lights {
            lights.push(match light {
                LightConfig::EnvConstant { radiance } => Light::Env(Arc::new(EnvMap::constant(
                    Rgb::new(radiance[0], radiance[1], radiance[2]),
                ))),
                LightConfig::EnvSky {
                    width,
                    height,
                    intensity,
                } => Light::Env(Arc::new(EnvMap::procedural_sky(*width, *height, *intensity))),
                LightConfig::EnvPfm { path } => {
                    let (w, h, pixels) = crate::io::read_pfm(&base_dir.join(path))?;
                    Light::Env(Arc::new(EnvMap::new(w, h, pixels)?))
                }
                LightConfig::Rect {
                    origin,
                    edge_u,
                    edge_v,
                    radiance,
                } => Light::Rect {
                    origin: *origin,
                    edge_u: *edge_u,
                    edge_v: *edge_v,
                    radiance: Rgb::new(radiance[0], radiance[1], radiance[2]),
                },
            });
        }
        let scene = Scene {
            camera: self.camera,
            objects,
            lights,
        };
        scene.validate()?;
        let config = RenderConfig {
            integrator: self.integrator,
            spp: self.spp,
            seed: self.seed,
            max_depth: self.max_depth,
        };
        Ok((scene, config))
    }
}
