//! Minimal physically based renderer used as the validation harness:
//! direct lighting and bounded-depth path tracing with full multiple
//! importance sampling over environment and area lights.

mod config;
mod integrator;
mod metrics;
mod sampler;
mod scene;

pub use config::{
    load_baked_family, load_neural, BakeManifest, BakeManifestEntry, LightConfig, MaterialConfig,
    ObjectConfig, SceneConfig, ShapeConfig,
};
pub use integrator::{power_heuristic, render, IntegratorKind, RenderConfig, RenderOutput};
pub use metrics::{relmse, variance_csv, variance_report, VarianceRow};
pub use sampler::{eval_material, pdf_bsdf, sample_bsdf, ShadingScratch};
pub use scene::{
    BakedFamily, Camera, EnvMap, Hit, Light, Material, Ray, SamplerKind, Scene, SceneObject, Shape,
};
