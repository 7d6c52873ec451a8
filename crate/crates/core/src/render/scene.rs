//! Scene model: pinhole camera, spheres / rectangles / triangle meshes with
//! per-object materials and sampler bindings, environment and area lights.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bsdf::BsdfParams;
use crate::math::{Direction, Frame, Rgb, Vec3};
use crate::neural::NeuralBsdf;
use crate::slice::RowColumnSampler;
use crate::transport::ImportanceMap;
use crate::Error;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Camera {
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_degrees: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// Primary ray through pixel `(x, y)` at sub-pixel offset `(jx, jy)`.
    pub fn ray(&self, x: usize, y: usize, jx: f64, jy: f64) -> Ray {
        let forward = (self.look_at - self.eye).normalized();
        let right = forward.cross(self.up.normalized()).normalized();
        let up = right.cross(forward);
        let tan_half = (self.fov_degrees.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let ndc_x = ((x as f64 + jx) / self.width as f64 * 2.0 - 1.0) * tan_half * aspect;
        let ndc_y = (1.0 - (y as f64 + jy) / self.height as f64 * 2.0) * tan_half;
        Ray {
            origin: self.eye,
            dir: (forward + right * ndc_x + up * ndc_y).normalized(),
        }
    }
}

/// How a material draws outgoing directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Half vectors from the normal distribution.
    Ndf,
    /// Half vectors from the visible-normal distribution.
    Vndf,
    /// Microsurface random walk; no pdf, so MIS refuses it.
    RandomWalk,
    /// Baked importance maps (nearest incident direction in a family).
    BakedMap,
    /// The three trained networks.
    Neural,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ndf => "ndf",
            SamplerKind::Vndf => "vndf",
            SamplerKind::RandomWalk => "random_walk",
            SamplerKind::BakedMap => "baked_map",
            SamplerKind::Neural => "neural",
        }
    }
}

/// A family of baked maps over incident directions; lookups snap to the
/// nearest baked incidence. Sampling weight and pdf always come from the
/// same map, so the estimator stays unbiased for any incident direction.
#[derive(Debug, Clone)]
pub struct BakedFamily {
    pub entries: Vec<(Direction, ImportanceMap)>,
}

impl BakedFamily {
    pub fn new(entries: Vec<(Direction, ImportanceMap)>) -> crate::Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidScene("baked family is empty".into()));
        }
        Ok(BakedFamily { entries })
    }

    pub fn lookup(&self, wi: Direction) -> &ImportanceMap {
        let mut best = 0usize;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, (dir, _)) in self.entries.iter().enumerate() {
            let d = dir.dot(wi);
            if d > best_dot {
                best_dot = d;
                best = i;
            }
        }
        &self.entries[best].1
    }
}

/// Per-object appearance: the BSDF parameters plus the sampler binding and
/// its runtime attachments.
#[derive(Debug, Clone)]
pub struct Material {
    pub params: BsdfParams,
    pub sampler: SamplerKind,
    /// Walks per stochastic evaluation of the multiple-bounce model.
    pub eval_walks: usize,
    pub baked: Option<Arc<BakedFamily>>,
    pub neural: Option<Arc<NeuralBsdf>>,
}

impl Material {
    pub fn new(params: BsdfParams, sampler: SamplerKind) -> Self {
        Material {
            params,
            sampler,
            eval_walks: 8,
            baked: None,
            neural: None,
        }
    }

    pub fn with_baked(mut self, family: Arc<BakedFamily>) -> Self {
        self.baked = Some(family);
        self
    }

    pub fn with_neural(mut self, nets: Arc<NeuralBsdf>) -> Self {
        self.neural = Some(nets);
        self
    }
}

#[derive(Debug, Clone)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    /// Parallelogram spanned by two edges from an origin corner.
    Rect {
        origin: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
    },
    Mesh {
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    },
}

/// Intersection record: parametric distance, position, and shading frame
/// (tangent follows the shape's natural parameterization so anisotropy is
/// well defined).
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub frame: Frame,
    pub object: usize,
}

impl Shape {
    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<(f64, Vec3, Frame)> {
        match self {
            Shape::Sphere { center, radius } => {
                let oc = ray.origin - *center;
                let b = oc.dot(ray.dir);
                let c = oc.length_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let mut t = -b - sq;
                if t < 1e-6 {
                    t = -b + sq;
                }
                if t < 1e-6 || t > t_max {
                    return None;
                }
                let point = ray.origin + ray.dir * t;
                let normal = (point - *center).normalized();
                // Tangent along the azimuthal direction of the sphere param.
                let tangent_hint = Vec3::new(-normal.y, normal.x, 0.0);
                Some((t, point, Frame::new(normal, tangent_hint)))
            }
            Shape::Rect {
                origin,
                edge_u,
                edge_v,
            } => {
                let normal = edge_u.cross(*edge_v);
                let area2 = normal.length();
                if area2 < 1e-12 {
                    return None;
                }
                let n = normal / area2;
                let denom = ray.dir.dot(n);
                if denom.abs() < 1e-9 {
                    return None;
                }
                let t = (*origin - ray.origin).dot(n) / denom;
                if t < 1e-6 || t > t_max {
                    return None;
                }
                let p = ray.origin + ray.dir * t;
                let d = p - *origin;
                let uu = edge_u.length_squared();
                let vv = edge_v.length_squared();
                let uv = edge_u.dot(*edge_v);
                let du = d.dot(*edge_u);
                let dv = d.dot(*edge_v);
                let det = uu * vv - uv * uv;
                let a = (du * vv - dv * uv) / det;
                let b = (dv * uu - du * uv) / det;
                if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                    return None;
                }
                Some((t, p, Frame::new(n, *edge_u)))
            }
            Shape::Mesh {
                vertices,
                triangles,
            } => {
                let mut best: Option<(f64, Vec3, Frame)> = None;
                let mut closest = t_max;
                for tri in triangles {
                    let v0 = vertices[tri[0] as usize];
                    let v1 = vertices[tri[1] as usize];
                    let v2 = vertices[tri[2] as usize];
                    if let Some((t, p, frame)) =
                        intersect_triangle(ray, v0, v1, v2, closest)
                    {
                        closest = t;
                        best = Some((t, p, frame));
                    }
                }
                best
            }
        }
    }
}

/// Möller-Trumbore.
fn intersect_triangle(
    ray: &Ray,
    v0: Vec3,
    v1: Vec3,
    v2: Vec3,
    t_max: f64,
) -> Option<(f64, Vec3, Frame)> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let pvec = ray.dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - v0;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.dir.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t < 1e-6 || t > t_max {
        return None;
    }
    let p = ray.origin + ray.dir * t;
    let mut n = e1.cross(e2).normalized();
    if n.dot(ray.dir) > 0.0 {
        n = -n;
    }
    Some((t, p, Frame::new(n, e1)))
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    pub shape: Shape,
    pub material: Material,
}

/// Equirectangular environment map, importance-sampled by luminance.
#[derive(Debug, Clone)]
pub struct EnvMap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
    sampler: RowColumnSampler,
    /// Per-texel probability of the luminance·sinθ distribution.
    texel_prob: Vec<f64>,
}

impl EnvMap {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> crate::Result<Self> {
        assert_eq!(pixels.len(), width * height);
        // Weight by sinθ so the distribution is over solid angle.
        let mut weighted = vec![0.0f64; width * height];
        for y in 0..height {
            let sin_theta = (std::f64::consts::PI * (y as f64 + 0.5) / height as f64).sin();
            for x in 0..width {
                weighted[y * width + x] = pixels[y * width + x].luminance().max(0.0) * sin_theta;
            }
        }
        let total: f64 = weighted.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidScene("environment map is black".into()));
        }
        let texel_prob: Vec<f64> = weighted.iter().map(|w| w / total).collect();
        // Reuse the slice sampler machinery for the marginal/conditional CDFs.
        let sampler = RowColumnSampler::from_table(width, height, &texel_prob);
        Ok(EnvMap {
            width,
            height,
            pixels,
            sampler,
            texel_prob,
        })
    }

    pub fn constant(radiance: Rgb) -> Self {
        EnvMap::new(4, 2, vec![radiance; 8]).expect("constant env")
    }

    /// Smooth procedural sky with a bright elongated lobe; deterministic,
    /// used by built-in validation scenes.
    pub fn procedural_sky(width: usize, height: usize, intensity: f64) -> Self {
        let mut pixels = vec![Rgb::BLACK; width * height];
        for y in 0..height {
            let theta = std::f64::consts::PI * (y as f64 + 0.5) / height as f64;
            for x in 0..width {
                let phi = 2.0 * std::f64::consts::PI * (x as f64 + 0.5) / width as f64;
                let d = Vec3::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                );
                // Horizon gradient + one warm lobe + one cool lobe.
                let base = 0.25 + 0.35 * (d.z * 0.5 + 0.5);
                let lobe_dir = Vec3::new(0.4, 0.65, 0.65).normalized();
                let lobe = (d.dot(lobe_dir).max(0.0)).powi(24) * 6.0;
                let lobe2_dir = Vec3::new(-0.7, -0.2, 0.3).normalized();
                let lobe2 = (d.dot(lobe2_dir).max(0.0)).powi(6) * 1.2;
                pixels[y * width + x] = Rgb::new(
                    base * 0.9 + lobe * 1.0 + lobe2 * 0.3,
                    base * 0.95 + lobe * 0.9 + lobe2 * 0.5,
                    base * 1.1 + lobe * 0.7 + lobe2 * 0.9,
                ) * intensity;
            }
        }
        EnvMap::new(width, height, pixels).expect("procedural sky")
    }

    fn uv_of(&self, dir: Vec3) -> (f64, f64) {
        let theta = dir.z.clamp(-1.0, 1.0).acos();
        let phi = dir.y.atan2(dir.x);
        let u = (phi / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
        let v = theta / std::f64::consts::PI;
        (u, v)
    }

    pub fn radiance(&self, dir: Vec3) -> Rgb {
        let (u, v) = self.uv_of(dir);
        let x = ((u * self.width as f64) as usize).min(self.width - 1);
        let y = ((v * self.height as f64) as usize).min(self.height - 1);
        self.pixels[y * self.width + x]
    }

    /// Draws a direction proportional to luminance·sinθ; returns
    /// (direction, radiance, solid-angle pdf).
    pub fn sample(&self, u1: f64, u2: f64) -> (Vec3, Rgb, f64) {
        let c = self
            .sampler
            .sample(crate::math::SquareCoord::new(u1, u2));
        let (u, v) = (c.s, c.t);
        let theta = v * std::f64::consts::PI;
        let phi = u * 2.0 * std::f64::consts::PI;
        let dir = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        (dir, self.radiance(dir), self.pdf(dir))
    }

    /// Solid-angle pdf of [`EnvMap::sample`] in the given direction.
    pub fn pdf(&self, dir: Vec3) -> f64 {
        let (u, v) = self.uv_of(dir);
        let x = ((u * self.width as f64) as usize).min(self.width - 1);
        let y = ((v * self.height as f64) as usize).min(self.height - 1);
        let texel = self.texel_prob[y * self.width + x];
        let sin_theta = (v * std::f64::consts::PI).sin().max(1e-9);
        // dω per texel = (2π/w)(π/h) sinθ.
        texel * (self.width * self.height) as f64
            / (2.0 * std::f64::consts::PI * std::f64::consts::PI * sin_theta)
    }
}

#[derive(Debug, Clone)]
pub enum Light {
    /// One-sided rectangular area light (emits along +normal).
    Rect {
        origin: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        radiance: Rgb,
    },
    Env(Arc<EnvMap>),
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub camera: Camera,
    pub objects: Vec<SceneObject>,
    pub lights: Vec<Light>,
}

impl Scene {
    pub fn validate(&self) -> crate::Result<()> {
        if self.lights.is_empty() {
            return Err(Error::InvalidScene("scene has no lights".into()));
        }
        for obj in &self.objects {
            obj.material.params.validate()?;
            match obj.material.sampler {
                SamplerKind::BakedMap if obj.material.baked.is_none() => {
                    return Err(Error::InvalidScene(
                        "baked_map sampler without an attached map family".into(),
                    ));
                }
                SamplerKind::Neural if obj.material.neural.is_none() => {
                    return Err(Error::InvalidScene(
                        "neural sampler without attached weights".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Closest hit across all objects.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut closest = f64::INFINITY;
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some((t, point, frame)) = obj.shape.intersect(ray, closest) {
                closest = t;
                best = Some(Hit {
                    t,
                    point,
                    frame,
                    object: i,
                });
            }
        }
        best
    }

    /// Anything between the two points (for shadow rays)?
    pub fn occluded(&self, from: Vec3, dir: Vec3, t_max: f64) -> bool {
        let ray = Ray { origin: from, dir };
        for obj in &self.objects {
            if obj.shape.intersect(&ray, t_max - 1e-5).is_some() {
                return true;
            }
        }
        false
    }

    /// Radiance a ray escaping the scene picks up from environment lights.
    pub fn environment(&self, dir: Vec3) -> Rgb {
        let mut total = Rgb::BLACK;
        for light in &self.lights {
            if let Light::Env(env) = light {
                total += env.radiance(dir);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_intersection_and_frame() {
        let shape = Shape::Sphere {
            center: Vec3::new(0.0, 0.0, 0.0),
            radius: 1.0,
        };
        let ray = Ray {
            origin: Vec3::new(0.0, 0.0, 3.0),
            dir: Vec3::new(0.0, 0.0, -1.0),
        };
        let (t, p, frame) = shape.intersect(&ray, f64::INFINITY).unwrap();
        assert!((t - 2.0).abs() < 1e-9);
        assert!((p.z - 1.0).abs() < 1e-9);
        assert!((frame.normal.z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rect_intersection_bounds() {
        let shape = Shape::Rect {
            origin: Vec3::new(-1.0, -1.0, 0.0),
            edge_u: Vec3::new(2.0, 0.0, 0.0),
            edge_v: Vec3::new(0.0, 2.0, 0.0),
        };
        let hit = |x: f64, y: f64| {
            shape
                .intersect(
                    &Ray {
                        origin: Vec3::new(x, y, 1.0),
                        dir: Vec3::new(0.0, 0.0, -1.0),
                    },
                    f64::INFINITY,
                )
                .is_some()
        };
        assert!(hit(0.0, 0.0));
        assert!(hit(0.9, -0.9));
        assert!(!hit(1.1, 0.0));
    }

    #[test]
    fn mesh_triangle_hit() {
        let shape = Shape::Mesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2]],
        };
        let ray = Ray {
            origin: Vec3::new(0.2, 0.2, 1.0),
            dir: Vec3::new(0.0, 0.0, -1.0),
        };
        assert!(shape.intersect(&ray, f64::INFINITY).is_some());
    }

    #[test]
    fn env_pdf_integrates_to_one() {
        let env = EnvMap::procedural_sky(64, 32, 1.0);
        // Quadrature over the sphere in (z, φ).
        let (n_cos, n_phi) = (512, 512);
        let mut integral = 0.0;
        for iz in 0..n_cos {
            let z = -1.0 + 2.0 * (iz as f64 + 0.5) / n_cos as f64;
            let sin = (1.0f64 - z * z).max(0.0).sqrt();
            for ip in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * (ip as f64 + 0.5) / n_phi as f64;
                let d = Vec3::new(sin * phi.cos(), sin * phi.sin(), z);
                integral += env.pdf(d);
            }
        }
        integral *= 4.0 * std::f64::consts::PI / (n_cos * n_phi) as f64;
        assert!((integral - 1.0).abs() < 0.02, "∫pdf = {integral}");
    }

    #[test]
    fn env_sampling_matches_pdf() {
        use crate::math::{chi_square_test, RngStream};
        let env = EnvMap::procedural_sky(32, 16, 1.0);
        let mut rng = RngStream::new(8, 8);
        let mut observed = vec![0u64; env.width * env.height];
        let n = 500_000;
        for _ in 0..n {
            let (dir, _, _) = env.sample(rng.next_f64(), rng.next_f64());
            let (u, v) = env.uv_of(dir);
            let x = ((u * env.width as f64) as usize).min(env.width - 1);
            let y = ((v * env.height as f64) as usize).min(env.height - 1);
            observed[y * env.width + x] += 1;
        }
        let r = chi_square_test(&observed, &env.texel_prob);
        assert!(r.p_value > 0.01, "chi-square p = {}", r.p_value);
    }

    #[test]
    fn scene_without_lights_is_invalid() {
        let scene = Scene {
            camera: Camera {
                eye: Vec3::new(0.0, 0.0, 5.0),
                look_at: Vec3::ZERO,
                up: Vec3::new(0.0, 1.0, 0.0),
                fov_degrees: 40.0,
                width: 8,
                height: 8,
            },
            objects: Vec::new(),
            lights: Vec::new(),
        };
        assert!(scene.validate().is_err());
    }
}
