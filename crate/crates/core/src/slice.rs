//! Tabulated 2D BSDF slices and their discretization into point sets.
//!
//! Fixing the parameters and the incident direction reduces a BSDF to a 2D
//! function of the outgoing direction. [`SliceImage`] stores that function on
//! an equal-area square grid: per-texel RGB (`f·cos`, premultiplied by the
//! constant square-to-solid-angle Jacobian so that texel sums approximate
//! solid-angle integrals) plus a normalized grayscale density. Row-column
//! sampling inverts the density's marginal/conditional CDFs; `discretize`
//! pushes a stratified grid through it to produce the weighted-equal point
//! set consumed by the assignment solver.

use rayon::prelude::*;

use crate::bsdf::{eval_multi_stats, eval_single, BsdfParams, ScatterModel, WalkStats};
use crate::math::{square_to_direction, Direction, Domain, Rgb, RngStream, SquareCoord};
use crate::Error;

/// Configuration for [`tabulate_slice`].
#[derive(Debug, Clone, Copy)]
pub struct TabulateConfig {
    /// Texels per side (the slice is `resolution × resolution`).
    pub resolution: usize,
    /// Target relative standard error per texel for stochastic models.
    pub noise_target: f64,
    /// Walk budget per texel (stochastic models).
    pub max_walks: usize,
    /// Base seed; texels derive independent streams from it.
    pub seed: u64,
}

impl Default for TabulateConfig {
    fn default() -> Self {
        TabulateConfig {
            resolution: 64,
            noise_target: 0.01,
            max_walks: 100_000,
            seed: 0,
        }
    }
}

/// A tabulated BSDF slice over the equal-area square domain.
#[derive(Debug, Clone)]
pub struct SliceImage {
    pub resolution: usize,
    pub domain: Domain,
    /// Per-texel `f·cos` at the texel-center direction, premultiplied by the
    /// square-domain Jacobian (2π or 4π).
    pub rgb: Vec<Rgb>,
    /// Normalized grayscale density (sums to 1).
    pub density: Vec<f64>,
    /// Walk diagnostics for stochastic tabulations.
    pub walk_stats: WalkStats,
}

impl SliceImage {
    /// Builds a slice from raw premultiplied RGB texels, normalizing the
    /// luminance into `density`. Fails when every texel is zero.
    pub fn from_rgb(resolution: usize, domain: Domain, rgb: Vec<Rgb>) -> crate::Result<Self> {
        assert_eq!(rgb.len(), resolution * resolution);
        let mut density: Vec<f64> = rgb.iter().map(|c| c.luminance().max(0.0)).collect();
        let total: f64 = density.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::EmptySlice);
        }
        for d in &mut density {
            *d /= total;
        }
        Ok(SliceImage {
            resolution,
            domain,
            rgb,
            density,
            walk_stats: WalkStats::default(),
        })
    }

    /// Slice with uniform density and constant rgb, mostly for tests.
    pub fn uniform(resolution: usize, domain: Domain) -> Self {
        let n = resolution * resolution;
        SliceImage {
            resolution,
            domain,
            rgb: vec![Rgb::WHITE; n],
            density: vec![1.0 / n as f64; n],
            walk_stats: WalkStats::default(),
        }
    }

    /// Builds a slice whose density follows an arbitrary grayscale image
    /// (the image-as-density diagnostic); `rgb` is set to the density.
    pub fn from_grayscale(resolution: usize, domain: Domain, gray: &[f64]) -> crate::Result<Self> {
        let rgb = gray.iter().map(|&g| Rgb::splat(g.max(0.0))).collect();
        SliceImage::from_rgb(resolution, domain, rgb)
    }

    #[inline]
    pub fn texel_center(&self, x: usize, y: usize) -> SquareCoord {
        SquareCoord::new(
            (x as f64 + 0.5) / self.resolution as f64,
            (y as f64 + 0.5) / self.resolution as f64,
        )
    }

    #[inline]
    pub fn texel_of(&self, c: SquareCoord) -> usize {
        let x = ((c.s * self.resolution as f64) as usize).min(self.resolution - 1);
        let y = ((c.t * self.resolution as f64) as usize).min(self.resolution - 1);
        y * self.resolution + x
    }

    /// Piecewise-constant density as a pdf over the unit square.
    #[inline]
    pub fn density_pdf(&self, c: SquareCoord) -> f64 {
        self.density[self.texel_of(c)] * (self.resolution * self.resolution) as f64
    }

    /// Sum of `rgb × texel area`, an estimate of `∫ f·cos dω`.
    pub fn rgb_integral(&self) -> Rgb {
        let mut sum = Rgb::BLACK;
        for c in &self.rgb {
            sum += *c;
        }
        sum * (1.0 / (self.resolution * self.resolution) as f64)
    }
}

/// Evaluates the BSDF slice for `(params, wi)` at every texel center.
///
/// Analytic models evaluate directly; the multiple-bounce model accumulates
/// random walks per texel until the relative standard error of the luminance
/// falls below `noise_target` (or the walk budget is hit). Texels own
/// deterministic RNG streams, so results are independent of scheduling.
pub fn tabulate_slice(
    params: &BsdfParams,
    wi: Direction,
    config: &TabulateConfig,
) -> crate::Result<SliceImage> {
    params.validate()?;
    assert!(config.resolution >= 16, "slice resolution below 16");
    if wi.z() <= 1e-6 {
        return Err(Error::EmptySlice);
    }
    let res = config.resolution;
    let domain = params.domain();
    let jac = domain.jacobian();

    let texels: Vec<(Rgb, WalkStats)> = (0..res * res)
        .into_par_iter()
        .map(|idx| {
            let x = idx % res;
            let y = idx / res;
            let c = SquareCoord::new(
                (x as f64 + 0.5) / res as f64,
                (y as f64 + 0.5) / res as f64,
            );
            let wo = square_to_direction(c, domain);
            match params.model {
                ScatterModel::SingleBounce => {
                    (eval_single(params, wi, wo) * jac, WalkStats::default())
                }
                ScatterModel::MultiBounce => {
                    let mut rng = RngStream::new(config.seed, 0x7AB5_0000 ^ idx as u64);
                    let mut stats = WalkStats::default();
                    // Accumulate in batches until the luminance standard
                    // error is below target.
                    let batch = 64usize;
                    let mut sum = Rgb::BLACK;
                    let mut lum_sum = 0.0;
                    let mut lum_sq = 0.0;
                    let mut n = 0usize;
                    while n < config.max_walks {
                        for _ in 0..batch {
                            let (v, st) = eval_multi_stats(params, wi, wo, &mut rng, 1);
                            stats.merge(st);
                            sum += v;
                            let l = v.luminance();
                            lum_sum += l;
                            lum_sq += l * l;
                        }
                        n += batch;
                        let mean = lum_sum / n as f64;
                        if mean <= 0.0 {
                            if n >= 4096 {
                                break; // genuinely dark texel
                            }
                            continue;
                        }
                        let var = (lum_sq / n as f64 - mean * mean).max(0.0);
                        let se = (var / n as f64).sqrt();
                        if se <= config.noise_target * mean {
                            break;
                        }
                    }
                    (sum * (jac / n as f64), stats)
                }
            }
        })
        .collect();

    let mut stats = WalkStats::default();
    let mut rgb = Vec::with_capacity(res * res);
    for (c, st) in texels {
        if !c.is_finite() {
            return Err(Error::EmptySlice);
        }
        rgb.push(c);
        stats.merge(st);
    }
    let mut slice = SliceImage::from_rgb(res, domain, rgb)?;
    slice.walk_stats = stats;
    Ok(slice)
}

/// Marginal (in `t`) and conditional (in `s`) CDF tables of a density grid;
/// the classic piecewise-linear 2D inverse-transform sampler.
#[derive(Debug, Clone)]
pub struct RowColumnSampler {
    height: usize,
    /// Row masses (marginal over t), normalized.
    row_mass: Vec<f64>,
    /// Per-row texel masses, each row normalized.
    rows: Vec<Vec<f64>>,
}

impl RowColumnSampler {
    pub fn new(slice: &SliceImage) -> Self {
        Self::from_table(slice.resolution, slice.resolution, &slice.density)
    }

    /// Builds the CDF tables for an arbitrary `width × height` density grid.
    pub fn from_table(width: usize, height: usize, density: &[f64]) -> Self {
        assert_eq!(density.len(), width * height);
        let mut row_mass = vec![0.0; height];
        let mut rows = vec![vec![0.0; width]; height];
        for y in 0..height {
            for x in 0..width {
                let d = density[y * width + x];
                row_mass[y] += d;
                rows[y][x] = d;
            }
        }
        let total: f64 = row_mass.iter().sum();
        assert!(total > 0.0, "density grid is empty");
        for m in &mut row_mass {
            *m /= total;
        }
        for row in rows.iter_mut() {
            let m: f64 = row.iter().sum();
            if m > 0.0 {
                for v in row.iter_mut() {
                    *v /= m;
                }
            } else {
                // Empty row: uniform conditional (its mass is zero anyway).
                for v in row.iter_mut() {
                    *v = 1.0 / width as f64;
                }
            }
        }
        RowColumnSampler {
            height,
            row_mass,
            rows,
        }
    }

    /// Inverts a normalized piecewise-constant table at `u`, returning a
    /// continuous coordinate in [0,1].
    fn invert(table: &[f64], u: f64) -> f64 {
        let n = table.len();
        let mut acc = 0.0;
        for (i, &m) in table.iter().enumerate() {
            if u < acc + m || i == n - 1 {
                let frac = if m > 0.0 {
                    ((u - acc) / m).clamp(0.0, 1.0)
                } else {
                    0.5
                };
                return (i as f64 + frac) / n as f64;
            }
            acc += m;
        }
        1.0
    }

    /// Maps a uniform square point to a density-distributed square point:
    /// marginal inverse in `t`, then the conditional inverse in `s`.
    pub fn sample(&self, xi: SquareCoord) -> SquareCoord {
        let t = Self::invert(&self.row_mass, xi.t.clamp(0.0, 1.0));
        let row = ((t * self.height as f64) as usize).min(self.height - 1);
        let s = Self::invert(&self.rows[row], xi.s.clamp(0.0, 1.0));
        SquareCoord::new(s, t)
    }
}

/// One-shot row-column sampling of a slice density.
pub fn row_column_sample(slice: &SliceImage, xi: SquareCoord) -> SquareCoord {
    RowColumnSampler::new(slice).sample(xi)
}

/// An ordered, uniformly weighted point set in the unit square.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<SquareCoord>,
}

impl PointSet {
    /// The regular `√n × √n` grid of stratum centers (the uniform source set).
    pub fn uniform_grid(n: usize) -> crate::Result<Self> {
        let side = perfect_square_side(n)?;
        let mut points = Vec::with_capacity(n);
        for y in 0..side {
            for x in 0..side {
                points.push(SquareCoord::new(
                    (x as f64 + 0.5) / side as f64,
                    (y as f64 + 0.5) / side as f64,
                ));
            }
        }
        Ok(PointSet { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn perfect_square_side(n: usize) -> crate::Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::NotPerfectSquare { n });
    }
    Ok(side)
}

/// Discretizes a slice into `n` points by pushing the stratum centers of a
/// regular `√n × √n` grid through row-column sampling. Point density is then
/// proportional to the slice density; the grid itself is the matching
/// uniform set.
pub fn discretize(slice: &SliceImage, n: usize) -> crate::Result<PointSet> {
    let side = perfect_square_side(n)?;
    let sampler = RowColumnSampler::new(slice);
    let mut points = Vec::with_capacity(n);
    for y in 0..side {
        for x in 0..side {
            let xi = SquareCoord::new(
                (x as f64 + 0.5) / side as f64,
                (y as f64 + 0.5) / side as f64,
            );
            points.push(sampler.sample(xi));
        }
    }
    Ok(PointSet { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::chi_square_test;

    fn gaussian_slice(res: usize) -> SliceImage {
        let mut gray = vec![0.0; res * res];
        for y in 0..res {
            for x in 0..res {
                let dx = (x as f64 + 0.5) / res as f64 - 0.35;
                let dy = (y as f64 + 0.5) / res as f64 - 0.6;
                gray[y * res + x] = (-(dx * dx + dy * dy) / 0.02).exp() + 0.01;
            }
        }
        SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap()
    }

    #[test]
    fn density_normalizes_to_one() {
        let p = BsdfParams::conductor(Rgb::splat(0.9), 0.4, 0.4, ScatterModel::SingleBounce);
        let wi = Direction::from_spherical(0.6, 0.8, 0.0);
        let slice = tabulate_slice(&p, wi, &TabulateConfig::default()).unwrap();
        let total: f64 = slice.density.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(slice.density.iter().all(|&d| d >= 0.0));
        assert!(slice.rgb.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn grazing_incidence_is_empty_slice() {
        let p = BsdfParams::conductor(Rgb::WHITE, 0.3, 0.3, ScatterModel::SingleBounce);
        let wi = Direction::from_unit_unchecked(crate::math::Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            tabulate_slice(&p, wi, &TabulateConfig::default()),
            Err(Error::EmptySlice)
        ));
    }

    #[test]
    fn isotropic_normal_incidence_slice_is_rotationally_symmetric() {
        let p = BsdfParams::conductor(Rgb::WHITE, 1.0, 1.0, ScatterModel::SingleBounce);
        let slice = tabulate_slice(&p, Direction::NORMAL, &TabulateConfig::default()).unwrap();
        let res = slice.resolution;
        // A 90° rotation of the square is a 90° azimuth rotation of the
        // direction domain for the concentric parameterization.
        for y in 0..res {
            for x in 0..res {
                let a = slice.density[y * res + x];
                let b = slice.density[x * res + (res - 1 - y)];
                let scale = a.max(b).max(1e-12);
                assert!(
                    (a - b).abs() / scale < 0.02,
                    "rotation asymmetry at ({x},{y}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn rgb_integral_matches_quadrature() {
        let p =
            BsdfParams::conductor(Rgb::new(0.9, 0.7, 0.3), 0.35, 0.2, ScatterModel::SingleBounce);
        let wi = Direction::from_spherical(0.8, 0.6, 0.4);
        let slice = tabulate_slice(&p, wi, &TabulateConfig::default()).unwrap();
        let sum = slice.rgb_integral();
        let albedo = crate::bsdf::directional_albedo(&p, wi, 2048, 256);
        for (s, a) in [(sum.r, albedo.r), (sum.g, albedo.g), (sum.b, albedo.b)] {
            assert!((s - a).abs() / a < 0.01, "slice sum {s} vs quadrature {a}");
        }
    }

    #[test]
    fn dielectric_slice_mass_split_matches_fresnel_albedos() {
        let p = BsdfParams::dielectric(1.5, 0.2, 0.2, ScatterModel::SingleBounce);
        let wi = Direction::from_spherical(0.6, 0.8, 0.0);
        let slice = tabulate_slice(&p, wi, &TabulateConfig::default()).unwrap();
        assert_eq!(slice.domain, Domain::Sphere);
        let res = slice.resolution;
        let mut reflect = 0.0;
        let mut refract = 0.0;
        for y in 0..res {
            for x in 0..res {
                let m = slice.density[y * res + x];
                if ((y as f64 + 0.5) / res as f64) < 0.5 {
                    reflect += m;
                } else {
                    refract += m;
                }
            }
        }
        assert!(reflect > 0.0 && refract > 0.0);
        // Oracle: quadrature of each side of eval_single.
        let mut quad_reflect = 0.0;
        let mut quad_refract = 0.0;
        let (n_cos, n_phi) = (2048, 256);
        for &side in &[1.0, -1.0] {
            for iz in 0..n_cos {
                let z = side * (iz as f64 + 0.5) / n_cos as f64;
                let sin = (1.0_f64 - z * z).max(0.0).sqrt();
                for ip in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * (ip as f64 + 0.5) / n_phi as f64;
                    let wo = Direction::from_spherical(sin, z, phi);
                    let v = eval_single(&p, wi, wo).luminance();
                    if side > 0.0 {
                        quad_reflect += v;
                    } else {
                        quad_refract += v;
                    }
                }
            }
        }
        let slice_ratio = reflect / refract;
        let quad_ratio = quad_reflect / quad_refract;
        assert!(
            (slice_ratio - quad_ratio).abs() / quad_ratio < 0.05,
            "slice split {slice_ratio} vs quadrature {quad_ratio}"
        );
    }

    #[test]
    fn multibounce_tabulation_reproducible_across_seeds_within_noise() {
        let p = BsdfParams::conductor(Rgb::WHITE, 0.6, 0.6, ScatterModel::MultiBounce);
        let wi = Direction::from_spherical(0.6, 0.8, 0.0);
        let config = TabulateConfig {
            resolution: 16,
            noise_target: 0.02,
            max_walks: 50_000,
            seed: 7,
        };
        let slice = tabulate_slice(&p, wi, &config).unwrap();
        assert!(slice.walk_stats.walks > 0);
        let config2 = TabulateConfig { seed: 8, ..config };
        let slice2 = tabulate_slice(&p, wi, &config2).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in slice.rgb.iter().zip(&slice2.rgb) {
            let scale = a.luminance().max(b.luminance()).max(1e-6);
            worst = worst.max((a.luminance() - b.luminance()).abs() / scale);
        }
        assert!(worst < 0.15, "worst texel disagreement {worst}");
    }

    #[test]
    fn tabulation_is_deterministic() {
        let p = BsdfParams::conductor(Rgb::WHITE, 0.5, 0.2, ScatterModel::MultiBounce);
        let wi = Direction::from_spherical(0.8, 0.6, 1.0);
        let config = TabulateConfig {
            resolution: 16,
            noise_target: 0.05,
            max_walks: 5_000,
            seed: 42,
        };
        let a = tabulate_slice(&p, wi, &config).unwrap();
        let b = tabulate_slice(&p, wi, &config).unwrap();
        assert_eq!(a.rgb, b.rgb);
    }

    #[test]
    fn constant_density_row_column_is_identity() {
        let slice = SliceImage::uniform(64, Domain::Hemisphere);
        let sampler = RowColumnSampler::new(&slice);
        let mut rng = RngStream::new(3, 3);
        for _ in 0..10_000 {
            let xi = SquareCoord::new(rng.next_f64(), rng.next_f64());
            let out = sampler.sample(xi);
            assert!(xi.dist(out) < 1e-9, "{xi:?} -> {out:?}");
        }
    }

    #[test]
    fn concentrated_density_maps_into_texel() {
        let res = 32;
        let mut gray = vec![0.0; res * res];
        gray[10 * res + 20] = 1.0;
        let slice = SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap();
        let sampler = RowColumnSampler::new(&slice);
        let mut rng = RngStream::new(4, 4);
        for _ in 0..10_000 {
            let out = sampler.sample(SquareCoord::new(rng.next_f64(), rng.next_f64()));
            let x = (out.s * res as f64) as usize;
            let y = (out.t * res as f64) as usize;
            assert_eq!((x, y), (20, 10));
        }
    }

    #[test]
    fn row_column_samples_follow_density() {
        let slice = gaussian_slice(64);
        let sampler = RowColumnSampler::new(&slice);
        let mut rng = RngStream::new(5, 6);
        let bins = 16usize;
        let mut observed = vec![0u64; bins * bins];
        let n = 1_000_000;
        for _ in 0..n {
            let out = sampler.sample(SquareCoord::new(rng.next_f64(), rng.next_f64()));
            let x = ((out.s * bins as f64) as usize).min(bins - 1);
            let y = ((out.t * bins as f64) as usize).min(bins - 1);
            observed[y * bins + x] += 1;
        }
        let mut expected = vec![0.0f64; bins * bins];
        let scale = slice.resolution / bins;
        for y in 0..slice.resolution {
            for x in 0..slice.resolution {
                expected[(y / scale) * bins + (x / scale)] +=
                    slice.density[y * slice.resolution + x];
            }
        }
        let r = chi_square_test(&observed, &expected);
        assert!(r.p_value > 0.01, "chi-square p = {}", r.p_value);
    }

    #[test]
    fn uniform_slice_discretizes_to_the_grid() {
        let slice = SliceImage::uniform(64, Domain::Hemisphere);
        let beta = discretize(&slice, 4096).unwrap();
        let alpha = PointSet::uniform_grid(4096).unwrap();
        for (a, b) in alpha.points.iter().zip(&beta.points) {
            assert!(a.dist(*b) < 1e-9);
        }
    }

    #[test]
    fn discretize_requires_perfect_square() {
        let slice = SliceImage::uniform(16, Domain::Hemisphere);
        assert!(matches!(
            discretize(&slice, 1000),
            Err(Error::NotPerfectSquare { n: 1000 })
        ));
        assert_eq!(discretize(&slice, 1024).unwrap().len(), 1024);
    }

    #[test]
    fn binned_points_recover_density() {
        let slice = gaussian_slice(64);
        for n in [1024usize, 4096] {
            let beta = discretize(&slice, n).unwrap();
            assert_eq!(beta.len(), n);
            let bins = 16usize;
            let mut observed = vec![0u64; bins * bins];
            for p in &beta.points {
                let x = ((p.s * bins as f64) as usize).min(bins - 1);
                let y = ((p.t * bins as f64) as usize).min(bins - 1);
                observed[y * bins + x] += 1;
            }
            let mut expected = vec![0.0f64; bins * bins];
            let scale = slice.resolution / bins;
            for y in 0..slice.resolution {
                for x in 0..slice.resolution {
                    expected[(y / scale) * bins + (x / scale)] +=
                        slice.density[y * slice.resolution + x];
                }
            }
            let r = chi_square_test(&observed, &expected);
            assert!(
                r.p_value > 0.01,
                "n = {n}: chi-square p = {} stat {}",
                r.p_value,
                r.statistic
            );
        }
    }

    #[test]
    fn discretization_rate_error_shrinks_with_n() {
        // The continuous-to-discrete conversion is itself importance
        // sampling: binned rates converge to the density as n grows.
        let slice = gaussian_slice(64);
        let misfit_for = |n: usize| {
            let beta = discretize(&slice, n).unwrap();
            let bins = 8usize;
            let mut observed = vec![0u64; bins * bins];
            for p in &beta.points {
                let x = ((p.s * bins as f64) as usize).min(bins - 1);
                let y = ((p.t * bins as f64) as usize).min(bins - 1);
                observed[y * bins + x] += 1;
            }
            let mut expected = vec![0.0f64; bins * bins];
            let scale = slice.resolution / bins;
            for y in 0..slice.resolution {
                for x in 0..slice.resolution {
                    expected[(y / scale) * bins + (x / scale)] +=
                        slice.density[y * slice.resolution + x];
                }
            }
            let n_obs: u64 = observed.iter().sum();
            let mut stat = 0.0;
            for (o, e) in observed.iter().zip(&expected) {
                let rate = *o as f64 / n_obs as f64;
                stat += (rate - e) * (rate - e) / e.max(1e-12);
            }
            stat
        };
        let s_small = misfit_for(1024);
        let s_large = misfit_for(4096);
        assert!(
            s_large < s_small,
            "rate misfit should shrink: {s_small} -> {s_large}"
        );
    }

    #[test]
    fn normalization_invariance() {
        // Scaling rgb by a positive constant leaves density and β unchanged.
        let p = BsdfParams::conductor(Rgb::splat(0.8), 0.3, 0.5, ScatterModel::SingleBounce);
        let wi = Direction::from_spherical(0.6, 0.8, 0.9);
        let slice = tabulate_slice(&p, wi, &TabulateConfig::default()).unwrap();
        let scaled_rgb: Vec<Rgb> = slice.rgb.iter().map(|c| *c * 37.5).collect();
        let scaled = SliceImage::from_rgb(slice.resolution, slice.domain, scaled_rgb).unwrap();
        for (a, b) in slice.density.iter().zip(&scaled.density) {
            assert!((a - b).abs() < 1e-12);
        }
        let beta_a = discretize(&slice, 1024).unwrap();
        let beta_b = discretize(&scaled, 1024).unwrap();
        for (a, b) in beta_a.points.iter().zip(&beta_b.points) {
            assert!(a.dist(*b) < 1e-12);
        }
    }
}
