//! Baked importance maps: a per-texel image of the square-to-square mapping
//! that importance-samples one BSDF slice, with per-texel sampling weights.
//!
//! `bake` runs the full pipeline for one `(params, wi)` pair: tabulate the
//! slice, discretize it into a point set, solve the optimal-transport
//! assignment against the uniform grid, write the matched positions into the
//! texels, polish the map so its realized distribution matches the slice
//! density, and derive sampling weights so that `weight × pdf` reproduces
//! `f·cos` exactly at texel centers.

use serde::{Deserialize, Serialize};

use super::assignment::{solve_assignment, AssignMethod};
use super::polish::{polish_map, PolishConfig};
use crate::bsdf::BsdfParams;
use crate::math::{Direction, Domain, Rgb, SquareCoord};
use crate::slice::{discretize, PointSet, RowColumnSampler, SliceImage, TabulateConfig};

/// Provenance of a baked map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapMeta {
    pub params: BsdfParams,
    pub wi: Direction,
}

/// A baked square-to-square importance map with sampling weights.
#[derive(Debug, Clone)]
pub struct ImportanceMap {
    pub resolution: usize,
    pub domain: Domain,
    /// Per-texel target position; red/green channels of the map image.
    pub uv: Vec<SquareCoord>,
    /// Per-texel RGB sampling weight (`f·cos / pdf` at the texel's target).
    pub sw: Vec<Rgb>,
    /// The density this map realizes (sums to 1 over its own grid). For
    /// sphere maps this is the slice density with each half renormalized to
    /// its source band mass, so the realized pdf stays consistent.
    pub density: Vec<f64>,
    /// Resolution of the density grid (the source slice resolution).
    pub density_resolution: usize,
    /// First source row of the refraction band (`resolution` when the whole
    /// map is one band, i.e. hemisphere domains).
    pub seam_row: usize,
    pub meta: Option<MapMeta>,
}

/// Baking configuration.
#[derive(Debug, Clone, Copy)]
pub struct BakeConfig {
    pub slice: TabulateConfig,
    /// Point-set size; the map is `√points × √points`.
    pub points: usize,
    pub method: AssignMethod,
    /// Post-assignment smoothing and mass-correction schedule.
    pub polish: PolishConfig,
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig {
            slice: TabulateConfig::default(),
            points: 4096,
            method: AssignMethod::Exact,
            polish: PolishConfig::default(),
        }
    }
}

impl ImportanceMap {
    /// Full bake for one `(params, wi)` pair.
    pub fn bake(
        params: &BsdfParams,
        wi: Direction,
        config: &BakeConfig,
    ) -> crate::Result<ImportanceMap> {
        let slice = crate::slice::tabulate_slice(params, wi, &config.slice)?;
        let mut map = ImportanceMap::from_slice(&slice, config)?;
        map.meta = Some(MapMeta { params: *params, wi });
        Ok(map)
    }

    /// Bakes a map for an already tabulated slice via optimal transport.
    ///
    /// Sphere-domain slices (dielectrics) are baked as two independent
    /// transports: the source square splits at the row closest to the
    /// reflection mass fraction, the top band maps onto the reflection half
    /// and the bottom band onto the refraction half. Interpolation never
    /// crosses the split, so the seam discontinuity of the target domain
    /// cannot smear mass between the sides; the stored density carries the
    /// per-half renormalization that the split realizes.
    pub fn from_slice(slice: &SliceImage, config: &BakeConfig) -> crate::Result<ImportanceMap> {
        let side = (config.points as f64).sqrt() as usize;
        if side * side != config.points {
            return Err(crate::Error::NotPerfectSquare { n: config.points });
        }
        let mut map = match slice.domain {
            Domain::Hemisphere => {
                let alpha = PointSet::uniform_grid(config.points)?;
                let beta = discretize(slice, config.points)?;
                let assignment = solve_assignment(&alpha, &beta, config.method)?;
                let uv: Vec<SquareCoord> =
                    assignment.perm.iter().map(|&j| beta.points[j]).collect();
                ImportanceMap {
                    resolution: side,
                    domain: slice.domain,
                    uv,
                    sw: Vec::new(),
                    density: slice.density.clone(),
                    density_resolution: slice.resolution,
                    seam_row: side,
                    meta: None,
                }
            }
            Domain::Sphere => Self::from_slice_two_bands(slice, side, config)?,
        };
        polish_map(&mut map, &config.polish);
        map.derive_weights(slice);
        Ok(map)
    }

    fn from_slice_two_bands(
        slice: &SliceImage,
        side: usize,
        config: &BakeConfig,
    ) -> crate::Result<ImportanceMap> {
        let res_d = slice.resolution;
        let half_d = res_d / 2;
        let upper_mass: f64 = slice.density[..half_d * res_d].iter().sum();
        let seam_row = ((upper_mass * side as f64).round() as usize).clamp(1, side - 1);

        let mut uv = vec![SquareCoord::new(0.0, 0.0); side * side];
        for (rows, target_lo, target_rows, band_lo) in [
            (0..seam_row, 0usize, half_d, 0usize),
            (seam_row..side, half_d, res_d - half_d, seam_row),
        ] {
            let band_rows = rows.end - rows.start;
            if band_rows == 0 {
                continue;
            }
            // Target-half density table in its own [0,1]² coordinates.
            let table: Vec<f64> = (0..target_rows * res_d)
                .map(|i| slice.density[target_lo * res_d + i].max(0.0))
                .collect();
            let sampler = crate::slice::RowColumnSampler::from_table(res_d, target_rows, &table);
            // Stratified source band through the half's transform.
            let mut alpha_pts = Vec::with_capacity(band_rows * side);
            let mut beta_pts = Vec::with_capacity(band_rows * side);
            for by in 0..band_rows {
                for bx in 0..side {
                    let sx = (bx as f64 + 0.5) / side as f64;
                    let sy = (band_lo + by) as f64 + 0.5;
                    alpha_pts.push(SquareCoord::new(sx, sy / side as f64));
                    let xi = SquareCoord::new(sx, (by as f64 + 0.5) / band_rows as f64);
                    let local = sampler.sample(xi);
                    // Back to full-square coordinates of the target half.
                    let t = (target_lo as f64 + local.t * target_rows as f64) / res_d as f64;
                    beta_pts.push(SquareCoord::new(local.s, t));
                }
            }
            let alpha = PointSet { points: alpha_pts };
            let beta = PointSet { points: beta_pts };
            let assignment = solve_assignment(&alpha, &beta, config.method)?;
            for (i, &j) in assignment.perm.iter().enumerate() {
                let bx = i % side;
                let by = i / side;
                uv[(band_lo + by) * side + bx] = beta.points[j];
            }
        }
        // Per-half renormalized density: the split realizes exactly
        // seam_row/side of the samples on the reflection side.
        let mut density = slice.density.clone();
        let up_scale = (seam_row as f64 / side as f64) / upper_mass.max(1e-12);
        let down_scale =
            (1.0 - seam_row as f64 / side as f64) / (1.0 - upper_mass).max(1e-12);
        for y in 0..res_d {
            let scale = if y < half_d { up_scale } else { down_scale };
            for x in 0..res_d {
                density[y * res_d + x] *= scale;
            }
        }
        Ok(ImportanceMap {
            resolution: side,
            domain: slice.domain,
            uv,
            sw: Vec::new(),
            density,
            density_resolution: res_d,
            seam_row,
            meta: None,
        })
    }

    /// Row-column baseline: same image layout, but the mapping is the
    /// marginal/conditional inverse transform instead of optimal transport.
    /// Exact, but torn wherever adjacent rows reshuffle mass.
    pub fn from_slice_row_column(slice: &SliceImage, points: usize) -> crate::Result<ImportanceMap> {
        let alpha = PointSet::uniform_grid(points)?;
        let sampler = RowColumnSampler::new(slice);
        let uv: Vec<SquareCoord> = alpha.points.iter().map(|&c| sampler.sample(c)).collect();
        let side = (points as f64).sqrt() as usize;
        let mut map = ImportanceMap {
            resolution: side,
            domain: slice.domain,
            uv,
            sw: Vec::new(),
            density: slice.density.clone(),
            density_resolution: slice.resolution,
            seam_row: side,
            meta: None,
        };
        map.derive_weights(slice);
        Ok(map)
    }

    /// Sampling weights: `sw = rgb(uv) / (stored_density(uv)·N²)`, the RGB
    /// value over the realized grayscale pdf, so `sw × pdf` rebuilds the
    /// slice's `f·cos` in solid-angle measure. Sphere maps use the per-half
    /// renormalized stored density, which keeps the identity exact for the
    /// distribution the two-band query actually realizes.
    fn derive_weights(&mut self, slice: &SliceImage) {
        let res = self.density_resolution;
        self.sw = self
            .uv
            .iter()
            .map(|&uv| {
                let texel = slice.texel_of(uv);
                let pdf = self.density[texel] * (res * res) as f64;
                if pdf > 0.0 {
                    slice.rgb[texel] * (1.0 / pdf)
                } else {
                    Rgb::BLACK
                }
            })
            .collect();
    }

    #[inline]
    pub fn texel_count(&self) -> usize {
        self.resolution * self.resolution
    }

    /// Continuous lookup: bilinear interpolation of `uv` and `sw` between
    /// texel centers, with linear extrapolation in the half-texel border so
    /// the pushforward stays non-degenerate there. Sphere-domain maps hold
    /// two stacked half-square maps; interpolation never crosses the
    /// reflection/refraction seam.
    pub fn query(&self, xi: SquareCoord) -> (SquareCoord, Rgb) {
        let res = self.resolution;
        let (x0, x1, fx) = lattice_segment(xi.s, res);
        let (y0, y1, fy) = self.t_segment(xi.t);
        let idx = |x: usize, y: usize| y * res + x;
        let lerp_c = |a: Rgb, b: Rgb, f: f64| a + (b - a) * f;
        let c0 = lerp_c(self.sw[idx(x0, y0)], self.sw[idx(x1, y0)], fx);
        let c1 = lerp_c(self.sw[idx(x0, y1)], self.sw[idx(x1, y1)], fx);
        let sw = lerp_c(c0, c1, fy).map(|v| v.max(0.0));
        (self.query_uv(xi), sw)
    }

    /// The `uv` half of [`ImportanceMap::query`]; valid before weights are
    /// derived (the polish sweeps run in that state).
    pub fn query_uv(&self, xi: SquareCoord) -> SquareCoord {
        let res = self.resolution;
        let (x0, x1, fx) = lattice_segment(xi.s, res);
        let (y0, y1, fy) = self.t_segment(xi.t);
        let idx = |x: usize, y: usize| y * res + x;
        let lerp2 = |a: SquareCoord, b: SquareCoord, f: f64| SquareCoord {
            s: a.s + (b.s - a.s) * f,
            t: a.t + (b.t - a.t) * f,
        };
        let u0 = lerp2(self.uv[idx(x0, y0)], self.uv[idx(x1, y0)], fx);
        let u1 = lerp2(self.uv[idx(x0, y1)], self.uv[idx(x1, y1)], fx);
        let raw = lerp2(u0, u1, fy);
        // Border extrapolation can overshoot the square; fold the overshoot
        // back inside. Clamping instead piles a lumpy line-mass onto the
        // boundary that binned statistics see as a border sawtooth.
        SquareCoord::new(fold_unit(raw.s), fold_unit(raw.t))
    }

    /// Vertical lattice segment; two-band (sphere) maps interpolate within
    /// the band containing `t`, never across the split.
    #[inline]
    fn t_segment(&self, t: f64) -> (usize, usize, f64) {
        let res = self.resolution;
        if self.seam_row >= res {
            return lattice_segment(t, res);
        }
        let split = self.seam_row as f64 / res as f64;
        let g = t.clamp(0.0, 1.0) * res as f64 - 0.5;
        let (lo, hi) = if t < split {
            (0usize, self.seam_row)
        } else {
            (self.seam_row, res)
        };
        if hi - lo == 1 {
            return (lo, lo, 0.0);
        }
        let cell = g.floor().clamp(lo as f64, (hi - 2) as f64);
        let i0 = cell as usize;
        (i0, i0 + 1, g - cell)
    }

    /// Solid-angle pdf realized at target position `uv`: the slice density
    /// over the constant equal-area Jacobian.
    pub fn pdf(&self, uv: SquareCoord) -> f64 {
        let res = self.density_resolution;
        let x = ((uv.s * res as f64) as usize).min(res - 1);
        let y = ((uv.t * res as f64) as usize).min(res - 1);
        let d = self.density[y * res + x];
        d * (res * res) as f64 / self.domain.jacobian()
    }

    /// Mean distance between the targets of adjacent texels; the smoothness
    /// diagnostic (lower is smoother). The identity map at resolution `r`
    /// scores `1/r`, the texel-center spacing.
    pub fn locality_score(&self) -> f64 {
        let res = self.resolution;
        let mut sum = 0.0;
        let mut count = 0usize;
        for y in 0..res {
            for x in 0..res {
                let a = self.uv[y * res + x];
                if x + 1 < res {
                    sum += a.dist(self.uv[y * res + x + 1]);
                    count += 1;
                }
                if y + 1 < res {
                    sum += a.dist(self.uv[(y + 1) * res + x]);
                    count += 1;
                }
            }
        }
        sum / count as f64
    }

    /// Largest adjacent-texel jump away from the declared seam set (the
    /// square boundary ring, plus the equator line for sphere maps).
    pub fn max_adjacent_jump_off_seam(&self) -> f64 {
        let res = self.resolution;
        let on_seam = |x: usize, y: usize| {
            if x == 0 || y == 0 || x == res - 1 || y == res - 1 {
                return true;
            }
            if self.domain == Domain::Sphere {
                // Texels adjacent to the reflection/refraction split.
                let t0 = y as f64 / res as f64;
                let t1 = (y + 1) as f64 / res as f64;
                if (t0 - 0.5).abs() < 1e-9 || (t1 - 0.5).abs() < 1e-9 {
                    return true;
                }
            }
            false
        };
        let mut max = 0.0f64;
        for y in 0..res {
            for x in 0..res {
                if on_seam(x, y) {
                    continue;
                }
                let a = self.uv[y * res + x];
                if x + 1 < res && !on_seam(x + 1, y) {
                    max = max.max(a.dist(self.uv[y * res + x + 1]));
                }
                if y + 1 < res && !on_seam(x, y + 1) {
                    max = max.max(a.dist(self.uv[(y + 1) * res + x]));
                }
            }
        }
        max
    }
}

/// Mirrors a coordinate back into [0,1]; overshoot is at most a texel.
#[inline]
fn fold_unit(x: f64) -> f64 {
    let x = if x < 0.0 {
        -x
    } else if x > 1.0 {
        2.0 - x
    } else {
        x
    };
    x.clamp(0.0, 1.0)
}

/// Neighboring lattice indices and interpolation fraction along one axis.
/// The lattice nodes sit at texel centers; the outer half texel extrapolates
/// from the first/last segment.
#[inline]
fn lattice_segment(coord: f64, res: usize) -> (usize, usize, f64) {
    let g = coord.clamp(0.0, 1.0) * res as f64 - 0.5;
    if res == 1 {
        return (0, 0, 0.0);
    }
    let cell = g.floor().clamp(0.0, (res - 2) as f64);
    let i0 = cell as usize;
    (i0, i0 + 1, g - cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{chi_square_test, RngStream};
    use crate::slice::SliceImage;

    fn small_config(points: usize) -> BakeConfig {
        BakeConfig {
            slice: TabulateConfig {
                resolution: (points as f64).sqrt() as usize,
                ..TabulateConfig::default()
            },
            points,
            method: AssignMethod::Exact,
            polish: crate::transport::PolishConfig::default(),
        }
    }

    #[test]
    fn uniform_slice_bakes_to_identity() {
        let slice = SliceImage::uniform(32, Domain::Hemisphere);
        let map = ImportanceMap::from_slice(&slice, &small_config(1024)).unwrap();
        for (i, uv) in map.uv.iter().enumerate() {
            let x = i % 32;
            let y = i / 32;
            let center = SquareCoord::new((x as f64 + 0.5) / 32.0, (y as f64 + 0.5) / 32.0);
            assert!(uv.dist(center) < 1e-6, "texel {i}: {uv:?} vs {center:?}");
        }
        // Constant sampling weight.
        let sw0 = map.sw[0];
        for sw in &map.sw {
            assert!((sw.r - sw0.r).abs() < 1e-9);
        }
        assert!((map.locality_score() - 1.0 / 32.0).abs() < 1e-9);
    }

    #[test]
    fn query_at_texel_centers_returns_stored_values() {
        let slice = SliceImage::uniform(16, Domain::Hemisphere);
        let mut map = ImportanceMap::from_slice(&slice, &small_config(256)).unwrap();
        // Perturb one texel to make the check meaningful.
        map.uv[5 * 16 + 7] = SquareCoord::new(0.123, 0.456);
        let xi = SquareCoord::new((7.0 + 0.5) / 16.0, (5.0 + 0.5) / 16.0);
        let (uv, _) = map.query(xi);
        assert!(uv.dist(SquareCoord::new(0.123, 0.456)) < 1e-12);
    }

    #[test]
    fn query_is_lipschitz_between_centers() {
        let slice = SliceImage::uniform(16, Domain::Hemisphere);
        let map = ImportanceMap::from_slice(&slice, &small_config(256)).unwrap();
        let mut rng = RngStream::new(7, 7);
        // Empirical Lipschitz constant bounded by the max texel jump over
        // the texel spacing (bilinear property).
        let max_jump = {
            let mut m = 0.0f64;
            for y in 0..16 {
                for x in 0..16 {
                    let a = map.uv[y * 16 + x];
                    if x + 1 < 16 {
                        m = m.max(a.dist(map.uv[y * 16 + x + 1]));
                    }
                    if y + 1 < 16 {
                        m = m.max(a.dist(map.uv[(y + 1) * 16 + x]));
                    }
                }
            }
            m
        };
        let lip = 2.0 * max_jump * 16.0; // diagonal slack
        for _ in 0..20_000 {
            let xi = SquareCoord::new(rng.next_f64(), rng.next_f64());
            let delta = 1e-4;
            let xj = SquareCoord::new((xi.s + delta).min(1.0), xi.t);
            let (a, _) = map.query(xi);
            let (b, _) = map.query(xj);
            assert!(a.dist(b) <= lip * delta + 1e-12);
        }
    }

    #[test]
    fn uniform_map_pdf_is_inverse_hemisphere_area()
    {
        let slice = SliceImage::uniform(16, Domain::Hemisphere);
        let map = ImportanceMap::from_slice(&slice, &small_config(256)).unwrap();
        let p = map.pdf(SquareCoord::new(0.3, 0.7));
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn pdf_integrates_to_one() {
        // ∫ pdf dω over the domain = Σ density = 1, by the equal-area map.
        let res = 32;
        let mut gray = vec![0.0; res * res];
        let mut rng = RngStream::new(9, 9);
        for g in gray.iter_mut() {
            *g = 0.1 + rng.next_f64();
        }
        let slice = SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap();
        let map = ImportanceMap::from_slice(&slice, &small_config(1024)).unwrap();
        // Quadrature over the square with the constant Jacobian.
        let sub = 4 * res;
        let mut integral = 0.0;
        for y in 0..sub {
            for x in 0..sub {
                let c = SquareCoord::new(
                    (x as f64 + 0.5) / sub as f64,
                    (y as f64 + 0.5) / sub as f64,
                );
                integral += map.pdf(c) * map.domain.jacobian() / (sub * sub) as f64;
            }
        }
        assert!((integral - 1.0).abs() < 5e-3, "∫pdf dω = {integral}");
    }

    #[test]
    fn perfect_importance_sampling_identity() {
        // weight × pdf = f·cos (in solid angle) at every texel center.
        let res = 32;
        let mut gray = vec![0.0; res * res];
        for y in 0..res {
            for x in 0..res {
                let dx = (x as f64 + 0.5) / res as f64 - 0.5;
                let dy = (y as f64 + 0.5) / res as f64 - 0.4;
                gray[y * res + x] = (-(dx * dx + dy * dy) / 0.05).exp() + 0.05;
            }
        }
        let slice = SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap();
        let map = ImportanceMap::from_slice(&slice, &small_config(1024)).unwrap();
        for i in 0..map.texel_count() {
            let uv = map.uv[i];
            let texel = slice.texel_of(uv);
            let expect = slice.rgb[texel].luminance() / slice.domain.jacobian();
            let got = map.sw[i].luminance() * map.pdf(uv);
            assert!(
                (got - expect).abs() <= 1e-5 * expect.max(1e-12),
                "texel {i}: sw×pdf {got} vs f·cos {expect}"
            );
        }
    }

    #[test]
    fn binned_queries_reproduce_density() {
        let res = 64;
        let mut gray = vec![0.0; res * res];
        for y in 0..res {
            for x in 0..res {
                let dx = (x as f64 + 0.5) / res as f64 - 0.6;
                let dy = (y as f64 + 0.5) / res as f64 - 0.35;
                gray[y * res + x] = (-(dx * dx + dy * dy) / 0.03).exp() + 0.03;
            }
        }
        let slice = SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap();
        let map = ImportanceMap::from_slice(&slice, &small_config(4096)).unwrap();
        let bins = 16usize;
        let mut observed = vec![0u64; bins * bins];
        let mut rng = RngStream::new(11, 3);
        let n = 1_000_000;
        for _ in 0..n {
            let (uv, _) = map.query(SquareCoord::new(rng.next_f64(), rng.next_f64()));
            let x = ((uv.s * bins as f64) as usize).min(bins - 1);
            let y = ((uv.t * bins as f64) as usize).min(bins - 1);
            observed[y * bins + x] += 1;
        }
        let mut expected = vec![0.0f64; bins * bins];
        let scale = res / bins;
        for y in 0..res {
            for x in 0..res {
                expected[(y / scale) * bins + (x / scale)] += slice.density[y * res + x];
            }
        }
        let r = chi_square_test(&observed, &expected);
        assert!(
            r.p_value > 0.01,
            "chi-square p = {} (stat {}, dof {})",
            r.p_value,
            r.statistic,
            r.dof
        );
    }

    #[test]
    fn ot_map_is_smoother_than_row_column() {
        // Bimodal density: row-column tears between the modes.
        let res = 32;
        let mut gray = vec![0.0; res * res];
        for y in 0..res {
            for x in 0..res {
                let fx = (x as f64 + 0.5) / res as f64;
                let fy = (y as f64 + 0.5) / res as f64;
                let d1 = ((fx - 0.25) * (fx - 0.25) + (fy - 0.3) * (fy - 0.3)) / 0.01;
                let d2 = ((fx - 0.75) * (fx - 0.75) + (fy - 0.7) * (fy - 0.7)) / 0.01;
                gray[y * res + x] = (-d1).exp() + (-d2).exp() + 0.02;
            }
        }
        let slice = SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap();
        let ot = ImportanceMap::from_slice(&slice, &small_config(1024)).unwrap();
        let rc = ImportanceMap::from_slice_row_column(&slice, 1024).unwrap();
        assert!(
            ot.locality_score() < rc.locality_score(),
            "ot {} vs rc {}",
            ot.locality_score(),
            rc.locality_score()
        );
    }

    #[test]
    fn locality_score_is_scale_invariant() {
        let res = 32;
        let mut gray = vec![0.0; res * res];
        let mut rng = RngStream::new(4, 1);
        for g in gray.iter_mut() {
            *g = 0.2 + rng.next_f64();
        }
        let a = SliceImage::from_grayscale(res, Domain::Hemisphere, &gray).unwrap();
        let scaled: Vec<f64> = gray.iter().map(|g| g * 123.0).collect();
        let b = SliceImage::from_grayscale(res, Domain::Hemisphere, &scaled).unwrap();
        let ma = ImportanceMap::from_slice(&a, &small_config(1024)).unwrap();
        let mb = ImportanceMap::from_slice(&b, &small_config(1024)).unwrap();
        assert!((ma.locality_score() - mb.locality_score()).abs() < 1e-12);
    }
}
