//! Map polish: smoothing plus mass-correction flow.
//!
//! The assignment writes quantized point positions into the texels, so the
//! distribution realized by bilinear query differs from the slice density by
//! a discretization residue, and neighboring texels inherit point-level
//! jitter. Polish runs two stages:
//!
//! 1. a few damped Jacobi sweeps over the uv lattice, which remove the
//!    jitter (and with it most tearing) while keeping the assignment's
//!    large-scale structure;
//! 2. repeated mass-correction sweeps: measure the realized per-cell mass of
//!    the bilinear pushforward (triangulated patch clipping, exact for the
//!    piecewise-affine approximation), solve `div(ρ ∇ψ) = realized − target`
//!    with a no-flux boundary, and displace every texel target along `∇ψ`.
//!    Each sweep is one step of a transport flow whose fixed point realizes
//!    the target density.

use super::map::ImportanceMap;
use crate::math::SquareCoord;

/// Polish schedule; the defaults are what `BakeConfig` uses.
#[derive(Debug, Clone, Copy)]
pub struct PolishConfig {
    /// Damped Jacobi smoothing sweeps over the uv lattice before the flow.
    pub smoothing_sweeps: usize,
    /// Jacobi damping factor in (0, 1].
    pub smoothing_omega: f64,
    /// Total mass-correction (measure + displace) sweeps; the step anneals
    /// over thirds of the budget and a smoothing finale restores locality.
    pub correction_sweeps: usize,
    /// Initial step size of the correction displacement.
    pub step: f64,
    /// SOR iterations for the potential solve per sweep.
    pub solver_iterations: usize,
}

impl Default for PolishConfig {
    fn default() -> Self {
        PolishConfig {
            smoothing_sweeps: 4,
            smoothing_omega: 0.5,
            correction_sweeps: 64,
            step: 1.0,
            solver_iterations: 4000,
        }
    }
}

/// Runs the full polish schedule in place: pre-smoothing, an annealed
/// correction flow (full step, half, quarter over thirds of the budget),
/// then a smoothing finale with gentle restorative sweeps. The flow drives
/// the realized distribution onto the target; the annealing and finale keep
/// the accumulated displacement jitter from undoing the map's locality.
pub fn polish_map(map: &mut ImportanceMap, config: &PolishConfig) {
    for _ in 0..config.smoothing_sweeps {
        smooth_uv(map, config.smoothing_omega);
    }
    if config.correction_sweeps == 0 {
        return;
    }
    let third = (config.correction_sweeps / 3).max(1);
    for (factor, sweeps) in [
        (1.0, third),
        (0.5, third),
        (0.25, config.correction_sweeps.saturating_sub(2 * third)),
    ] {
        for _ in 0..sweeps {
            correction_sweep(map, config.step * factor, config.solver_iterations);
        }
    }
    // Finale: trade a little of the (large) distribution headroom for
    // smoothness, then restore with gentle sweeps.
    if config.correction_sweeps >= 8 {
        smooth_uv(map, 0.5);
        for _ in 0..6 {
            correction_sweep(map, config.step * 0.5, config.solver_iterations);
        }
        for omega in [0.3, 0.3] {
            smooth_uv(map, omega);
            for _ in 0..4 {
                correction_sweep(map, config.step * 0.25, config.solver_iterations);
            }
        }
        smooth_uv(map, 0.15);
        for _ in 0..2 {
            correction_sweep(map, config.step * 0.125, config.solver_iterations);
        }
    }
}

/// The aggregation scale that binned-sample statistics of this map resolve:
/// a quarter of the density resolution (16 bins per side at the default 64).
pub fn coarse_bins(density_resolution: usize) -> usize {
    (density_resolution / 4).clamp(4, 16)
}

/// One damped Jacobi sweep of the uv lattice toward its 4-neighborhood mean.
/// Missing neighbors at the boundary are reflected (`2·center − inner`), so
/// affine uv fields — the identity in particular — are exact fixed points.
pub fn smooth_uv(map: &mut ImportanceMap, omega: f64) {
    let res = map.resolution;
    let old = map.uv.clone();
    // Rows within [band_lo, band_hi) form one smoothing band; sphere maps
    // have two bands separated by the reflection/refraction split.
    let seam = map.seam_row.min(res);
    for y in 0..res {
        let (band_lo, band_hi) = if y < seam { (0, seam) } else { (seam, res) };
        for x in 0..res {
            let me = old[y * res + x];
            let mut acc_s = 0.0;
            let mut acc_t = 0.0;
            let mut visit = |xx: isize, yy: isize| {
                if xx >= 0
                    && (xx as usize) < res
                    && yy >= band_lo as isize
                    && (yy as usize) < band_hi
                {
                    let p = old[yy as usize * res + xx as usize];
                    acc_s += p.s;
                    acc_t += p.t;
                } else {
                    // Reflect through the center from the opposite side,
                    // staying inside the band.
                    let ox = (2 * x as isize - xx).clamp(0, res as isize - 1) as usize;
                    let oy = (2 * y as isize - yy)
                        .clamp(band_lo as isize, band_hi as isize - 1)
                        as usize;
                    let p = old[oy * res + ox];
                    acc_s += 2.0 * me.s - p.s;
                    acc_t += 2.0 * me.t - p.t;
                }
            };
            visit(x as isize - 1, y as isize);
            visit(x as isize + 1, y as isize);
            visit(x as isize, y as isize - 1);
            visit(x as isize, y as isize + 1);
            map.uv[y * res + x] = SquareCoord::new(
                (me.s + omega * (acc_s / 4.0 - me.s)).clamp(0.0, 1.0),
                (me.t + omega * (acc_t / 4.0 - me.t)).clamp(0.0, 1.0),
            );
        }
    }
}

/// One mass-correction sweep: measure, solve for the potential, displace.
/// Sphere-domain maps treat the reflection/refraction seam as an interior
/// wall: no flux crosses it, matching what the seam-split query realizes.
fn correction_sweep(map: &mut ImportanceMap, step: f64, solver_iterations: usize) {
    let res = map.density_resolution;
    let n = res * res;
    let realized = realized_mass(map);
    // Density-grid row of the band split (scaled from the map lattice).
    let seam = (map.seam_row * res) / map.resolution.max(1);

    // Residual and coefficient as densities; the Neumann problem needs a
    // zero-mean right side per connected component (per half for spheres).
    let mut r = vec![0.0f64; n];
    let mut rho = vec![0.0f64; n];
    for i in 0..n {
        r[i] = (realized[i] - map.density[i]) * n as f64;
        rho[i] = realized[i].max(1e-6 / n as f64) * n as f64;
    }
    for (lo, hi) in [(0usize, seam), (seam, res)] {
        if lo == hi {
            continue;
        }
        let cells = (hi - lo) * res;
        let mean: f64 = r[lo * res..hi * res].iter().sum::<f64>() / cells as f64;
        for v in &mut r[lo * res..hi * res] {
            *v -= mean;
        }
    }

    // SOR solve of the constant-coefficient Poisson Δψ = r with no-flux
    // boundaries (and no flux through the seam). The density divides the
    // *velocity* instead of sitting inside the divergence: same first-order
    // mass action, but the linear system stays uniformly conditioned even
    // where the density is orders of magnitude below its peak.
    let mut psi = vec![0.0f64; n];
    let h2 = 1.0 / n as f64;
    let omega_sor = 1.85;
    for _ in 0..solver_iterations {
        for y in 0..res {
            for x in 0..res {
                let i = y * res + x;
                let mut diag = 0.0;
                let mut off = 0.0;
                let mut face = |j: usize| {
                    diag += 1.0;
                    off += psi[j];
                };
                if x > 0 {
                    face(i - 1);
                }
                if x + 1 < res {
                    face(i + 1);
                }
                if y > 0 && y != seam {
                    face(i - res);
                }
                if y + 1 < res && y + 1 != seam {
                    face(i + res);
                }
                if diag > 0.0 {
                    let new = (off - r[i] * h2) / diag;
                    psi[i] += omega_sor * (new - psi[i]);
                }
            }
        }
    }

    // Displace targets along the potential gradient, sampled from staggered
    // face-velocity grids. Wall faces carry zero velocity, so the normal
    // component tapers to zero exactly at the boundary and mass is never
    // pushed into the clamp, while cells near the wall still move at the
    // full inner-face rate.
    // Velocities are the potential gradient over the local density; cap the
    // per-sweep move so faint regions cannot tear the lattice.
    let max_move = 2.0 / res as f64;
    let vx = |i: usize, j: usize| -> f64 {
        // x-face between cells (i-1, j) and (i, j); i in 0..=res.
        if i == 0 || i == res {
            0.0
        } else {
            let face_rho = 0.5 * (rho[j * res + i] + rho[j * res + i - 1]);
            let v = (psi[j * res + i] - psi[j * res + i - 1]) * res as f64 / face_rho.max(1e-4);
            v.clamp(-max_move, max_move)
        }
    };
    let vy = |i: usize, j: usize| -> f64 {
        if j == 0 || j == res || j == seam {
            0.0
        } else {
            let face_rho = 0.5 * (rho[j * res + i] + rho[(j - 1) * res + i]);
            let v = (psi[j * res + i] - psi[(j - 1) * res + i]) * res as f64 / face_rho.max(1e-4);
            v.clamp(-max_move, max_move)
        }
    };
    let sample_vx = |s: f64, t: f64| -> f64 {
        let gx = (s * res as f64).clamp(0.0, res as f64);
        let gy = (t * res as f64 - 0.5).clamp(0.0, (res - 1) as f64);
        let x0 = (gx.floor() as usize).min(res - 1);
        let mut y0 = (gy.floor() as usize).min(res.saturating_sub(2));
        // Keep both interpolation rows inside the point's half.
        if t < seam as f64 / res as f64 {
            y0 = y0.min(seam.saturating_sub(2));
        } else {
            y0 = y0.max(seam);
        }
        let fx = gx - x0 as f64;
        let fy = (gy - y0 as f64).clamp(0.0, 1.0);
        let y1 = (y0 + 1).min(res - 1);
        let top = vx(x0, y0) + (vx(x0 + 1, y0) - vx(x0, y0)) * fx;
        let bot = vx(x0, y1) + (vx(x0 + 1, y1) - vx(x0, y1)) * fx;
        top + (bot - top) * fy
    };
    let sample_vy = |s: f64, t: f64| -> f64 {
        let gy = (t * res as f64).clamp(0.0, res as f64);
        let gx = (s * res as f64 - 0.5).clamp(0.0, (res - 1) as f64);
        let y0 = (gy.floor() as usize).min(res - 1);
        let x0 = (gx.floor() as usize).min(res.saturating_sub(2));
        let fy = gy - y0 as f64;
        let fx = (gx - x0 as f64).clamp(0.0, 1.0);
        let x1 = (x0 + 1).min(res - 1);
        let left = vy(x0, y0) + (vy(x0, y0 + 1) - vy(x0, y0)) * fy;
        let right = vy(x1, y0) + (vy(x1, y0 + 1) - vy(x1, y0)) * fy;
        left + (right - left) * fx
    };
    for uv in map.uv.iter_mut() {
        let dx = sample_vx(uv.s, uv.t);
        let dy = sample_vy(uv.s, uv.t);
        *uv = SquareCoord::new(
            (uv.s + step * dx).clamp(0.0, 1.0),
            (uv.t + step * dy).clamp(0.0, 1.0),
        );
    }
}

/// Realized per-cell mass of the bilinear pushforward on the density grid.
///
/// Each source texel's bilinear patch is subdivided until sub-patches are
/// about half a density cell across and split into triangles; a triangle of
/// an affine piece attributes mass by overlap area exactly. The denominator
/// per triangle is the sum of its clipped pieces, which stays finite for
/// locally folded patches (their signed area can vanish).
pub fn realized_mass(map: &ImportanceMap) -> Vec<f64> {
    let res_q = map.resolution;
    let res_d = map.density_resolution;
    let seam = map.seam_row.min(res_q);
    let seam_d = seam; // patch rows are on the map lattice
    let seam_t = seam as f64 / res_q as f64;
    let mut mass = vec![0.0f64; res_d * res_d];
    // Corner lattice of query values.
    let mut corners = vec![SquareCoord::new(0.0, 0.0); (res_q + 1) * (res_q + 1)];
    for y in 0..=res_q {
        for x in 0..=res_q {
            let xi = SquareCoord::new(x as f64 / res_q as f64, y as f64 / res_q as f64);
            corners[y * (res_q + 1) + x] = map.query_uv(xi);
        }
    }
    let mut poly = Vec::with_capacity(16);
    let mut tmp = Vec::with_capacity(16);
    let mut pieces = Vec::with_capacity(64);
    let mut sub_corners: Vec<SquareCoord> = Vec::new();
    let cell = 1.0 / res_d as f64;
    for y in 0..res_q {
        for x in 0..res_q {
            let quad = [
                corners[y * (res_q + 1) + x],
                corners[y * (res_q + 1) + x + 1],
                corners[(y + 1) * (res_q + 1) + x + 1],
                corners[(y + 1) * (res_q + 1) + x],
            ];
            let diameter = quad[0].dist(quad[2]).max(quad[1].dist(quad[3]));
            // Border-ring patches interpolate against the clamp; resolve
            // them at the maximum rate so the piecewise-linear approximation
            // tracks the clamped map closely.
            let on_border = x == 0 || y == 0 || x + 1 == res_q || y + 1 == res_q;
            let k = if on_border {
                16
            } else {
                ((2.0 * diameter / cell).ceil() as usize).clamp(4, 16)
            };
            let base_s = x as f64 / res_q as f64;
            let base_t = y as f64 / res_q as f64;
            let step = 1.0 / (res_q * k) as f64;
            let stride = k + 1;
            sub_corners.resize(stride * stride, SquareCoord::new(0.0, 0.0));
            for sy in 0..=k {
                for sx in 0..=k {
                    let mut t = base_t + sy as f64 * step;
                    // A patch row touching the sphere seam evaluates its top
                    // edge on its own side of the split.
                    if seam < res_q && y < seam_d && t >= seam_t {
                        t = seam_t - 1e-12;
                    }
                    sub_corners[sy * stride + sx] = map.query_uv(SquareCoord::new(
                        base_s + sx as f64 * step,
                        t,
                    ));
                }
            }
            let tri_mass = 0.5 / ((res_q * res_q * k * k) as f64);
            for sy in 0..k {
                for sx in 0..k {
                    let p00 = sub_corners[sy * stride + sx];
                    let p10 = sub_corners[sy * stride + sx + 1];
                    let p11 = sub_corners[(sy + 1) * stride + sx + 1];
                    let p01 = sub_corners[(sy + 1) * stride + sx];
                    deposit_triangle(
                        &[p00, p10, p11],
                        tri_mass,
                        res_d,
                        &mut mass,
                        &mut poly,
                        &mut tmp,
                        &mut pieces,
                    );
                    deposit_triangle(
                        &[p00, p11, p01],
                        tri_mass,
                        res_d,
                        &mut mass,
                        &mut poly,
                        &mut tmp,
                        &mut pieces,
                    );
                }
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        for m in &mut mass {
            *m /= total;
        }
    }
    mass
}

#[inline]
fn polygon_area(pts: &[SquareCoord]) -> f64 {
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        acc += a.s * b.t - b.s * a.t;
    }
    0.5 * acc.abs()
}

fn deposit_triangle(
    tri: &[SquareCoord; 3],
    tri_mass: f64,
    res_d: usize,
    mass: &mut [f64],
    poly: &mut Vec<SquareCoord>,
    tmp: &mut Vec<SquareCoord>,
    pieces: &mut Vec<(usize, f64)>,
) {
    let (min_s, max_s) = tri
        .iter()
        .fold((1.0f64, 0.0f64), |(lo, hi), p| (lo.min(p.s), hi.max(p.s)));
    let (min_t, max_t) = tri
        .iter()
        .fold((1.0f64, 0.0f64), |(lo, hi), p| (lo.min(p.t), hi.max(p.t)));
    let x0 = ((min_s * res_d as f64).floor() as usize).min(res_d - 1);
    let x1 = ((max_s * res_d as f64).ceil() as usize).min(res_d);
    let y0 = ((min_t * res_d as f64).floor() as usize).min(res_d - 1);
    let y1 = ((max_t * res_d as f64).ceil() as usize).min(res_d);
    pieces.clear();
    let mut piece_sum = 0.0;
    for cy in y0..y1.max(y0 + 1) {
        for cx in x0..x1.max(x0 + 1) {
            let lo_s = cx as f64 / res_d as f64;
            let hi_s = (cx + 1) as f64 / res_d as f64;
            let lo_t = cy as f64 / res_d as f64;
            let hi_t = (cy + 1) as f64 / res_d as f64;
            let a = clipped_area(tri, lo_s, hi_s, lo_t, hi_t, poly, tmp);
            if a > 0.0 {
                pieces.push((cy * res_d + cx, a));
                piece_sum += a;
            }
        }
    }
    if piece_sum < 1e-18 {
        let cx = (tri[0].s + tri[1].s + tri[2].s) / 3.0;
        let cy = (tri[0].t + tri[1].t + tri[2].t) / 3.0;
        let ix = ((cx * res_d as f64) as usize).min(res_d - 1);
        let iy = ((cy * res_d as f64) as usize).min(res_d - 1);
        mass[iy * res_d + ix] += tri_mass;
        return;
    }
    for &(cell, a) in pieces.iter() {
        mass[cell] += tri_mass * a / piece_sum;
    }
}

/// Area of a convex-clip of `poly_in` against an axis-aligned rectangle
/// (Sutherland-Hodgman against the four half-planes).
fn clipped_area(
    poly_in: &[SquareCoord],
    lo_s: f64,
    hi_s: f64,
    lo_t: f64,
    hi_t: f64,
    poly: &mut Vec<SquareCoord>,
    tmp: &mut Vec<SquareCoord>,
) -> f64 {
    poly.clear();
    poly.extend_from_slice(poly_in);
    let passes: [(fn(SquareCoord) -> f64, f64, bool); 4] = [
        (|p| p.s, lo_s, true),
        (|p| p.s, hi_s, false),
        (|p| p.t, lo_t, true),
        (|p| p.t, hi_t, false),
    ];
    for (axis, bound, keep_above) in passes {
        tmp.clear();
        let n = poly.len();
        if n == 0 {
            return 0.0;
        }
        for i in 0..n {
            let cur = poly[i];
            let next = poly[(i + 1) % n];
            let inside = |p: SquareCoord| {
                if keep_above {
                    axis(p) >= bound
                } else {
                    axis(p) <= bound
                }
            };
            let cur_in = inside(cur);
            let next_in = inside(next);
            if cur_in {
                tmp.push(cur);
            }
            if cur_in != next_in {
                let denom = axis(next) - axis(cur);
                let f = if denom.abs() < 1e-18 {
                    0.0
                } else {
                    (bound - axis(cur)) / denom
                };
                tmp.push(SquareCoord::new(
                    cur.s + (next.s - cur.s) * f,
                    cur.t + (next.t - cur.t) * f,
                ));
            }
        }
        std::mem::swap(poly, tmp);
    }
    polygon_area(poly)
}
