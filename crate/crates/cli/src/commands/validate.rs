//! `otmap validate`: a fast built-in battery over the pipeline's core
//! guarantees, reported as machine-readable JSON. Exit code 1 when any
//! criterion fails.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use serde::Serialize;

use otmap::bsdf::{BsdfParams, ScatterModel};
use otmap::math::{chi_square_test, Direction, Rgb, RngStream, SquareCoord, Vec3};
use otmap::neural::{Activation, NetKind};
use otmap::render::{
    load_neural, render, Camera, EnvMap, IntegratorKind, Light, Material, RenderConfig,
    SamplerKind, Scene, SceneObject, Shape,
};
use otmap::slice::{PointSet, SliceImage, TabulateConfig};
use otmap::transport::{solve_assignment, AssignMethod, BakeConfig, ImportanceMap};

#[derive(Args, Serialize)]
pub struct ValidateArgs {
    /// Report path (JSON).
    #[arg(long, default_value = "validate_report.json")]
    pub out: PathBuf,
    /// Optional weights directory; adds the neural furnace criterion.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct Criterion {
    name: String,
    passed: bool,
    value: f64,
    threshold: String,
    detail: String,
}

#[derive(Serialize)]
struct Report {
    passed: bool,
    criteria: Vec<Criterion>,
}

pub fn run(args: ValidateArgs) -> anyhow::Result<i32> {
    let mut criteria = Vec::new();

    criteria.push(solver_exactness(args.seed));
    criteria.extend(bake_quality(args.seed)?);
    criteria.push(gradient_check(args.seed));
    criteria.push(furnace_ground_truth(args.seed)?);
    criteria.push(mc_convergence(args.seed)?);
    if let Some(dir) = &args.weights {
        criteria.push(neural_furnace(dir, args.seed)?);
    }

    let passed = criteria.iter().all(|c| c.passed);
    let report = Report { passed, criteria };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    for c in &report.criteria {
        eprintln!(
            "{} {}: {} (threshold {}) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
    Ok(if passed { 0 } else { 1 })
}

fn solver_exactness(seed: u64) -> Criterion {
    let mut rng = RngStream::new(seed, 0x501);
    let mut worst_gap = 0.0f64;
    for trial in 0..20 {
        let n = 3 + trial % 5;
        let random = |rng: &mut RngStream, n: usize| PointSet {
            points: (0..n)
                .map(|_| SquareCoord::new(rng.next_f64(), rng.next_f64()))
                .collect(),
        };
        let a = random(&mut rng, n);
        let b = random(&mut rng, n);
        let got = solve_assignment(&a, &b, AssignMethod::Exact).unwrap();
        // Exhaustive minimum.
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |perm| {
            let cost: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let d = a.points[i];
                    let e = b.points[j];
                    let (ds, dt) = (d.s - e.s, d.t - e.t);
                    ((ds * ds + dt * dt) as f32) as f64
                })
                .sum();
            if cost < best {
                best = cost;
            }
        });
        worst_gap = worst_gap.max((got.cost - best).abs());
    }
    Criterion {
        name: "assignment_solver_exactness".into(),
        passed: worst_gap < 1e-9,
        value: worst_gap,
        threshold: "< 1e-9".into(),
        detail: "20 random instances vs exhaustive permutations".into(),
    }
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

fn bake_quality(seed: u64) -> anyhow::Result<Vec<Criterion>> {
    // Anisotropic lobe off the azimuth axis: the configuration where
    // marginal-then-conditional sampling visibly tears between rows.
    let params = BsdfParams::conductor(
        Rgb::new(0.9, 0.7, 0.4),
        0.5,
        0.15,
        ScatterModel::SingleBounce,
    );
    let wi = Direction::from_spherical(0.8, 0.6, 0.7);
    let config = BakeConfig {
        slice: TabulateConfig {
            resolution: 32,
            seed,
            ..TabulateConfig::default()
        },
        points: 1024,
        ..BakeConfig::default()
    };
    let slice = otmap::slice::tabulate_slice(&params, wi, &config.slice)?;
    let map = ImportanceMap::from_slice(&slice, &config)?;

    // Perfect-importance-sampling identity at texel centers.
    let mut worst_rel = 0.0f64;
    for i in 0..map.texel_count() {
        let uv = map.uv[i];
        let texel = slice.texel_of(uv);
        let expect = slice.rgb[texel].luminance() / slice.domain.jacobian();
        let got = map.sw[i].luminance() * map.pdf(uv);
        if expect > 1e-12 {
            worst_rel = worst_rel.max((got - expect).abs() / expect);
        }
    }

    // Binned query distribution vs the slice density, at the aggregation
    // scale this lattice resolution resolves.
    let bins = otmap::transport::coarse_bins(slice.resolution);
    let mut rng = RngStream::new(seed, 0x502);
    let mut observed = vec![0u64; bins * bins];
    let n = 200_000;
    for _ in 0..n {
        let (uv, _) = map.query(SquareCoord::new(rng.next_f64(), rng.next_f64()));
        let x = ((uv.s * bins as f64) as usize).min(bins - 1);
        let y = ((uv.t * bins as f64) as usize).min(bins - 1);
        observed[y * bins + x] += 1;
    }
    let mut expected = vec![0.0f64; bins * bins];
    let scale = slice.resolution / bins;
    for y in 0..slice.resolution {
        for x in 0..slice.resolution {
            expected[(y / scale) * bins + (x / scale)] += slice.density[y * slice.resolution + x];
        }
    }
    let chi = chi_square_test(&observed, &expected);

    // Smoothness against the row-column baseline.
    let rc = ImportanceMap::from_slice_row_column(&slice, config.points)?;
    let ot_score = map.locality_score();
    let rc_score = rc.locality_score();

    Ok(vec![
        Criterion {
            name: "map_weight_times_pdf_reproduces_slice".into(),
            passed: worst_rel < 1e-5,
            value: worst_rel,
            threshold: "< 1e-5 relative".into(),
            detail: "at every texel center of a baked map".into(),
        },
        Criterion {
            name: "map_samples_follow_density".into(),
            passed: chi.p_value > 0.01,
            value: chi.p_value,
            threshold: "chi-square p > 0.01".into(),
            detail: format!("stat {:.1} over {} cells", chi.statistic, chi.cells),
        },
        Criterion {
            name: "transport_map_smoother_than_row_column".into(),
            passed: ot_score < rc_score,
            value: ot_score / rc_score,
            threshold: "locality ratio < 1".into(),
            detail: format!("transport {ot_score:.5} vs row-column {rc_score:.5}"),
        },
    ])
}

fn gradient_check(seed: u64) -> Criterion {
    let worst = [NetKind::Sample, NetKind::Eval, NetKind::Pdf]
        .into_iter()
        .map(|kind| {
            otmap::neural::finite_difference_worst_error(kind, Activation::Softplus, 200, seed)
        })
        .fold(0.0f64, f64::max);
    Criterion {
        name: "backprop_matches_finite_differences".into(),
        passed: worst < 1e-4,
        value: worst,
        threshold: "< 1e-4 relative".into(),
        detail: "200 coordinates per network kind".into(),
    }
}

fn furnace_scene(sampler: SamplerKind, width: usize) -> Scene {
    let params = BsdfParams::conductor(Rgb::WHITE, 0.6, 0.6, ScatterModel::MultiBounce);
    Scene {
        camera: Camera {
            eye: Vec3::new(0.0, -4.0, 1.2),
            look_at: Vec3::new(0.0, 0.0, 0.4),
            up: Vec3::new(0.0, 0.0, 1.0),
            fov_degrees: 32.0,
            width,
            height: width,
        },
        objects: vec![SceneObject {
            shape: Shape::Sphere {
                center: Vec3::new(0.0, 0.0, 0.4),
                radius: 1.0,
            },
            material: Material::new(params, sampler),
        }],
        lights: vec![Light::Env(Arc::new(EnvMap::constant(Rgb::WHITE)))],
    }
}

fn furnace_ground_truth(seed: u64) -> anyhow::Result<Criterion> {
    let scene = furnace_scene(SamplerKind::RandomWalk, 16);
    let out = render(
        &scene,
        &RenderConfig {
            integrator: IntegratorKind::BsdfOnly,
            spp: 512,
            seed,
            max_depth: 1,
        },
    )?;
    let worst = out
        .pixels
        .iter()
        .map(|p| (p.luminance() - 1.0).abs())
        .fold(0.0f64, f64::max);
    Ok(Criterion {
        name: "white_furnace_ground_truth".into(),
        passed: worst < 0.02 && out.nan_count == 0,
        value: worst,
        threshold: "every pixel within 1 ± 2%".into(),
        detail: format!("{} non-finite samples", out.nan_count),
    })
}

fn neural_furnace(dir: &PathBuf, seed: u64) -> anyhow::Result<Criterion> {
    let nets = load_neural(dir, otmap::math::Domain::Hemisphere)?;
    let mut scene = furnace_scene(SamplerKind::Neural, 16);
    scene.objects[0].material.neural = Some(Arc::new(nets));
    let out = render(
        &scene,
        &RenderConfig {
            integrator: IntegratorKind::BsdfOnly,
            spp: 256,
            seed,
            max_depth: 1,
        },
    )?;
    let mean =
        out.pixels.iter().map(|p| p.luminance()).sum::<f64>() / out.pixels.len() as f64;
    let deviation = (mean - 1.0).abs();
    Ok(Criterion {
        name: "white_furnace_neural".into(),
        passed: deviation < 0.05 && out.nan_count == 0,
        value: deviation,
        threshold: "mean within 1 ± 5%".into(),
        detail: format!("mean {mean:.4}, {} non-finite samples", out.nan_count),
    })
}

fn mc_convergence(seed: u64) -> anyhow::Result<Criterion> {
    // relMSE of an unbiased integrator must quarter when spp quadruples.
    let params = BsdfParams::conductor(
        Rgb::new(0.9, 0.8, 0.6),
        0.4,
        0.4,
        ScatterModel::SingleBounce,
    );
    let scene = Scene {
        camera: Camera {
            eye: Vec3::new(0.0, -4.0, 1.2),
            look_at: Vec3::new(0.0, 0.0, 0.4),
            up: Vec3::new(0.0, 0.0, 1.0),
            fov_degrees: 32.0,
            width: 24,
            height: 24,
        },
        objects: vec![SceneObject {
            shape: Shape::Sphere {
                center: Vec3::new(0.0, 0.0, 0.4),
                radius: 1.0,
            },
            material: Material::new(params, SamplerKind::Vndf),
        }],
        lights: vec![Light::Env(Arc::new(EnvMap::procedural_sky(32, 16, 1.0)))],
    };
    let reference = render(
        &scene,
        &RenderConfig {
            integrator: IntegratorKind::Mis,
            spp: 4096,
            seed: seed ^ 0x5EED,
            max_depth: 1,
        },
    )?;
    let relmse_at = |spp: usize, s: u64| -> anyhow::Result<f64> {
        let img = render(
            &scene,
            &RenderConfig {
                integrator: IntegratorKind::Mis,
                spp,
                seed: s,
                max_depth: 1,
            },
        )?;
        Ok(otmap::render::relmse(&img, &reference)?)
    };
    let mut ratios = Vec::new();
    for s in 0..3 {
        let low = relmse_at(16, seed + s)?;
        let high = relmse_at(64, seed + 100 + s)?;
        ratios.push(high / low);
    }
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(Criterion {
        name: "mc_error_quarters_when_spp_quadruples".into(),
        passed: (0.2..=0.3).contains(&mean_ratio),
        value: mean_ratio,
        threshold: "ratio in [0.2, 0.3]".into(),
        detail: format!("ratios {ratios:?}"),
    })
}
