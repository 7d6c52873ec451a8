//! Acceptance suite. Each test prints one PASS/FAIL line for its criterion;
//! expensive fixtures (the map corpus, trained networks) are shared across
//! criteria through lazy statics in `support`.

mod support;

use std::sync::Arc;

use otmap::bsdf::{directional_albedo, BsdfParams, ScatterModel};
use otmap::math::{Direction, Rgb, RngStream, SquareCoord, Vec3};
use otmap::neural::{
    finite_difference_worst_error, overfit_one_record, Activation, NetKind,
};
use otmap::render::{
    power_heuristic, relmse, render, Camera, EnvMap, IntegratorKind, Light, Material,
    RenderConfig, RenderOutput, SamplerKind, Scene, SceneObject, Shape,
};
use otmap::slice::PointSet;
use otmap::transport::{solve_assignment, AssignMethod};

use support::{
    baked_family_for, map_chi_square, CORPUS, NETS_DIELECTRIC, NETS_FURNACE, NETS_HOLDOUT,
};

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} — {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion}: {detail}");
}

fn direction(cos_theta: f64, phi: f64) -> Direction {
    Direction::from_spherical((1.0 - cos_theta * cos_theta).sqrt(), cos_theta, phi)
}

#[test]
fn criterion_01_assignment_solver_exactness() {
    // Exhaustive-permutation agreement on 200 random small instances.
    let mut rng = RngStream::new(2024, 1);
    let mut worst_gap = 0.0f64;
    for trial in 0..200 {
        let n = 2 + trial % 7; // n in 2..=8
        let pts = |rng: &mut RngStream| PointSet {
            points: (0..n)
                .map(|_| SquareCoord::new(rng.next_f64(), rng.next_f64()))
                .collect(),
        };
        let a = pts(&mut rng);
        let b = pts(&mut rng);
        let got = solve_assignment(&a, &b, AssignMethod::Exact).unwrap();
        assert!(got.is_bijection());
        let mut best = f64::INFINITY;
        permute(&mut (0..n).collect::<Vec<_>>(), 0, &mut |perm| {
            let cost: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let (ds, dt) = (a.points[i].s - b.points[j].s, a.points[i].t - b.points[j].t);
                    ((ds * ds + dt * dt) as f32) as f64
                })
                .sum();
            best = best.min(cost);
        });
        worst_gap = worst_gap.max((got.cost - best).abs());
    }

    // Bijection on 1024-point grids against a random target set.
    let alpha = PointSet::uniform_grid(1024).unwrap();
    let mut rng2 = RngStream::new(7, 7);
    let beta = PointSet {
        points: (0..1024)
            .map(|_| SquareCoord::new(rng2.next_f64(), rng2.next_f64()))
            .collect(),
    };
    let big = solve_assignment(&alpha, &beta, AssignMethod::Exact).unwrap();

    // Bake runtime: every corpus bake (n = 4096) within the budget.
    let slowest = CORPUS
        .entries
        .iter()
        .map(|e| e.bake_seconds)
        .fold(0.0f64, f64::max);

    report(
        "01 assignment-solver-exactness",
        worst_gap < 1e-9 && big.is_bijection() && slowest <= 600.0,
        &format!(
            "worst brute-force gap {worst_gap:.2e}; 1024-grid bijective; slowest 4096 bake {slowest:.0}s (limit 600s)"
        ),
    );
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

#[test]
fn criterion_02_perfect_importance_sampling_identity() {
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for entry in &CORPUS.entries {
        let map = &entry.map;
        let slice = &entry.slice;
        for i in 0..map.texel_count() {
            let uv = map.uv[i];
            let texel = slice.texel_of(uv);
            let pdf = map.pdf(uv);
            let expect = slice.rgb[texel] * (1.0 / slice.domain.jacobian());
            let got = map.sw[i] * pdf;
            for (g, e) in [
                (got.r, expect.r),
                (got.g, expect.g),
                (got.b, expect.b),
            ] {
                if e > 1e-12 {
                    let rel = (g - e).abs() / e;
                    if rel > worst {
                        worst = rel;
                        worst_name = entry.name.clone();
                    }
                }
            }
        }
    }
    report(
        "02 perfect-importance-sampling-identity",
        worst < 1e-5,
        &format!("worst relative error {worst:.2e} (map {worst_name}), limit 1e-5"),
    );
}

#[test]
fn criterion_03_distribution_correctness() {
    // Baked maps: chi-square of one million marginally-uniform (stratified
    // jittered) queries at 16×16 bins, per corpus map.
    let mut worst_p = f64::INFINITY;
    let mut worst_name = String::new();
    for (i, entry) in CORPUS.entries.iter().enumerate() {
        let r = map_chi_square(&entry.map, 900 + i as u64);
        if r.p_value < worst_p {
            worst_p = r.p_value;
            worst_name = entry.name.clone();
        }
    }

    // Neural sampler on held-out lattice points.
    let bundle = &NETS_HOLDOUT;
    let mut scratch = bundle.nets.scratch();
    let mut worst_neural_p = f64::INFINITY;
    for (hi, rec) in bundle.holdout.iter().enumerate() {
        let bins = 16usize;
        let side = 1000usize;
        let mut rng = RngStream::new(3000 + hi as u64, 5);
        let mut observed = vec![0u64; bins * bins];
        for sy in 0..side {
            for sx in 0..side {
                let xi = SquareCoord::new(
                    (sx as f64 + rng.next_f64()) / side as f64,
                    (sy as f64 + rng.next_f64()) / side as f64,
                );
                let s = bundle
                    .nets
                    .sample(&rec.params, rec.wi, xi, &mut scratch)
                    .unwrap();
                let uv = otmap::math::direction_to_square(s.wo, rec.slice.domain).unwrap();
                let x = ((uv.s * bins as f64) as usize).min(bins - 1);
                let y = ((uv.t * bins as f64) as usize).min(bins - 1);
                observed[y * bins + x] += 1;
            }
        }
        let res = rec.slice.resolution;
        let k = res / bins;
        let mut expected = vec![0.0f64; bins * bins];
        for y in 0..res {
            for x in 0..res {
                expected[(y / k) * bins + (x / k)] += rec.slice.density[y * res + x];
            }
        }
        let r = otmap::math::chi_square_test(&observed, &expected);
        worst_neural_p = worst_neural_p.min(r.p_value);
    }

    report(
        "03 distribution-correctness",
        worst_p > 0.01 && worst_neural_p > 0.001,
        &format!(
            "worst baked-map chi-square p {worst_p:.3e} (map {worst_name}, limit 0.01); worst neural held-out p {worst_neural_p:.3e} (limit 0.001)"
        ),
    );
}

#[test]
fn criterion_04_smoothness_ordering() {
    let mut all_smoother = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_jump = 0.0f64;
    let mut detail = String::new();
    for entry in &CORPUS.entries {
        let ot = entry.map.locality_score();
        let rc = entry.row_column.locality_score();
        let ratio = ot / rc;
        if ot >= rc {
            all_smoother = false;
            detail.push_str(&format!("{}: ot {ot:.5} !< rc {rc:.5}; ", entry.name));
        }
        worst_ratio = worst_ratio.max(ratio);
        let jump = entry.map.max_adjacent_jump_off_seam()
            * entry.map.resolution as f64;
        worst_jump = worst_jump.max(jump);
    }
    report(
        "04 smoothness-ordering",
        all_smoother && worst_jump <= 3.0,
        &format!(
            "transport/row-column locality ratio worst {worst_ratio:.3} (all < 1: {all_smoother}); max off-seam jump {worst_jump:.2}x grid spacing (limit 3x). {detail}"
        ),
    );
}

#[test]
fn criterion_05_gradient_exactness() {
    let mut worst = 0.0f64;
    for kind in [NetKind::Sample, NetKind::Eval, NetKind::Pdf] {
        let w = finite_difference_worst_error(kind, Activation::Softplus, 1000, 42);
        worst = worst.max(w);
    }
    let feature: Vec<f32> = (0..11).map(|i| 0.08 * i as f32).collect();
    let target = [0.35f32, 0.62, 0.8, 0.5, 0.3];
    let (_, overfit_loss) = overfit_one_record(NetKind::Sample, &feature, &target, 1000, 3);
    report(
        "05 gradient-exactness",
        worst < 1e-4 && overfit_loss < 1e-8,
        &format!(
            "worst finite-difference relative error {worst:.2e} over 1000 coords x 3 kinds (limit 1e-4); overfit-one-record loss {overfit_loss:.2e} (limit 1e-8)"
        ),
    );
}

fn furnace_scene(alpha: f64, sampler: SamplerKind, width: usize) -> Scene {
    let params = BsdfParams::conductor(Rgb::WHITE, alpha, alpha, ScatterModel::MultiBounce);
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

#[test]
fn criterion_06_white_furnace() {
    // Ground truth: the random-walk sampler must keep every pixel at 1.
    let mut worst_gt = 0.0f64;
    for alpha in [0.3, 0.6, 1.0] {
        let scene = furnace_scene(alpha, SamplerKind::RandomWalk, 24);
        let out = render(
            &scene,
            &RenderConfig {
                integrator: IntegratorKind::BsdfOnly,
                spp: 1024,
                seed: 8,
                max_depth: 1,
            },
        )
        .unwrap();
        assert_eq!(out.nan_count, 0);
        for p in &out.pixels {
            worst_gt = worst_gt.max((p.luminance() - 1.0).abs());
        }
    }

    // Neural pipeline: deviation of the furnace mean, reported and bounded.
    let bundle = &NETS_FURNACE;
    let mut worst_neural = 0.0f64;
    for alpha in [0.3, 0.6, 1.0] {
        let mut scene = furnace_scene(alpha, SamplerKind::Neural, 24);
        scene.objects[0].material.neural = Some(bundle.nets.clone());
        let out = render(
            &scene,
            &RenderConfig {
                integrator: IntegratorKind::BsdfOnly,
                spp: 512,
                seed: 9,
                max_depth: 1,
            },
        )
        .unwrap();
        assert_eq!(out.nan_count, 0);
        let mean = out.pixels.iter().map(|p| p.luminance()).sum::<f64>()
            / out.pixels.len() as f64;
        worst_neural = worst_neural.max((mean - 1.0).abs());
        println!("  neural furnace at alpha {alpha}: mean {mean:.4}");
    }
    report(
        "06 white-furnace",
        worst_gt < 0.02 && worst_neural < 0.05,
        &format!(
            "ground-truth worst pixel deviation {worst_gt:.4} (limit 0.02); neural worst mean deviation {worst_neural:.4} (limit 0.05)"
        ),
    );
}

/// Grazing-view plate under the procedural sky; the camera is far away so
/// the incident direction is nearly constant and the baked family small.
fn grazing_plate_scene(material: Material, width: usize) -> Scene {
    Scene {
        camera: Camera {
            eye: Vec3::new(0.0, -30.0, 2.4),
            look_at: Vec3::new(0.0, 0.0, 0.0),
            up: Vec3::new(0.0, 0.0, 1.0),
            fov_degrees: 7.0,
            width,
            height: width,
        },
        objects: vec![SceneObject {
            shape: Shape::Rect {
                origin: Vec3::new(-2.4, -2.4, 0.0),
                edge_u: Vec3::new(4.8, 0.0, 0.0),
                edge_v: Vec3::new(0.0, 4.8, 0.0),
            },
            material,
        }],
        lights: vec![Light::Env(Arc::new(EnvMap::procedural_sky(64, 32, 1.0)))],
    }
}

fn scene_relmse(scene: &Scene, spp: usize, seed: u64, ref_factor: usize) -> (f64, f64) {
    let image = render(
        scene,
        &RenderConfig {
            integrator: IntegratorKind::BsdfOnly,
            spp,
            seed,
            max_depth: 1,
        },
    )
    .unwrap();
    let reference = render(
        scene,
        &RenderConfig {
            integrator: IntegratorKind::BsdfOnly,
            spp: spp * ref_factor,
            seed: seed ^ 0xAAAA,
            max_depth: 1,
        },
    )
    .unwrap();
    (relmse(&image, &reference).unwrap(), image.seconds)
}

#[test]
fn criterion_07_variance_ordering() {
    let started = std::time::Instant::now();
    // Single bounce, strongly anisotropic, grazing view (Fig. 6 analogue).
    let params = BsdfParams::conductor(
        Rgb::new(0.95, 0.93, 0.88),
        0.1,
        0.04,
        ScatterModel::SingleBounce,
    );
    // The camera grazes at cosθ ≈ 0.08; bake the family around it.
    let family = baked_family_for(
        &params,
        &[0.05, 0.08, 0.12, 0.18],
        &[-std::f64::consts::FRAC_PI_2],
    );
    let relmse_for = |sampler: SamplerKind| {
        let mut material = Material::new(params, sampler);
        if sampler == SamplerKind::BakedMap {
            material.baked = Some(family.clone());
        }
        scene_relmse(&grazing_plate_scene(material, 256), 128, 31, 16)
    };
    let (ndf, _) = relmse_for(SamplerKind::Ndf);
    let (vndf, _) = relmse_for(SamplerKind::Vndf);
    let (baked, _) = relmse_for(SamplerKind::BakedMap);

    // Multiple bounce (Fig. 7 analogue): baked map vs the random walk.
    let multi_params = BsdfParams::conductor(
        Rgb::new(0.9, 0.75, 0.5),
        0.5,
        0.1,
        ScatterModel::MultiBounce,
    );
    let multi_family = baked_family_for(
        &multi_params,
        &[0.05, 0.08, 0.12, 0.18],
        &[-std::f64::consts::FRAC_PI_2],
    );
    let relmse_multi = |sampler: SamplerKind| {
        let mut material = Material::new(multi_params, sampler);
        material.eval_walks = 4;
        if sampler == SamplerKind::BakedMap {
            material.baked = Some(multi_family.clone());
        }
        scene_relmse(&grazing_plate_scene(material, 256), 128, 33, 8)
    };
    let (walk, _) = relmse_multi(SamplerKind::RandomWalk);
    let (baked_multi, _) = relmse_multi(SamplerKind::BakedMap);
    let elapsed = started.elapsed().as_secs_f64();

    report(
        "07 variance-ordering",
        baked <= vndf && vndf <= ndf && baked_multi < walk && elapsed <= 600.0,
        &format!(
            "single-bounce relMSE baked {baked:.4e} <= vndf {vndf:.4e} <= ndf {ndf:.4e}; multi-bounce baked {baked_multi:.4e} < walk {walk:.4e}; total {elapsed:.0}s (limit 600s)"
        ),
    );
}

/// A plate lit by one rectangular light sized so BSDF sampling wins at low
/// roughness and light sampling wins at high roughness (Fig. 8 analogue).
fn mis_flip_scene(alpha: f64, width: usize) -> Scene {
    let params =
        BsdfParams::conductor(Rgb::new(0.9, 0.85, 0.7), alpha, alpha, ScatterModel::SingleBounce);
    Scene {
        camera: Camera {
            eye: Vec3::new(0.0, -6.0, 2.2),
            look_at: Vec3::new(0.0, 0.0, 0.0),
            up: Vec3::new(0.0, 0.0, 1.0),
            fov_degrees: 24.0,
            width,
            height: width,
        },
        objects: vec![SceneObject {
            shape: Shape::Rect {
                origin: Vec3::new(-2.0, -2.0, 0.0),
                edge_u: Vec3::new(4.0, 0.0, 0.0),
                edge_v: Vec3::new(0.0, 4.0, 0.0),
            },
            material: Material::new(params, SamplerKind::Vndf),
        }],
        lights: vec![Light::Rect {
            // Tilted panel ahead of the camera; normal (edge_v × edge_u
            // order) faces back toward the plate.
            origin: Vec3::new(-0.6, 2.2, 1.4),
            edge_u: Vec3::new(0.0, -0.35, 1.1),
            edge_v: Vec3::new(1.2, 0.0, 0.0),
            radiance: Rgb::splat(24.0),
        }],
    }
}

#[test]
fn criterion_08_mis_ablation() {
    let run = |alpha: f64, integrator: IntegratorKind| -> f64 {
        let scene = mis_flip_scene(alpha, 96);
        let image = render(
            &scene,
            &RenderConfig {
                integrator,
                spp: 64,
                seed: 17,
                max_depth: 1,
            },
        )
        .unwrap();
        let reference = render(
            &scene,
            &RenderConfig {
                integrator: IntegratorKind::Mis,
                spp: 4096,
                seed: 71,
                max_depth: 1,
            },
        )
        .unwrap();
        relmse(&image, &reference).unwrap()
    };
    let mut pass = true;
    let mut detail = String::new();
    let mut winners = Vec::new();
    for alpha in [0.08, 0.3] {
        let light = run(alpha, IntegratorKind::LightOnly);
        let bsdf = run(alpha, IntegratorKind::BsdfOnly);
        let mis = run(alpha, IntegratorKind::Mis);
        let best = light.min(bsdf);
        pass &= mis <= 1.1 * best;
        winners.push(bsdf < light);
        detail.push_str(&format!(
            "alpha {alpha}: light {light:.3e} bsdf {bsdf:.3e} mis {mis:.3e}; "
        ));
    }
    // The losing strategy must flip between the roughness settings:
    // BSDF sampling wins at 0.08, light sampling wins at 0.3.
    let flipped = winners[0] && !winners[1];
    report(
        "08 mis-ablation",
        pass && flipped,
        &format!("{detail}winner flip (bsdf@0.08, light@0.3): {flipped}"),
    );
}

#[test]
fn criterion_09_dielectric_coverage() {
    // Mass split of baked dielectric maps vs Fresnel-weighted albedo
    // quadrature of the stochastic evaluator.
    let bundle = &NETS_DIELECTRIC;
    let mut worst_split = 0.0f64;
    for rec in &bundle.records {
        let map = &rec.map;
        // Realized reflection share of the map.
        let share = map.seam_row as f64 / map.resolution as f64;
        // Oracle: quadrature of E[eval_multi] over each hemisphere.
        let mut rng = RngStream::new(5150, 3);
        let (n_cos, n_phi, walks) = (48, 24, 24);
        let mut up = 0.0;
        let mut down = 0.0;
        for &side in &[1.0f64, -1.0] {
            for iz in 0..n_cos {
                let z = side * (iz as f64 + 0.5) / n_cos as f64;
                let sin = (1.0f64 - z * z).max(0.0).sqrt();
                for ip in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * (ip as f64 + 0.5) / n_phi as f64;
                    let wo = Direction::from_spherical(sin, z, phi);
                    let v = otmap::bsdf::eval_multi(&rec.params, rec.wi, wo, &mut rng, walks)
                        .luminance();
                    if side > 0.0 {
                        up += v;
                    } else {
                        down += v;
                    }
                }
            }
        }
        let oracle_share = up / (up + down);
        worst_split = worst_split.max((share - oracle_share).abs());
        assert!(up > 0.0 && down > 0.0, "a dielectric half carries no mass");
    }

    // Neural dielectric renders finish without non-finite samples.
    let mut nan_total = 0u64;
    for eta in [1.33, 1.5, 2.0] {
        let params = BsdfParams::dielectric(eta, 0.5, 0.5, ScatterModel::MultiBounce);
        let mut material = Material::new(params, SamplerKind::Neural);
        material.neural = Some(bundle.nets.clone());
        let scene = Scene {
            camera: Camera {
                eye: Vec3::new(0.0, -4.0, 1.0),
                look_at: Vec3::new(0.0, 0.0, 0.4),
                up: Vec3::new(0.0, 0.0, 1.0),
                fov_degrees: 30.0,
                width: 48,
                height: 48,
            },
            objects: vec![SceneObject {
                shape: Shape::Sphere {
                    center: Vec3::new(0.0, 0.0, 0.4),
                    radius: 0.9,
                },
                material,
            }],
            lights: vec![Light::Env(Arc::new(EnvMap::procedural_sky(32, 16, 1.0)))],
        };
        let out = render(
            &scene,
            &RenderConfig {
                integrator: IntegratorKind::Mis,
                spp: 32,
                seed: 5,
                max_depth: 3,
            },
        )
        .unwrap();
        nan_total += out.nan_count;
        assert!(out.pixels.iter().all(|p| p.is_finite()));
    }
    report(
        "09 dielectric-coverage",
        worst_split < 0.05 && nan_total == 0,
        &format!(
            "worst reflection-share deviation {worst_split:.4} (limit 0.05); non-finite samples {nan_total}"
        ),
    );
}

#[test]
fn criterion_10_mc_convergence() {
    // Unbiased integrators: relMSE must scale like 1/spp (quartering when
    // spp quadruples). The criterion's wording says "halves"; the defined
    // metric is squared error, whose Monte Carlo rate is 1/spp.
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
    let mut pass = true;
    let mut detail = String::new();
    for integrator in [
        IntegratorKind::LightOnly,
        IntegratorKind::BsdfOnly,
        IntegratorKind::Mis,
    ] {
        let reference = render(
            &scene,
            &RenderConfig {
                integrator,
                spp: 8192,
                seed: 999,
                max_depth: 1,
            },
        )
        .unwrap();
        let relmse_at = |spp: usize, seed: u64| -> f64 {
            let img = render(
                &scene,
                &RenderConfig {
                    integrator,
                    spp,
                    seed,
                    max_depth: 1,
                },
            )
            .unwrap();
            relmse(&img, &reference).unwrap()
        };
        let mut ratios = Vec::new();
        for seed in 0..3u64 {
            let low = relmse_at(16, 100 + seed);
            let high = relmse_at(64, 200 + seed);
            ratios.push(high / low);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        pass &= (0.2..=0.3).contains(&mean);
        detail.push_str(&format!("{}: ratio {mean:.3}; ", integrator.name()));
    }
    report(
        "10 mc-convergence",
        pass,
        &format!("{detail}(1/4 rate, tolerance ±20% -> [0.2, 0.3])"),
    );
}

#[test]
fn mis_weights_are_normalized() {
    // Supporting invariant for the MIS machinery used across criteria.
    let mut rng = RngStream::new(4, 4);
    for _ in 0..1000 {
        let a = rng.next_f64() * 5.0;
        let b = rng.next_f64() * 5.0;
        assert!((power_heuristic(a, b) + power_heuristic(b, a) - 1.0).abs() < 1e-12);
    }
}

#[allow(dead_code)]
fn debug_dump(out: &RenderOutput, path: &str) {
    otmap::io::write_png_tonemapped(std::path::Path::new(path), out.width, out.height, &out.pixels)
        .unwrap();
}
