//! Shared fixtures for the acceptance suite: the baked map corpus and the
//! trained network bundles. Built once per test binary and reused by every
//! criterion.

use std::sync::{Arc, LazyLock};

use otmap::bsdf::{BsdfParams, ScatterModel};
use otmap::math::{chi_square_test, ChiSquareResult, Direction, Domain, Rgb, RngStream, SquareCoord};
use otmap::neural::{generate_dataset, train, BakeRecord, NetKind, NeuralBsdf, TrainConfig};
use otmap::render::BakedFamily;
use otmap::slice::{tabulate_slice, SliceImage, TabulateConfig};
use otmap::transport::{AssignMethod, BakeConfig, ImportanceMap, PolishConfig};
use rayon::prelude::*;

pub const MAP_POINTS: usize = 4096;
pub const SLICE_RES: usize = 64;

pub fn bake_config() -> BakeConfig {
    BakeConfig {
        slice: TabulateConfig {
            resolution: SLICE_RES,
            noise_target: 0.02,
            ..TabulateConfig::default()
        },
        points: MAP_POINTS,
        method: AssignMethod::Exact,
        polish: PolishConfig::default(),
    }
}

pub struct CorpusEntry {
    pub name: String,
    pub slice: SliceImage,
    pub map: ImportanceMap,
    pub row_column: ImportanceMap,
    pub bake_seconds: f64,
}

pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

fn direction(cos_theta: f64, phi: f64) -> Direction {
    Direction::from_spherical((1.0 - cos_theta * cos_theta).sqrt(), cos_theta, phi)
}

/// Synthetic photograph-like grayscale density: several soft features over a
/// gradient background with a healthy floor. Deterministic; used as the
/// image-as-density member of the corpus.
pub fn photo_density(res: usize) -> Vec<f64> {
    let mut gray = vec![0.0f64; res * res];
    let blobs = [
        (0.3f64, 0.35f64, 0.012f64, 1.0f64),
        (0.68, 0.3, 0.02, 0.8),
        (0.55, 0.7, 0.008, 1.2),
        (0.2, 0.75, 0.03, 0.6),
        (0.82, 0.62, 0.015, 0.9),
    ];
    for y in 0..res {
        for x in 0..res {
            let fx = (x as f64 + 0.5) / res as f64;
            let fy = (y as f64 + 0.5) / res as f64;
            let mut v = 0.25 + 0.3 * fy + 0.1 * (fx * 6.0).sin().abs();
            for (cx, cy, s2, a) in blobs {
                let d2 = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy);
                v += a * (-d2 / s2).exp();
            }
            gray[y * res + x] = v;
        }
    }
    gray
}

/// The 20-map corpus: nineteen grazing-band conductor slices (where
/// marginal-then-conditional sampling tears between rows) plus the
/// photograph density.
pub static CORPUS: LazyLock<Corpus> = LazyLock::new(|| {
    let mut specs: Vec<(String, Option<(BsdfParams, Direction)>)> = Vec::new();
    for (alpha, model) in [
        (0.45, ScatterModel::MultiBounce),
        (0.5, ScatterModel::MultiBounce),
        (0.55, ScatterModel::MultiBounce),
        (0.5, ScatterModel::SingleBounce),
        (0.6, ScatterModel::SingleBounce),
        (0.6, ScatterModel::MultiBounce),
    ] {
        for cos in [0.20, 0.24, 0.28] {
            if specs.len() >= 19 {
                break;
            }
            let phi = 0.5 + 0.37 * specs.len() as f64 % 1.3;
            let params = BsdfParams::conductor(Rgb::new(0.9, 0.7, 0.4), alpha, alpha, model);
            specs.push((
                format!("{model:?}-a{alpha}-c{cos}"),
                Some((params, direction(cos, phi))),
            ));
        }
    }
    specs.truncate(19);
    specs.push(("photo".to_string(), None));

    let config = bake_config();
    let entries: Vec<CorpusEntry> = specs
        .par_iter()
        .map(|(name, bsdf)| {
            let started = std::time::Instant::now();
            let slice = match bsdf {
                Some((params, wi)) => tabulate_slice(params, *wi, &config.slice).unwrap(),
                None => SliceImage::from_grayscale(
                    SLICE_RES,
                    Domain::Hemisphere,
                    &photo_density(SLICE_RES),
                )
                .unwrap(),
            };
            let map = ImportanceMap::from_slice(&slice, &config).unwrap();
            let row_column = ImportanceMap::from_slice_row_column(&slice, config.points).unwrap();
            CorpusEntry {
                name: name.clone(),
                slice,
                map,
                row_column,
                bake_seconds: started.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Corpus { entries }
});

/// Chi-square of one million stratified-jittered queries against the map's
/// target density at 16×16 bins. Each query position is marginally uniform;
/// stratification removes the multinomial noise floor so the test reads the
/// systematic error directly.
pub fn map_chi_square(map: &ImportanceMap, seed: u64) -> ChiSquareResult {
    let bins = 16usize;
    let side = 1000usize;
    let res = map.density_resolution;
    let mut rng = RngStream::new(seed, 7);
    let mut observed = vec![0u64; bins * bins];
    for sy in 0..side {
        for sx in 0..side {
            let xi = SquareCoord::new(
                (sx as f64 + rng.next_f64()) / side as f64,
                (sy as f64 + rng.next_f64()) / side as f64,
            );
            let uv = map.query_uv(xi);
            let x = ((uv.s * bins as f64) as usize).min(bins - 1);
            let y = ((uv.t * bins as f64) as usize).min(bins - 1);
            observed[y * bins + x] += 1;
        }
    }
    let k = res / bins;
    let mut expected = vec![0.0f64; bins * bins];
    for y in 0..res {
        for x in 0..res {
            expected[(y / k) * bins + (x / k)] += map.density[y * res + x];
        }
    }
    chi_square_test(&observed, &expected)
}

/// Bakes one lattice of records for network training.
pub fn bake_lattice(
    configs: &[(BsdfParams, Direction)],
    seed: u64,
) -> Vec<BakeRecord> {
    let mut config = bake_config();
    config.slice.seed = seed;
    configs
        .par_iter()
        .map(|(params, wi)| {
            let slice = tabulate_slice(params, *wi, &config.slice).unwrap();
            let mut map = ImportanceMap::from_slice(&slice, &config).unwrap();
            map.meta = Some(otmap::transport::MapMeta {
                params: *params,
                wi: *wi,
            });
            BakeRecord {
                params: *params,
                wi: *wi,
                slice,
                map,
            }
        })
        .collect()
}

pub struct TrainedBundle {
    pub nets: Arc<NeuralBsdf>,
    pub records: Vec<BakeRecord>,
    pub holdout: Vec<BakeRecord>,
}

/// Sample/eval/pdf nets for the single-bounce holdout family: one roughness,
/// a cosine lattice with two held-out midpoints.
pub static NETS_HOLDOUT: LazyLock<TrainedBundle> = LazyLock::new(|| {
    let params = BsdfParams::conductor(
        Rgb::new(0.9, 0.7, 0.4),
        0.5,
        0.5,
        ScatterModel::SingleBounce,
    );
    let train_cos = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let holdout_cos = [0.45, 0.75];
    let lattice: Vec<(BsdfParams, Direction)> = train_cos
        .iter()
        .map(|&c| (params, direction(c, 0.0)))
        .collect();
    let holdout_lattice: Vec<(BsdfParams, Direction)> = holdout_cos
        .iter()
        .map(|&c| (params, direction(c, 0.0)))
        .collect();
    let records = bake_lattice(&lattice, 11);
    let holdout = bake_lattice(&holdout_lattice, 12);
    let nets = train_bundle(&records, 4001, 340);
    TrainedBundle {
        nets: Arc::new(nets),
        records,
        holdout,
    }
});

/// Multibounce furnace family (R0 = 1 so the Fresnel is identically one),
/// spanning the furnace roughnesses and a cosine lattice.
pub static NETS_FURNACE: LazyLock<TrainedBundle> = LazyLock::new(|| {
    let mut lattice = Vec::new();
    for alpha in [0.3, 0.6, 1.0] {
        for cos in [0.25, 0.45, 0.65, 0.85] {
            let params =
                BsdfParams::conductor(Rgb::WHITE, alpha, alpha, ScatterModel::MultiBounce);
            lattice.push((params, direction(cos, 0.0)));
        }
    }
    let records = bake_lattice(&lattice, 21);
    let nets = train_bundle(&records, 4002, 300);
    TrainedBundle {
        nets: Arc::new(nets),
        records,
        holdout: Vec::new(),
    }
});

/// Multibounce dielectric family across the three acceptance etas.
pub static NETS_DIELECTRIC: LazyLock<TrainedBundle> = LazyLock::new(|| {
    let mut lattice = Vec::new();
    for eta in [1.33, 1.5, 2.0] {
        for cos in [0.4, 0.8] {
            let params = BsdfParams::dielectric(eta, 0.5, 0.5, ScatterModel::MultiBounce);
            lattice.push((params, direction(cos, 0.0)));
        }
    }
    let records = bake_lattice(&lattice, 31);
    let nets = train_bundle(&records, 4003, 260);
    TrainedBundle {
        nets: Arc::new(nets),
        records,
        holdout: Vec::new(),
    }
});

fn train_bundle(records: &[BakeRecord], seed: u64, epochs: usize) -> NeuralBsdf {
    let domain = records[0].params.domain();
    let sample_set = generate_dataset(records, NetKind::Sample, 4096, seed).unwrap();
    let eval_set = generate_dataset(records, NetKind::Eval, 0, seed).unwrap();
    let pdf_set = generate_dataset(records, NetKind::Pdf, 0, seed).unwrap();
    let config = TrainConfig {
        hidden: vec![64, 64, 64, 64],
        epochs,
        learning_rate: 3e-3,
        lr_floor: 3e-3,
        seed,
        ..TrainConfig::default()
    };
    let (sample, _) = train(&sample_set, &config).unwrap();
    let smaller = TrainConfig {
        epochs: epochs / 2,
        ..config.clone()
    };
    let (eval, _) = train(&eval_set, &smaller).unwrap();
    let (pdf, _) = train(&pdf_set, &smaller).unwrap();
    NeuralBsdf::new(sample, eval, pdf, domain).unwrap()
}

/// A baked-map family for one material over a grid of incident cosines,
/// used as the renderer's baked sampler attachment.
pub fn baked_family_for(
    params: &BsdfParams,
    cosines: &[f64],
    phis: &[f64],
) -> Arc<BakedFamily> {
    let lattice: Vec<(BsdfParams, Direction)> = cosines
        .iter()
        .flat_map(|&c| phis.iter().map(move |&p| (c, p)))
        .map(|(c, p)| (*params, direction(c, p)))
        .collect();
    let records = bake_lattice(&lattice, 77);
    let entries = records
        .into_iter()
        .map(|r| (r.wi, r.map))
        .collect::<Vec<_>>();
    Arc::new(BakedFamily::new(entries).unwrap())
}
