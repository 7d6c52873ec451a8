//! `otmap bake`: tabulate slices and bake maps over a parameter lattice.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use otmap::bsdf::{BsdfParams, MaterialKind, ScatterModel};
use otmap::math::{Direction, Rgb};
use otmap::render::{BakeManifest, BakeManifestEntry};
use otmap::slice::TabulateConfig;
use otmap::transport::{AssignMethod, BakeConfig, ImportanceMap};

#[derive(Args, Serialize)]
pub struct BakeArgs {
    /// Output directory for slices, maps, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Roughness values; isotropic (`0.5`) or anisotropic (`0.5x0.1`).
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5")]
    pub alpha: Vec<String>,
    /// Incidence cosines of the lattice.
    #[arg(long, value_delimiter = ',', default_value = "0.35,0.65,0.95")]
    pub cos_theta: Vec<f64>,
    /// Indices of refraction (dielectrics only).
    #[arg(long, value_delimiter = ',', default_value = "1.5")]
    pub eta: Vec<f64>,
    /// Base color at normal incidence.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.9,0.9", num_args = 3)]
    pub r0: Vec<f64>,
    #[arg(long, value_enum, default_value = "conductor")]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "single")]
    pub model: ModelArg,
    /// Slice resolution (texels per side).
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Point-set size of the assignment (perfect square).
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
    /// Per-texel relative standard error target for stochastic models.
    #[arg(long, default_value_t = 0.02)]
    pub noise_target: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write preview PNGs (map as r=u, g=v, b=0; slice as grayscale).
    #[arg(long, default_value_t = false)]
    pub preview: bool,
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
pub enum KindArg {
    Conductor,
    Dielectric,
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
pub enum ModelArg {
    Single,
    Multi,
}

fn parse_alpha(spec: &str) -> anyhow::Result<(f64, f64)> {
    if let Some((x, y)) = spec.split_once('x') {
        Ok((x.trim().parse()?, y.trim().parse()?))
    } else {
        let a: f64 = spec.trim().parse()?;
        Ok((a, a))
    }
}

pub fn run(args: BakeArgs) -> anyhow::Result<i32> {
    if args.alpha.is_empty() || args.cos_theta.is_empty() {
        bail!("lattice is empty: need at least one alpha and one cos-theta");
    }
    for &c in &args.cos_theta {
        if !(c > 0.0 && c <= 1.0) {
            bail!("cos-theta {c} outside (0, 1]");
        }
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    super::echo_config(&args.out, "bake_config.json", &args)?;

    let kind = match args.kind {
        KindArg::Conductor => MaterialKind::Conductor,
        KindArg::Dielectric => MaterialKind::Dielectric,
    };
    let model = match args.model {
        ModelArg::Single => ScatterModel::SingleBounce,
        ModelArg::Multi => ScatterModel::MultiBounce,
    };
    let r0 = Rgb::new(args.r0[0], args.r0[1], args.r0[2]);
    let etas: Vec<f64> = match kind {
        MaterialKind::Conductor => vec![1.5],
        MaterialKind::Dielectric => args.eta.clone(),
    };

    // The lattice, in a stable order for resumable file names.
    let mut jobs = Vec::new();
    for alpha_spec in &args.alpha {
        let (ax, ay) = parse_alpha(alpha_spec)?;
        for &eta in &etas {
            for &cos in &args.cos_theta {
                let params = BsdfParams {
                    r0,
                    alpha_x: ax,
                    alpha_y: ay,
                    eta,
                    model,
                    kind,
                };
                params.validate()?;
                let sin = (1.0 - cos * cos).max(0.0).sqrt();
                let wi = Direction::from_spherical(sin, cos, 0.0);
                jobs.push((params, wi));
            }
        }
    }

    let bake_config = BakeConfig {
        slice: TabulateConfig {
            resolution: args.resolution,
            noise_target: args.noise_target,
            seed: args.seed,
            ..TabulateConfig::default()
        },
        points: args.points,
        method: AssignMethod::Exact,
        ..BakeConfig::default()
    };

    let mut manifest = BakeManifest::default();
    let mut baked = 0usize;
    let mut skipped = 0usize;
    for (index, (params, wi)) in jobs.iter().enumerate() {
        let slice_file = format!("slice_{index:04}.bin");
        let map_file = format!("map_{index:04}.bin");
        let slice_path = args.out.join(&slice_file);
        let map_path = args.out.join(&map_file);

        let resumable = otmap::io::verify_file(&slice_path) && otmap::io::verify_file(&map_path);
        if resumable {
            skipped += 1;
            eprintln!("[{}/{}] {slice_file}: intact, skipping", index + 1, jobs.len());
        } else {
            let started = std::time::Instant::now();
            let slice = otmap::slice::tabulate_slice(params, *wi, &bake_config.slice)?;
            let mut map = ImportanceMap::from_slice(&slice, &bake_config)?;
            map.meta = Some(otmap::transport::MapMeta {
                params: *params,
                wi: *wi,
            });
            otmap::io::write_slice(&slice_path, &slice, params, *wi, args.noise_target)?;
            otmap::io::write_map(&map_path, &map, args.noise_target)?;
            if args.preview {
                otmap::io::write_map_preview(&args.out.join(format!("map_{index:04}.png")), &map)?;
                otmap::io::write_slice_preview(
                    &args.out.join(format!("slice_{index:04}.png")),
                    &slice,
                )?;
            }
            baked += 1;
            eprintln!(
                "[{}/{}] baked {map_file} in {:.1?}",
                index + 1,
                jobs.len(),
                started.elapsed()
            );
        }
        // Checksums recorded from the files themselves.
        let slice_checksum = checksum_hex(&slice_path)?;
        let map_checksum = checksum_hex(&map_path)?;
        manifest.entries.push(BakeManifestEntry {
            params: *params,
            wi: *wi,
            slice_file,
            map_file,
            slice_checksum,
            map_checksum,
        });
    }
    manifest.save(&args.out.join("manifest.json"))?;
    eprintln!(
        "bake complete: {baked} baked, {skipped} resumed, manifest lists {}",
        manifest.entries.len()
    );
    Ok(0)
}

fn checksum_hex(path: &std::path::Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:016x}", otmap::io::fnv1a64(&bytes)))
}
