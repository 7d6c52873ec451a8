//! `otmap train`: fit the sample/eval/pdf networks to a bake directory.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use otmap::neural::{generate_dataset, train, BakeRecord, NetKind, TrainConfig};
use otmap::render::BakeManifest;

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// Directory produced by `otmap bake`.
    #[arg(long)]
    pub bake_dir: PathBuf,
    /// Output directory for weight files and loss curves.
    #[arg(long)]
    pub out: PathBuf,
    /// Which networks to train.
    #[arg(long, value_delimiter = ',', default_value = "sample,eval,pdf")]
    pub kinds: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Hidden layer width.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Hidden layer count.
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    /// Extra jittered sample-net records per map.
    #[arg(long, default_value_t = 2048)]
    pub jitter: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: TrainArgs) -> anyhow::Result<i32> {
    let manifest_path = args.bake_dir.join("manifest.json");
    if !manifest_path.exists() {
        bail!(
            "no manifest at {}; run `otmap bake --out {}` first",
            manifest_path.display(),
            args.bake_dir.display()
        );
    }
    let manifest = BakeManifest::load(&manifest_path)?;
    if manifest.entries.is_empty() {
        bail!("bake manifest is empty; nothing to train on");
    }
    std::fs::create_dir_all(&args.out)?;
    super::echo_config(&args.out, "train_config.json", &args)?;

    eprintln!("loading {} baked entries", manifest.entries.len());
    let mut records = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let (slice, params, wi) = otmap::io::read_slice(&args.bake_dir.join(&entry.slice_file))
            .with_context(|| format!("reading {}", entry.slice_file))?;
        let map = otmap::io::read_map(&args.bake_dir.join(&entry.map_file), &slice)
            .with_context(|| format!("reading {}", entry.map_file))?;
        records.push(BakeRecord {
            params,
            wi,
            slice,
            map,
        });
    }

    for kind_name in &args.kinds {
        let kind = match kind_name.as_str() {
            "sample" => NetKind::Sample,
            "eval" => NetKind::Eval,
            "pdf" => NetKind::Pdf,
            other => bail!("unknown network kind `{other}` (sample, eval, pdf)"),
        };
        let started = std::time::Instant::now();
        let jitter = if kind == NetKind::Sample { args.jitter } else { 0 };
        let set = generate_dataset(&records, kind, jitter, args.seed)?;
        let config = TrainConfig {
            hidden: vec![args.width; args.layers],
            epochs: args.epochs,
            learning_rate: args.learning_rate,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let (weights, report) = train(&set, &config)?;
        let file = args.out.join(format!("{kind_name}.otnw"));
        otmap::io::write_weights(&file, &weights)?;
        // Loss curve CSV, one row per epoch.
        let mut csv = String::from("epoch,train_loss,validation_loss\n");
        for (epoch, (t, v)) in report
            .train_loss
            .iter()
            .zip(&report.validation_loss)
            .enumerate()
        {
            csv.push_str(&format!("{epoch},{t},{v}\n"));
        }
        std::fs::write(args.out.join(format!("{kind_name}_loss.csv")), csv)?;
        eprintln!(
            "{kind_name}: {} records, final validation loss {:.3e} ({:.1?})",
            set.len(),
            report.final_validation(),
            started.elapsed()
        );
    }
    Ok(0)
}
