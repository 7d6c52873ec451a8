//! Dataset generation and the mini-batch Adam trainer.

use rayon::prelude::*;

use super::mlp::{Gradients, MlpWeights, NetKind};
use crate::bsdf::BsdfParams;
use crate::math::{square_to_direction, Direction, RngStream, SquareCoord};
use crate::slice::SliceImage;
use crate::transport::ImportanceMap;
use crate::Error;

/// Input encoding shared by all three networks: the parameter vector
/// `(r0, αx, αy, η)`, the incident direction, and either the random pair
/// (sample net) or the encoded outgoing direction (eval/pdf nets).
pub fn encode_input(
    params: &BsdfParams,
    wi: Direction,
    extra: FeatureExtra,
    kind: NetKind,
) -> crate::Result<Vec<f32>> {
    params.validate()?;
    if wi.z() <= 0.0 {
        return Err(Error::WrongHemisphere { z: wi.z() });
    }
    let mut f = Vec::with_capacity(kind.input_dim());
    f.extend_from_slice(&[
        params.r0.r as f32,
        params.r0.g as f32,
        params.r0.b as f32,
        params.alpha_x as f32,
        params.alpha_y as f32,
        params.eta as f32,
    ]);
    f.extend_from_slice(&[wi.x() as f32, wi.y() as f32, wi.z() as f32]);
    match (kind, extra) {
        (NetKind::Sample, FeatureExtra::Random(xi)) => {
            f.extend_from_slice(&[xi.s as f32, xi.t as f32]);
        }
        (NetKind::Eval | NetKind::Pdf, FeatureExtra::Outgoing(wo)) => {
            f.extend_from_slice(&[wo.x() as f32, wo.y() as f32, wo.z() as f32]);
        }
        _ => {
            return Err(Error::DimensionMismatch {
                got: 0,
                want: kind.input_dim(),
            })
        }
    }
    debug_assert_eq!(f.len(), kind.input_dim());
    Ok(f)
}

/// The network-specific trailing feature.
#[derive(Debug, Clone, Copy)]
pub enum FeatureExtra {
    Random(SquareCoord),
    Outgoing(Direction),
}

/// Flat record storage for one network kind.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub kind: NetKind,
    pub features: Vec<f32>,
    pub targets: Vec<f32>,
    /// Index of the bake-grid entry each record came from.
    pub provenance: Vec<u32>,
    /// Validation-split flags, one per record.
    pub validation: Vec<bool>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        let d = self.kind.input_dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn target(&self, i: usize) -> &[f32] {
        let d = self.kind.output_dim();
        &self.targets[i * d..(i + 1) * d]
    }

    fn push(&mut self, feature: &[f32], target: &[f32], provenance: u32, validation: bool) {
        self.features.extend_from_slice(feature);
        self.targets.extend_from_slice(target);
        self.provenance.push(provenance);
        self.validation.push(validation);
    }
}

/// One baked lattice entry: the slice and its importance map.
#[derive(Debug, Clone)]
pub struct BakeRecord {
    pub params: BsdfParams,
    pub wi: Direction,
    pub slice: SliceImage,
    pub map: ImportanceMap,
}

/// Builds the training set for one network kind from baked records.
///
/// Sample records pair texel-center random numbers (plus jittered interior
/// points queried through the map) with the stored target position and
/// weight. Eval records pair outgoing directions with the slice's `f·cos`.
/// Pdf records pair outgoing directions with the map's solid-angle pdf, so
/// the pdf targets share provenance with the sample targets. Every tenth
/// bake entry is tagged as validation.
pub fn generate_dataset(
    records: &[BakeRecord],
    kind: NetKind,
    jitter_per_map: usize,
    seed: u64,
) -> crate::Result<TrainingSet> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut set = TrainingSet {
        kind,
        features: Vec::new(),
        targets: Vec::new(),
        provenance: Vec::new(),
        validation: Vec::new(),
    };
    for (ri, rec) in records.iter().enumerate() {
        let validation = ri % 10 == 9;
        let mut rng = RngStream::new(seed, 0xDA7A ^ ri as u64);
        match kind {
            NetKind::Sample => {
                let res = rec.map.resolution;
                for y in 0..res {
                    for x in 0..res {
                        let xi = SquareCoord::new(
                            (x as f64 + 0.5) / res as f64,
                            (y as f64 + 0.5) / res as f64,
                        );
                        let i = y * res + x;
                        let uv = rec.map.uv[i];
                        let sw = rec.map.sw[i];
                        let feat =
                            encode_input(&rec.params, rec.wi, FeatureExtra::Random(xi), kind)?;
                        let target = [
                            uv.s as f32,
                            uv.t as f32,
                            sw.r as f32,
                            sw.g as f32,
                            sw.b as f32,
                        ];
                        set.push(&feat, &target, ri as u32, validation);
                    }
                }
                for _ in 0..jitter_per_map {
                    let xi = SquareCoord::new(rng.next_f64(), rng.next_f64());
                    let (uv, sw) = rec.map.query(xi);
                    let feat = encode_input(&rec.params, rec.wi, FeatureExtra::Random(xi), kind)?;
                    let target = [
                        uv.s as f32,
                        uv.t as f32,
                        sw.r as f32,
                        sw.g as f32,
                        sw.b as f32,
                    ];
                    set.push(&feat, &target, ri as u32, validation);
                }
            }
            NetKind::Eval => {
                let res = rec.slice.resolution;
                let jac = rec.slice.domain.jacobian();
                for y in 0..res {
                    for x in 0..res {
                        let c = rec.slice.texel_center(x, y);
                        let wo = square_to_direction(c, rec.slice.domain);
                        let rgb = rec.slice.rgb[y * res + x] * (1.0 / jac);
                        let feat =
                            encode_input(&rec.params, rec.wi, FeatureExtra::Outgoing(wo), kind)?;
                        let target = [rgb.r as f32, rgb.g as f32, rgb.b as f32];
                        set.push(&feat, &target, ri as u32, validation);
                    }
                }
            }
            NetKind::Pdf => {
                let res = rec.map.density_resolution;
                for y in 0..res {
                    for x in 0..res {
                        let c = SquareCoord::new(
                            (x as f64 + 0.5) / res as f64,
                            (y as f64 + 0.5) / res as f64,
                        );
                        let wo = square_to_direction(c, rec.map.domain);
                        let pdf = rec.map.pdf(c);
                        let feat =
                            encode_input(&rec.params, rec.wi, FeatureExtra::Outgoing(wo), kind)?;
                        set.push(&feat, &[pdf as f32], ri as u32, validation);
                    }
                }
            }
        }
    }
    Ok(set)
}

/// Training loss selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean absolute error; the sample net's default.
    MeanAbsolute,
    /// `((pred - target) / (target + 0.01))²`; eval/pdf default, since the
    /// targets span orders of magnitude across roughness.
    RelativeL2,
    /// Plain squared error.
    MeanSquared,
}

impl Loss {
    pub fn default_for(kind: NetKind) -> Loss {
        match kind {
            NetKind::Sample => Loss::MeanAbsolute,
            NetKind::Eval | NetKind::Pdf => Loss::RelativeL2,
        }
    }

    /// Per-record loss and gradient w.r.t. the outputs.
    fn eval(&self, pred: &[f32], target: &[f32], d_out: &mut [f32]) -> f64 {
        let n = pred.len() as f64;
        let mut loss = 0.0f64;
        match self {
            Loss::MeanAbsolute => {
                for ((p, t), d) in pred.iter().zip(target).zip(d_out.iter_mut()) {
                    let e = p - t;
                    loss += e.abs() as f64;
                    *d = e.signum() / n as f32;
                }
            }
            Loss::RelativeL2 => {
                for ((p, t), d) in pred.iter().zip(target).zip(d_out.iter_mut()) {
                    let denom = t + 0.01;
                    let e = (p - t) / denom;
                    loss += (e * e) as f64;
                    *d = 2.0 * e / denom / n as f32;
                }
            }
            Loss::MeanSquared => {
                for ((p, t), d) in pred.iter().zip(target).zip(d_out.iter_mut()) {
                    let e = p - t;
                    loss += (e * e) as f64;
                    *d = 2.0 * e / n as f32;
                }
            }
        }
        loss / n
    }
}

/// Trainer configuration. Defaults mirror the compression setup: four
/// hidden layers of 64 ReLU units, Adam with cosine-decayed step size.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial (cosine decay).
    pub lr_floor: f64,
    pub seed: u64,
    pub loss: Option<Loss>,
    /// Decoupled (AdamW-style) weight decay; zero disables it.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64, 64, 64],
            epochs: 200,
            batch_size: 256,
            learning_rate: 3e-3,
            lr_floor: 0.01,
            seed: 0,
            loss: None,
            weight_decay: 0.0,
        }
    }
}

/// Loss trajectory of one training run.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

impl TrainReport {
    pub fn final_validation(&self) -> f64 {
        self.validation_loss.last().copied().unwrap_or(f64::NAN)
    }
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: usize,
}

/// Mini-batch Adam with cosine step decay. Deterministic for a fixed seed:
/// batches are processed in shuffle order and per-batch gradients are
/// reduced over fixed-size chunks in chunk order, so thread count never
/// changes the result.
pub fn train(set: &TrainingSet, config: &TrainConfig) -> crate::Result<(MlpWeights, TrainReport)> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let loss = config.loss.unwrap_or_else(|| Loss::default_for(set.kind));
    let mut mlp = MlpWeights::init(
        set.kind,
        &config.hidden,
        super::mlp::Activation::Relu,
        config.seed,
    );
    let train_idx: Vec<usize> = (0..set.len()).filter(|&i| !set.validation[i]).collect();
    let val_idx: Vec<usize> = (0..set.len()).filter(|&i| set.validation[i]).collect();
    assert!(!train_idx.is_empty());

    let mut adam = AdamState {
        m: mlp.gradients(),
        v: mlp.gradients(),
        step: 0,
    };
    let mut order = train_idx.clone();
    let mut report = TrainReport::default();
    let mut last_good = mlp.clone();
    let total_steps = config.epochs * order.len().div_ceil(config.batch_size);

    for epoch in 0..config.epochs {
        // Deterministic Fisher-Yates shuffle.
        let mut rng = RngStream::new(config.seed, 0x5u64 << 32 | epoch as u64);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.next_below(i + 1));
        }
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            // Cosine learning-rate decay.
            let progress = adam.step as f64 / total_steps.max(1) as f64;
            let lr = config.learning_rate
                * (config.lr_floor
                    + (1.0 - config.lr_floor)
                        * 0.5
                        * (1.0 + (std::f64::consts::PI * progress).cos()));

            // Per-chunk gradients in parallel, reduced in chunk order.
            let chunk = 32usize;
            let partials: Vec<(Gradients, f64)> = batch
                .par_chunks(chunk)
                .map(|ids| {
                    let mut grads = mlp.gradients();
                    let mut scratch = mlp.scratch();
                    let mut d_out = vec![0.0f32; set.kind.output_dim()];
                    let mut local = 0.0f64;
                    for &i in ids {
                        let x = set.feature(i);
                        mlp.forward_unchecked(x, &mut scratch);
                        local += loss.eval(&scratch.output, set.target(i), &mut d_out);
                        mlp.backward_accumulate(x, &d_out, &mut scratch, &mut grads);
                    }
                    (grads, local)
                })
                .collect();
            let mut grads = mlp.gradients();
            let mut batch_loss = 0.0;
            for (g, l) in &partials {
                grads.add(g);
                batch_loss += l;
            }
            grads.scale(1.0 / batch.len() as f32);
            epoch_loss += batch_loss;

            adam_step(&mut mlp, &mut adam, &grads, lr);
            if config.weight_decay > 0.0 {
                let keep = 1.0 - (lr * config.weight_decay) as f32;
                for layer in &mut mlp.layers {
                    for w in &mut layer.weights {
                        *w *= keep;
                    }
                }
            }
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            evaluate(&mlp, set, &val_idx, loss)
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                step: adam.step,
                last_good: Box::new(last_good),
            });
        }
        last_good = mlp.clone();
        report.train_loss.push(train_loss);
        report.validation_loss.push(val_loss);
    }
    Ok((mlp, report))
}

/// Mean loss over the given record indices.
pub fn evaluate(mlp: &MlpWeights, set: &TrainingSet, indices: &[usize], loss: Loss) -> f64 {
    let total: f64 = indices
        .par_chunks(256)
        .map(|ids| {
            let mut scratch = mlp.scratch();
            let mut d_out = vec![0.0f32; set.kind.output_dim()];
            let mut acc = 0.0;
            for &i in ids {
                mlp.forward_unchecked(set.feature(i), &mut scratch);
                acc += loss.eval(&scratch.output, set.target(i), &mut d_out);
            }
            acc
        })
        .sum();
    total / indices.len() as f64
}

fn adam_step(mlp: &mut MlpWeights, state: &mut AdamState, grads: &Gradients, lr: f64) {
    const BETA1: f32 = 0.9;
    const BETA2: f32 = 0.999;
    const EPS: f32 = 1e-8;
    state.step += 1;
    let t = state.step as f32;
    let bias1 = 1.0 - BETA1.powf(t);
    let bias2 = 1.0 - BETA2.powf(t);
    for li in 0..mlp.layers.len() {
        let layer = &mut mlp.layers[li];
        let g = &grads.layers[li];
        let m = &mut state.m.layers[li];
        let v = &mut state.v.layers[li];
        for i in 0..layer.weights.len() {
            m.weights[i] = BETA1 * m.weights[i] + (1.0 - BETA1) * g.weights[i];
            v.weights[i] = BETA2 * v.weights[i] + (1.0 - BETA2) * g.weights[i] * g.weights[i];
            let mh = m.weights[i] / bias1;
            let vh = v.weights[i] / bias2;
            layer.weights[i] -= (lr as f32) * mh / (vh.sqrt() + EPS);
        }
        for i in 0..layer.bias.len() {
            m.bias[i] = BETA1 * m.bias[i] + (1.0 - BETA1) * g.bias[i];
            v.bias[i] = BETA2 * v.bias[i] + (1.0 - BETA2) * g.bias[i] * g.bias[i];
            let mh = m.bias[i] / bias1;
            let vh = v.bias[i] / bias2;
            layer.bias[i] -= (lr as f32) * mh / (vh.sqrt() + EPS);
        }
    }
}

/// Drives a single record's squared loss toward zero; the classic sanity
/// check that the gradient path trains.
pub fn overfit_one_record(
    kind: NetKind,
    feature: &[f32],
    target: &[f32],
    steps: usize,
    seed: u64,
) -> (MlpWeights, f64) {
    let mut mlp = MlpWeights::init(kind, &[16, 16], super::mlp::Activation::Softplus, seed);
    let mut adam = AdamState {
        m: mlp.gradients(),
        v: mlp.gradients(),
        step: 0,
    };
    let mut scratch = mlp.scratch();
    let mut grads = mlp.gradients();
    let mut d_out = vec![0.0f32; kind.output_dim()];
    let mut last = f64::INFINITY;
    for _ in 0..steps {
        grads.zero();
        mlp.forward_unchecked(feature, &mut scratch);
        last = Loss::MeanSquared.eval(&scratch.output, target, &mut d_out);
        mlp.backward_accumulate(feature, &d_out, &mut scratch, &mut grads);
        adam_step(&mut mlp, &mut adam, &grads, 3e-3);
        if last < 1e-10 {
            break;
        }
    }
    (mlp, last)
}
