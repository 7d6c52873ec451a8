//! Dense feed-forward network: weights, forward pass, and exact backprop.
//!
//! Weights are `f32` row-major; inference writes into caller-owned scratch
//! so the hot path never allocates. The output head depends on the network
//! kind: the sample head squashes the first two outputs (the target square
//! position) with a sigmoid and runs the rest (the sampling weight) through
//! softplus; the eval and pdf heads are softplus throughout, keeping values
//! nonnegative.

use serde::{Deserialize, Serialize};

use crate::Error;

/// Which of the three tasks a network serves; decides input layout and head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    /// `(params, wi, ξ0, ξ1) -> (u, v, sw_r, sw_g, sw_b)`
    Sample,
    /// `(params, wi, wo) -> f·cos RGB`
    Eval,
    /// `(params, wi, wo) -> solid-angle pdf`
    Pdf,
}

impl NetKind {
    pub fn input_dim(self) -> usize {
        match self {
            NetKind::Sample => 11,
            NetKind::Eval | NetKind::Pdf => 12,
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            NetKind::Sample => 5,
            NetKind::Eval => 3,
            NetKind::Pdf => 1,
        }
    }

    /// Head activation for output index `i`.
    #[inline]
    pub fn head(self, i: usize) -> Activation {
        match self {
            NetKind::Sample if i < 2 => Activation::Sigmoid,
            _ => Activation::Softplus,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            NetKind::Sample => 0,
            NetKind::Eval => 1,
            NetKind::Pdf => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<NetKind> {
        match tag {
            0 => Some(NetKind::Sample),
            1 => Some(NetKind::Eval),
            2 => Some(NetKind::Pdf),
            _ => None,
        }
    }
}

/// Elementwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Softplus,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn forward(self, x: f32) -> f32 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Softplus => {
                if x > 20.0 {
                    x
                } else if x < -20.0 {
                    x.exp()
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative given the pre-activation input.
    #[inline]
    pub fn grad(self, x: f32) -> f32 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Softplus => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Activation> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Softplus),
            3 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// One dense layer: row-major weights `[out][in]` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Full network parameters for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub kind: NetKind,
    pub layers: Vec<Layer>,
}

impl MlpWeights {
    /// He-style random initialization. The final layer uses the per-output
    /// head activations of `kind` and starts with zero bias.
    pub fn init(kind: NetKind, hidden: &[usize], hidden_act: Activation, seed: u64) -> Self {
        let mut rng = crate::math::RngStream::new(seed, 0x9E7);
        let mut dims = vec![kind.input_dim()];
        dims.extend_from_slice(hidden);
        dims.push(kind.output_dim());
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in 0..dims.len() - 1 {
            let (in_dim, out_dim) = (dims[w], dims[w + 1]);
            let scale = (2.0 / in_dim as f64).sqrt();
            let weights = (0..in_dim * out_dim)
                .map(|_| {
                    // Box-Muller normal.
                    let u1 = rng.next_f64().max(1e-12);
                    let u2 = rng.next_f64();
                    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    (z * scale) as f32
                })
                .collect();
            let last = w == dims.len() - 2;
            layers.push(Layer {
                weights,
                bias: vec![0.0; out_dim],
                in_dim,
                out_dim,
                activation: if last { Activation::Identity } else { hidden_act },
            });
        }
        MlpWeights { kind, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Dimension-chain consistency and finiteness.
    pub fn validate(&self) -> crate::Result<()> {
        let mut prev = self.kind.input_dim();
        for layer in &self.layers {
            if layer.in_dim != prev
                || layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.bias.len() != layer.out_dim
            {
                return Err(Error::DimensionMismatch {
                    got: layer.in_dim,
                    want: prev,
                });
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::MalformedFile {
                    kind: "weights",
                    reason: "non-finite parameter".into(),
                });
            }
            prev = layer.out_dim;
        }
        if prev != self.kind.output_dim() {
            return Err(Error::DimensionMismatch {
                got: prev,
                want: self.kind.output_dim(),
            });
        }
        Ok(())
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(self)
    }

    pub fn gradients(&self) -> Gradients {
        Gradients::new(self)
    }

    /// Forward pass; returns the head-activated outputs in `scratch.output`.
    pub fn forward<'a>(&self, input: &[f32], scratch: &'a mut Scratch) -> crate::Result<&'a [f32]> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                got: input.len(),
                want: self.input_dim(),
            });
        }
        self.forward_unchecked(input, scratch);
        Ok(&scratch.output)
    }

    /// Hot-path forward without dimension checks.
    #[inline]
    pub fn forward_unchecked(&self, input: &[f32], scratch: &mut Scratch) {
        for (li, layer) in self.layers.iter().enumerate() {
            let (done, rest) = scratch.acts.split_at_mut(li);
            let prev: &[f32] = if li == 0 { input } else { &done[li - 1] };
            let act = &mut rest[0];
            let pre = &mut scratch.pres[li];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                pre[o] = dot(row, prev) + layer.bias[o];
                act[o] = layer.activation.forward(pre[o]);
            }
        }
        // Head on the last layer's (identity) activations.
        let last = self.layers.len() - 1;
        let out_dim = self.layers[last].out_dim;
        for o in 0..out_dim {
            let z = scratch.acts[last][o];
            scratch.output[o] = self.kind.head(o).forward(z);
        }
    }

    /// Exact gradient of `loss` at one record, accumulated into `grads`.
    /// Returns the loss value. `d_output` is the loss gradient w.r.t. the
    /// head outputs, provided by the caller.
    pub fn backward_accumulate(
        &self,
        input: &[f32],
        d_output: &[f32],
        scratch: &mut Scratch,
        grads: &mut Gradients,
    ) {
        let last = self.layers.len() - 1;
        // Head backward into d_pre of the last layer.
        for o in 0..self.layers[last].out_dim {
            let z = scratch.acts[last][o];
            scratch.d_act[last][o] = d_output[o] * self.kind.head(o).grad(z);
        }
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            // d_pre = d_act ⊙ act'(pre)
            for o in 0..layer.out_dim {
                let g = layer.activation.grad(scratch.pres[li][o]);
                scratch.d_act[li][o] *= g;
            }
            let upstream: &[f32] = if li == 0 {
                input
            } else {
                // Activations of the previous layer.
                &scratch.acts[li - 1]
            };
            // Parameter gradients.
            let gl = &mut grads.layers[li];
            for o in 0..layer.out_dim {
                let d = scratch.d_act[li][o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut gl.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (w, &x) in row.iter_mut().zip(upstream) {
                    *w += d * x;
                }
                gl.bias[o] += d;
            }
            // Input gradient for the next (earlier) layer.
            if li > 0 {
                let (d_prev, d_cur) = {
                    let (a, b) = scratch.d_act.split_at_mut(li);
                    (&mut a[li - 1], &b[0])
                };
                let prev_dim = layer.in_dim;
                d_prev[..prev_dim].fill(0.0);
                for o in 0..layer.out_dim {
                    let d = d_cur[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * prev_dim..(o + 1) * prev_dim];
                    for (dp, &w) in d_prev[..prev_dim].iter_mut().zip(row) {
                        *dp += d * w;
                    }
                }
            }
        }
    }

    /// Adds `delta × scale` to every parameter (optimizer hook).
    pub fn apply_update(&mut self, delta: &Gradients, scale: f32) {
        for (layer, gl) in self.layers.iter_mut().zip(&delta.layers) {
            for (w, d) in layer.weights.iter_mut().zip(&gl.weights) {
                *w += scale * d;
            }
            for (b, d) in layer.bias.iter_mut().zip(&gl.bias) {
                *b += scale * d;
            }
        }
    }
}

/// Eight-lane unrolled dot product; keeps the FMA chains independent so the
/// autovectorizer can use full-width SIMD without reassociating a serial
/// reduction.
#[inline]
fn dot(w: &[f32], x: &[f32]) -> f32 {
    debug_assert_eq!(w.len(), x.len());
    let mut acc = [0.0f32; 8];
    let chunks = w.len() / 8;
    for c in 0..chunks {
        let wb = &w[c * 8..c * 8 + 8];
        let xb = &x[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] = wb[l].mul_add(xb[l], acc[l]);
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..w.len() {
        tail = w[i].mul_add(x[i], tail);
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Reusable per-thread buffers for forward/backward passes.
#[derive(Debug, Clone)]
pub struct Scratch {
    pres: Vec<Vec<f32>>,
    acts: Vec<Vec<f32>>,
    d_act: Vec<Vec<f32>>,
    pub output: Vec<f32>,
}

impl Scratch {
    pub fn new(mlp: &MlpWeights) -> Self {
        let pres: Vec<Vec<f32>> = mlp.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        Scratch {
            acts: pres.clone(),
            d_act: pres.clone(),
            pres,
            output: vec![0.0; mlp.output_dim()],
        }
    }

}

/// Parameter gradients, same shape as the weights.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Gradients {
    pub fn new(mlp: &MlpWeights) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn scale(&mut self, s: f32) {
        for l in &mut self.layers {
            for w in &mut l.weights {
                *w *= s;
            }
            for b in &mut l.bias {
                *b *= s;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|&w| w == 0.0) && l.bias.iter().all(|&b| b == 0.0))
    }
}

/// Worst relative disagreement between the analytic gradient and central
/// finite differences over `coords` random parameter coordinates.
///
/// The numeric side evaluates an independent f64 reimplementation of the
/// forward pass, which removes the f32 rounding floor that otherwise
/// dominates the comparison. Probes that cross a ReLU kink are skipped (the
/// loss is not differentiable there), as are coordinates with negligible
/// gradient where relative error is ill-posed.
pub fn finite_difference_worst_error(
kind: NetKind,
hidden_act: Activation,
coords: usize,
seed: u64,
) -> f64 {
    let mlp = MlpWeights::init(kind, &[12, 12], hidden_act, seed);
    let mut rng = crate::math::RngStream::new(seed ^ 0x6AD, 11);
    let input: Vec<f64> = (0..kind.input_dim())
        .map(|_| rng.next_f64() - 0.3)
        .collect();
    let target: Vec<f64> = (0..kind.output_dim())
        .map(|_| 0.2 + 0.5 * rng.next_f64())
        .collect();
    // f64 forward oracle on upcast weights; returns (loss, preacts).
    let forward_f64 = |m: &MlpWeights| -> (f64, Vec<Vec<f64>>) {
        let mut cur = input.clone();
        let mut pres = Vec::new();
        for layer in &m.layers {
            let mut next = vec![0.0f64; layer.out_dim];
            let mut pre = vec![0.0f64; layer.out_dim];
            for o in 0..layer.out_dim {
                let mut acc = layer.bias[o] as f64;
                for i in 0..layer.in_dim {
                    acc += layer.weights[o * layer.in_dim + i] as f64 * cur[i];
                }
                pre[o] = acc;
                next[o] = match layer.activation {
                    Activation::Identity => acc,
                    Activation::Relu => acc.max(0.0),
                    Activation::Softplus => {
                        if acc > 20.0 {
                            acc
                        } else {
                            acc.exp().ln_1p()
                        }
                    }
                    Activation::Sigmoid => 1.0 / (1.0 + (-acc).exp()),
                };
            }
            pres.push(pre);
            cur = next;
        }
        let mut loss = 0.0;
        for (o, (&z, &t)) in cur.iter().zip(&target).enumerate() {
            let y = match kind.head(o) {
                Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                _ => {
                    if z > 20.0 {
                        z
                    } else {
                        z.exp().ln_1p()
                    }
                }
            };
            loss += (y - t) * (y - t);
        }
        (loss, pres)
    };
    // Analytic gradient from the production f32 path.
    let input_f32: Vec<f32> = input.iter().map(|&v| v as f32).collect();
    let mut scratch = mlp.scratch();
    let mut grads = mlp.gradients();
    mlp.forward_unchecked(&input_f32, &mut scratch);
    let d_out: Vec<f32> = scratch
        .output
        .iter()
        .zip(&target)
        .map(|(&o, &t)| 2.0 * (o as f64 - t) as f32)
        .collect();
    mlp.backward_accumulate(&input_f32, &d_out, &mut scratch, &mut grads);
    let grad_max = grads
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias))
        .fold(0.0f32, |m, &g| m.max(g.abs())) as f64;

    let (_, base_pres) = forward_f64(&mlp);
    let mut checked = 0usize;
    let mut attempts = 0usize;
    let mut worst = 0.0f64;
    while checked < coords && attempts < coords * 50 {
        attempts += 1;
        let li = rng.next_below(mlp.layers.len());
        let wi = rng.next_below(mlp.layers[li].weights.len());
        let analytic = grads.layers[li].weights[wi] as f64;
        if analytic.abs() < 1e-3 * grad_max {
            continue; // relative error is ill-posed at tiny gradients
        }
        let h = 1e-5f32;
        let w0 = mlp.layers[li].weights[wi];
        let wp = w0 + h;
        let wm = w0 - h;
        let mut probe = mlp.clone();
        probe.layers[li].weights[wi] = wp;
        let (plus, pres_p) = forward_f64(&probe);
        probe.layers[li].weights[wi] = wm;
        let (minus, pres_m) = forward_f64(&probe);
        // Skip probes whose perturbation crosses a ReLU kink.
        if hidden_act == Activation::Relu {
            let crossed = base_pres.iter().zip(&pres_p).zip(&pres_m).any(
                |((b, p), m)| {
                    b.iter()
                        .zip(p)
                        .zip(m)
                        .any(|((&b, &p), &m)| (b > 0.0) != (p > 0.0) || (b > 0.0) != (m > 0.0))
                },
            );
            if crossed {
                continue;
            }
        }
        // Use the exact f32-quantized step span.
        let span = wp as f64 - wm as f64;
        let numeric = (plus - minus) / span;
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        worst = worst.max(rel);
        checked += 1;
    }
    assert!(checked >= coords, "only {checked} usable coordinates");
worst
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_dims_match_spec() {
        assert_eq!(NetKind::Sample.input_dim(), 11);
        assert_eq!(NetKind::Eval.input_dim(), 12);
        assert_eq!(NetKind::Pdf.input_dim(), 12);
        assert_eq!(NetKind::Sample.output_dim(), 5);
    }

    #[test]
    fn zero_network_outputs_head_of_zero() {
        let mut mlp = MlpWeights::init(NetKind::Sample, &[16, 16], Activation::Relu, 1);
        for layer in &mut mlp.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let mut scratch = mlp.scratch();
        let out = mlp.forward(&[0.1; 11], &mut scratch).unwrap().to_vec();
        // sigmoid(0) = 0.5 for the squashed uv, softplus(0) = ln 2 for sw.
        assert!((out[0] - 0.5).abs() < 1e-7 && (out[1] - 0.5).abs() < 1e-7);
        for &v in &out[2..] {
            assert!((v - std::f32::consts::LN_2).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_activations_reduce_to_matrix_product() {
        let mut mlp = MlpWeights::init(NetKind::Pdf, &[4], Activation::Identity, 3);
        for layer in &mut mlp.layers {
            layer.activation = Activation::Identity;
        }
        // Compute manually: y = W2 (W1 x + b1) + b2, then softplus head.
        let x: Vec<f32> = (0..12).map(|i| 0.1 * i as f32 - 0.5).collect();
        let l1 = &mlp.layers[0];
        let mut h = vec![0.0f32; 4];
        for o in 0..4 {
            h[o] = l1.bias[o]
                + l1.weights[o * 12..(o + 1) * 12]
                    .iter()
                    .zip(&x)
                    .map(|(w, x)| w * x)
                    .sum::<f32>();
        }
        let l2 = &mlp.layers[1];
        let raw = l2.bias[0]
            + l2.weights
                .iter()
                .zip(&h)
                .map(|(w, x)| w * x)
                .sum::<f32>();
        let expect = Activation::Softplus.forward(raw);
        let mut scratch = mlp.scratch();
        let got = mlp.forward(&x, &mut scratch).unwrap()[0];
        assert!((got - expect).abs() < 1e-5, "{got} vs {expect}");
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let mlp = MlpWeights::init(NetKind::Eval, &[8], Activation::Relu, 0);
        let mut scratch = mlp.scratch();
        assert!(mlp.forward(&[0.0; 5], &mut scratch).is_err());
    }

    #[test]
    fn identical_inputs_are_bitwise_identical() {
        let mlp = MlpWeights::init(NetKind::Sample, &[32, 32], Activation::Relu, 9);
        let mut s1 = mlp.scratch();
        let mut s2 = mlp.scratch();
        let x = [0.3f32; 11];
        let a = mlp.forward(&x, &mut s1).unwrap().to_vec();
        let b = mlp.forward(&x, &mut s2).unwrap().to_vec();
        assert_eq!(a, b);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [NetKind::Sample, NetKind::Eval, NetKind::Pdf] {
            let worst = finite_difference_worst_error(kind, Activation::Softplus, 250, 42);
            assert!(worst < 1e-4, "{kind:?}: worst rel {worst}");
        }
    }

    #[test]
    fn relu_gradients_match_finite_differences_off_kinks() {
        let worst = finite_difference_worst_error(NetKind::Eval, Activation::Relu, 150, 42);
        assert!(worst < 1e-4, "worst rel {worst}");
    }

    #[test]
    fn zero_loss_point_has_zero_gradient() {
        let mlp = MlpWeights::init(NetKind::Pdf, &[8], Activation::Softplus, 5);
        let input = [0.25f32; 12];
        let mut scratch = mlp.scratch();
        mlp.forward_unchecked(&input, &mut scratch);
        let target = scratch.output.clone();
        let d_out: Vec<f32> = scratch
            .output
            .iter()
            .zip(&target)
            .map(|(&o, &t)| 2.0 * (o - t))
            .collect();
        let mut grads = mlp.gradients();
        mlp.backward_accumulate(&input, &d_out, &mut scratch, &mut grads);
        assert!(grads.is_zero());
    }
}
