//! A small CNN with hand-derived gradients.
//!
//! Layers are `conv3x3(stride 1, pad 1) + ReLU` and `maxpool(2)`, followed by
//! flatten, one dense layer and softmax cross-entropy. Activations are stored
//! `(height, width, channels)`, channels fastest; conv weights are
//! [`Tensor4`]s of dims `(3, 3, in, out)`.

use rand_distr::{Distribution, Normal};

use crate::error::{AdasError, Result};
use crate::micronet::data::{Dataset, ImageShape};
use crate::rng;
use crate::tensor::Tensor4;

pub const KERNEL: usize = 3;
pub const STRIDE: usize = 1;
pub const PAD: usize = 1;
pub const POOL: usize = 2;

/// `(in + 2·pad − kernel) / stride + 1`.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 || input + 2 * pad < kernel {
        return Err(AdasError::Shape(format!(
            "kernel {kernel} (stride {stride}, pad {pad}) does not fit input {input}"
        )));
    }
    Ok((input + 2 * pad - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { out_channels: usize },
    MaxPool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    input: ImageShape,
    layers: Vec<LayerSpec>,
    classes: usize,
}

impl NetworkSpec {
    /// Checks that shapes chain and that there is at least one conv block.
    pub fn new(input: ImageShape, layers: Vec<LayerSpec>, classes: usize) -> Result<Self> {
        if !layers.iter().any(|l| matches!(l, LayerSpec::Conv { .. })) {
            return Err(AdasError::Input("network needs at least one conv block".into()));
        }
        Self::build(input, layers, classes)
    }

    /// A bare softmax classifier on raw pixels; has no conv blocks.
    pub fn dense_only(input: ImageShape, classes: usize) -> Result<Self> {
        Self::build(input, Vec::new(), classes)
    }

    fn build(input: ImageShape, layers: Vec<LayerSpec>, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(AdasError::Input(format!("need >= 2 classes, got {classes}")));
        }
        if input.pixels() == 0 {
            return Err(AdasError::Shape(format!("empty input shape {input:?}")));
        }
        let spec = Self { input, layers, classes };
        spec.shapes()?;
        Ok(spec)
    }

    /// Parses `conv8,pool,conv16`.
    pub fn parse_layers(text: &str) -> Result<Vec<LayerSpec>> {
        text.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "pool" | "maxpool" => Ok(LayerSpec::MaxPool),
                _ => t
                    .strip_prefix("conv")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n > 0)
                    .map(|out_channels| LayerSpec::Conv { out_channels })
                    .ok_or_else(|| AdasError::config("network", format!("unknown layer `{t}`"))),
            })
            .collect()
    }

    pub fn input(&self) -> ImageShape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Result<Vec<ImageShape>> {
        let mut shape = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = match *layer {
                LayerSpec::Conv { out_channels } => ImageShape {
                    height: conv_output_size(shape.height, KERNEL, STRIDE, PAD)?,
                    width: conv_output_size(shape.width, KERNEL, STRIDE, PAD)?,
                    channels: out_channels,
                },
                LayerSpec::MaxPool => {
                    if shape.height < POOL || shape.width < POOL {
                        return Err(AdasError::Shape(format!("cannot pool a {shape:?} map")));
                    }
                    ImageShape { height: shape.height / POOL, width: shape.width / POOL, ..shape }
                }
            };
            out.push(shape);
        }
        Ok(out)
    }

    pub fn features(&self) -> usize {
        self.shapes()
            .expect("validated at construction")
            .last()
            .copied()
            .unwrap_or(self.input)
            .pixels()
    }

    pub fn conv_blocks(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor4,
    pub bias: Vec<f64>,
}

/// Inputs already scaled to reals, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn from_dataset(data: &Dataset, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| data.input(i)).collect(),
            labels: indices.iter().map(|&i| data.label(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Gradient arrays in the order of [`Network::param_arrays`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub arrays: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<ImageShape>,
    convs: Vec<ConvLayer>,
    /// `features × classes`, row-major.
    dense_weight: Vec<f64>,
    dense_bias: Vec<f64>,
}

enum Cache {
    Conv { input: Vec<f64>, pre: Vec<f64> },
    Pool { argmax: Vec<usize> },
}

impl Network {
    /// Kaiming-normal weights (`std = √(2 / fan_in)`), zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut rng = rng::derived(seed, 1);
        let shapes = spec.shapes().expect("validated at construction");
        let mut channels = spec.input.channels;
        let mut convs = Vec::new();
        for layer in &spec.layers {
            if let LayerSpec::Conv { out_channels } = *layer {
                let fan_in = KERNEL * KERNEL * channels;
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                let dims = [KERNEL, KERNEL, channels, out_channels];
                let data = (0..fan_in * out_channels).map(|_| normal.sample(&mut rng)).collect();
                convs.push(ConvLayer {
                    weight: Tensor4::new(dims, data).expect("dims match data"),
                    bias: vec![0.0; out_channels],
                });
                channels = out_channels;
            }
        }
        let features = spec.features();
        let normal = Normal::new(0.0, (2.0 / features as f64).sqrt()).unwrap();
        let dense_weight = (0..features * spec.classes).map(|_| normal.sample(&mut rng)).collect();
        let dense_bias = vec![0.0; spec.classes];
        Self { spec, shapes, convs, dense_weight, dense_bias }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn convs(&self) -> &[ConvLayer] {
        &self.convs
    }

    pub fn conv_weights(&self) -> Vec<Tensor4> {
        self.convs.iter().map(|c| c.weight.clone()).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.convs.len()
    }

    /// Every learnable array: each conv's weight and bias, then the dense
    /// weight and bias.
    pub fn param_arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &self.convs {
            out.push(c.weight.data());
            out.push(&c.bias);
        }
        out.push(&self.dense_weight);
        out.push(&self.dense_bias);
        out
    }

    pub fn param_arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &mut self.convs {
            out.push(c.weight.data_mut());
            out.push(&mut c.bias);
        }
        out.push(&mut self.dense_weight);
        out.push(&mut self.dense_bias);
        out
    }

    /// Block owning each parameter array. Conv biases share their conv's
    /// block; the dense head rides on the last conv block.
    pub fn param_blocks(&self) -> Vec<usize> {
        let last = self.convs.len().saturating_sub(1);
        let mut out: Vec<usize> = (0..self.convs.len()).flat_map(|b| [b, b]).collect();
        out.extend([last, last]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_arrays().iter().map(|a| a.len()).sum()
    }

    fn forward(&self, input: &[f64], keep: bool) -> (Vec<f64>, Vec<f64>, Vec<Cache>) {
        let mut act = input.to_vec();
        let mut shape = self.spec.input;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut conv_idx = 0;
        for (layer, &out_shape) in self.spec.layers.iter().zip(&self.shapes) {
            match layer {
                LayerSpec::Conv { .. } => {
                    let conv = &self.convs[conv_idx];
                    conv_idx += 1;
                    let pre = conv_forward(conv, &act, shape, out_shape);
                    let post = pre.iter().map(|&v| v.max(0.0)).collect();
                    if keep {
                        caches.push(Cache::Conv { input: std::mem::replace(&mut act, post), pre });
                    } else {
                        caches.push(Cache::Conv { input: Vec::new(), pre });
                        act = post;
                    }
                }
                LayerSpec::MaxPool => {
                    let (out, argmax) = pool_forward(&act, shape, out_shape);
                    caches.push(Cache::Pool { argmax });
                    act = out;
                }
            }
            shape = out_shape;
        }
        let classes = self.spec.classes;
        let mut logits = self.dense_bias.clone();
        for (f, &x) in act.iter().enumerate() {
            if x != 0.0 {
                let row = &self.dense_weight[f * classes..(f + 1) * classes];
                logits.iter_mut().zip(row).for_each(|(l, w)| *l += x * w);
            }
        }
        (act, logits, caches)
    }

    pub fn logits(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input, false).1
    }

    pub fn predict(&self, input: &[f64]) -> usize {
        argmax(&self.logits(input))
    }

    /// ReLU on/off states and pooling winners for one input; two inputs or
    /// parameter sets with equal patterns lie in the same smooth piece.
    pub fn activation_pattern(&self, input: &[f64]) -> Vec<u64> {
        let (_, _, caches) = self.forward(input, false);
        let mut out = Vec::new();
        for c in caches {
            match c {
                Cache::Conv { pre, .. } => out.extend(pre.iter().map(|&v| (v > 0.0) as u64)),
                Cache::Pool { argmax } => out.extend(argmax.iter().map(|&i| i as u64)),
            }
        }
        out
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() || batch.inputs.len() != batch.labels.len() {
            return Err(AdasError::Shape(format!(
                "batch has {} inputs and {} labels",
                batch.inputs.len(),
                batch.labels.len()
            )));
        }
        let n = self.spec.input.pixels();
        if let Some(bad) = batch.inputs.iter().find(|x| x.len() != n) {
            return Err(AdasError::Shape(format!("input of {} values, expected {n}", bad.len())));
        }
        if let Some(&bad) = batch.labels.iter().find(|&&l| l >= self.spec.classes) {
            return Err(AdasError::Shape(format!(
                "label {bad} outside {} classes",
                self.spec.classes
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let total: f64 = batch
            .inputs
            .iter()
            .zip(&batch.labels)
            .map(|(x, &y)| cross_entropy(&self.logits(x), y).0)
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Mean cross-entropy and its exact gradient for every parameter.
    pub fn forward_backward(&self, batch: &Batch) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let mut grads = Gradients {
            arrays: self.param_arrays().iter().map(|a| vec![0.0; a.len()]).collect(),
        };
        let scale = 1.0 / batch.len() as f64;
        let classes = self.spec.classes;
        let n_conv = self.convs.len();
        let mut total = 0.0;
        for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
            let (features, logits, caches) = self.forward(x, true);
            let (loss, mut dlogits) = cross_entropy(&logits, y);
            total += loss;
            dlogits.iter_mut().for_each(|d| *d *= scale);

            let (head, tail) = grads.arrays.split_at_mut(2 * n_conv);
            let (dw, db) = tail.split_at_mut(1);
            db[0].iter_mut().zip(&dlogits).for_each(|(g, d)| *g += d);
            let mut grad = vec![0.0; features.len()];
            for (f, &a) in features.iter().enumerate() {
                let row = &self.dense_weight[f * classes..(f + 1) * classes];
                let drow = &mut dw[0][f * classes..(f + 1) * classes];
                let mut acc = 0.0;
                for k in 0..classes {
                    drow[k] += a * dlogits[k];
                    acc += row[k] * dlogits[k];
                }
                grad[f] = acc;
            }

            let mut conv_idx = n_conv;
            for (i, cache) in caches.iter().enumerate().rev() {
                let in_shape = if i == 0 { self.spec.input } else { self.shapes[i - 1] };
                let out_shape = self.shapes[i];
                match cache {
                    Cache::Pool { argmax } => {
                        let mut up = vec![0.0; in_shape.pixels()];
                        for (&src, &g) in argmax.iter().zip(&grad) {
                            up[src] += g;
                        }
                        grad = up;
                    }
                    Cache::Conv { input, pre } => {
                        conv_idx -= 1;
                        grad.iter_mut().zip(pre).for_each(|(g, &p)| {
                            if p <= 0.0 {
                                *g = 0.0
                            }
                        });
                        let (gw, rest) = head[2 * conv_idx..].split_at_mut(1);
                        grad = conv_backward(
                            &self.convs[conv_idx],
                            input,
                            &grad,
                            in_shape,
                            out_shape,
                            &mut gw[0],
                            &mut rest[0],
                            i > 0,
                        );
                    }
                }
            }
        }
        Ok((total * scale, grads))
    }

    pub fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.loss(&Batch::from_dataset(data, &idx))
    }
}

/// Fraction of examples whose arg-max logit equals the label.
pub fn evaluate(net: &Network, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = (0..data.len())
        .filter(|&i| net.predict(&data.input(i)) == data.label(i))
        .count();
    correct as f64 / data.len() as f64
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Loss and `∂loss/∂logits = softmax − onehot`.
fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

fn conv_forward(conv: &ConvLayer, input: &[f64], ins: ImageShape, outs: ImageShape) -> Vec<f64> {
    let (cin, cout) = (ins.channels, outs.channels);
    let w = conv.weight.data();
    let mut out = vec![0.0; outs.pixels()];
    for y in 0..outs.height {
        for x in 0..outs.width {
            let o_px = &mut out[(y * outs.width + x) * cout..][..cout];
            o_px.copy_from_slice(&conv.bias);
            for ky in 0..KERNEL {
                let Some(iy) = (y + ky).checked_sub(PAD).filter(|&v| v < ins.height) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(ix) = (x + kx).checked_sub(PAD).filter(|&v| v < ins.width) else {
                        continue;
                    };
                    let i_px = &input[(iy * ins.width + ix) * cin..][..cin];
                    let base = (ky * KERNEL + kx) * cin * cout;
                    for (c, &a) in i_px.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let w_row = &w[base + c * cout..][..cout];
                        o_px.iter_mut().zip(w_row).for_each(|(o, wv)| *o += a * wv);
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the gradient w.r.t. the input.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    conv: &ConvLayer,
    input: &[f64],
    grad_pre: &[f64],
    ins: ImageShape,
    outs: ImageShape,
    gw: &mut [f64],
    gb: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    let (cin, cout) = (ins.channels, outs.channels);
    let w = conv.weight.data();
    let mut grad_in = vec![0.0; if need_input_grad { ins.pixels() } else { 0 }];
    for y in 0..outs.height {
        for x in 0..outs.width {
            let g = &grad_pre[(y * outs.width + x) * cout..][..cout];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            gb.iter_mut().zip(g).for_each(|(b, gv)| *b += gv);
            for ky in 0..KERNEL {
                let Some(iy) = (y + ky).checked_sub(PAD).filter(|&v| v < ins.height) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(ix) = (x + kx).checked_sub(PAD).filter(|&v| v < ins.width) else {
                        continue;
                    };
                    let at = (iy * ins.width + ix) * cin;
                    let base = (ky * KERNEL + kx) * cin * cout;
                    for c in 0..cin {
                        let a = input[at + c];
                        let off = base + c * cout;
                        if a != 0.0 {
                            gw[off..off + cout].iter_mut().zip(g).for_each(|(d, gv)| *d += a * gv);
                        }
                        if need_input_grad {
                            grad_in[at + c] +=
                                w[off..off + cout].iter().zip(g).map(|(wv, gv)| wv * gv).sum::<f64>();
                        }
                    }
                }
            }
        }
    }
    grad_in
}

fn pool_forward(input: &[f64], ins: ImageShape, outs: ImageShape) -> (Vec<f64>, Vec<usize>) {
    let c = ins.channels;
    let mut out = vec![0.0; outs.pixels()];
    let mut argmax = vec![0; outs.pixels()];
    for y in 0..outs.height {
        for x in 0..outs.width {
            for ch in 0..c {
                let mut best = (y * POOL * ins.width + x * POOL) * c + ch;
                for dy in 0..POOL {
                    for dx in 0..POOL {
                        let idx = ((y * POOL + dy) * ins.width + x * POOL + dx) * c + ch;
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                }
                let o = (y * outs.width + x) * c + ch;
                out[o] = input[best];
                argmax[o] = best;
            }
        }
    }
    (out, argmax)
}
