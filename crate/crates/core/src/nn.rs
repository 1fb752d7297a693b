//! Dense multilayer perceptrons with hand-written backpropagation.
//!
//! Layer `i` owns two parameter entries, `layer{i}.weight` with shape
//! `[out, in]` (row-major) and `layer{i}.bias` with shape `[out]`.
//! Everything runs in double precision.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SalError};
use crate::params::{ParameterSet, Tensor};
use crate::rng::SalRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation and the activation value.
    fn derivative(self, pre: f64, act: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - act * act,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Softmax,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    /// One activation per hidden layer (`widths.len() - 2` entries).
    pub hidden: Vec<Activation>,
    pub output: OutputKind,
    pub seed: u64,
}

impl MlpSpec {
    /// Same activation on every hidden layer.
    pub fn new(widths: Vec<usize>, activation: Activation, output: OutputKind, seed: u64) -> Result<Self> {
        let hidden = vec![activation; widths.len().saturating_sub(2)];
        let spec = Self {
            widths,
            hidden,
            output,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(SalError::Config(format!(
                "an MLP needs at least two widths, got {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(SalError::Config(format!(
                "all MLP widths must be >= 1, got {:?}",
                self.widths
            )));
        }
        if self.hidden.len() != self.widths.len() - 2 {
            return Err(SalError::Config(format!(
                "{} hidden activations for {} hidden layers",
                self.hidden.len(),
                self.widths.len() - 2
            )));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

pub fn weight_name(layer: usize) -> String {
    format!("layer{layer}.weight")
}

pub fn bias_name(layer: usize) -> String {
    format!("layer{layer}.bias")
}

/// Fan-in scaled normal weights (`std = 1/sqrt(fan_in)`), zero biases.
pub fn init_mlp(spec: &MlpSpec) -> Result<ParameterSet> {
    spec.validate()?;
    let mut rng = SalRng::seed_from_u64(spec.seed);
    let mut params = ParameterSet::new();
    for (layer, w) in spec.widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let std = 1.0 / (fan_in as f64).sqrt();
        let values: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        params.push(weight_name(layer), Tensor::new(vec![fan_out, fan_in], values)?, true)?;
        params.push(bias_name(layer), Tensor::zeros(vec![fan_out]), true)?;
    }
    Ok(params)
}

/// Intermediate values kept for the backward pass. `activations[0]` is the
/// input batch; `pre[i]` / `activations[i + 1]` belong to layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pre: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    pub batch: usize,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

fn layer_params<'a>(params: &'a ParameterSet, spec: &MlpSpec, layer: usize) -> Result<(&'a [f64], &'a [f64])> {
    let (fan_in, fan_out) = (spec.widths[layer], spec.widths[layer + 1]);
    let w = params
        .get(&weight_name(layer))
        .ok_or_else(|| SalError::Shape(format!("missing {}", weight_name(layer))))?;
    let b = params
        .get(&bias_name(layer))
        .ok_or_else(|| SalError::Shape(format!("missing {}", bias_name(layer))))?;
    if w.tensor.shape() != [fan_out, fan_in] || b.tensor.shape() != [fan_out] {
        return Err(SalError::Shape(format!(
            "layer {layer} parameters do not match widths {fan_in} -> {fan_out}"
        )));
    }
    Ok((w.tensor.values(), b.tensor.values()))
}

fn softmax_rows(logits: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for (z, p) in logits.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pi, &zi) in p.iter_mut().zip(z) {
            *pi = (zi - max).exp();
            sum += *pi;
        }
        for pi in p.iter_mut() {
            *pi /= sum;
        }
    }
    out
}

/// Forward pass over a `[n, input_width]` batch.
pub fn forward(params: &ParameterSet, spec: &MlpSpec, inputs: &Tensor) -> Result<(Tensor, ForwardCache)> {
    spec.validate()?;
    if inputs.shape().len() != 2 || inputs.cols() != spec.input_width() {
        return Err(SalError::Shape(format!(
            "input shape {:?} does not match input width {}",
            inputs.shape(),
            spec.input_width()
        )));
    }
    let n = inputs.rows();
    let mut cache = ForwardCache {
        pre: Vec::with_capacity(spec.num_layers()),
        activations: vec![inputs.values().to_vec()],
        batch: n,
    };
    for layer in 0..spec.num_layers() {
        let (fan_in, fan_out) = (spec.widths[layer], spec.widths[layer + 1]);
        let (w, b) = layer_params(params, spec, layer)?;
        let x = cache.activations.last().unwrap();
        let mut z = vec![0.0; n * fan_out];
        for (xr, zr) in x.chunks_exact(fan_in).zip(z.chunks_exact_mut(fan_out)) {
            for (o, zo) in zr.iter_mut().enumerate() {
                let wr = &w[o * fan_in..(o + 1) * fan_in];
                *zo = b[o] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        let a = if layer + 1 < spec.num_layers() {
            let act = spec.hidden[layer];
            z.iter().map(|&v| act.apply(v)).collect()
        } else {
            match spec.output {
                OutputKind::Identity => z.clone(),
                OutputKind::Softmax => softmax_rows(&z, fan_out),
            }
        };
        cache.pre.push(z);
        cache.activations.push(a);
    }
    let out = cache.activations.last().unwrap().clone();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(SalError::non_finite("forward pass output"));
    }
    Ok((Tensor::new(vec![n, spec.output_width()], out)?, cache))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Tensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Targets,
}

impl Batch {
    pub fn classes(inputs: Tensor, labels: Vec<usize>) -> Self {
        Self {
            inputs,
            targets: Targets::Classes(labels),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Batch-mean loss and its gradient with respect to every parameter.
///
/// Cross-entropy is always evaluated from the final pre-activations through
/// log-sum-exp, so it never takes the log of a rounded probability. MSE is
/// the mean over all output elements.
pub fn loss_and_grad(
    params: &ParameterSet,
    spec: &MlpSpec,
    batch: &Batch,
    kind: LossKind,
) -> Result<(f64, ParameterSet)> {
    let (loss, grads, _) = loss_grad_predictions(params, spec, batch, kind)?;
    Ok((loss, grads))
}

/// [`loss_and_grad`] that also hands back the forward-pass predictions.
pub fn loss_grad_predictions(
    params: &ParameterSet,
    spec: &MlpSpec,
    batch: &Batch,
    kind: LossKind,
) -> Result<(f64, ParameterSet, Tensor)> {
    let n = batch.len();
    if n == 0 {
        return Err(SalError::Invalid("empty batch".into()));
    }
    let (pred, cache) = forward(params, spec, &batch.inputs)?;
    let k = spec.output_width();
    let (loss, mut delta) = match kind {
        LossKind::CrossEntropy => cross_entropy_delta(&cache, &batch.targets, k)?,
        LossKind::Mse => mse_delta(pred.values(), &batch.targets, spec.output, k)?,
    };
    if !loss.is_finite() {
        return Err(SalError::non_finite("loss"));
    }

    let mut grads = params.zeros_like();
    for layer in (0..spec.num_layers()).rev() {
        let (fan_in, fan_out) = (spec.widths[layer], spec.widths[layer + 1]);
        let x = &cache.activations[layer];
        {
            let gw = grads
                .entries_mut()
                .iter_mut()
                .find(|e| e.name == weight_name(layer))
                .unwrap()
                .tensor
                .values_mut();
            for (dr, xr) in delta.chunks_exact(fan_out).zip(x.chunks_exact(fan_in)) {
                for (o, &d) in dr.iter().enumerate() {
                    if d != 0.0 {
                        for (g, &xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xr) {
                            *g += d * xi;
                        }
                    }
                }
            }
        }
        {
            let gb = grads
                .entries_mut()
                .iter_mut()
                .find(|e| e.name == bias_name(layer))
                .unwrap()
                .tensor
                .values_mut();
            for dr in delta.chunks_exact(fan_out) {
                for (g, &d) in gb.iter_mut().zip(dr) {
                    *g += d;
                }
            }
        }
        if layer > 0 {
            let (w, _) = layer_params(params, spec, layer)?;
            let act = spec.hidden[layer - 1];
            let pre = &cache.pre[layer - 1];
            let mut prev = vec![0.0; n * fan_in];
            for (row, (dr, pr)) in delta.chunks_exact(fan_out).zip(prev.chunks_exact_mut(fan_in)).enumerate() {
                for (o, &d) in dr.iter().enumerate() {
                    if d != 0.0 {
                        for (p, &wi) in pr.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                            *p += d * wi;
                        }
                    }
                }
                for (j, p) in pr.iter_mut().enumerate() {
                    let idx = row * fan_in + j;
                    *p *= act.derivative(pre[idx], x[idx]);
                }
            }
            delta = prev;
        }
    }
    grads.check_finite("gradient")?;
    Ok((loss, grads, pred))
}

fn cross_entropy_delta(cache: &ForwardCache, targets: &Targets, k: usize) -> Result<(f64, Vec<f64>)> {
    let labels = match targets {
        Targets::Classes(l) => l,
        Targets::Values(_) => {
            return Err(SalError::Invalid(
                "cross-entropy needs class labels".into(),
            ))
        }
    };
    let n = cache.batch;
    if labels.len() != n {
        return Err(SalError::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    let logits = cache.logits();
    let probs = softmax_rows(logits, k);
    let mut loss = 0.0;
    let mut delta = probs;
    let inv_n = 1.0 / n as f64;
    for (i, (&y, z)) in labels.iter().zip(logits.chunks_exact(k)).enumerate() {
        if y >= k {
            return Err(SalError::Invalid(format!("label {y} outside {k} classes")));
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        let row = &mut delta[i * k..(i + 1) * k];
        row[y] -= 1.0;
        for d in row.iter_mut() {
            *d *= inv_n;
        }
    }
    Ok((loss * inv_n, delta))
}

fn mse_delta(pred: &[f64], targets: &Targets, output: OutputKind, k: usize) -> Result<(f64, Vec<f64>)> {
    let n = pred.len() / k;
    let target: Vec<f64> = match targets {
        Targets::Values(t) => {
            if t.shape() != [n, k] {
                return Err(SalError::Shape(format!(
                    "target shape {:?} does not match [{n}, {k}]",
                    t.shape()
                )));
            }
            t.values().to_vec()
        }
        Targets::Classes(labels) => {
            if labels.len() != n {
                return Err(SalError::Shape(format!("{} labels for {n} rows", labels.len())));
            }
            let mut t = vec![0.0; n * k];
            for (i, &y) in labels.iter().enumerate() {
                if y >= k {
                    return Err(SalError::Invalid(format!("label {y} outside {k} classes")));
                }
                t[i * k + y] = 1.0;
            }
            t
        }
    };
    let scale = 1.0 / (n * k) as f64;
    let mut loss = 0.0;
    let mut d_out = vec![0.0; n * k];
    for ((d, &p), &t) in d_out.iter_mut().zip(pred).zip(&target) {
        let r = p - t;
        loss += r * r;
        *d = 2.0 * r * scale;
    }
    let delta = match output {
        OutputKind::Identity => d_out,
        OutputKind::Softmax => {
            let mut delta = vec![0.0; n * k];
            for ((dz, dy), p) in delta
                .chunks_exact_mut(k)
                .zip(d_out.chunks_exact(k))
                .zip(pred.chunks_exact(k))
            {
                let dot: f64 = dy.iter().zip(p).map(|(a, b)| a * b).sum();
                for j in 0..k {
                    dz[j] = p[j] * (dy[j] - dot);
                }
            }
            delta
        }
    };
    Ok((loss * scale, delta))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(predictions: &Tensor, labels: &[usize]) -> Result<f64> {
    let n = predictions.rows();
    if n == 0 || labels.is_empty() {
        return Err(SalError::Invalid("accuracy of an empty batch".into()));
    }
    if n != labels.len() {
        return Err(SalError::Shape(format!(
            "{n} prediction rows for {} labels",
            labels.len()
        )));
    }
    let hits = (0..n)
        .filter(|&i| argmax(predictions.row(i)) == labels[i])
        .count();
    Ok(hits as f64 / n as f64)
}
