//! Minimal dense-network machinery: forward evaluation, exact reverse-mode
//! gradients, and plain SGD. Everything is `f64`; weights are row-major
//! `out x in`.
//!
//! `forward` returns every layer's post-activation output because the layer
//! below the head (the penultimate representation) is consumed elsewhere as
//! a feature vector. `backward_through` accepts a gradient injected at any
//! layer's output so losses defined on intermediate representations can be
//! trained through the network.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Probabilities below this are clamped inside cross-entropy; gradients in
/// the clamped region are zero.
pub const CE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Softmax => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Softmax),
            other => Err(Error::Format(format!("unknown activation tag {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    /// `out_dim x in_dim`, row-major.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument("layer dimensions must be >= 1".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::InvalidArgument(format!(
                "weight count {} does not match {out_dim} x {in_dim}",
                weights.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::InvalidArgument(format!(
                "bias count {} does not match output dimension {out_dim}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("layer parameters must be finite".into()));
        }
        Ok(Layer { in_dim, out_dim, weights, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            *out_v += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }

    fn activate(&self, pre: Vec<f64>) -> Vec<f64> {
        match self.activation {
            Activation::Identity => pre,
            Activation::Relu => pre.into_iter().map(|v| v.max(0.0)).collect(),
            Activation::Softmax => softmax(&pre),
        }
    }
}

/// A chain of dense layers. Softmax is permitted only as the final
/// activation.
#[derive(Debug, Clone)]
pub struct DenseNetwork {
    pub(crate) layers: Vec<Layer>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for i in 1..layers.len() {
            if layers[i].in_dim != layers[i - 1].out_dim {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    layers[i].in_dim,
                    i - 1,
                    layers[i - 1].out_dim
                )));
            }
        }
        let last = layers.len() - 1;
        if layers[..last].iter().any(|l| l.activation == Activation::Softmax) {
            return Err(Error::UnsupportedArchitecture(
                "softmax is only supported as the final activation".into(),
            ));
        }
        Ok(DenseNetwork { layers })
    }

    /// Random network with the given layer widths and activations. Weights
    /// are uniform in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`,
    /// biases zero.
    pub fn random(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (l, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect();
            layers.push(Layer::new(fan_in, fan_out, weights, vec![0.0; fan_out], act)?);
        }
        DenseNetwork::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    /// Evaluate the network, returning each layer's post-activation output.
    /// The final entry is the network output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network input contains non-finite values".into()));
        }
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for layer in &self.layers {
            let post = layer.activate(layer.affine(current));
            outputs.push(post);
            current = outputs.last().expect("just pushed");
        }
        Ok(outputs)
    }

    /// Exact gradients of the clamped cross-entropy of the network output
    /// against `true_class`. Requires a softmax head.
    pub fn backward(&self, input: &[f64], true_class: usize) -> Result<Gradients> {
        if self.layers.last().expect("non-empty").activation != Activation::Softmax {
            return Err(Error::UnsupportedArchitecture(
                "cross-entropy backward requires a softmax output layer".into(),
            ));
        }
        let outputs = self.forward(input)?;
        let probs = outputs.last().expect("non-empty");
        let grad_out = ce_posterior_gradient(probs, true_class)?;
        Ok(self.backward_through(input, &outputs, self.layers.len() - 1, &grad_out))
    }

    /// Back-propagate a loss gradient injected at the post-activation output
    /// of layer `top_layer` (as produced by [`forward`](Self::forward)).
    /// Layers above `top_layer` receive zero gradients.
    pub fn backward_from(
        &self,
        input: &[f64],
        outputs: &[Vec<f64>],
        top_layer: usize,
        grad_at_output: &[f64],
    ) -> Result<Gradients> {
        if top_layer >= self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "layer index {top_layer} out of range for {} layers",
                self.layers.len()
            )));
        }
        if outputs.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} cached outputs for {} layers",
                outputs.len(),
                self.layers.len()
            )));
        }
        if grad_at_output.len() != self.layers[top_layer].out_dim {
            return Err(Error::InvalidArgument(format!(
                "gradient has {} entries, layer {top_layer} emits {}",
                grad_at_output.len(),
                self.layers[top_layer].out_dim
            )));
        }
        Ok(self.backward_through(input, outputs, top_layer, grad_at_output))
    }

    fn backward_through(
        &self,
        input: &[f64],
        outputs: &[Vec<f64>],
        top_layer: usize,
        grad_at_output: &[f64],
    ) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let mut g = grad_at_output.to_vec();
        for l in (0..=top_layer).rev() {
            let layer = &self.layers[l];
            let post = &outputs[l];
            let prev: &[f64] = if l == 0 { input } else { &outputs[l - 1] };

            // Gradient w.r.t. the pre-activation. Relu's derivative is read
            // off the post-activation sign (zero at the kink).
            let dpre: Vec<f64> = match layer.activation {
                Activation::Identity => g,
                Activation::Relu => {
                    g.iter().zip(post).map(|(&gv, &pv)| if pv > 0.0 { gv } else { 0.0 }).collect()
                }
                Activation::Softmax => softmax_jacobian_product(post, &g),
            };

            let lg = &mut grads.layers[l];
            for (o, &d) in dpre.iter().enumerate() {
                lg.bias[o] += d;
                let row = &mut lg.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (w, &p) in row.iter_mut().zip(prev) {
                    *w += d * p;
                }
            }

            let mut down = vec![0.0; layer.in_dim];
            for (o, &d) in dpre.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (dv, &w) in down.iter_mut().zip(row) {
                    *dv += d * w;
                }
            }
            g = down;
        }
        grads.input = g;
        grads
    }

    /// One gradient-descent step: `p -= learning_rate * g` for every
    /// parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite, got {learning_rate}"
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gradient blocks for {} layers",
                grads.layers.len(),
                self.layers.len()
            )));
        }
        for (layer, lg) in self.layers.iter_mut().zip(&grads.layers) {
            if lg.weights.len() != layer.weights.len() || lg.bias.len() != layer.bias.len() {
                return Err(Error::InvalidArgument("gradient shape mismatch".into()));
            }
            for (w, g) in layer.weights.iter_mut().zip(&lg.weights) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&lg.bias) {
                *b -= learning_rate * g;
            }
        }
        Ok(())
    }
}

/// Per-layer parameter gradients plus the gradient w.r.t. the network input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        for (x, y) in self.input.iter_mut().zip(&other.input) {
            *x += y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for lg in &mut self.layers {
            lg.weights.iter_mut().for_each(|x| *x *= factor);
            lg.bias.iter_mut().for_each(|x| *x *= factor);
        }
        self.input.iter_mut().for_each(|x| *x *= factor);
    }

    /// Euclidean norm over all parameter gradients (input excluded).
    pub fn param_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Numerically stable softmax (inputs shifted by their maximum).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `J_softmax^T g` evaluated from the softmax output `p`.
pub(crate) fn softmax_jacobian_product(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(&pv, &gv)| pv * (gv - dot)).collect()
}

/// Gradient of the clamped cross-entropy w.r.t. the posterior vector
/// itself: `-1/p[true_class]` at the true class, zero elsewhere (and zero
/// everywhere once the clamp is active).
pub fn ce_posterior_gradient(posterior: &[f64], true_class: usize) -> Result<Vec<f64>> {
    if true_class >= posterior.len() {
        return Err(Error::InvalidArgument(format!(
            "class {true_class} out of range for {} outputs",
            posterior.len()
        )));
    }
    let mut g = vec![0.0; posterior.len()];
    if posterior[true_class] > CE_CLAMP {
        g[true_class] = -1.0 / posterior[true_class];
    }
    Ok(g)
}

/// Clamped cross-entropy `-ln(max(predicted[true_class], 1e-12))`.
pub fn cross_entropy(predicted: &[f64], true_class: usize) -> Result<f64> {
    if true_class >= predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "class {true_class} out of range for {} outputs",
            predicted.len()
        )));
    }
    Ok(-predicted[true_class].max(CE_CLAMP).ln())
}

/// Settings for plain minibatch SGD.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(Error::InvalidArgument(format!(
                "batch size {} out of range for {n_train} training samples",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Train a softmax classifier on `(samples, labels)` by minibatch SGD,
/// returning the per-epoch mean cross-entropy trace.
pub fn train_classifier(
    net: &mut DenseNetwork,
    samples: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    if samples.len() != labels.len() || samples.is_empty() {
        return Err(Error::InvalidArgument("samples and labels must align and be non-empty".into()));
    }
    config.validate(samples.len())?;

    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut acc = Gradients::zeros_like(net);
            for &i in batch {
                let outputs = net.forward(&samples[i])?;
                let loss = cross_entropy(outputs.last().expect("non-empty"), labels[i])?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch}, batch {batch_no}"
                    )));
                }
                epoch_loss += loss;
                acc.accumulate(&net.backward(&samples[i], labels[i])?);
            }
            acc.scale(1.0 / batch.len() as f64);
            net.sgd_step(&acc, config.learning_rate)?;
        }
        trace.push(epoch_loss / samples.len() as f64);
    }
    Ok(trace)
}
