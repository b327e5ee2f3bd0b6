//! The learned transmission system: one encoder per view compresses its
//! slice of the observation into a short real vector, each vector is
//! power-normalized and sent over the Gaussian channel, and a softmax
//! decoder turns the concatenated received vectors into a class posterior.
//!
//! Training minimises the empirical cross-entropy of the decoded posterior,
//! which maximises a lower bound on the mutual information between label
//! and received representation (see [`crate::infotheory::milbo`]). The
//! channel stays inside the training loop: each minibatch draws one
//! signal-to-noise ratio uniformly from the configured range, and gradients
//! pass through the noise-injection point with the noise realisation held
//! constant.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{awgn, normalize_power};
use crate::error::{Error, Result};
use crate::nn::{
    ce_posterior_gradient, cross_entropy, Activation, DenseNetwork, Gradients,
};
use crate::source::{split_views, Dataset, ViewSplit};

/// Layer widths of the encoder/decoder pair.
#[derive(Debug, Clone, Copy)]
pub struct SinfonyArch {
    /// Hidden width of each per-view encoder.
    pub encoder_hidden: usize,
    /// Channel symbols per view.
    pub n_tx: usize,
    /// Hidden width of the decoder.
    pub decoder_hidden: usize,
}

/// Trained (or freshly initialised) transmission system.
#[derive(Debug, Clone)]
pub struct SinfonySystem {
    encoders: Vec<DenseNetwork>,
    decoder: DenseNetwork,
    view_split: ViewSplit,
    n_tx: usize,
    snr_low_db: f64,
    snr_high_db: f64,
}

impl SinfonySystem {
    /// Assemble a system from its parts, validating the geometry: one
    /// encoder per view consuming that view's width and emitting `n_tx`
    /// symbols (a genuine compression, `n_tx <=` view width), and a softmax
    /// decoder consuming all views' symbols.
    pub fn new(
        encoders: Vec<DenseNetwork>,
        decoder: DenseNetwork,
        view_split: ViewSplit,
        n_tx: usize,
        snr_low_db: f64,
        snr_high_db: f64,
    ) -> Result<Self> {
        if encoders.len() != view_split.num_views() {
            return Err(Error::InvalidArgument(format!(
                "{} encoders for {} views",
                encoders.len(),
                view_split.num_views()
            )));
        }
        if n_tx == 0 {
            return Err(Error::InvalidArgument("n_tx must be >= 1".into()));
        }
        for (q, (enc, &dim)) in encoders.iter().zip(view_split.view_dims()).enumerate() {
            if enc.input_dim() != dim {
                return Err(Error::InvalidArgument(format!(
                    "encoder {q} expects {} inputs but view {q} has {dim}",
                    enc.input_dim()
                )));
            }
            if enc.output_dim() != n_tx {
                return Err(Error::InvalidArgument(format!(
                    "encoder {q} emits {} symbols, expected n_tx = {n_tx}",
                    enc.output_dim()
                )));
            }
            if n_tx > dim {
                return Err(Error::UnsupportedArchitecture(format!(
                    "view {q} has width {dim} < n_tx = {n_tx}; the link must compress"
                )));
            }
        }
        if decoder.input_dim() != encoders.len() * n_tx {
            return Err(Error::InvalidArgument(format!(
                "decoder expects {} inputs but the channel delivers {}",
                decoder.input_dim(),
                encoders.len() * n_tx
            )));
        }
        if decoder.layers().last().expect("non-empty").activation() != Activation::Softmax {
            return Err(Error::UnsupportedArchitecture(
                "decoder must end in a softmax head".into(),
            ));
        }
        if !(snr_low_db.is_finite() && snr_high_db.is_finite() && snr_low_db <= snr_high_db) {
            return Err(Error::InvalidArgument(format!(
                "bad training snr range [{snr_low_db}, {snr_high_db}]"
            )));
        }
        Ok(SinfonySystem { encoders, decoder, view_split, n_tx, snr_low_db, snr_high_db })
    }

    /// Freshly initialised system: two-layer relu encoders with identity
    /// output, two-layer decoder with softmax head.
    pub fn random(
        arch: &SinfonyArch,
        view_split: &ViewSplit,
        num_classes: usize,
        snr_low_db: f64,
        snr_high_db: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        if arch.encoder_hidden == 0 || arch.decoder_hidden == 0 {
            return Err(Error::InvalidArgument("hidden widths must be >= 1".into()));
        }
        let encoders = view_split
            .view_dims()
            .iter()
            .map(|&dim| {
                DenseNetwork::random(
                    &[dim, arch.encoder_hidden, arch.n_tx],
                    &[Activation::Relu, Activation::Identity],
                    rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let decoder = DenseNetwork::random(
            &[view_split.num_views() * arch.n_tx, arch.decoder_hidden, num_classes],
            &[Activation::Relu, Activation::Softmax],
            rng,
        )?;
        SinfonySystem::new(
            encoders,
            decoder,
            view_split.clone(),
            arch.n_tx,
            snr_low_db,
            snr_high_db,
        )
    }

    pub fn num_views(&self) -> usize {
        self.encoders.len()
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn num_classes(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn view_split(&self) -> &ViewSplit {
        &self.view_split
    }

    pub fn encoders(&self) -> &[DenseNetwork] {
        &self.encoders
    }

    pub fn decoder(&self) -> &DenseNetwork {
        &self.decoder
    }

    pub fn snr_range_db(&self) -> (f64, f64) {
        (self.snr_low_db, self.snr_high_db)
    }

    /// Channel uses per transmitted sample.
    pub fn channel_uses(&self) -> u64 {
        (self.num_views() * self.n_tx) as u64
    }

    /// Encode every view, power-normalize, pass through the channel at
    /// `snr_db`, and concatenate the received vectors.
    pub fn transmit(&self, sample: &[f64], snr_db: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let views = split_views(sample, &self.view_split)?;
        let mut received = Vec::with_capacity(self.num_views() * self.n_tx);
        for (enc, view) in self.encoders.iter().zip(views) {
            let outputs = enc.forward(view)?;
            let normalized = normalize_power(outputs.last().expect("non-empty"))?;
            received.extend(awgn(&normalized, snr_db, rng)?);
        }
        Ok(received)
    }

    /// Full forward pass with every intermediate cached, so a loss gradient
    /// injected anywhere in the decoder can be propagated back through the
    /// same channel realisation.
    pub fn forward_trace(
        &self,
        sample: &[f64],
        snr_db: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<TransmissionTrace> {
        let views = split_views(sample, &self.view_split)?;
        let mut enc_outputs = Vec::with_capacity(views.len());
        let mut raw_encodings = Vec::with_capacity(views.len());
        let mut received = Vec::with_capacity(views.len() * self.n_tx);
        for (enc, view) in self.encoders.iter().zip(&views) {
            let outputs = enc.forward(view)?;
            let raw = outputs.last().expect("non-empty").clone();
            let normalized = normalize_power(&raw)?;
            received.extend(awgn(&normalized, snr_db, rng)?);
            enc_outputs.push(outputs);
            raw_encodings.push(raw);
        }
        let dec_outputs = self.decoder.forward(&received)?;
        Ok(TransmissionTrace { enc_outputs, raw_encodings, received, dec_outputs })
    }

    /// Back-propagate `grad`, given at the post-activation output of decoder
    /// layer `dec_top_layer` of a cached trace, through the decoder, the
    /// noise-injection point (noise held constant), and the power
    /// normalization into every encoder. Gradients accumulate into
    /// `enc_grads` and `dec_grads`; decoder layers above the injection
    /// point receive zero.
    pub fn backward_trace(
        &self,
        sample: &[f64],
        trace: &TransmissionTrace,
        dec_top_layer: usize,
        grad: &[f64],
        enc_grads: &mut [Gradients],
        dec_grads: &mut Gradients,
    ) -> Result<()> {
        if enc_grads.len() != self.encoders.len() {
            return Err(Error::InvalidArgument(format!(
                "{} encoder gradient blocks for {} encoders",
                enc_grads.len(),
                self.encoders.len()
            )));
        }
        let views = split_views(sample, &self.view_split)?;
        let dec_grad = self.decoder.backward_from(
            &trace.received,
            &trace.dec_outputs,
            dec_top_layer,
            grad,
        )?;
        for (q, view) in views.iter().enumerate() {
            let g_received = &dec_grad.input[q * self.n_tx..(q + 1) * self.n_tx];
            let g_encoding = normalize_power_backward(&trace.raw_encodings[q], g_received);
            let enc = &self.encoders[q];
            let g = enc.backward_from(
                view,
                &trace.enc_outputs[q],
                enc.layers().len() - 1,
                &g_encoding,
            )?;
            enc_grads[q].accumulate(&g);
        }
        dec_grads.accumulate(&dec_grad);
        Ok(())
    }

    /// Apply one SGD step to every encoder and the decoder.
    pub fn apply_gradients(
        &mut self,
        enc_grads: &[Gradients],
        dec_grads: &Gradients,
        learning_rate: f64,
    ) -> Result<()> {
        if enc_grads.len() != self.encoders.len() {
            return Err(Error::InvalidArgument(format!(
                "{} encoder gradient blocks for {} encoders",
                enc_grads.len(),
                self.encoders.len()
            )));
        }
        for (enc, g) in self.encoders.iter_mut().zip(enc_grads) {
            enc.sgd_step(g, learning_rate)?;
        }
        self.decoder.sgd_step(dec_grads, learning_rate)
    }

    /// Class posterior decoded from a received vector.
    pub fn decode_posterior(&self, received: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decoder.forward(received)?.last().expect("non-empty").clone())
    }

    /// The decoder's last hidden representation for a received vector.
    pub fn penultimate_features(&self, received: &[f64]) -> Result<Vec<f64>> {
        let n_layers = self.decoder.layers().len();
        if n_layers < 2 {
            return Err(Error::UnsupportedArchitecture(
                "decoder has no hidden layer to expose features from".into(),
            ));
        }
        let outputs = self.decoder.forward(received)?;
        Ok(outputs[n_layers - 2].clone())
    }

    /// Fraction of `dataset` classified correctly by the maximum-posterior
    /// rule after one transmission per sample at `snr_db`.
    pub fn map_accuracy(
        &self,
        dataset: &Dataset,
        snr_db: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let mut correct = 0usize;
        for (sample, &label) in dataset.samples().iter().zip(dataset.labels()) {
            let received = self.transmit(sample, snr_db, rng)?;
            let posterior = self.decode_posterior(&received)?;
            if map_decision(&posterior) == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.len() as f64)
    }
}

/// Cached intermediates of one end-to-end forward pass.
#[derive(Debug, Clone)]
pub struct TransmissionTrace {
    /// Per view, per encoder layer, the post-activation outputs.
    enc_outputs: Vec<Vec<Vec<f64>>>,
    /// Encoder outputs before power normalization.
    raw_encodings: Vec<Vec<f64>>,
    received: Vec<f64>,
    /// Per decoder layer, the post-activation outputs.
    dec_outputs: Vec<Vec<f64>>,
}

impl TransmissionTrace {
    pub fn received(&self) -> &[f64] {
        &self.received
    }

    /// The decoded class posterior.
    pub fn posterior(&self) -> &[f64] {
        self.dec_outputs.last().expect("non-empty")
    }

    /// Post-activation output of decoder layer `layer`.
    pub fn decoder_output(&self, layer: usize) -> Option<&[f64]> {
        self.dec_outputs.get(layer).map(Vec::as_slice)
    }
}

/// Maximum-posterior decision; ties resolve to the lowest class index.
pub fn map_decision(posterior: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in posterior.iter().enumerate() {
        if p > posterior[best] {
            best = i;
        }
    }
    best
}

/// Training settings for the end-to-end system.
#[derive(Debug, Clone)]
pub struct SinfonyTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Per-minibatch snr is drawn uniformly from this range (dB).
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    pub seed: u64,
}

impl Default for SinfonyTrainConfig {
    fn default() -> Self {
        SinfonyTrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 64,
            snr_low_db: -4.0,
            snr_high_db: 6.0,
            seed: 0,
        }
    }
}

/// Train encoders and decoder jointly on `train`, returning the system and
/// the per-epoch mean training loss trace.
pub fn train_sinfony(
    train: &Dataset,
    view_split: &ViewSplit,
    arch: &SinfonyArch,
    config: &SinfonyTrainConfig,
) -> Result<(SinfonySystem, Vec<f64>)> {
    if view_split.total_dim() != train.dim() {
        return Err(Error::InvalidArgument(format!(
            "view split covers {} dims but samples have {}",
            view_split.total_dim(),
            train.dim()
        )));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive and finite, got {}",
            config.learning_rate
        )));
    }
    if config.batch_size == 0 || config.batch_size > train.len() {
        return Err(Error::InvalidArgument(format!(
            "batch size {} out of range for {} training samples",
            config.batch_size,
            train.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut system = SinfonySystem::random(
        arch,
        view_split,
        train.num_classes(),
        config.snr_low_db,
        config.snr_high_db,
        &mut rng,
    )?;

    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let snr_db = rng.random_range(config.snr_low_db..=config.snr_high_db);
            let mut enc_grads: Vec<Gradients> =
                system.encoders.iter().map(Gradients::zeros_like).collect();
            let mut dec_grads = Gradients::zeros_like(&system.decoder);

            for &i in batch {
                let loss = accumulate_sample_gradients(
                    &system,
                    train.samples()[i].as_slice(),
                    train.labels()[i],
                    snr_db,
                    &mut rng,
                    &mut enc_grads,
                    &mut dec_grads,
                )?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite training loss at epoch {epoch}, batch {batch_no}"
                    )));
                }
                epoch_loss += loss;
            }

            let scale = 1.0 / batch.len() as f64;
            for (enc, mut g) in system.encoders.iter_mut().zip(enc_grads) {
                g.scale(scale);
                enc.sgd_step(&g, config.learning_rate)?;
            }
            dec_grads.scale(scale);
            system.decoder.sgd_step(&dec_grads, config.learning_rate)?;
        }
        trace.push(epoch_loss / train.len() as f64);
    }
    Ok((system, trace))
}

/// Forward one sample through encoders, channel, and decoder; accumulate
/// exact cross-entropy gradients for all networks; return the sample's
/// loss.
fn accumulate_sample_gradients(
    system: &SinfonySystem,
    sample: &[f64],
    label: usize,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
    enc_grads: &mut [Gradients],
    dec_grads: &mut Gradients,
) -> Result<f64> {
    let trace = system.forward_trace(sample, snr_db, rng)?;
    let posterior = trace.posterior();
    let loss = cross_entropy(posterior, label)?;
    let grad_posterior = ce_posterior_gradient(posterior, label)?;
    system.backward_trace(
        sample,
        &trace,
        system.decoder.layers().len() - 1,
        &grad_posterior,
        enc_grads,
        dec_grads,
    )?;
    Ok(loss)
}

/// `J^T g` for `f(x) = x * sqrt(n) / |x|`:
/// `(sqrt(n)/|x|) * (g - x (x . g) / |x|^2)`.
fn normalize_power_backward(x: &[f64], g: &[f64]) -> Vec<f64> {
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    let norm = norm_sq.sqrt();
    let scale = (x.len() as f64).sqrt() / norm;
    let dot: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    x.iter().zip(g).map(|(&xv, &gv)| scale * (gv - xv * dot / norm_sq)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use crate::source::{generate_gaussian_source, train_val_split};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn tiny_system(seed: u64) -> SinfonySystem {
        let split = ViewSplit::equal(2, 8).unwrap();
        let arch = SinfonyArch { encoder_hidden: 6, n_tx: 3, decoder_hidden: 5 };
        SinfonySystem::random(&arch, &split, 3, -4.0, 6.0, &mut rng(seed)).unwrap()
    }

    #[test]
    fn construction_validates_geometry() {
        let split = ViewSplit::equal(2, 8).unwrap();
        let arch = SinfonyArch { encoder_hidden: 6, n_tx: 3, decoder_hidden: 5 };
        let mut r = rng(0);
        let ok = SinfonySystem::random(&arch, &split, 3, -4.0, 6.0, &mut r).unwrap();
        assert_eq!(ok.num_views(), 2);
        assert_eq!(ok.num_classes(), 3);
        assert_eq!(ok.channel_uses(), 6);

        // Expansion instead of compression is refused.
        let wide = SinfonyArch { encoder_hidden: 6, n_tx: 5, decoder_hidden: 5 };
        assert!(matches!(
            SinfonySystem::random(&wide, &split, 3, -4.0, 6.0, &mut r),
            Err(Error::UnsupportedArchitecture(_))
        ));

        // Decoder without a softmax head is refused.
        let encs = vec![
            DenseNetwork::random(&[4, 6, 3], &[Activation::Relu, Activation::Identity], &mut r)
                .unwrap(),
            DenseNetwork::random(&[4, 6, 3], &[Activation::Relu, Activation::Identity], &mut r)
                .unwrap(),
        ];
        let plain_decoder =
            DenseNetwork::random(&[6, 5, 3], &[Activation::Relu, Activation::Identity], &mut r)
                .unwrap();
        assert!(SinfonySystem::new(encs, plain_decoder, split, 3, -4.0, 6.0).is_err());
    }

    #[test]
    fn transmit_power_accounting() {
        let system = tiny_system(1);
        let sample: Vec<f64> = (0..8).map(|i| 0.3 * i as f64 - 1.0).collect();
        let mut r = rng(2);
        let n_tx = system.n_tx();
        let mut mean_sq = vec![0.0f64; system.num_views()];
        let draws = 10_000;
        for _ in 0..draws {
            let y = system.transmit(&sample, 20.0, &mut r).unwrap();
            for q in 0..system.num_views() {
                mean_sq[q] += y[q * n_tx..(q + 1) * n_tx]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    / n_tx as f64;
            }
        }
        for (q, total) in mean_sq.iter().enumerate() {
            let msq = total / draws as f64;
            // Unit signal power plus 0.01 noise power.
            assert!((0.9..=1.15).contains(&msq), "view {q}: mean square {msq}");
        }
    }

    #[test]
    fn noiseless_transmit_is_deterministic() {
        let system = tiny_system(3);
        let sample: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let a = system.transmit(&sample, f64::INFINITY, &mut rng(4)).unwrap();
        let b = system.transmit(&sample, f64::INFINITY, &mut rng(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decode_posterior_is_normalized() {
        let system = tiny_system(5);
        let sample: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let y = system.transmit(&sample, 6.0, &mut rng(6)).unwrap();
        let p = system.decode_posterior(&y).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zeroed_head_gives_uniform_posterior() {
        let system = tiny_system(7);
        let hidden = system.decoder().layers()[0].out_dim();
        let k = system.num_classes();
        let zero_head = Layer::new(
            hidden,
            k,
            vec![0.0; hidden * k],
            vec![0.0; k],
            Activation::Softmax,
        )
        .unwrap();
        let decoder = DenseNetwork::new(vec![system.decoder().layers()[0].clone(), zero_head])
            .unwrap();
        let flat = SinfonySystem::new(
            system.encoders().to_vec(),
            decoder,
            system.view_split().clone(),
            system.n_tx(),
            -4.0,
            6.0,
        )
        .unwrap();
        let sample: Vec<f64> = (0..8).map(|i| 0.4 * (i as f64) - 1.3).collect();
        let y = flat.transmit(&sample, 20.0, &mut rng(8)).unwrap();
        for &p in &flat.decode_posterior(&y).unwrap() {
            assert!((p - 1.0 / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn penultimate_features_tap_the_hidden_layer() {
        // Identity hidden layer: features must equal the received vector.
        let mut r = rng(9);
        let enc = DenseNetwork::random(&[4, 4, 2], &[Activation::Relu, Activation::Identity], &mut r)
            .unwrap();
        let eye = Layer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], Activation::Identity)
            .unwrap();
        let head =
            Layer::new(2, 2, vec![0.4, -0.2, 0.1, 0.9], vec![0.0; 2], Activation::Softmax).unwrap();
        let system = SinfonySystem::new(
            vec![enc],
            DenseNetwork::new(vec![eye, head]).unwrap(),
            ViewSplit::new(vec![4]).unwrap(),
            2,
            -4.0,
            6.0,
        )
        .unwrap();
        let y = system.transmit(&[0.2, -0.4, 1.0, 0.3], f64::INFINITY, &mut rng(10)).unwrap();
        assert_eq!(system.penultimate_features(&y).unwrap(), y);

        // A decoder with no hidden layer has no features to expose.
        let mut r2 = rng(11);
        let enc2 =
            DenseNetwork::random(&[4, 4, 2], &[Activation::Relu, Activation::Identity], &mut r2)
                .unwrap();
        let head_only = DenseNetwork::random(&[2, 2], &[Activation::Softmax], &mut r2).unwrap();
        let flat = SinfonySystem::new(
            vec![enc2],
            head_only,
            ViewSplit::new(vec![4]).unwrap(),
            2,
            -4.0,
            6.0,
        )
        .unwrap();
        assert!(matches!(
            flat.penultimate_features(&[0.1, 0.2]),
            Err(Error::UnsupportedArchitecture(_))
        ));
    }

    #[test]
    fn map_decision_argmax_with_low_tie() {
        assert_eq!(map_decision(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(map_decision(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(map_decision(&[0.2, 0.3, 0.5]), 2);
    }

    #[test]
    fn gradients_match_finite_differences_through_the_chain() {
        // Full-chain check with frozen noise: compare every encoder and
        // decoder parameter gradient against central differences of the
        // cross-entropy with the same channel realisation.
        const H: f64 = 1e-5;
        let system = tiny_system(12);
        let sample: Vec<f64> = (0..8).map(|i| 0.25 * (i as f64 + 1.0).sin() + 0.5).collect();
        let label = 1usize;
        let snr_db = 6.0;
        let noise_seed = 77;

        let loss_of = |sys: &SinfonySystem| -> f64 {
            let y = sys.transmit(&sample, snr_db, &mut rng(noise_seed)).unwrap();
            cross_entropy(&sys.decode_posterior(&y).unwrap(), label).unwrap()
        };

        let mut enc_grads: Vec<Gradients> =
            system.encoders().iter().map(Gradients::zeros_like).collect();
        let mut dec_grads = Gradients::zeros_like(system.decoder());
        accumulate_sample_gradients(
            &system,
            &sample,
            label,
            snr_db,
            &mut rng(noise_seed),
            &mut enc_grads,
            &mut dec_grads,
        )
        .unwrap();

        let mut max_rel = 0.0f64;
        let mut check = |analytic: f64, bump: &mut dyn FnMut(f64) -> f64| {
            let numeric = (bump(H) - bump(-H)) / (2.0 * H);
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        };

        for q in 0..system.num_views() {
            for l in 0..system.encoders()[q].layers().len() {
                let n_w = system.encoders()[q].layers()[l].weights().len();
                for p in 0..n_w {
                    check(enc_grads[q].layers[l].weights[p], &mut |delta| {
                        let mut sys = system.clone();
                        sys.encoders[q].layers[l].weights[p] += delta;
                        loss_of(&sys)
                    });
                }
            }
        }
        for l in 0..system.decoder().layers().len() {
            let n_w = system.decoder().layers()[l].weights().len();
            for p in 0..n_w {
                check(dec_grads.layers[l].weights[p], &mut |delta| {
                    let mut sys = system.clone();
                    sys.decoder.layers[l].weights[p] += delta;
                    loss_of(&sys)
                });
            }
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn training_learns_the_separable_source() {
        let ds = generate_gaussian_source(2, 2, 10.0, 240, 5).unwrap();
        let (train, val) = train_val_split(&ds, 0.85, 6).unwrap();
        let split = ViewSplit::new(vec![2]).unwrap();
        let arch = SinfonyArch { encoder_hidden: 16, n_tx: 2, decoder_hidden: 16 };
        let config = SinfonyTrainConfig {
            learning_rate: 0.05,
            epochs: 5,
            batch_size: 16,
            snr_low_db: -4.0,
            snr_high_db: 6.0,
            seed: 7,
        };
        let (system, trace) = train_sinfony(&train, &split, &arch, &config).unwrap();
        assert_eq!(trace.len(), 5);
        // Early epochs strictly reduce the mean loss.
        assert!(trace[1] <= trace[0] && trace[2] <= trace[1], "trace not decreasing: {trace:?}");

        let acc = system.map_accuracy(&val, f64::INFINITY, &mut rng(8)).unwrap();
        assert!(acc >= 0.99, "noiseless validation accuracy {acc}");

        // Degradation ordering for a trained system.
        let low = system.map_accuracy(&val, -20.0, &mut rng(9)).unwrap();
        let high = system.map_accuracy(&val, 20.0, &mut rng(10)).unwrap();
        assert!(high - low >= 0.2, "top-bottom spread {high} - {low} too small");
    }

    #[test]
    fn untrained_system_is_chance_level() {
        // One untrained system is a fixed random function, so only the
        // average over initialisations is pinned to chance (class logits
        // are exchangeable under symmetric random init).
        let ds = generate_gaussian_source(2, 2, 10.0, 240, 5).unwrap();
        let (train, val) = train_val_split(&ds, 0.85, 6).unwrap();
        let split = ViewSplit::new(vec![2]).unwrap();
        let arch = SinfonyArch { encoder_hidden: 16, n_tx: 2, decoder_hidden: 16 };
        let mut mean_acc = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let config = SinfonyTrainConfig { epochs: 0, seed, ..Default::default() };
            let (system, trace) = train_sinfony(&train, &split, &arch, &config).unwrap();
            assert!(trace.is_empty());
            mean_acc += system.map_accuracy(&val, f64::INFINITY, &mut rng(11)).unwrap();
        }
        mean_acc /= seeds as f64;
        assert!((mean_acc - 0.5).abs() <= 0.12, "untrained mean accuracy {mean_acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let ds = generate_gaussian_source(2, 4, 5.0, 100, 1).unwrap();
        let split = ViewSplit::equal(2, 4).unwrap();
        let arch = SinfonyArch { encoder_hidden: 8, n_tx: 2, decoder_hidden: 8 };
        let config = SinfonyTrainConfig {
            learning_rate: 0.02,
            epochs: 2,
            batch_size: 20,
            snr_low_db: -4.0,
            snr_high_db: 6.0,
            seed: 13,
        };
        let (a, trace_a) = train_sinfony(&ds, &split, &arch, &config).unwrap();
        let (b, trace_b) = train_sinfony(&ds, &split, &arch, &config).unwrap();
        assert_eq!(trace_a, trace_b);
        assert_eq!(
            a.decoder().layers()[0].weights(),
            b.decoder().layers()[0].weights()
        );
        assert_eq!(
            a.encoders()[1].layers()[0].weights(),
            b.encoders()[1].layers()[0].weights()
        );
    }

    #[test]
    fn training_validates_config() {
        let ds = generate_gaussian_source(2, 2, 1.0, 20, 0).unwrap();
        let split = ViewSplit::new(vec![2]).unwrap();
        let arch = SinfonyArch { encoder_hidden: 4, n_tx: 2, decoder_hidden: 4 };
        let bad_lr = SinfonyTrainConfig { learning_rate: -1.0, ..Default::default() };
        assert!(train_sinfony(&ds, &split, &arch, &bad_lr).is_err());
        let bad_batch = SinfonyTrainConfig { batch_size: 100, ..Default::default() };
        assert!(train_sinfony(&ds, &split, &arch, &bad_batch).is_err());
        let wrong_split = ViewSplit::new(vec![3]).unwrap();
        assert!(train_sinfony(&ds, &wrong_split, &arch, &SinfonyTrainConfig::default()).is_err());
    }
}
