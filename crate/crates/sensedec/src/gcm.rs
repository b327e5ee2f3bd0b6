//! Exemplar-based decision model. A stored set of labelled exemplars, a
//! non-negative attention weight per feature, and a sensitivity scalar
//! define a class posterior for any query: each exemplar votes for its
//! label with weight `exp(-c * d_i)`, where `d_i` is the attention-scaled
//! euclidean distance from the query to exemplar `i`, and the votes are
//! normalized.
//!
//! Fitting runs minibatch SGD on the cross-entropy of that posterior with
//! the attention vector reparametrized through a softmax and the
//! sensitivity through an exponential, so both constraints (simplex,
//! positivity) hold by construction. The fit surface is not convex;
//! [`nonconvexity_witness`] searches for a concrete midpoint-convexity
//! violation as evidence.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{cross_entropy, softmax, softmax_jacobian_product, CE_CLAMP};

/// Keeps attention-scaled distances differentiable at zero.
const DIST_EPS: f64 = 1e-12;

/// Attention vectors must sum to one within this tolerance (unless all
/// zero, the degenerate no-attention state).
const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A midpoint must beat the chord by this much to count as a convexity
/// violation.
const VIOLATION_MARGIN: f64 = 1e-9;

/// Labelled exemplar memory the decision model consults.
#[derive(Debug, Clone)]
pub struct ExemplarStore {
    samples: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl ExemplarStore {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("exemplar store cannot be empty".into()));
        }
        if samples.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} exemplars but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        let dim = samples[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("exemplars cannot be zero-dimensional".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "exemplar {i} has {} features, expected {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("exemplar {i} has non-finite features")));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        Ok(ExemplarStore { samples, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// The decision model proper: exemplar memory plus attention and
/// sensitivity.
#[derive(Debug, Clone)]
pub struct GcmModel {
    store: ExemplarStore,
    attention: Vec<f64>,
    sensitivity: f64,
}

impl GcmModel {
    /// `attention` must be a simplex vector (sum one, within 1e-9) or all
    /// zeros — the latter is the degenerate state in which every exemplar
    /// is equidistant and the posterior collapses to label frequencies.
    pub fn new(store: ExemplarStore, attention: Vec<f64>, sensitivity: f64) -> Result<Self> {
        if attention.len() != store.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} attention weights for {} features",
                attention.len(),
                store.dim()
            )));
        }
        if attention.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidArgument(
                "attention weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = attention.iter().sum();
        let all_zero = attention.iter().all(|&w| w == 0.0);
        if !all_zero && (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "attention weights sum to {sum}, expected 1"
            )));
        }
        if !(sensitivity.is_finite() && sensitivity > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sensitivity must be positive and finite, got {sensitivity}"
            )));
        }
        Ok(GcmModel { store, attention, sensitivity })
    }

    /// Uniform attention, unit sensitivity.
    pub fn uniform(store: ExemplarStore) -> Result<Self> {
        let dim = store.dim();
        GcmModel::new(store, vec![1.0 / dim as f64; dim], 1.0)
    }

    pub fn store(&self) -> &ExemplarStore {
        &self.store
    }

    pub fn attention(&self) -> &[f64] {
        &self.attention
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.store.num_classes()
    }

    /// Attention-scaled distance from `query` to exemplar `i`.
    fn scaled_distance(&self, i: usize, query: &[f64]) -> f64 {
        let q: f64 = self.attention
            .iter()
            .zip(query.iter().zip(&self.store.samples[i]))
            .map(|(&w, (&z, &e))| w * (z - e) * (z - e))
            .sum();
        (q + DIST_EPS).sqrt()
    }

    /// Class posterior for a query: similarity-weighted label voting.
    ///
    /// Similarities are computed relative to the nearest exemplar
    /// (`exp(-c (d_i - d_min))`), which cannot overflow and keeps at least
    /// one vote at weight one however large the sensitivity.
    pub fn posterior(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "query has {} features, expected {}",
                query.len(),
                self.dim()
            )));
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("query has non-finite features".into()));
        }
        let dists: Vec<f64> =
            (0..self.store.len()).map(|i| self.scaled_distance(i, query)).collect();
        let d_min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut mass = vec![0.0; self.num_classes()];
        for (d, &l) in dists.iter().zip(&self.store.labels) {
            mass[l] += (-self.sensitivity * (d - d_min)).exp();
        }
        let total: f64 = mass.iter().sum();
        Ok(mass.into_iter().map(|m| m / total).collect())
    }
}

/// Draw a class from a posterior — the probability-matching decision rule.
pub fn sample_decision(posterior: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
    if posterior.is_empty() {
        return Err(Error::InvalidArgument("empty posterior".into()));
    }
    let sum: f64 = posterior.iter().sum();
    if posterior.iter().any(|&p| !p.is_finite() || p < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Numeric(format!("not a probability vector (sum {sum})")));
    }
    let u: f64 = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    for (k, &p) in posterior.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(posterior.len() - 1)
}

/// Loss and exact gradients of the clamped cross-entropy `-ln P(t|z)` for
/// one query, with respect to the attention weights, the sensitivity, and
/// the query itself. Once the clamp is active all gradients are zero,
/// matching [`crate::nn::ce_posterior_gradient`].
#[derive(Debug, Clone)]
pub struct GcmGradients {
    pub loss: f64,
    pub posterior: Vec<f64>,
    /// dL/dw.
    pub attention: Vec<f64>,
    /// dL/dc.
    pub sensitivity: f64,
    /// dL/dz.
    pub query: Vec<f64>,
}

pub fn loss_gradients(model: &GcmModel, query: &[f64], label: usize) -> Result<GcmGradients> {
    if label >= model.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            model.num_classes()
        )));
    }
    let posterior = model.posterior(query)?;
    let loss = cross_entropy(&posterior, label)?;

    let dim = model.dim();
    let mut d_attention = vec![0.0; dim];
    let mut d_sensitivity = 0.0;
    let mut d_query = vec![0.0; dim];

    if posterior[label] > CE_CLAMP {
        let c = model.sensitivity();
        let w = model.attention();
        let dists: Vec<f64> =
            (0..model.store.len()).map(|i| model.scaled_distance(i, query)).collect();
        let d_min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        let sims: Vec<f64> = dists.iter().map(|d| (-c * (d - d_min)).exp()).collect();
        let total: f64 = sims.iter().sum();
        let class_total: f64 = sims
            .iter()
            .zip(&model.store.labels)
            .filter(|(_, &l)| l == label)
            .map(|(s, _)| s)
            .sum();

        for i in 0..model.store.len() {
            // dL/du_i for log-similarity u_i = -c d_i; the distance shift
            // cancels inside both ratios.
            let indicator = if model.store.labels[i] == label { 1.0 } else { 0.0 };
            let g_u = sims[i] / total - indicator * sims[i] / class_total;
            d_sensitivity += g_u * (-dists[i]);
            let scale = -c / dists[i];
            for j in 0..dim {
                let delta = query[j] - model.store.samples[i][j];
                d_attention[j] += g_u * scale * delta * delta / 2.0;
                d_query[j] += g_u * scale * w[j] * delta;
            }
        }
    }

    Ok(GcmGradients {
        loss,
        posterior,
        attention: d_attention,
        sensitivity: d_sensitivity,
        query: d_query,
    })
}

/// Unconstrained fit parameters: attention is `softmax` of the logits,
/// sensitivity is `exp` of the log-sensitivity. The zero vector realizes
/// uniform attention and unit sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub struct GcmParams {
    pub attention_logits: Vec<f64>,
    pub log_sensitivity: f64,
}

impl GcmParams {
    pub fn neutral(dim: usize) -> Self {
        GcmParams { attention_logits: vec![0.0; dim], log_sensitivity: 0.0 }
    }

    /// Constrained `(attention, sensitivity)` pair these parameters encode.
    pub fn realize(&self) -> (Vec<f64>, f64) {
        (softmax(&self.attention_logits), self.log_sensitivity.exp())
    }
}

/// Settings for the decision-model fit.
#[derive(Debug, Clone)]
pub struct GcmFitConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for GcmFitConfig {
    fn default() -> Self {
        GcmFitConfig { learning_rate: 1.0, epochs: 1, batch_size: 64, seed: 0 }
    }
}

/// Outcome of [`fit_gcm`]: the realized model, the final unconstrained
/// parameters (for warm-starting a later refit), and the per-epoch mean
/// loss trace.
#[derive(Debug, Clone)]
pub struct GcmFit {
    pub model: GcmModel,
    pub params: GcmParams,
    pub trace: Vec<f64>,
}

/// Fit attention and sensitivity by minibatch SGD on `fit_samples`,
/// starting from `init` (use [`GcmParams::neutral`] for a cold start).
pub fn fit_gcm(
    store: &ExemplarStore,
    fit_samples: &[Vec<f64>],
    fit_labels: &[usize],
    init: &GcmParams,
    config: &GcmFitConfig,
) -> Result<GcmFit> {
    if fit_samples.is_empty() || fit_samples.len() != fit_labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} fit samples with {} labels",
            fit_samples.len(),
            fit_labels.len()
        )));
    }
    if init.attention_logits.len() != store.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} attention logits for {} features",
            init.attention_logits.len(),
            store.dim()
        )));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive and finite, got {}",
            config.learning_rate
        )));
    }
    if config.batch_size == 0 || config.batch_size > fit_samples.len() {
        return Err(Error::InvalidArgument(format!(
            "batch size {} out of range for {} fit samples",
            config.batch_size,
            fit_samples.len()
        )));
    }

    let mut params = init.clone();
    let (attention, sensitivity) = params.realize();
    let mut model = GcmModel::new(store.clone(), attention, sensitivity)?;

    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..fit_samples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut g_logits = vec![0.0; store.dim()];
            let mut g_log_c = 0.0;
            for &i in batch {
                let g = loss_gradients(&model, &fit_samples[i], fit_labels[i])?;
                if !g.loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite fit loss at epoch {epoch}, batch {batch_no}"
                    )));
                }
                epoch_loss += g.loss;
                let chained = softmax_jacobian_product(&model.attention, &g.attention);
                for (acc, d) in g_logits.iter_mut().zip(chained) {
                    *acc += d;
                }
                g_log_c += g.sensitivity * model.sensitivity;
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (a, g) in params.attention_logits.iter_mut().zip(&g_logits) {
                *a -= scale * g;
            }
            params.log_sensitivity -= scale * g_log_c;
            let (attention, sensitivity) = params.realize();
            if !sensitivity.is_finite() || attention.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "fit parameters diverged at epoch {epoch}, batch {batch_no}"
                )));
            }
            model.attention = attention;
            model.sensitivity = sensitivity;
        }
        trace.push(epoch_loss / fit_samples.len() as f64);
    }
    Ok(GcmFit { model, params, trace })
}

/// Mean clamped cross-entropy of the fit set as a function of the packed
/// unconstrained parameters `[attention_logits.., log_sensitivity]` —
/// the surface [`fit_gcm`] descends. Non-finite evaluations come back as
/// NaN rather than an error so search loops can skip them.
pub fn fit_objective(
    store: &ExemplarStore,
    fit_samples: &[Vec<f64>],
    fit_labels: &[usize],
) -> Result<impl Fn(&[f64]) -> f64 + use<>> {
    if fit_samples.is_empty() || fit_samples.len() != fit_labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} fit samples with {} labels",
            fit_samples.len(),
            fit_labels.len()
        )));
    }
    let store = store.clone();
    let samples = fit_samples.to_vec();
    let labels = fit_labels.to_vec();
    let dim = store.dim();
    Ok(move |theta: &[f64]| -> f64 {
        if theta.len() != dim + 1 {
            return f64::NAN;
        }
        let params = GcmParams {
            attention_logits: theta[..dim].to_vec(),
            log_sensitivity: theta[dim],
        };
        let (attention, sensitivity) = params.realize();
        let model = match GcmModel::new(store.clone(), attention, sensitivity) {
            Ok(m) => m,
            Err(_) => return f64::NAN,
        };
        let mut total = 0.0;
        for (z, &l) in samples.iter().zip(&labels) {
            match model.posterior(z).and_then(|p| cross_entropy(&p, l)) {
                Ok(loss) => total += loss,
                Err(_) => return f64::NAN,
            }
        }
        total / samples.len() as f64
    })
}

/// Which attention weights a capacity-limited decision maker retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressMode {
    /// Keep the largest weights — attention narrows onto what mattered.
    MostImportant,
    /// Keep the smallest weights — attention narrows onto what did not.
    LeastImportant,
}

/// Processing-capacity stress: keep `capacity` attention weights, zero the
/// rest, and renormalize the survivors. Ranking ties break toward the
/// lower index. `capacity == dim` returns the model unchanged;
/// `capacity == 0` produces the degenerate all-zero attention state.
pub fn stress_transform(model: &GcmModel, capacity: usize, mode: StressMode) -> Result<GcmModel> {
    let dim = model.dim();
    if capacity > dim {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} exceeds {dim} attention weights"
        )));
    }
    if capacity == dim {
        return Ok(model.clone());
    }
    let mut stressed = model.clone();
    if capacity == 0 {
        stressed.attention = vec![0.0; dim];
        return Ok(stressed);
    }
    let w = model.attention();
    let mut order: Vec<usize> = (0..dim).collect();
    match mode {
        StressMode::MostImportant => {
            order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).expect("finite").then(a.cmp(&b)));
        }
        StressMode::LeastImportant => {
            order.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).expect("finite").then(a.cmp(&b)));
        }
    }
    let kept = &order[..capacity];
    let kept_sum: f64 = kept.iter().map(|&j| w[j]).sum();
    let mut attention = vec![0.0; dim];
    if kept_sum > 0.0 {
        for &j in kept {
            attention[j] = w[j] / kept_sum;
        }
    }
    stressed.attention = attention;
    Ok(stressed)
}

/// A concrete midpoint-convexity violation: the objective at the midpoint
/// of two points exceeds the mean of its endpoint values.
#[derive(Debug, Clone)]
pub struct ConvexityWitness {
    pub theta_a: Vec<f64>,
    pub theta_b: Vec<f64>,
    pub midpoint_value: f64,
    pub endpoint_mean: f64,
}

impl ConvexityWitness {
    /// By how much the midpoint beats the chord.
    pub fn violation(&self) -> f64 {
        self.midpoint_value - self.endpoint_mean
    }
}

/// Randomized search for a midpoint-convexity violation of `objective`
/// over the box `[-radius, radius]^dim`. Returns the first pair of points
/// whose midpoint value exceeds the endpoint mean by more than 1e-9, or
/// `None` if the budget runs out — which is what happens on a convex
/// objective.
pub fn nonconvexity_witness<F: Fn(&[f64]) -> f64>(
    objective: F,
    dim: usize,
    trials: usize,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Option<ConvexityWitness> {
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-radius..=radius)).collect()
    };
    for _ in 0..trials {
        let theta_a = draw(rng);
        let theta_b = draw(rng);
        let midpoint: Vec<f64> =
            theta_a.iter().zip(&theta_b).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fa, fb, fm) = (objective(&theta_a), objective(&theta_b), objective(&midpoint));
        if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
            continue;
        }
        let endpoint_mean = 0.5 * (fa + fb);
        if fm > endpoint_mean + VIOLATION_MARGIN {
            return Some(ConvexityWitness { theta_a, theta_b, midpoint_value: fm, endpoint_mean });
        }
    }
    None
}
