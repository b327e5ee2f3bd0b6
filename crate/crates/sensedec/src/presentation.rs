//! What the decision model gets to see. A trained link can hand the
//! decision stage either the decoded class posterior (a categorical
//! presentation) or a subset of the decoder's penultimate features chosen
//! by weight-based importance (a feature presentation).

use crate::error::{Error, Result};
use crate::nn::DenseNetwork;
use crate::sinfony::{SinfonySystem, TransmissionTrace};

/// A concrete choice of decision-stage input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PresentationSpec {
    /// The decoded posterior over classes.
    Categorical,
    /// Penultimate-feature coordinates, listed in descending importance.
    Features { indices: Vec<usize> },
}

impl PresentationSpec {
    /// Dimension of the presented vector for a given system.
    pub fn dim(&self, system: &SinfonySystem) -> usize {
        match self {
            PresentationSpec::Categorical => system.num_classes(),
            PresentationSpec::Features { indices } => indices.len(),
        }
    }
}

/// Importance of each penultimate feature: the column-wise absolute weight
/// mass of the decoder's final layer, `kappa_j = sum_k |w_kj|`. Features
/// the head ignores score zero.
pub fn importance_vector(decoder: &DenseNetwork) -> Result<Vec<f64>> {
    let n_layers = decoder.layers().len();
    if n_layers < 2 {
        return Err(Error::UnsupportedArchitecture(
            "decoder has no penultimate representation to rank".into(),
        ));
    }
    let head = &decoder.layers()[n_layers - 1];
    let (rows, cols) = (head.out_dim(), head.in_dim());
    let w = head.weights();
    let mut kappa = vec![0.0; cols];
    for k in 0..rows {
        for (j, kap) in kappa.iter_mut().enumerate() {
            *kap += w[k * cols + j].abs();
        }
    }
    Ok(kappa)
}

/// Indices of the `m` most important features, ordered by descending
/// importance; equal scores break toward the lower index.
pub fn top_feature_indices(importance: &[f64], m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > importance.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m} of {} features",
            importance.len()
        )));
    }
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| {
        importance[b].partial_cmp(&importance[a]).expect("finite importance").then(a.cmp(&b))
    });
    order.truncate(m);
    Ok(order)
}

/// Build a feature presentation for `system` keeping its `m` most
/// important penultimate coordinates.
pub fn build_feature_spec(system: &SinfonySystem, m: usize) -> Result<PresentationSpec> {
    let kappa = importance_vector(system.decoder())?;
    Ok(PresentationSpec::Features { indices: top_feature_indices(&kappa, m)? })
}

/// Materialise the presented vector for one received channel output.
pub fn present(
    system: &SinfonySystem,
    received: &[f64],
    spec: &PresentationSpec,
) -> Result<Vec<f64>> {
    match spec {
        PresentationSpec::Categorical => system.decode_posterior(received),
        PresentationSpec::Features { indices } => {
            let features = system.penultimate_features(received)?;
            gather(&features, indices)
        }
    }
}

/// Read the presented vector off a cached forward trace instead of
/// re-running the decoder.
pub fn present_from_trace(
    system: &SinfonySystem,
    trace: &TransmissionTrace,
    spec: &PresentationSpec,
) -> Result<Vec<f64>> {
    let n_layers = system.decoder().layers().len();
    match spec {
        PresentationSpec::Categorical => Ok(trace.posterior().to_vec()),
        PresentationSpec::Features { indices } => {
            if n_layers < 2 {
                return Err(Error::UnsupportedArchitecture(
                    "decoder has no hidden layer to expose features from".into(),
                ));
            }
            let features = trace.decoder_output(n_layers - 2).expect("layer exists");
            gather(features, indices)
        }
    }
}

/// Translate a loss gradient on the presented vector into decoder
/// coordinates: the decoder layer to inject at, and the gradient at that
/// layer's post-activation output (zero on unpresented coordinates).
pub fn presentation_backward(
    system: &SinfonySystem,
    spec: &PresentationSpec,
    grad_presented: &[f64],
) -> Result<(usize, Vec<f64>)> {
    let n_layers = system.decoder().layers().len();
    match spec {
        PresentationSpec::Categorical => {
            if grad_presented.len() != system.num_classes() {
                return Err(Error::InvalidArgument(format!(
                    "gradient has {} entries for a {}-class posterior",
                    grad_presented.len(),
                    system.num_classes()
                )));
            }
            Ok((n_layers - 1, grad_presented.to_vec()))
        }
        PresentationSpec::Features { indices } => {
            if n_layers < 2 {
                return Err(Error::UnsupportedArchitecture(
                    "decoder has no hidden layer to expose features from".into(),
                ));
            }
            if grad_presented.len() != indices.len() {
                return Err(Error::InvalidArgument(format!(
                    "gradient has {} entries for {} presented features",
                    grad_presented.len(),
                    indices.len()
                )));
            }
            let width = system.decoder().layers()[n_layers - 2].out_dim();
            let mut grad = vec![0.0; width];
            for (&j, &g) in indices.iter().zip(grad_presented) {
                *grad.get_mut(j).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "feature index {j} out of range for {width} features"
                    ))
                })? = g;
            }
            Ok((n_layers - 2, grad))
        }
    }
}

fn gather(features: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&j| {
            features.get(j).copied().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "feature index {j} out of range for {} features",
                    features.len()
                ))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use crate::source::ViewSplit;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn head_network(head_weights: Vec<f64>, hidden: usize, classes: usize) -> DenseNetwork {
        let eye: Vec<f64> = (0..hidden * hidden)
            .map(|i| if i % (hidden + 1) == 0 { 1.0 } else { 0.0 })
            .collect();
        let body = Layer::new(hidden, hidden, eye, vec![0.0; hidden], Activation::Identity).unwrap();
        let head =
            Layer::new(hidden, classes, head_weights, vec![0.0; classes], Activation::Softmax)
                .unwrap();
        DenseNetwork::new(vec![body, head]).unwrap()
    }

    #[test]
    fn importance_is_column_weight_mass() {
        // Head rows: [1, -2, 0.5], [-1, 0.5, 3] -> kappa = [2, 2.5, 3.5].
        let net = head_network(vec![1.0, -2.0, 0.5, -1.0, 0.5, 3.0], 3, 2);
        let kappa = importance_vector(&net).unwrap();
        assert_eq!(kappa, vec![2.0, 2.5, 3.5]);
    }

    #[test]
    fn top_indices_sort_by_importance_with_low_index_ties() {
        let kappa = [2.0, 3.0, 3.0, 1.0];
        assert_eq!(top_feature_indices(&kappa, 1).unwrap(), vec![1]);
        assert_eq!(top_feature_indices(&kappa, 2).unwrap(), vec![1, 2]);
        assert_eq!(top_feature_indices(&kappa, 3).unwrap(), vec![1, 2, 0]);
        assert_eq!(top_feature_indices(&kappa, 4).unwrap(), vec![1, 2, 0, 3]);
        assert!(top_feature_indices(&kappa, 0).is_err());
        assert!(top_feature_indices(&kappa, 5).is_err());
    }

    #[test]
    fn single_layer_decoder_has_no_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNetwork::random(&[4, 3], &[Activation::Softmax], &mut rng).unwrap();
        assert!(matches!(importance_vector(&net), Err(Error::UnsupportedArchitecture(_))));
    }

    #[test]
    fn present_picks_the_selected_coordinates_in_order() {
        // Identity "encoder" body and identity penultimate layer mean the
        // presented features are just received coordinates.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc =
            DenseNetwork::random(&[4, 6, 3], &[Activation::Relu, Activation::Identity], &mut rng)
                .unwrap();
        // kappa = [1, 4, 2] -> top-2 = [1, 2].
        let decoder = head_network(vec![1.0, 2.0, -1.0, 0.0, -2.0, 1.0], 3, 2);
        let system = SinfonySystem::new(
            vec![enc],
            decoder,
            ViewSplit::new(vec![4]).unwrap(),
            3,
            -4.0,
            6.0,
        )
        .unwrap();

        let spec = build_feature_spec(&system, 2).unwrap();
        assert_eq!(spec, PresentationSpec::Features { indices: vec![1, 2] });
        assert_eq!(spec.dim(&system), 2);

        let received = [0.7, -0.3, 0.9];
        let shown = present(&system, &received, &spec).unwrap();
        assert_eq!(shown, vec![-0.3, 0.9]);

        let cat = present(&system, &received, &PresentationSpec::Categorical).unwrap();
        assert_eq!(cat, system.decode_posterior(&received).unwrap());
        assert_eq!(PresentationSpec::Categorical.dim(&system), 2);

        let bad = PresentationSpec::Features { indices: vec![7] };
        assert!(present(&system, &received, &bad).is_err());
    }

    #[test]
    fn trace_presentation_agrees_with_received_presentation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc =
            DenseNetwork::random(&[4, 6, 3], &[Activation::Relu, Activation::Identity], &mut rng)
                .unwrap();
        let decoder = head_network(vec![1.0, 2.0, -1.0, 0.0, -2.0, 1.0], 3, 2);
        let system = SinfonySystem::new(
            vec![enc],
            decoder,
            ViewSplit::new(vec![4]).unwrap(),
            3,
            -4.0,
            6.0,
        )
        .unwrap();
        let sample = [0.3, -0.8, 0.5, 1.1];
        let trace = system.forward_trace(&sample, 6.0, &mut rng).unwrap();

        for spec in [
            PresentationSpec::Categorical,
            PresentationSpec::Features { indices: vec![2, 0] },
        ] {
            let from_trace = present_from_trace(&system, &trace, &spec).unwrap();
            let from_received = present(&system, trace.received(), &spec).unwrap();
            assert_eq!(from_trace, from_received);
        }
    }

    #[test]
    fn presentation_backward_scatters_into_decoder_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc =
            DenseNetwork::random(&[4, 6, 3], &[Activation::Relu, Activation::Identity], &mut rng)
                .unwrap();
        let decoder = head_network(vec![1.0, 2.0, -1.0, 0.0, -2.0, 1.0], 3, 2);
        let system = SinfonySystem::new(
            vec![enc],
            decoder,
            ViewSplit::new(vec![4]).unwrap(),
            3,
            -4.0,
            6.0,
        )
        .unwrap();

        let (layer, grad) =
            presentation_backward(&system, &PresentationSpec::Categorical, &[0.5, -0.5]).unwrap();
        assert_eq!(layer, 1);
        assert_eq!(grad, vec![0.5, -0.5]);

        let spec = PresentationSpec::Features { indices: vec![2, 0] };
        let (layer, grad) = presentation_backward(&system, &spec, &[0.3, 0.7]).unwrap();
        assert_eq!(layer, 0);
        assert_eq!(grad, vec![0.7, 0.0, 0.3]);

        assert!(presentation_backward(&system, &spec, &[0.3]).is_err());
        let oob = PresentationSpec::Features { indices: vec![9] };
        assert!(presentation_backward(&system, &oob, &[0.1]).is_err());
    }
}
