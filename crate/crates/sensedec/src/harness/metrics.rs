//! Decision-rule scoring. Every experiment reduces to a batch of
//! posteriors plus true labels; this module turns those into accuracies
//! for the three rules under study:
//!
//! * `map` — pick the maximum-posterior class,
//! * `matching` — probability matching in expectation: the chance a draw
//!   from the posterior is correct, i.e. the mean posterior mass on the
//!   true class,
//! * `sampled` — an actual draw from the posterior per decision, the
//!   Monte Carlo realisation of `matching`.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gcm::sample_decision;
use crate::nn::cross_entropy;
use crate::sinfony::map_decision;

/// Accuracies of the three decision rules over one posterior batch, plus
/// the batch's mean clamped cross-entropy.
#[derive(Debug, Clone, Copy)]
pub struct RuleScores {
    pub map: f64,
    pub matching: f64,
    pub sampled: f64,
    pub mean_ce: f64,
}

impl RuleScores {
    pub fn accuracy_for(&self, rule: &str) -> Option<f64> {
        match rule {
            "map" => Some(self.map),
            "matching" => Some(self.matching),
            "sampled" => Some(self.sampled),
            _ => None,
        }
    }
}

/// The rule names in their canonical (alphabetical) order.
pub const RULES: [&str; 3] = ["map", "matching", "sampled"];

/// Score a batch of posteriors against labels. The generator drives only
/// the sampled rule.
pub fn score_rules(
    posteriors: &[Vec<f64>],
    labels: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<RuleScores> {
    if posteriors.is_empty() || posteriors.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} posteriors with {} labels",
            posteriors.len(),
            labels.len()
        )));
    }
    let n = posteriors.len() as f64;
    let mut map_hits = 0usize;
    let mut matching_mass = 0.0;
    let mut sampled_hits = 0usize;
    let mut ce_total = 0.0;
    for (p, &label) in posteriors.iter().zip(labels) {
        if label >= p.len() {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for a {}-class posterior",
                p.len()
            )));
        }
        if map_decision(p) == label {
            map_hits += 1;
        }
        matching_mass += p[label];
        if sample_decision(p, rng)? == label {
            sampled_hits += 1;
        }
        ce_total += cross_entropy(p, label)?;
    }
    Ok(RuleScores {
        map: map_hits as f64 / n,
        matching: matching_mass / n,
        sampled: sampled_hits as f64 / n,
        mean_ce: ce_total / n,
    })
}
