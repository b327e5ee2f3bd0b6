//! Exact information measures on small discrete distributions.
//!
//! Everything here is computed in closed form over explicit probability
//! tables (natural logarithms, `0 ln 0 = 0`, no clamping), so these
//! functions serve as the reference against which the learned pipeline's
//! cross-entropy training objective is sanity-checked: minimising the
//! amortised cross-entropy maximises a lower bound on the mutual
//! information between label and representation, and the bound is tight
//! exactly at the true posterior.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PMF_TOLERANCE: f64 = 1e-9;

fn validate_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} must be non-empty")));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::InvalidArgument(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Joint distribution of a label `r` (rows) and a discrete representation
/// `z` (columns).
#[derive(Debug, Clone)]
pub struct JointPmf {
    table: Vec<Vec<f64>>,
}

impl JointPmf {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        if table.is_empty() || table[0].is_empty() {
            return Err(Error::InvalidArgument("joint table must be non-empty".into()));
        }
        let cols = table[0].len();
        if table.iter().any(|row| row.len() != cols) {
            return Err(Error::InvalidArgument("joint table rows have unequal lengths".into()));
        }
        if table.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "joint table has negative or non-finite entries".into(),
            ));
        }
        let sum: f64 = table.iter().flatten().sum();
        if (sum - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidArgument(format!("joint table sums to {sum}, not 1")));
        }
        Ok(JointPmf { table })
    }

    /// Random dense joint: exponential draws, normalized.
    pub fn random(num_r: usize, num_z: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if num_r == 0 || num_z == 0 {
            return Err(Error::InvalidArgument("joint dimensions must be >= 1".into()));
        }
        let mut table: Vec<Vec<f64>> = (0..num_r)
            .map(|_| (0..num_z).map(|_| -rng.random_range(1e-12..1.0f64).ln()).collect())
            .collect();
        let sum: f64 = table.iter().flatten().sum();
        table.iter_mut().flatten().for_each(|v| *v /= sum);
        JointPmf::new(table)
    }

    pub fn num_r(&self) -> usize {
        self.table.len()
    }

    pub fn num_z(&self) -> usize {
        self.table[0].len()
    }

    pub fn prob(&self, r: usize, z: usize) -> f64 {
        self.table[r][z]
    }

    pub fn marginal_r(&self) -> Vec<f64> {
        self.table.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_z()];
        for row in &self.table {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// `p(r | z)` for a column with positive mass; `None` where `p(z) = 0`.
    pub fn conditional_r_given(&self, z: usize) -> Option<Vec<f64>> {
        let pz: f64 = self.table.iter().map(|row| row[z]).sum();
        if pz <= 0.0 {
            return None;
        }
        Some(self.table.iter().map(|row| row[z] / pz).collect())
    }

    /// The true posterior as a decoder table: entry `[z]` is `p(. | z)`,
    /// uniform over labels for zero-mass columns.
    pub fn true_posterior_decoder(&self) -> Vec<Vec<f64>> {
        (0..self.num_z())
            .map(|z| {
                self.conditional_r_given(z)
                    .unwrap_or_else(|| vec![1.0 / self.num_r() as f64; self.num_r()])
            })
            .collect()
    }
}

/// Shannon entropy in nats; `0 ln 0 = 0`.
pub fn entropy(pmf: &[f64]) -> Result<f64> {
    validate_pmf(pmf, "pmf")?;
    Ok(-pmf.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
}

/// `KL(p || q)` in nats; `+inf` when `q` lacks mass somewhere `p` has it.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    validate_pmf(p, "p")?;
    validate_pmf(q, "q")?;
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "pmf lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (&pv, &qv) in p.iter().zip(q) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += pv * (pv / qv).ln();
        }
    }
    Ok(total)
}

/// `I(r; z)` in nats, computed directly from the joint table.
pub fn mutual_information(joint: &JointPmf) -> f64 {
    let pr = joint.marginal_r();
    let pz = joint.marginal_z();
    let mut total = 0.0;
    for r in 0..joint.num_r() {
        for z in 0..joint.num_z() {
            let p = joint.prob(r, z);
            if p > 0.0 {
                total += p * (p / (pr[r] * pz[z])).ln();
            }
        }
    }
    total
}

fn validate_decoder(decoder: &[Vec<f64>], num_r: usize, num_z: usize) -> Result<()> {
    if decoder.len() != num_z {
        return Err(Error::InvalidArgument(format!(
            "decoder has {} columns, joint has {num_z}",
            decoder.len()
        )));
    }
    for (z, q) in decoder.iter().enumerate() {
        if q.len() != num_r {
            return Err(Error::InvalidArgument(format!(
                "decoder column {z} has {} entries, joint has {num_r} labels",
                q.len()
            )));
        }
        validate_pmf(q, &format!("decoder column {z}"))?;
    }
    Ok(())
}

/// Mutual-information lower bound realised by an approximate posterior:
/// `H(r) + E_{p(r,z)}[ln q(r|z)]`.
///
/// Always `<= I(r; z)`, with equality exactly when `q` is the true
/// posterior. A decoder with zero mass on an observed pair drives the bound
/// to `-inf`. Minimising the amortised cross-entropy over `q` therefore
/// maximises this bound.
pub fn milbo(joint: &JointPmf, decoder: &[Vec<f64>]) -> Result<f64> {
    validate_decoder(decoder, joint.num_r(), joint.num_z())?;
    let h = entropy(&joint.marginal_r())?;
    let mut expected_log_q = 0.0;
    for r in 0..joint.num_r() {
        for z in 0..joint.num_z() {
            let p = joint.prob(r, z);
            if p > 0.0 {
                expected_log_q += p * decoder[z][r].ln();
            }
        }
    }
    Ok(h + expected_log_q)
}

/// The pieces of the cross-entropy decomposition
/// `ce = H(r) - I(r;z) + E_z[KL(p(r|z) || q(r|z))]`.
#[derive(Debug, Clone, Copy)]
pub struct CeDecomposition {
    /// Amortised cross-entropy `-E_{p(r,z)}[ln q(r|z)]`.
    pub cross_entropy: f64,
    pub source_entropy: f64,
    pub mutual_information: f64,
    /// `E_{p(z)}[KL(p(r|z) || q(r|z))]`.
    pub expected_kl: f64,
}

impl CeDecomposition {
    /// `|ce - (H - I + E[KL])|`; zero (to rounding) when the identity holds.
    pub fn residual(&self) -> f64 {
        (self.cross_entropy
            - (self.source_entropy - self.mutual_information + self.expected_kl))
            .abs()
    }
}

/// Evaluate every term of the cross-entropy decomposition for a joint and an
/// approximate posterior.
pub fn ce_decomposition_check(joint: &JointPmf, decoder: &[Vec<f64>]) -> Result<CeDecomposition> {
    validate_decoder(decoder, joint.num_r(), joint.num_z())?;
    let h = entropy(&joint.marginal_r())?;
    let mi = mutual_information(joint);

    let mut ce = 0.0;
    for r in 0..joint.num_r() {
        for z in 0..joint.num_z() {
            let p = joint.prob(r, z);
            if p > 0.0 {
                ce -= p * decoder[z][r].ln();
            }
        }
    }

    let pz = joint.marginal_z();
    let mut expected_kl = 0.0;
    for z in 0..joint.num_z() {
        if let Some(cond) = joint.conditional_r_given(z) {
            expected_kl += pz[z] * kl_divergence(&cond, &decoder[z])?;
        }
    }

    Ok(CeDecomposition {
        cross_entropy: ce,
        source_entropy: h,
        mutual_information: mi,
        expected_kl,
    })
}

fn validate_stochastic(matrix: &[Vec<f64>], num_in: usize, what: &str) -> Result<()> {
    if matrix.len() != num_in {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} rows, expected {num_in}",
            matrix.len()
        )));
    }
    let cols = matrix.first().map_or(0, |r| r.len());
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::InvalidArgument(format!("{what} rows have unequal lengths")));
        }
        validate_pmf(row, &format!("{what} row {i}"))?;
    }
    Ok(())
}

/// Push the representation through a stochastic map `T(z' | z)` (row `z` of
/// `postprocess` is the distribution of `z'`), returning the mutual
/// information before and after. Post-processing can never increase it.
pub fn dpi_check(joint: &JointPmf, postprocess: &[Vec<f64>]) -> Result<(f64, f64)> {
    validate_stochastic(postprocess, joint.num_z(), "postprocess")?;
    let num_out = postprocess[0].len();
    let mut composed = vec![vec![0.0; num_out]; joint.num_r()];
    for r in 0..joint.num_r() {
        for z in 0..joint.num_z() {
            let p = joint.prob(r, z);
            if p > 0.0 {
                for (out, &t) in composed[r].iter_mut().zip(&postprocess[z]) {
                    *out += p * t;
                }
            }
        }
    }
    let before = mutual_information(joint);
    let after = mutual_information(&JointPmf::new(composed)?);
    Ok((before, after))
}

/// Random row-stochastic matrix, exponential draws per row, normalized.
pub fn random_stochastic_matrix(
    rows: usize,
    cols: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut row: Vec<f64> =
                (0..cols).map(|_| -rng.random_range(1e-12..1.0f64).ln()).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect()
}
