//! Additive-white-Gaussian-noise channel primitives and the conventional
//! digital transmission chain used as a baseline.
//!
//! Convention: transmit vectors are power-normalized to unit average power
//! per dimension, and the noise variance per dimension is
//! `10^(-snr_db / 10)`. A signal-to-noise ratio of `f64::INFINITY` is the
//! noiseless sentinel: the channel passes its input through bit-for-bit and
//! draws nothing from the generator.

mod digital;
mod huffman;

pub use digital::{transmit_digital, DigitalChainConfig};
pub use huffman::{huffman_code, HuffmanCode};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Channel operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
}

impl ChannelConfig {
    pub fn new(snr_db: f64) -> Self {
        ChannelConfig { snr_db }
    }

    pub fn noiseless() -> Self {
        ChannelConfig { snr_db: f64::INFINITY }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db.is_infinite() && self.snr_db > 0.0
    }
}

/// Per-dimension noise variance at the given signal-to-noise ratio.
pub fn noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Scale `x` to unit average power per dimension: `x * sqrt(n) / |x|`.
pub fn normalize_power(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("cannot normalize an empty vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("cannot normalize a non-finite vector".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Numeric("cannot normalize the zero vector".into()));
    }
    let scale = (x.len() as f64).sqrt() / norm;
    Ok(x.iter().map(|v| v * scale).collect())
}

/// Add white Gaussian noise at the given signal-to-noise ratio. The
/// noiseless sentinel returns the input unchanged without consuming
/// randomness.
pub fn awgn(x: &[f64], snr_db: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("channel input contains non-finite values".into()));
    }
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(x.to_vec());
    }
    if snr_db.is_nan() || (snr_db.is_infinite() && snr_db < 0.0) {
        return Err(Error::InvalidArgument(format!("invalid snr {snr_db} dB")));
    }
    let sigma = noise_var(snr_db).sqrt();
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::Numeric(format!("bad noise distribution: {e}")))?;
    Ok(x.iter().map(|&v| v + normal.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn noise_var_closed_forms() {
        assert_eq!(noise_var(0.0), 1.0);
        assert!((noise_var(10.0) - 0.1).abs() < 1e-15);
        assert!((noise_var(-10.0) - 10.0).abs() < 1e-12);
        assert_eq!(noise_var(f64::INFINITY), 0.0);
    }

    #[test]
    fn normalize_power_closed_form() {
        let y = normalize_power(&[3.0, 4.0]).unwrap();
        let s = 2f64.sqrt() / 5.0;
        assert!((y[0] - 3.0 * s).abs() < 1e-15);
        assert!((y[1] - 4.0 * s).abs() < 1e-15);
        let msq: f64 = y.iter().map(|v| v * v).sum::<f64>() / 2.0;
        assert!((msq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_power_unit_mean_square_and_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let n = rng.random_range(1..20);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            if x.iter().all(|&v| v == 0.0) {
                continue;
            }
            let y = normalize_power(&x).unwrap();
            let msq: f64 = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
            assert!((msq - 1.0).abs() < 1e-12);
            let z = normalize_power(&y).unwrap();
            for (a, b) in y.iter().zip(&z) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_power_error_cases() {
        assert!(normalize_power(&[]).is_err());
        assert!(matches!(normalize_power(&[0.0, 0.0]), Err(Error::Numeric(_))));
        assert!(matches!(normalize_power(&[1.0, f64::NAN]), Err(Error::Numeric(_))));
    }

    #[test]
    fn awgn_noiseless_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.5, -1.5, 2.0];
        let before = rng.clone();
        let y = awgn(&x, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(y, x.to_vec());
        // No randomness consumed.
        let mut b = before;
        assert_eq!(rng.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn awgn_empirical_variance_at_zero_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let x = vec![0.0; n];
        let y = awgn(&x, 0.0, &mut rng).unwrap();
        let mean: f64 = y.iter().sum::<f64>() / n as f64;
        let var: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "noise mean {mean} too far from zero");
        assert!((0.98..=1.02).contains(&var), "noise variance {var} outside [0.98, 1.02]");
    }

    #[test]
    fn awgn_deterministic_per_stream() {
        let x = [1.0, 2.0, 3.0];
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(awgn(&x, 5.0, &mut a).unwrap(), awgn(&x, 5.0, &mut b).unwrap());
    }

    #[test]
    fn awgn_rejects_invalid_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(awgn(&[f64::NAN], 0.0, &mut rng).is_err());
        assert!(awgn(&[1.0], f64::NEG_INFINITY, &mut rng).is_err());
        assert!(awgn(&[1.0], f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn channel_config_sentinel() {
        assert!(ChannelConfig::noiseless().is_noiseless());
        assert!(!ChannelConfig::new(20.0).is_noiseless());
    }
}
