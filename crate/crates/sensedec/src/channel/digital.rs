//! Conventional digital image transmission: uniform quantization, Huffman
//! source coding, a rate-1/4 repetition code, and BPSK over the Gaussian
//! channel with soft combining at the receiver.
//!
//! The Huffman table is built on a training split and shared out-of-band;
//! its bits are not counted against the channel. Decoding is best-effort
//! throughout — corrupted streams produce corrupted reconstructions, never
//! errors — which is precisely what makes the baseline fall off a cliff at
//! low signal-to-noise ratios.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::huffman::{huffman_code, HuffmanCode};
use super::awgn;
use crate::error::{Error, Result};

/// Repetition factor of the channel code (rate 1/4).
const REPETITION: usize = 4;

/// Configuration of the digital chain: quantizer depth plus the shared
/// Huffman table.
#[derive(Debug, Clone)]
pub struct DigitalChainConfig {
    bits_per_pixel: u8,
    code: HuffmanCode,
}

impl DigitalChainConfig {
    /// Build the chain for `bits_per_pixel`-deep uniform quantization, with
    /// the Huffman table trained on the symbol statistics of
    /// `training_samples` (pixel values in `[0, 1]`).
    pub fn new(bits_per_pixel: u8, training_samples: &[Vec<f64>]) -> Result<Self> {
        if !(1..=8).contains(&bits_per_pixel) {
            return Err(Error::InvalidArgument(format!(
                "bits per pixel must lie in 1..=8, got {bits_per_pixel}"
            )));
        }
        if training_samples.is_empty() {
            return Err(Error::InvalidArgument("need training samples for the code table".into()));
        }
        let levels = (1u16 << bits_per_pixel) - 1;
        let mut counts: BTreeMap<u16, u64> = BTreeMap::new();
        for sample in training_samples {
            for &x in sample {
                *counts.entry(quantize_one(x, levels)?).or_insert(0) += 1;
            }
        }
        Ok(DigitalChainConfig { bits_per_pixel, code: huffman_code(&counts)? })
    }

    pub fn bits_per_pixel(&self) -> u8 {
        self.bits_per_pixel
    }

    /// Channel code rate (fixed repetition code).
    pub fn code_rate(&self) -> f64 {
        1.0 / REPETITION as f64
    }

    pub fn code(&self) -> &HuffmanCode {
        &self.code
    }

    fn levels(&self) -> u16 {
        (1u16 << self.bits_per_pixel) - 1
    }

    /// Uniform quantization of pixel values in `[0, 1]`.
    pub fn quantize(&self, sample: &[f64]) -> Result<Vec<u16>> {
        let levels = self.levels();
        sample.iter().map(|&x| quantize_one(x, levels)).collect()
    }

    /// Map quantizer symbols back to pixel values.
    pub fn dequantize(&self, symbols: &[u16]) -> Vec<f64> {
        let levels = self.levels() as f64;
        symbols.iter().map(|&s| s as f64 / levels).collect()
    }
}

fn quantize_one(x: f64, levels: u16) -> Result<u16> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("pixel value {x} outside [0, 1]")));
    }
    Ok((x * levels as f64).round() as u16)
}

/// Send one sample through the full digital chain at `snr_db`, returning the
/// reconstruction and the number of channel uses (one use per BPSK symbol).
///
/// Pipeline: quantize, Huffman-encode (symbols unseen in training map to the
/// nearest coded symbol), repeat each bit four times, BPSK-modulate
/// (0 -> +1, 1 -> -1), add channel noise, soft-combine each group of four
/// received reals by their sum, Huffman-decode, dequantize. Symbol-count
/// drift from decoding errors is padded or truncated to the pixel count.
pub fn transmit_digital(
    sample: &[f64],
    config: &DigitalChainConfig,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, u64)> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("cannot transmit an empty sample".into()));
    }
    let symbols = config.quantize(sample)?;
    let coded: Vec<u16> = symbols.iter().map(|&s| config.code.nearest_symbol(s)).collect();
    let bits = config.code.encode(&coded)?;
    let channel_uses = (bits.len() * REPETITION) as u64;

    let tx: Vec<f64> = bits
        .iter()
        .flat_map(|&b| {
            std::iter::repeat(if b == 0 { 1.0 } else { -1.0 }).take(REPETITION)
        })
        .collect();
    let rx = awgn(&tx, snr_db, rng)?;
    let rx_bits: Vec<u8> = rx
        .chunks(REPETITION)
        .map(|chunk| u8::from(chunk.iter().sum::<f64>() < 0.0))
        .collect();

    let mut decoded = config.code.decode(&rx_bits, sample.len());
    let fallback = config.code.most_frequent();
    decoded.resize(sample.len(), fallback);
    Ok((config.dequantize(&decoded), channel_uses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Gaussian tail probability, via the complementary error function.
    fn q_function(x: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(x / 2f64.sqrt())
    }

    #[test]
    fn quantize_closed_forms() {
        let train = vec![vec![0.0, 0.5, 1.0]];
        let one_bit = DigitalChainConfig::new(1, &train).unwrap();
        assert_eq!(one_bit.quantize(&[0.4, 0.6, 0.0, 1.0]).unwrap(), vec![0, 1, 0, 1]);

        let eight_bit = DigitalChainConfig::new(8, &train).unwrap();
        assert_eq!(eight_bit.quantize(&[0.0, 1.0]).unwrap(), vec![0, 255]);
        assert_eq!(eight_bit.quantize(&[0.5]).unwrap(), vec![128]);
        assert!(eight_bit.quantize(&[1.2]).is_err());
        assert!(eight_bit.quantize(&[-0.1]).is_err());

        assert!(DigitalChainConfig::new(0, &train).is_err());
        assert!(DigitalChainConfig::new(9, &train).is_err());
    }

    #[test]
    fn noiseless_chain_is_quantization_round_trip() {
        let mut r = rng(1);
        let train: Vec<Vec<f64>> =
            (0..20).map(|_| (0..50).map(|_| r.random_range(0.0..=1.0)).collect()).collect();
        let config = DigitalChainConfig::new(8, &train).unwrap();
        let sample: Vec<f64> = (0..50).map(|_| r.random_range(0.0..=1.0)).collect();

        let before = r.clone();
        let (recon, uses) = transmit_digital(&sample, &config, f64::INFINITY, &mut r).unwrap();

        // Reconstruction equals dequantize(quantize(sample)) up to unseen-
        // symbol substitution (a few levels at most for this table size);
        // quantization error itself is at most half a level.
        for (a, b) in recon.iter().zip(&sample) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 3.0 / 255.0, "|{a} - {b}| too large");
        }
        // Channel uses = 4x the Huffman bit count.
        let bits = config
            .code()
            .encode(
                &config
                    .quantize(&sample)
                    .unwrap()
                    .iter()
                    .map(|&s| config.code().nearest_symbol(s))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        assert_eq!(uses, (bits.len() * 4) as u64);
        // Noiseless transmission consumes no randomness.
        let mut b = before;
        assert_eq!(r.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn soft_combining_matches_gaussian_tail() {
        // 1-bit pixels with a uniform 2-symbol table make the Huffman layer
        // transparent, so reconstruction errors are exactly channel bit
        // errors of the rate-1/4 soft-combined code.
        let train = vec![vec![0.0, 1.0]];
        let config = DigitalChainConfig::new(1, &train).unwrap();
        let mut r = rng(2);

        for (snr_db, tol) in [(0.0, 2e-3), (-4.0, 4e-3)] {
            let expect = q_function((4.0 * 10f64.powf(snr_db / 10.0)).sqrt());
            let mut errors = 0u64;
            let mut total = 0u64;
            for _ in 0..100 {
                let sample: Vec<f64> =
                    (0..10_000).map(|_| f64::from(r.random_range(0..2u8))).collect();
                let (recon, _) = transmit_digital(&sample, &config, snr_db, &mut r).unwrap();
                errors += recon.iter().zip(&sample).filter(|(a, b)| a != b).count() as u64;
                total += sample.len() as u64;
            }
            let ber = errors as f64 / total as f64;
            assert!(
                (ber - expect).abs() < tol,
                "snr {snr_db} dB: empirical {ber} vs Q {expect}"
            );
        }
    }

    #[test]
    fn cliff_between_low_and_high_snr() {
        let mut r = rng(3);
        let train: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..100).map(|_| r.random_range(0.0..=1.0)).collect())
            .collect();
        let config = DigitalChainConfig::new(8, &train).unwrap();
        let sample: Vec<f64> = (0..100).map(|_| r.random_range(0.0..=1.0)).collect();
        let (clean, _) = transmit_digital(&sample, &config, f64::INFINITY, &mut r).unwrap();

        let mse = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
        };

        // High signal-to-noise: bit errors vanish, reconstruction matches
        // the noiseless chain exactly.
        let (high, _) = transmit_digital(&sample, &config, 10.0, &mut r).unwrap();
        assert_eq!(high, clean);

        // Low signal-to-noise: the stream is scrambled.
        let (low, _) = transmit_digital(&sample, &config, -10.0, &mut r).unwrap();
        assert!(mse(&low, &clean) > 0.01, "mse {} unexpectedly small", mse(&low, &clean));
        assert_eq!(low.len(), sample.len(), "decoder must pad or truncate to pixel count");
    }

    #[test]
    fn unseen_symbols_map_to_nearest() {
        // Table trained only on dark pixels; a bright pixel must be encoded
        // as the nearest trained level rather than failing.
        let train = vec![vec![0.0, 0.1, 0.2]];
        let config = DigitalChainConfig::new(8, &train).unwrap();
        let mut r = rng(4);
        let (recon, _) = transmit_digital(&[1.0, 0.0], &config, f64::INFINITY, &mut r).unwrap();
        assert!((recon[0] - 0.2).abs() < 1e-12);
        assert!((recon[1] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_sample() {
        let config = DigitalChainConfig::new(4, &[vec![0.5]]).unwrap();
        let mut r = rng(5);
        assert!(transmit_digital(&[], &config, 0.0, &mut r).is_err());
    }
}
