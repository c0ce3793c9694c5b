//! Three statistical sanity tests on packed output bits, each at 1%
//! significance: monobit, runs, and serial correlation over lags 1 to 16.

use cvqrng_core::bits::BitBuf;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Fewest bits the tests accept.
pub const MIN_BITS: usize = 100_000;

/// Two-sided 1% point of the standard normal.
pub const Z_CRITICAL: f64 = 2.575_829_303_549;

/// Upper 1% point of χ² with 16 degrees of freedom.
pub const CHI2_16_CRITICAL: f64 = 31.999_926_908;

pub const MAX_LAG: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityResult {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl SanityResult {
    fn new(test: &str, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }
}

/// `|S_n|/√n` with `S_n = Σ(2b − 1)`.
pub fn monobit(bits: &BitBuf) -> SanityResult {
    let n = bits.len() as f64;
    let s = 2.0 * bits.count_ones() as f64 - n;
    SanityResult::new("monobit", s.abs() / n.sqrt(), Z_CRITICAL)
}

/// z-score of the run count given the observed ones fraction. When the
/// fraction itself is off by more than `2/√n` the test fails outright.
pub fn runs(bits: &BitBuf) -> SanityResult {
    let n = bits.len() as f64;
    let pi = bits.count_ones() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return SanityResult::new("runs", f64::INFINITY, Z_CRITICAL);
    }
    let v = 1.0 + differences(bits, 1) as f64;
    let q = pi * (1.0 - pi);
    let z = (v - 2.0 * n * q).abs() / (2.0 * n.sqrt() * q);
    SanityResult::new("runs", z, Z_CRITICAL)
}

/// `Σ_k z_k²` over lags `1..=16`, where `z_k` standardizes the number of
/// positions with `b_i ≠ b_{i+k}`.
pub fn serial_correlation(bits: &BitBuf) -> SanityResult {
    let n = bits.len();
    let chi2 = (1..=MAX_LAG)
        .map(|k| {
            let pairs = (n - k) as f64;
            let z = (2.0 * differences(bits, k) as f64 - pairs) / pairs.sqrt();
            z * z
        })
        .sum();
    SanityResult::new("serial-correlation", chi2, CHI2_16_CRITICAL)
}

/// Number of `i < n − lag` with `b_i ≠ b_{i+lag}`, a word at a time.
fn differences(bits: &BitBuf, lag: usize) -> u64 {
    let n = bits.len();
    if lag >= n {
        return 0;
    }
    let words = bits.words();
    let pairs = n - lag;
    let (skip, shift) = (lag / 64, (lag % 64) as u32);
    let mut total = 0u64;
    for w in 0..pairs.div_ceil(64) {
        let lo = words[w + skip] >> shift;
        let hi = if shift == 0 {
            0
        } else {
            words.get(w + skip + 1).map_or(0, |x| x << (64 - shift))
        };
        let mut x = words[w] ^ (lo | hi);
        let rest = pairs - 64 * w;
        if rest < 64 {
            x &= (1u64 << rest) - 1;
        }
        total += x.count_ones() as u64;
    }
    total
}

/// Runs all three tests.
pub fn sanity_tests(bits: &BitBuf) -> Result<Vec<SanityResult>> {
    if bits.len() < MIN_BITS {
        return Err(CliError::InsufficientData(format!(
            "sanity tests need {MIN_BITS} bits, got {}",
            bits.len()
        )));
    }
    Ok(vec![monobit(bits), runs(bits), serial_correlation(bits)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_differences(bits: &BitBuf, lag: usize) -> u64 {
        (0..bits.len() - lag).filter(|&i| bits.get(i) != bits.get(i + lag)).count() as u64
    }

    #[test]
    fn word_differences_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for len in [1usize, 63, 64, 65, 200, 1000] {
            let bits = BitBuf::from_bools((0..len).map(|_| rng.random::<bool>()));
            for lag in [1usize, 2, 7, 16, 63, 64, 65, 130] {
                if lag < len {
                    assert_eq!(differences(&bits, lag), naive_differences(&bits, lag), "len {len} lag {lag}");
                }
            }
        }
    }

    #[test]
    fn zeros_fail_monobit() {
        let r = sanity_tests(&BitBuf::zeros(MIN_BITS)).unwrap();
        assert!(!r[0].pass);
    }

    #[test]
    fn alternating_fails_runs_only_monobit_passes() {
        let bits = BitBuf::from_bools((0..MIN_BITS).map(|i| i % 2 == 1));
        let r = sanity_tests(&bits).unwrap();
        assert!(r[0].pass);
        assert!(!r[1].pass);
        assert!(!r[2].pass);
    }

    #[test]
    fn uniform_bits_fail_at_nominal_rate() {
        // Each test should reject about 3 of 300 uniform streams; more than
        // 10 has probability below 1e-3.
        let mut fails = [0; 3];
        for seed in 0..300 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let words: Vec<u64> = (0..MIN_BITS.div_ceil(64)).map(|_| rng.random()).collect();
            let r = sanity_tests(&BitBuf::from_words(words, MIN_BITS)).unwrap();
            for (f, t) in fails.iter_mut().zip(&r) {
                *f += !t.pass as u32;
            }
        }
        assert!(fails.iter().all(|&f| f <= 10), "{fails:?}");
    }

    #[test]
    fn too_few_bits() {
        assert!(matches!(sanity_tests(&BitBuf::zeros(10)), Err(CliError::InsufficientData(_))));
    }
}
