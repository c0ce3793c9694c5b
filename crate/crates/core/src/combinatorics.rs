//! Exact binomial coefficients and colexicographic subset ranking.
//!
//! A `k`-subset `c_1 < … < c_k` of `{0, …, m−1}` has colex rank
//! `Σ_i C(c_i, i)`. Ranks are dense in `[0, C(m, k))`, so a uniformly
//! random rank encodes a uniformly random subset.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::special::ln_binomial;
use crate::{Error, Result};

/// Exact computation is used up to this many measurements.
const EXACT_SEED_COST_LIMIT: u64 = 10_000;

/// Product of the integers in `lo..=hi`, one when the range is empty.
pub fn range_product(lo: u64, hi: u64) -> BigUint {
    if lo > hi {
        return BigUint::one();
    }
    if hi - lo < 16 {
        let mut acc = BigUint::from(lo);
        for x in lo + 1..=hi {
            acc *= x;
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    range_product(lo, mid) * range_product(mid + 1, hi)
}

/// Falling factorial `n·(n−1)⋯(n−k+1)`; zero when `k > n`.
pub fn falling_factorial(n: u64, k: u64) -> BigUint {
    if k == 0 {
        return BigUint::one();
    }
    if k > n {
        return BigUint::zero();
    }
    range_product(n - k + 1, n)
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    falling_factorial(n, k) / range_product(1, k)
}

/// `⌈log₂ x⌉` of a positive integer.
fn ceil_log2(x: &BigUint) -> u64 {
    debug_assert!(!x.is_zero());
    (x - 1u32).bits()
}

/// Seed bits `⌈log₂ C(m, n_q)⌉` needed to choose `n_q` check instants among
/// `m` measurements.
///
/// Large arguments go through log-gamma; when the result lies too close to
/// an integer for the floating-point error to be ruled out, the exact
/// binomial decides.
pub fn seed_cost(m: u64, n_q: u64) -> Result<u64> {
    if n_q == 0 || n_q >= m {
        return Err(Error::InvalidParameter("seed cost needs 0 < n_Q < m"));
    }
    if m <= EXACT_SEED_COST_LIMIT {
        return Ok(ceil_log2(&binomial(m, n_q)));
    }
    let bits = ln_binomial(m as f64, n_q as f64) / core::f64::consts::LN_2;
    let guard = 1e-12 * bits + 1e-9;
    let nearest = libm::round(bits);
    if (bits - nearest).abs() > guard {
        Ok(libm::ceil(bits) as u64)
    } else {
        Ok(ceil_log2(&binomial(m, n_q)))
    }
}

/// Colex rank of a strictly increasing index set.
pub fn colex_rank(subset: &[u64]) -> Result<BigUint> {
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("subset must be strictly increasing"));
    }
    Ok(subset
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c, i as u64 + 1))
        .sum())
}

/// Natural log of a positive big integer.
fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(0.0);
    top.ln() + shift as f64 * core::f64::consts::LN_2
}

/// Largest `c ≤ hi` with `ln C(c, i) ≤ target`, by bisection on log-gamma.
fn estimate_top(i: u64, hi: u64, target: f64) -> u64 {
    let (mut lo, mut hi) = (i - 1, hi);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ln_binomial(mid as f64, i as f64) <= target {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

// Past this gap a fresh product tree beats the schoolbook division.
const RATIO_GAP_LIMIT: u64 = 256;

/// The `n_q`-subset of `{0, …, m−1}` with colex rank `rank`, ascending.
///
/// Level `i` looks for the largest `c` with `(c)_i ≤ r·i!`, where `(c)_i` is
/// the falling factorial. `(hi)_i` for the current upper bound `hi` is
/// carried from level to level, and `(c)_i` follows from it by the short
/// ratio `Π_{x=c+1}^{hi} (x−i)/x`, so each level costs a few operations on
/// one big integer. Wide gaps fall back to a fresh product.
pub fn colex_unrank(rank: &BigUint, m: u64, n_q: u64) -> Result<Vec<u64>> {
    if n_q > m {
        return Err(Error::InvalidParameter("subset larger than ground set"));
    }
    if *rank >= binomial(m, n_q) {
        return Err(Error::InvalidParameter("rank out of range"));
    }
    let mut out = alloc::vec![0u64; n_q as usize];
    if n_q == 0 {
        return Ok(out);
    }
    let mut scaled = rank * range_product(1, n_q);
    let mut hi = m - 1;
    // (hi)_i for the current level i.
    let mut top = falling_factorial(hi, n_q);
    for i in (1..=n_q).rev() {
        if scaled.is_zero() {
            for j in 1..=i {
                out[j as usize - 1] = j - 1;
            }
            break;
        }
        let target = ln_big(&scaled) - ln_factorial(i);
        let mut c = estimate_top(i, hi, target);
        let at = |c: u64| -> BigUint {
            if c == hi {
                top.clone()
            } else if hi - c <= RATIO_GAP_LIMIT {
                &top * falling_factorial(hi - i, hi - c) / range_product(c + 1, hi)
            } else {
                falling_factorial(c, i)
            }
        };
        let mut ff = at(c);
        while ff > scaled {
            // (c−1)_i = (c)_i·(c−i)/c
            ff = ff * (c - i) / c;
            c -= 1;
        }
        while c < hi {
            let next = if ff.is_zero() { at(c + 1) } else { &ff * (c + 1) / (c + 1 - i) };
            if next > scaled {
                break;
            }
            ff = next;
            c += 1;
        }
        out[i as usize - 1] = c;
        scaled -= &ff;
        scaled /= i;
        if i > 1 {
            // (c−1)_{i−1} = (c)_i / c
            top = ff / c;
            hi = c - 1;
        }
    }
    Ok(out)
}

fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}
