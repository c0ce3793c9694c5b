//! Quick invariant suite behind `cvqrng selftest`.

use std::f64::consts::PI;

use cvqrng_core::bits::BitBuf;
use cvqrng_core::combinatorics::{binomial, colex_rank, colex_unrank, seed_cost};
use cvqrng_core::dsp::{design_lowpass, DEFAULT_TAPS};
use cvqrng_core::entropy::{overlap_constant, tail_error_bound};
use cvqrng_core::extractor::{hash_block, output_length, random_matrix, BitMatrix};
use cvqrng_core::protocol::{exact_certificate, secure_rate};
use cvqrng_core::state::{BinConvention, GaussianState, Partition};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rawio::{read_raw, write_codes, RawMeta};
use crate::sanity::{sanity_tests, MIN_BITS};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn gap(mu: f64, delta: f64) -> f64 {
    let state = GaussianState::thermal(mu).expect("valid");
    let sigma = (0.5 + mu).sqrt();
    let p = Partition::covering(delta, 12.0 * sigma, BinConvention::Centered).expect("valid");
    let e = exact_certificate(&state, &p, 1).expect("certifies");
    e.h_inf - e.h_low
}

fn overlap_limit() -> Check {
    let ratios: Vec<f64> = [1e-3, 1e-2]
        .iter()
        .map(|&d| overlap_constant(d, d).map_or(f64::NAN, |c| c.value / (d * d / (2.0 * PI))))
        .collect();
    // The ratio is S₀(1, δ²/4)², which approaches 1 from below.
    let ok = ratios.iter().all(|r| *r < 1.0 && *r > 1.0 - 1e-9);
    check("overlap small-bin limit", ok, format!("ratios {ratios:?}"))
}

fn hash_agrees_with_naive() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    for i in 0..20 {
        let n = rng.random_range(1..=64);
        let l = rng.random_range(1..=n.min(32));
        let input = BitBuf::from_bools((0..n).map(|_| rng.random::<bool>()));
        let m: BitMatrix = random_matrix(b"selftest", i, n, l).expect("valid");
        let got = hash_block(&input, &m).expect("sizes match");
        let want = BitBuf::from_bools((0..l).map(|j| (0..n).fold(false, |a, r| a ^ (input.get(r) & m.get(r, j)))));
        ok &= got == want;
    }
    check("hash matches naive product", ok, "20 random instances".into())
}

fn unrank_bijection() -> Check {
    let (m, k) = (9u64, 4u64);
    let total: u64 = binomial(m, k).try_into().expect("small");
    let ok = (0..total).all(|r| {
        let s = colex_unrank(&BigUint::from(r), m, k).expect("in range");
        colex_rank(&s).is_ok_and(|x| x == BigUint::from(r))
    });
    check("subset unranking is a bijection", ok, format!("all {total} ranks of C(9,4)"))
}

fn raw_round_trip() -> Check {
    let dir = std::env::temp_dir().join(format!("cvqrng-selftest-{}", std::process::id()));
    let path = dir.join("s.raw");
    let meta = RawMeta::new(1.25e9, 0.1, 16);
    let codes: Vec<i16> = (0..1000).map(|i| (i * 65 - 32768) as i16).collect();
    let ok = std::fs::create_dir_all(&dir).is_ok()
        && write_codes(&path, &meta, &codes).is_ok()
        && read_raw(&path).is_ok_and(|c| c.codes == codes && c.meta == meta);
    let _ = std::fs::remove_dir_all(&dir);
    check("raw file round trip", ok, "1000 samples".into())
}

fn sanity_trivia() -> Check {
    let zeros = sanity_tests(&BitBuf::zeros(MIN_BITS)).map(|r| !r[0].pass).unwrap_or(false);
    let alt = sanity_tests(&BitBuf::from_bools((0..MIN_BITS).map(|i| i % 2 == 1)))
        .map(|r| r[0].pass && !r[1].pass)
        .unwrap_or(false);
    check("sanity tests reject trivial streams", zeros && alt, "zeros, alternating".into())
}

/// Runs every check.
pub fn run() -> Vec<Check> {
    let vacuum = gap(0.0, 0.01);
    let thermal = gap(2.0, 1e-3);
    let t = seed_cost(615_514_112, 24_810).unwrap_or(0);
    let rate = secure_rate(615_514_112, 24_810, 1.3629, t);
    let l = output_length(10_000, 1.3629, 5, 0.0).unwrap_or(0);
    let p = Partition::from_bit_depth(5, 10.5, BinConvention::Offset).expect("valid");
    let tail = tail_error_bound(1.0, &p, 25_000);
    let dc: f64 = design_lowpass(625e6, 5e9, DEFAULT_TAPS).map_or(f64::NAN, |h| h.iter().sum());
    vec![
        overlap_limit(),
        check("vacuum bound tight at fine bins", vacuum <= 0.02, format!("gap {vacuum:.5}")),
        check("thermal gap is log2(1+2mu)", (thermal - 5f64.log2()).abs() <= 0.02, format!("gap {thermal:.5}")),
        check("secure rate of the reference run", (1.360..=1.363).contains(&rate), format!("r_sec {rate:.5}, t {t}")),
        check("hash output length", l == 2725, format!("l {l}")),
        hash_agrees_with_naive(),
        unrank_bijection(),
        check("tail error bound", tail <= 1e-20, format!("{tail:.4e}")),
        check("lowpass unit DC gain", (dc - 1.0).abs() < 1e-12, format!("{dc}")),
        sanity_trivia(),
        raw_round_trip(),
    ]
}
