//! Special functions used by the entropy and protocol layers.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI, SQRT_2};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Probability that a centered Gaussian with standard deviation `sigma`
/// falls in the half-open interval `(lo, hi]`.
///
/// Works from the complementary error function on whichever side of the
/// origin the interval lies, so far-tail masses keep full relative
/// precision. Either bound may be infinite.
pub fn gaussian_interval_mass(lo: f64, hi: f64, sigma: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let scale = sigma * SQRT_2;
    let (a, b) = (lo / scale, hi / scale);
    let mass = if a >= 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        0.5 * (libm::erf(b) + libm::erf(-a))
    };
    mass.max(0.0)
}

/// Two-sided tail mass `P(|X| > x)` of a centered Gaussian.
pub fn gaussian_two_sided_tail(x: f64, sigma: f64) -> f64 {
    libm::erfc(x.abs() / (sigma * SQRT_2))
}

/// Jacobi theta function `ϑ₃(0, q) = 1 + 2 Σ_{n≥1} q^{n²}` for a nome `0 ≤ q < 1`.
///
/// Nomes close to one are mapped through the modular identity
/// `ϑ₃(0, e^{-πt}) = t^{-1/2} ϑ₃(0, e^{-π/t})` so the series always
/// converges in a handful of terms.
pub fn theta3(q: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&q));
    if q <= 0.5 {
        theta3_series(q)
    } else {
        theta3_exp(-q.ln())
    }
}

/// `ϑ₃(0, e^{−τ})` for `τ > 0`, accurate also when `e^{−τ}` rounds to one.
pub fn theta3_exp(tau: f64) -> f64 {
    debug_assert!(tau > 0.0);
    if tau >= core::f64::consts::LN_2 {
        theta3_series((-tau).exp())
    } else {
        let t = tau / PI;
        theta3_series((-PI / t).exp()) / t.sqrt()
    }
}

fn theta3_series(q: f64) -> f64 {
    let mut sum = 1.0;
    let mut n = 1u32;
    loop {
        let term = q.powi((n * n) as i32);
        if term < 1e-18 * sum {
            break;
        }
        sum += 2.0 * term;
        n += 1;
    }
    sum
}

/// Spherical Bessel functions `j_0(x) ..= j_{n_max}(x)` by Miller's downward
/// recurrence, normalized against the closed forms of `j_0` or `j_1`.
pub fn spherical_bessel_j(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n_max + x.abs().ceil() as usize + 40;
    let mut upper = 0.0; // j_{n+1}
    let mut current = 1e-280; // j_n
    for n in (1..=start).rev() {
        let lower = (2 * n + 1) as f64 / x * current - upper;
        upper = current;
        current = lower;
        if n - 1 <= n_max {
            out[n - 1] = current;
        }
        if current.abs() > 1e250 {
            upper *= 1e-250;
            current *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // `current` now holds the unnormalized j_0, `upper` j_1.
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() { j0 / current } else { j1 / upper };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Natural log of the binomial coefficient via log-gamma.
pub fn ln_binomial(n: f64, k: f64) -> f64 {
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// Base-2 logarithm.
#[inline]
pub fn log2(x: f64) -> f64 {
    x.ln() / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mass_matches_erf() {
        let m = gaussian_interval_mass(-0.05, 0.05, 0.5f64.sqrt());
        assert!((m - libm::erf(0.05)).abs() < 1e-15);
        let total = gaussian_interval_mass(f64::NEG_INFINITY, f64::INFINITY, 2.0);
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_interval_mass(1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn far_tail_keeps_relative_precision() {
        // erfc(7.424621202458749) = 8.7...e-26, far below f64 resolution of erf.
        let sigma = 0.677f64.sqrt();
        let tail = gaussian_two_sided_tail(10.5 * sigma, sigma);
        let upper = gaussian_interval_mass(10.5 * sigma, f64::INFINITY, sigma);
        assert!((tail - 2.0 * upper).abs() < 1e-12 * tail);
        assert!(tail > 8.0e-26 && tail < 9.5e-26, "{tail}");
    }

    #[test]
    fn theta_identity_branches_agree() {
        for &q in &[0.3, 0.49, 0.5, 0.51, 0.7] {
            let direct = theta3_series(q);
            let t = -q.ln() / PI;
            let modular = theta3_series((-PI / t).exp()) / t.sqrt();
            assert!((direct - modular).abs() < 1e-12 * direct, "q={q}");
        }
    }

    #[test]
    fn x_theta_bounded_below_by_sqrt_pi() {
        let sqrt_pi = PI.sqrt();
        for i in 1..=500 {
            let x = i as f64 * 0.01;
            let v = x * theta3((-x * x).exp());
            assert!(v >= sqrt_pi * (1.0 - 1e-14), "x={x} v={v}");
        }
        let small = 1e-3 * theta3((-1e-6f64).exp());
        assert!((small - sqrt_pi).abs() < 1e-10);
        let tiny = 1e-6 * theta3_exp(1e-12);
        assert!((tiny - sqrt_pi).abs() < 1e-14);
    }

    #[test]
    fn spherical_bessel_closed_forms() {
        for &x in &[1e-4, 0.3, 1.0, 2.5, 7.0, 18.0] {
            let j = spherical_bessel_j(6, x);
            let (s, c) = (x.sin(), x.cos());
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            assert!((j[0] - s / x).abs() < 1e-13, "x={x}");
            if x > 1e-2 {
                assert!((j[2] - j2).abs() < 1e-12, "x={x} {} {}", j[2], j2);
            }
            // upward recurrence agrees where it is stable
            if x > 6.0 {
                let j3 = 5.0 / x * j[2] - j[1];
                assert!((j3 - j[3]).abs() < 1e-12);
            }
        }
        // small argument: j_n(x) ~ x^n / (2n+1)!!
        let j = spherical_bessel_j(4, 1e-3);
        assert!((j[4] / (1e-12 / 945.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ln_binomial_small_values() {
        assert!((ln_binomial(16.0, 4.0) - 1820f64.ln()).abs() < 1e-12);
        assert!((ln_binomial(5.0, 2.0) - 10f64.ln()).abs() < 1e-12);
    }
}
