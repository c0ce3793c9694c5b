//! Zeroth-order prolate spheroidal functions.
//!
//! The angular function is expanded in even Legendre polynomials,
//! `S₀₀(c, η) = Σ' d_r P_r(η)`, whose coefficients satisfy a three-term
//! recurrence. The separation constant is the smallest eigenvalue of the
//! (symmetrized) tridiagonal recurrence matrix and is found by Sturm-sequence
//! bisection; the coefficients follow from the minimal solution of the
//! recurrence, run downward as a continued fraction. The radial function of
//! the first kind is then a series of spherical Bessel functions with the
//! same coefficients.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::special::spherical_bessel_j;

/// Number of even Legendre terms kept for bandwidth `c`.
fn truncation(c: f64) -> usize {
    40 + (2.0 * c) as usize
}

fn alpha(r: f64, c2: f64) -> f64 {
    (r + 2.0) * (r + 1.0) * c2 / ((2.0 * r + 3.0) * (2.0 * r + 5.0))
}

fn beta(r: f64, c2: f64) -> f64 {
    r * (r + 1.0) + c2 * (2.0 * r * (r + 1.0) - 1.0) / ((2.0 * r - 1.0) * (2.0 * r + 3.0))
}

fn gamma(r: f64, c2: f64) -> f64 {
    r * (r - 1.0) * c2 / ((2.0 * r - 3.0) * (2.0 * r - 1.0))
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off2: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 { f64::EPSILON } else { q };
        q = diag[i] - x - off2[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Separation constant `χ₀₀(c)` of the zeroth prolate function.
pub fn separation_constant(c: f64) -> f64 {
    let c2 = c * c;
    let k = truncation(c);
    let diag: Vec<f64> = (0..k).map(|i| beta(2.0 * i as f64, c2)).collect();
    let off2: Vec<f64> = (0..k - 1)
        .map(|i| alpha(2.0 * i as f64, c2) * gamma(2.0 * i as f64 + 2.0, c2))
        .collect();
    // Gershgorin interval around the lowest row.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let radius = if i > 0 { off2[i - 1].sqrt() } else { 0.0 } + if i + 1 < k { off2[i].sqrt() } else { 0.0 };
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(&diag, &off2, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Legendre coefficients `d_0, d_2, d_4, …` of `S₀₀(c, ·)`, with `d_0 = 1`.
pub fn legendre_coefficients(c: f64) -> Vec<f64> {
    let c2 = c * c;
    let chi = separation_constant(c);
    let k = truncation(c);
    // ratio[i] = d_{2i} / d_{2i-2}, from the top of the recurrence down.
    let mut ratio = vec![0.0; k + 1];
    let mut next = 0.0;
    for i in (1..k).rev() {
        let r = 2.0 * i as f64;
        let denom = beta(r, c2) - chi + alpha(r, c2) * next;
        next = -gamma(r, c2) / denom;
        ratio[i] = next;
    }
    let mut d = Vec::with_capacity(k);
    d.push(1.0);
    for i in 1..k {
        let v = d[i - 1] * ratio[i];
        if v.abs() < 1e-300 {
            break;
        }
        d.push(v);
    }
    d
}

/// Radial prolate function of the first kind `R₀₀⁽¹⁾(c, ξ)`, normalized so
/// that it tends to `j₀(cξ)` as `c → 0`.
pub fn radial_first_kind(c: f64, xi: f64) -> f64 {
    if c == 0.0 {
        return 1.0;
    }
    let d = legendre_coefficients(c);
    let j = spherical_bessel_j(2 * (d.len() - 1), c * xi);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &di) in d.iter().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        num += sign * di * j[2 * i];
        den += di;
    }
    num / den
}

/// Largest eigenvalue `λ₀(c) = (2c/π)·R₀₀⁽¹⁾(c, 1)²` of the time- and
/// band-limiting operator with bandwidth `c`: the fraction of a band-limited
/// signal's energy that can be concentrated in a finite interval.
pub fn concentration_eigenvalue(c: f64) -> f64 {
    let r = radial_first_kind(c, 1.0);
    2.0 * c / PI * r * r
}
