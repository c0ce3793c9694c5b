//! Min-, max- and Shannon entropies of binned quadrature outcomes, and the
//! uncertainty-relation lower bound on the conditional min-entropy.
//!
//! All entropies are in bits. For position and momentum measured with
//! precisions `δq` and `δp` the bound is
//!
//! ```text
//! H_min(P|E) ≥ H_low = −log₂ c(δq, δp) − H_max(Q)
//! c(δq, δp)  = (δq·δp / 2π) · S₀⁽¹⁾(1, δq·δp/4)²
//! H_max(Q)   = 2·log₂ Σ_k √p(q_k)
//! ```
//!
//! where `S₀⁽¹⁾` is the zeroth radial prolate spheroidal function of the
//! first kind (see [`crate::prolate`]).

use core::f64::consts::{LN_2, PI};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::prolate::radial_first_kind;
use crate::special::{gaussian_two_sided_tail, log2, theta3_exp};
use crate::state::{check_normalized, BinCounts, DiscreteDistribution, Partition};
use crate::{Error, Result};

/// Bandwidths `δq·δp/4` above this are reported as saturated: there
/// `1 − c < 2·10⁻¹⁰`, below the accuracy of the series evaluation.
const MAX_BANDWIDTH: f64 = 13.0;

/// Values of `c` this close to one make the bound vacuous.
const SATURATION_MARGIN: f64 = 1e-13;

/// Measurement incompatibility of position and momentum at given precisions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverlapConstant {
    pub dq: f64,
    pub dp: f64,
    /// `c(δq, δp)` in `(0, 1)`.
    pub value: f64,
    /// `S₀⁽¹⁾(1, δq·δp/4)`.
    pub s0: f64,
}

impl OverlapConstant {
    /// `−log₂ c`, the first term of the lower bound.
    pub fn neg_log2(&self) -> f64 {
        -log2(self.value)
    }
}

/// Overlap constant `c(δq, δp)`.
pub fn overlap_constant(dq: f64, dp: f64) -> Result<OverlapConstant> {
    if !(dq > 0.0 && dp > 0.0 && dq.is_finite() && dp.is_finite()) {
        return Err(Error::InvalidParameter("bin widths must be finite and > 0"));
    }
    let product = dq * dp;
    let bandwidth = product / 4.0;
    if bandwidth > MAX_BANDWIDTH {
        return Err(Error::OverlapSaturated { product });
    }
    let s0 = radial_first_kind(bandwidth, 1.0);
    let value = product / (2.0 * PI) * s0 * s0;
    if !(value.is_finite() && value < 1.0 - SATURATION_MARGIN) {
        return Err(Error::OverlapSaturated { product });
    }
    Ok(OverlapConstant { dq, dp, value, s0 })
}

/// `−log₂ max_k p_k` over a probability vector.
pub fn min_entropy(probs: &[f64]) -> Result<f64> {
    check_normalized(probs)?;
    let max = probs.iter().copied().fold(0.0, f64::max);
    Ok(-log2(max))
}

/// Rényi entropy of order ½, `2·log₂ Σ_k √p_k`.
pub fn renyi_half_entropy(probs: &[f64]) -> Result<f64> {
    check_normalized(probs)?;
    let sum: f64 = probs.iter().map(|p| p.sqrt()).sum();
    Ok(2.0 * log2(sum))
}

/// Shannon entropy `−Σ p log₂ p`.
pub fn shannon_entropy(probs: &[f64]) -> Result<f64> {
    check_normalized(probs)?;
    Ok(-probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
        / LN_2)
}

/// Classical min-entropy `H∞` of a binned distribution, overflow bins included.
pub fn classical_min_entropy(dist: &DiscreteDistribution) -> Result<f64> {
    min_entropy(dist.probs())
}

/// Max-entropy of a binned distribution, summed over interior and overflow bins.
pub fn max_entropy(dist: &DiscreteDistribution) -> Result<f64> {
    renyi_half_entropy(dist.probs())
}

/// How a max-entropy value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Estimator {
    /// From exact bin probabilities.
    Exact,
    /// From relative frequencies of the check outcomes.
    Plugin,
    /// From posterior-mean probabilities under a symmetric Dirichlet(½)
    /// prior over every bin of the partition, overflow bins included.
    #[default]
    Bayesian,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::Plugin => "plugin",
            Estimator::Bayesian => "bayesian",
        }
    }
}

/// Dirichlet concentration per bin of the Bayesian estimator.
pub const DIRICHLET_PRIOR: f64 = 0.5;

/// Max-entropy estimated from check-outcome counts.
pub fn estimate_max_entropy(counts: &BinCounts, estimator: Estimator) -> Result<f64> {
    let n = counts.total();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, available: n });
    }
    let sum_sqrt: f64 = match estimator {
        Estimator::Exact => {
            return Err(Error::InvalidParameter("counts admit only plugin or bayesian estimates"))
        }
        Estimator::Plugin => counts.counts().iter().map(|&k| (k as f64 / n as f64).sqrt()).sum(),
        Estimator::Bayesian => {
            let denom = n as f64 + DIRICHLET_PRIOR * counts.counts().len() as f64;
            counts
                .counts()
                .iter()
                .map(|&k| ((k as f64 + DIRICHLET_PRIOR) / denom).sqrt())
                .sum()
        }
    };
    Ok((2.0 * log2(sum_sqrt)).max(0.0))
}

/// The uncertainty bound before it is attached to measurement metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerBound {
    pub overlap: OverlapConstant,
    pub h_max: f64,
    /// `−log₂ c − H_max`; negative values are kept as they are.
    pub h_low: f64,
}

/// `H_low = −log₂ c(δq, δp) − H_max`.
pub fn min_entropy_lower_bound(dq: f64, dp: f64, h_max: f64) -> Result<LowerBound> {
    if !(h_max >= 0.0 && h_max.is_finite()) {
        return Err(Error::InvalidParameter("max-entropy must be finite and >= 0"));
    }
    let overlap = overlap_constant(dq, dp)?;
    Ok(LowerBound {
        overlap,
        h_max,
        h_low: overlap.neg_log2() - h_max,
    })
}

/// Entropy certificate for one block of measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyReport {
    /// Classical min-entropy of the data outcomes, bits per measurement.
    pub h_inf: f64,
    /// Max-entropy of the check outcomes.
    pub h_max: f64,
    pub estimator: Estimator,
    pub overlap: OverlapConstant,
    /// Lower bound on the conditional min-entropy; may be negative.
    pub h_low: f64,
    /// Upper bound on the max-entropy contribution lost to the finite range.
    pub tail_error: f64,
    /// Number of check outcomes behind `h_max`.
    pub n_check: u64,
}

impl EntropyReport {
    pub fn new(h_inf: f64, estimator: Estimator, bound: LowerBound, tail_error: f64, n_check: u64) -> Self {
        Self {
            h_inf,
            h_max: bound.h_max,
            estimator,
            overlap: bound.overlap,
            h_low: bound.h_low,
            tail_error,
            n_check,
        }
    }

    /// Bound on the adversary's guessing probability, `min(1, 2^{−H_low})`.
    pub fn guessing_probability(&self) -> f64 {
        libm::exp2(-self.h_low).min(1.0)
    }
}

/// Small-bin closed forms for a thermal source.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalyticEntropies {
    pub h_inf_approx: f64,
    pub h_max_approx: f64,
    pub h_low_approx: f64,
    /// `log₂(1 + 2μ)`, the gap between `H∞` and `H_low` as `δ → 0`.
    pub asymptotic_gap: f64,
    /// Set when `δ` exceeds the quadrature standard deviation, where the
    /// approximations lose accuracy.
    pub outside_regime: bool,
}

/// Closed-form `H∞`, `H_max` and `H_low` of a thermal state with mean photon
/// number `mu` at bin width `delta` (`δq = δp = δ`), using the lattice sum
/// `Σ_k e^{−(δk)²/(2(1+2μ))} = ϑ₃(0, e^{−δ²/(2(1+2μ))})`.
pub fn analytic_entropies(mu: f64, delta: f64) -> Result<AnalyticEntropies> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter("mean photon number must be finite and >= 0"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter("bin width must be finite and > 0"));
    }
    let spread = 1.0 + 2.0 * mu;
    let h_inf_approx = -log2(delta / (PI * spread).sqrt());
    let lattice = theta3_exp(delta * delta / (2.0 * spread));
    let h_max_approx = log2(delta / (PI * spread).sqrt()) + 2.0 * log2(lattice);
    let h_low_approx = h_inf_approx - 2.0 * log2(delta / (2.0 * PI).sqrt() * lattice);
    Ok(AnalyticEntropies {
        h_inf_approx,
        h_max_approx,
        h_low_approx,
        asymptotic_gap: log2(spread),
        outside_regime: delta > (0.5 + mu).sqrt(),
    })
}

/// `√N·P_M`: bound on the neglected `Σ√p` over outcomes beyond `±p_max` when
/// the max-entropy is estimated from `n` outcomes of a Gaussian with
/// standard deviation `sigma`.
pub fn tail_error_bound(sigma: f64, partition: &Partition, n: u64) -> f64 {
    (n as f64).sqrt() * gaussian_two_sided_tail(partition.full_scale(), sigma)
}
