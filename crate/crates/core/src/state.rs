//! Gaussian quadrature statistics, ADC partitions and simulated measurements.
//!
//! Quadrature variances are in vacuum units: the vacuum has variance 1/2 in
//! both the position (`Q`) and momentum (`P`) quadratures.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::special::gaussian_interval_mass;
use crate::{Error, Result};

/// Variance of either vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Largest supported ADC resolution.
pub const MAX_BIT_DEPTH: u32 = 16;

/// Which field quadrature is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Quadrature {
    /// Momentum: the data quadrature that produces raw random numbers.
    P,
    /// Position: the check quadrature used to bound the max-entropy.
    Q,
}

/// Role of a measurement instant within a protocol block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Tag {
    Data,
    Check,
}

impl Tag {
    pub fn quadrature(self) -> Quadrature {
        match self {
            Tag::Data => Quadrature::P,
            Tag::Check => Quadrature::Q,
        }
    }
}

/// Kind of Gaussian source.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum StateKind {
    Vacuum,
    /// Thermal state with mean photon number `mu`.
    Thermal { mu: f64 },
    /// Position-squeezed vacuum with squeezing factor `zeta`.
    Squeezed { zeta: f64 },
    /// Measured, thermal-like state with the same variance in both quadratures.
    Empirical { variance: f64 },
}

/// A Gaussian source described by its two quadrature variances.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianState {
    kind: StateKind,
    var_p: f64,
    var_q: f64,
}

impl GaussianState {
    pub fn vacuum() -> Self {
        Self {
            kind: StateKind::Vacuum,
            var_p: VACUUM_VARIANCE,
            var_q: VACUUM_VARIANCE,
        }
    }

    pub fn thermal(mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter("mean photon number must be finite and >= 0"));
        }
        let var = VACUUM_VARIANCE + mu;
        Ok(Self {
            kind: StateKind::Thermal { mu },
            var_p: var,
            var_q: var,
        })
    }

    /// Squeezed vacuum with `σ_P² = ζ²/2` and `σ_Q² = 1/(2ζ²)`.
    pub fn squeezed(zeta: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::InvalidParameter("squeezing factor must be finite and > 0"));
        }
        Ok(Self {
            kind: StateKind::Squeezed { zeta },
            var_p: zeta * zeta / 2.0,
            var_q: 1.0 / (2.0 * zeta * zeta),
        })
    }

    pub fn empirical(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter("variance must be finite and > 0"));
        }
        Ok(Self {
            kind: StateKind::Empirical { variance },
            var_p: variance,
            var_q: variance,
        })
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn variance(&self, quadrature: Quadrature) -> f64 {
        match quadrature {
            Quadrature::P => self.var_p,
            Quadrature::Q => self.var_q,
        }
    }

    /// `σ_P² σ_Q²`; at least 1/4, with equality for pure states.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_p * self.var_q
    }
}

impl fmt::Display for GaussianState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StateKind::Vacuum => write!(f, "vacuum"),
            StateKind::Thermal { mu } => write!(f, "thermal(mu={mu})"),
            StateKind::Squeezed { zeta } => write!(f, "squeezed(zeta={zeta})"),
            StateKind::Empirical { variance } => write!(f, "empirical(variance={variance})"),
        }
    }
}

/// The squeezed state of factor `ζ > 1` together with the thermal state
/// (`μ = (ζ² − 1)/2`) that reproduces its momentum distribution exactly.
///
/// The thermal member is the reduced state of a two-mode squeezed vacuum, so
/// the two are indistinguishable in `P` and differ only in `Q`.
pub fn squeezed_thermal_pair(zeta: f64) -> Result<(GaussianState, GaussianState)> {
    if !(zeta > 1.0 && zeta.is_finite()) {
        return Err(Error::InvalidParameter("squeezing factor must exceed 1"));
    }
    let squeezed = GaussianState::squeezed(zeta)?;
    let thermal = GaussianState::thermal((zeta * zeta - 1.0) / 2.0)?;
    Ok((squeezed, thermal))
}

/// Placement of the bin grid relative to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BinConvention {
    /// Bin `k` is `((k − ½)δ, (k + ½)δ]`; interior indices `−M..=M`.
    #[default]
    Centered,
    /// Bin `k` is `(kδ, (k + 1)δ]`; interior indices `−M..M`, covering
    /// `(−p_max, p_max]` with exactly `2^j` bins like a two's-complement ADC.
    Offset,
}

/// Discretization of a quadrature axis: `M` bins of width `δ` on each side
/// of the origin, plus one overflow bin at each end indexed `±(M + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    half_bins: u32,
    bin_width: f64,
    convention: BinConvention,
}

impl Partition {
    /// A `j`-bit ADC with full-scale half range `p_max`: `M = 2^{j−1}`,
    /// `δ = p_max·2^{1−j}`.
    pub fn from_bit_depth(bit_depth: u32, p_max: f64, convention: BinConvention) -> Result<Self> {
        if !(1..=MAX_BIT_DEPTH).contains(&bit_depth) {
            return Err(Error::InvalidParameter("bit depth must be within 1..=16"));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::InvalidParameter("full scale must be finite and > 0"));
        }
        let half_bins = 1u32 << (bit_depth - 1);
        Ok(Self {
            half_bins,
            bin_width: p_max / half_bins as f64,
            convention,
        })
    }

    /// A grid of arbitrary size: `half_bins` bins of width `bin_width` per side.
    pub fn from_bin_width(bin_width: f64, half_bins: u32, convention: BinConvention) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidParameter("bin width must be finite and > 0"));
        }
        if half_bins == 0 || half_bins > (1 << 24) {
            return Err(Error::InvalidParameter("half bin count must be within 1..=2^24"));
        }
        Ok(Self {
            half_bins,
            bin_width,
            convention,
        })
    }

    /// Smallest grid of width `bin_width` whose full scale reaches `min_range`.
    pub fn covering(bin_width: f64, min_range: f64, convention: BinConvention) -> Result<Self> {
        if !(min_range > 0.0 && min_range.is_finite()) {
            return Err(Error::InvalidParameter("range must be finite and > 0"));
        }
        let half_bins = (min_range / bin_width).ceil().max(1.0);
        if !(half_bins <= (1u32 << 24) as f64) {
            return Err(Error::InvalidParameter("grid too fine for requested range"));
        }
        Self::from_bin_width(bin_width, half_bins as u32, convention)
    }

    pub fn with_convention(self, convention: BinConvention) -> Self {
        Self { convention, ..self }
    }

    #[inline]
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// `M`, the largest interior index magnitude.
    #[inline]
    pub fn half_bins(&self) -> u32 {
        self.half_bins
    }

    #[inline]
    pub fn convention(&self) -> BinConvention {
        self.convention
    }

    /// `p_max = M·δ`.
    pub fn full_scale(&self) -> f64 {
        self.half_bins as f64 * self.bin_width
    }

    /// ADC resolution when `M` is a power of two.
    pub fn bit_depth(&self) -> Option<u32> {
        self.half_bins
            .is_power_of_two()
            .then(|| self.half_bins.trailing_zeros() + 1)
            .filter(|&j| j <= MAX_BIT_DEPTH)
    }

    /// Smallest interior index.
    #[inline]
    pub fn min_interior(&self) -> i32 {
        -(self.half_bins as i32)
    }

    /// Largest interior index.
    #[inline]
    pub fn max_interior(&self) -> i32 {
        match self.convention {
            BinConvention::Centered => self.half_bins as i32,
            BinConvention::Offset => self.half_bins as i32 - 1,
        }
    }

    pub fn interior_bins(&self) -> usize {
        (self.max_interior() - self.min_interior() + 1) as usize
    }

    /// Interior bins plus the two overflow bins.
    pub fn slot_count(&self) -> usize {
        self.interior_bins() + 2
    }

    #[inline]
    pub fn overflow_low(&self) -> i32 {
        -(self.half_bins as i32) - 1
    }

    #[inline]
    pub fn overflow_high(&self) -> i32 {
        self.half_bins as i32 + 1
    }

    /// Position of a bin index in the dense slot layout
    /// `[low overflow, interior…, high overflow]`.
    pub fn slot_of(&self, index: i32) -> Option<usize> {
        if index == self.overflow_low() {
            Some(0)
        } else if index == self.overflow_high() {
            Some(self.slot_count() - 1)
        } else if (self.min_interior()..=self.max_interior()).contains(&index) {
            Some((index - self.min_interior()) as usize + 1)
        } else {
            None
        }
    }

    /// Inverse of [`Partition::slot_of`].
    pub fn index_of_slot(&self, slot: usize) -> i32 {
        assert!(slot < self.slot_count(), "slot out of range");
        if slot == 0 {
            self.overflow_low()
        } else if slot == self.slot_count() - 1 {
            self.overflow_high()
        } else {
            self.min_interior() + slot as i32 - 1
        }
    }

    /// Bin edges `(lo, hi]` of an index; overflow bins extend to infinity.
    pub fn edges(&self, index: i32) -> (f64, f64) {
        let d = self.bin_width;
        let shift = match self.convention {
            BinConvention::Centered => -0.5,
            BinConvention::Offset => 0.0,
        };
        let lo_edge = (self.min_interior() as f64 + shift) * d;
        let hi_edge = (self.max_interior() as f64 + 1.0 + shift) * d;
        if index <= self.overflow_low() {
            (f64::NEG_INFINITY, lo_edge)
        } else if index >= self.overflow_high() {
            (hi_edge, f64::INFINITY)
        } else {
            ((index as f64 + shift) * d, (index as f64 + 1.0 + shift) * d)
        }
    }

    /// Midpoint of an interior bin; overflow bins map to their finite edge.
    pub fn center(&self, index: i32) -> f64 {
        match self.edges(index) {
            (lo, hi) if lo.is_infinite() => hi,
            (lo, hi) if hi.is_infinite() => lo,
            (lo, hi) => 0.5 * (lo + hi),
        }
    }

    /// Bin index of a quadrature value; values outside the grid land in the
    /// overflow bins, never in the edge bins.
    pub fn index_of(&self, x: f64) -> i32 {
        let u = x / self.bin_width;
        let k = match self.convention {
            BinConvention::Centered => (u - 0.5).ceil(),
            BinConvention::Offset => u.ceil() - 1.0,
        };
        if k.is_nan() {
            return self.overflow_high();
        }
        if k < self.min_interior() as f64 {
            self.overflow_low()
        } else if k > self.max_interior() as f64 {
            self.overflow_high()
        } else {
            k as i32
        }
    }
}

/// Exact binned outcome probabilities over a partition, in slot order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteDistribution {
    partition: Partition,
    probs: Vec<f64>,
}

/// Tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

impl DiscreteDistribution {
    pub fn new(partition: Partition, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != partition.slot_count() {
            return Err(Error::LengthMismatch {
                expected: partition.slot_count(),
                actual: probs.len(),
            });
        }
        check_normalized(&probs)?;
        Ok(Self { partition, probs })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Probabilities in slot order (overflow bins first and last).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: i32) -> f64 {
        self.partition.slot_of(index).map_or(0.0, |s| self.probs[s])
    }

    /// Total mass of the two overflow bins.
    pub fn overflow_mass(&self) -> f64 {
        self.probs[0] + self.probs[self.probs.len() - 1]
    }

    /// Cumulative distribution in slot order, for inverse-transform draws.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }
}

pub(crate) fn check_normalized(probs: &[f64]) -> Result<()> {
    if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidDistribution);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::InvalidDistribution);
    }
    Ok(())
}

/// Outcome counts over a partition, in slot order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinCounts {
    partition: Partition,
    counts: Vec<u64>,
}

impl BinCounts {
    pub fn zeros(partition: Partition) -> Self {
        Self {
            partition,
            counts: alloc::vec![0; partition.slot_count()],
        }
    }

    pub fn from_counts(partition: Partition, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != partition.slot_count() {
            return Err(Error::LengthMismatch {
                expected: partition.slot_count(),
                actual: counts.len(),
            });
        }
        Ok(Self { partition, counts })
    }

    /// Tallies bin indices; indices outside the partition are rejected.
    pub fn from_symbols<I: IntoIterator<Item = i32>>(partition: Partition, symbols: I) -> Result<Self> {
        let mut counts = Self::zeros(partition);
        for s in symbols {
            counts.record(s)?;
        }
        Ok(counts)
    }

    /// Adds the counts of another tally over the same partition.
    pub fn merge(&mut self, other: &BinCounts) -> Result<()> {
        if self.partition != other.partition {
            return Err(Error::InvalidParameter("cannot merge counts over different partitions"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn record(&mut self, index: i32) -> Result<()> {
        let slot = self
            .partition
            .slot_of(index)
            .ok_or(Error::InvalidParameter("bin index outside partition"))?;
        self.counts[slot] += 1;
        Ok(())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `N`, the number of recorded outcomes.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Relative frequencies as a distribution.
    pub fn frequencies(&self) -> Result<DiscreteDistribution> {
        let n = self.total();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, available: 0 });
        }
        let probs = self.counts.iter().map(|&c| c as f64 / n as f64).collect();
        DiscreteDistribution::new(self.partition, probs).or_else(|_| {
            // Frequencies of a few huge counts can miss 1 by rounding; renormalize.
            let probs: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
            let total: f64 = probs.iter().sum();
            DiscreteDistribution::new(self.partition, probs.into_iter().map(|p| p / total).collect())
        })
    }
}

/// Exact Gaussian bin masses of a centered quadrature with variance
/// `variance`, overflow bins included.
pub fn bin_probabilities(variance: f64, partition: &Partition) -> Result<DiscreteDistribution> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter("variance must be finite and > 0"));
    }
    let sigma = variance.sqrt();
    let probs: Vec<f64> = (0..partition.slot_count())
        .map(|slot| {
            let (lo, hi) = partition.edges(partition.index_of_slot(slot));
            gaussian_interval_mass(lo, hi, sigma)
        })
        .collect();
    DiscreteDistribution::new(*partition, probs)
}

/// Where a block of symbols came from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceInfo {
    pub description: String,
    pub seed: Option<u64>,
}

/// Quantized quadrature outcomes with the role of each instant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleBlock {
    partition: Partition,
    symbols: Vec<i32>,
    tags: Vec<Tag>,
    source: SourceInfo,
}

impl SampleBlock {
    pub fn new(partition: Partition, symbols: Vec<i32>, tags: Vec<Tag>, source: SourceInfo) -> Result<Self> {
        if symbols.len() != tags.len() {
            return Err(Error::LengthMismatch {
                expected: symbols.len(),
                actual: tags.len(),
            });
        }
        if symbols.iter().any(|&s| partition.slot_of(s).is_none()) {
            return Err(Error::InvalidParameter("symbol outside partition"));
        }
        Ok(Self {
            partition,
            symbols,
            tags,
            source,
        })
    }

    /// Quantizes real quadrature values, all tagged as data.
    pub fn quantize(partition: Partition, values: &[f64], source: SourceInfo) -> Self {
        let symbols = values.iter().map(|&x| partition.index_of(x)).collect::<Vec<_>>();
        let tags = alloc::vec![Tag::Data; symbols.len()];
        Self {
            partition,
            symbols,
            tags,
            source,
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn symbols(&self) -> &[i32] {
        &self.symbols
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn source(&self) -> &SourceInfo {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbols carrying the given tag, in order.
    pub fn tagged(&self, tag: Tag) -> impl Iterator<Item = i32> + '_ {
        self.symbols
            .iter()
            .zip(&self.tags)
            .filter(move |(_, t)| **t == tag)
            .map(|(s, _)| *s)
    }
}

/// Deterministic generator for simulated homodyne outcomes.
///
/// Each `(seed, stream)` pair is an independent ChaCha20 keystream, so
/// parallel producers take distinct stream numbers.
pub fn simulation_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a Gaussian quadrature value and quantizes it.
#[inline]
pub(crate) fn draw_symbol<R: Rng + ?Sized>(rng: &mut R, sigma: f64, partition: &Partition) -> i32 {
    let z: f64 = rng.sample(StandardNormal);
    partition.index_of(sigma * z)
}

/// Simulates `count` homodyne measurements of `quadrature` followed by an
/// ADC with the given partition. The result depends only on the arguments.
pub fn sample_quadrature(
    state: &GaussianState,
    quadrature: Quadrature,
    partition: &Partition,
    count: usize,
    seed: u64,
) -> Result<SampleBlock> {
    if count == 0 {
        return Err(Error::EmptyBlock);
    }
    let sigma = state.variance(quadrature).sqrt();
    let mut rng = simulation_rng(seed, 0);
    let symbols = (0..count).map(|_| draw_symbol(&mut rng, sigma, partition)).collect();
    let tag = match quadrature {
        Quadrature::P => Tag::Data,
        Quadrature::Q => Tag::Check,
    };
    Ok(SampleBlock {
        partition: *partition,
        symbols,
        tags: alloc::vec![tag; count],
        source: SourceInfo {
            description: alloc::format!("{state} {quadrature:?}"),
            seed: Some(seed),
        },
    })
}
