//! The source-device-independent protocol: random check instants paid for
//! from a seed, entropy certification from the check outcomes, secure-rate
//! accounting and block-wise recalibration.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigUint;
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bits::BitBuf;
use crate::combinatorics::{binomial, colex_unrank, seed_cost};
use crate::entropy::{
    classical_min_entropy, estimate_max_entropy, max_entropy, min_entropy_lower_bound, tail_error_bound,
    EntropyReport, Estimator,
};
use crate::extractor::Extractor;
use crate::state::{
    bin_probabilities, simulation_rng, BinCounts, GaussianState, Partition, Quadrature, SampleBlock, SourceInfo, Tag,
};
use crate::{Error, Result};

/// Random bits consumed front to back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedPool {
    bits: BitBuf,
    cursor: usize,
}

impl SeedPool {
    pub fn new(bits: BitBuf) -> Self {
        Self { bits, cursor: 0 }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::new(BitBuf::from_bytes(bytes, bytes.len() * 8))
    }

    /// `count` bits from a deterministic generator, for simulations.
    pub fn simulated(count: usize, seed: u64) -> Self {
        let mut rng = simulation_rng(seed, u64::MAX);
        let words = (0..count.div_ceil(64)).map(|_| rng.random::<u64>()).collect();
        Self::new(BitBuf::from_words(words, count))
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }

    /// Appends fresh bits, for example reinvested output.
    pub fn extend(&mut self, bits: &BitBuf) {
        self.bits.extend_from(bits);
    }

    /// The next `count` bits as an integer, first bit least significant.
    pub fn take(&mut self, count: usize) -> Result<BigUint> {
        let bits = self.take_bits(count)?;
        Ok(BigUint::from_bytes_le(&bits.to_bytes()))
    }

    pub fn take_bits(&mut self, count: usize) -> Result<BitBuf> {
        if count > self.remaining() {
            return Err(Error::SeedExhausted {
                needed: count as u64,
                available: self.remaining() as u64,
            });
        }
        let out = self.bits.slice(self.cursor, count);
        self.cursor += count;
        Ok(out)
    }
}

/// Chooses `n_q` of `m` instants by unranking a seed-drawn integer. Draws of
/// `t = ⌈log₂ C(m, n_q)⌉` bits that land outside `[0, C(m, n_q))` are
/// rejected and redrawn, so every subset is equally likely.
pub fn select_check_instants(m: u64, n_q: u64, pool: &mut SeedPool) -> Result<Vec<u64>> {
    let t = seed_cost(m, n_q)? as usize;
    let total = binomial(m, n_q);
    loop {
        let rank = pool.take(t)?;
        if rank < total {
            return colex_unrank(&rank, m, n_q);
        }
    }
}

/// How many check measurements a block of `m` gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CheckCount {
    /// `⌈√m⌉`.
    #[default]
    SquareRoot,
    Fixed(u64),
}

impl CheckCount {
    pub fn resolve(self, m: u64) -> u64 {
        match self {
            CheckCount::SquareRoot => ceil_sqrt(m),
            CheckCount::Fixed(n) => n,
        }
    }
}

/// `⌈√m⌉` in integers.
pub fn ceil_sqrt(m: u64) -> u64 {
    let mut r = libm::sqrt(m as f64) as u64;
    while r.saturating_mul(r) > m {
        r -= 1;
    }
    while r.saturating_mul(r) < m {
        r += 1;
    }
    r
}

/// `max(0, [(m − n_q)·h_low − t] / m)`, net random bits per measurement.
pub fn secure_rate(m: u64, n_q: u64, h_low: f64, t: u64) -> f64 {
    debug_assert!(m > n_q);
    (((m - n_q) as f64 * h_low - t as f64) / m as f64).max(0.0)
}

/// Extractable bits per seed bit spent on check selection,
/// `(m − n_q)·h_low / t(m, n_q)`.
pub fn expansion_ratio(m: u64, n_q: u64, h_low: f64) -> Result<f64> {
    let t = seed_cost(m, n_q)?;
    Ok((m - n_q) as f64 * h_low / t as f64)
}

/// Protocol parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolConfig {
    /// Total measurements `m`.
    pub measurements: u64,
    /// Check measurements per recalibration block.
    pub check_count: CheckCount,
    pub partition: Partition,
    pub estimator: Estimator,
    /// Measurements per recalibration block.
    pub block_len: u64,
    /// Feed extracted bits back into the seed pool to pay for the next
    /// block's check selection.
    pub reinvest: bool,
}

/// Default recalibration window, `2^20` measurements.
pub const DEFAULT_BLOCK_LEN: u64 = 1 << 20;

impl ProtocolConfig {
    pub fn new(measurements: u64, partition: Partition) -> Self {
        Self {
            measurements,
            check_count: CheckCount::SquareRoot,
            partition,
            estimator: Estimator::Bayesian,
            block_len: DEFAULT_BLOCK_LEN,
            reinvest: false,
        }
    }

    /// Lengths of the recalibration blocks. A remainder shorter than half a
    /// block is folded into the last block.
    pub fn block_lengths(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut left = self.measurements;
        while left > 0 {
            let len = left.min(self.block_len);
            left -= len;
            if left > 0 && left < self.block_len / 2 {
                out.push(len + left);
                break;
            }
            out.push(len);
        }
        out
    }

    fn fits(&self, len: u64) -> bool {
        let n_q = self.check_count.resolve(len);
        n_q >= 2 && n_q < len
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimator == Estimator::Exact {
            return Err(Error::InvalidParameter("measured runs need a plugin or bayesian estimator"));
        }
        if self.block_len == 0 || self.measurements == 0 {
            return Err(Error::InvalidParameter("measurement and block counts must be > 0"));
        }
        if self.block_lengths().iter().any(|&len| !self.fits(len)) {
            return Err(Error::InvalidParameter("each block needs 2 <= n_Q < block length"));
        }
        Ok(())
    }
}

fn sample_std(counts: &BinCounts) -> f64 {
    let p = counts.partition();
    let n = counts.total() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (slot, &c) in counts.counts().iter().enumerate() {
        let x = p.center(p.index_of_slot(slot));
        s1 += c as f64 * x;
        s2 += c as f64 * x * x;
    }
    let mean = s1 / n;
    ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0).sqrt()
}

/// Certificate from data and check tallies.
pub fn certify_counts(data: &BinCounts, checks: &BinCounts, estimator: Estimator) -> Result<EntropyReport> {
    if checks.total() == 0 {
        return Err(Error::InsufficientData { needed: 2, available: 0 });
    }
    if data.total() == 0 {
        return Err(Error::InsufficientData { needed: 1, available: 0 });
    }
    let partition = checks.partition();
    let h_inf = classical_min_entropy(&data.frequencies()?)?;
    let h_max = estimate_max_entropy(checks, estimator)?;
    let delta = partition.bin_width();
    let bound = min_entropy_lower_bound(delta, delta, h_max)?;
    let tail = tail_error_bound(sample_std(checks), partition, checks.total());
    Ok(EntropyReport::new(h_inf, estimator, bound, tail, checks.total()))
}

/// Splits a block into data and check tallies, checking that exactly the
/// positions in `check_indices` are tagged as checks.
pub fn split_counts(samples: &SampleBlock, check_indices: &[u64]) -> Result<(BinCounts, BinCounts)> {
    let partition = *samples.partition();
    let mut data = BinCounts::zeros(partition);
    let mut checks = BinCounts::zeros(partition);
    let mut next = check_indices.iter().peekable();
    for (i, (&s, &tag)) in samples.symbols().iter().zip(samples.tags()).enumerate() {
        let is_check = next.peek().is_some_and(|&&c| c == i as u64);
        if is_check {
            next.next();
        }
        match (tag, is_check) {
            (Tag::Check, true) => checks.record(s)?,
            (Tag::Data, false) => data.record(s)?,
            _ => return Err(Error::TagMismatch { position: i as u64 }),
        }
    }
    if let Some(&&c) = next.peek() {
        return Err(Error::TagMismatch { position: c });
    }
    Ok((data, checks))
}

/// Bounds the min-entropy of the data outcomes of `samples` from its check
/// outcomes.
pub fn certify(samples: &SampleBlock, check_indices: &[u64], estimator: Estimator) -> Result<EntropyReport> {
    let (data, checks) = split_counts(samples, check_indices)?;
    certify_counts(&data, &checks, estimator)
}

/// Certificate computed from exact bin probabilities of a Gaussian state,
/// with `n_check` used only for the tail term.
pub fn exact_certificate(state: &GaussianState, partition: &Partition, n_check: u64) -> Result<EntropyReport> {
    let data = bin_probabilities(state.variance(Quadrature::P), partition)?;
    let check = bin_probabilities(state.variance(Quadrature::Q), partition)?;
    let h_inf = classical_min_entropy(&data)?;
    let h_max = max_entropy(&check)?;
    let delta = partition.bin_width();
    let bound = min_entropy_lower_bound(delta, delta, h_max)?;
    let tail = tail_error_bound(state.variance(Quadrature::Q).sqrt(), partition, n_check.max(1));
    Ok(EntropyReport::new(h_inf, Estimator::Exact, bound, tail, n_check))
}

/// Something that measures one quadrature per instant on request.
pub trait QuadratureSource {
    fn partition(&self) -> Partition;

    /// Measures `len` instants of block `block`, the instants listed in
    /// `checks` (ascending, block-relative) in `Q` and the others in `P`.
    fn measure(&mut self, block: u64, len: usize, checks: &[u64]) -> Result<SampleBlock>;
}

fn tags_for(len: usize, checks: &[u64]) -> Vec<Tag> {
    let mut tags = alloc::vec![Tag::Data; len];
    for &c in checks {
        tags[c as usize] = Tag::Check;
    }
    tags
}

/// Simulated homodyne measurements of a Gaussian state that may change from
/// block to block.
#[derive(Debug, Clone)]
pub struct SimulatedSource {
    partition: Partition,
    /// `(first block, state)` in increasing block order.
    schedule: Vec<(u64, GaussianState)>,
    seed: u64,
}

impl SimulatedSource {
    pub fn new(state: GaussianState, partition: Partition, seed: u64) -> Self {
        Self {
            partition,
            schedule: alloc::vec![(0, state)],
            seed,
        }
    }

    /// Switches to `state` from block `from` onwards.
    pub fn then(mut self, from: u64, state: GaussianState) -> Self {
        self.schedule.retain(|&(b, _)| b < from);
        self.schedule.push((from, state));
        self
    }

    pub fn state_at(&self, block: u64) -> GaussianState {
        self.schedule
            .iter()
            .rev()
            .find(|&&(b, _)| b <= block)
            .map(|&(_, s)| s)
            .unwrap_or(self.schedule[0].1)
    }
}

impl QuadratureSource for SimulatedSource {
    fn partition(&self) -> Partition {
        self.partition
    }

    fn measure(&mut self, block: u64, len: usize, checks: &[u64]) -> Result<SampleBlock> {
        let state = self.state_at(block);
        let sd_p = state.variance(Quadrature::P).sqrt();
        let sd_q = state.variance(Quadrature::Q).sqrt();
        let tags = tags_for(len, checks);
        let mut rng = simulation_rng(self.seed, block);
        let symbols = tags
            .iter()
            .map(|tag| {
                let z: f64 = rng.sample(StandardNormal);
                let sd = if *tag == Tag::Check { sd_q } else { sd_p };
                self.partition.index_of(sd * z)
            })
            .collect();
        SampleBlock::new(
            self.partition,
            symbols,
            tags,
            SourceInfo {
                description: state.to_string(),
                seed: Some(self.seed),
            },
        )
    }
}

/// Pre-recorded outcomes of a single quadrature, split into data and checks
/// after the fact, as when switching is emulated on recorded data.
#[derive(Debug, Clone)]
pub struct RecordedSource {
    partition: Partition,
    symbols: Vec<i32>,
    cursor: usize,
    description: String,
}

impl RecordedSource {
    pub fn new(block: SampleBlock) -> Self {
        Self {
            partition: *block.partition(),
            description: block.source().description.clone(),
            symbols: block.symbols().to_vec(),
            cursor: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.symbols.len() - self.cursor
    }
}

impl QuadratureSource for RecordedSource {
    fn partition(&self) -> Partition {
        self.partition
    }

    fn measure(&mut self, _block: u64, len: usize, checks: &[u64]) -> Result<SampleBlock> {
        if len > self.remaining() {
            return Err(Error::InsufficientData {
                needed: len as u64,
                available: self.remaining() as u64,
            });
        }
        let symbols = self.symbols[self.cursor..self.cursor + len].to_vec();
        self.cursor += len;
        SampleBlock::new(
            self.partition,
            symbols,
            tags_for(len, checks),
            SourceInfo {
                description: self.description.clone(),
                seed: None,
            },
        )
    }
}

/// Per-block protocol record.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockTrace {
    pub index: u64,
    pub start: u64,
    pub len: u64,
    pub n_q: u64,
    pub t_bits: u64,
    /// Seed bits actually drawn, rejected draws included.
    pub seed_bits_drawn: u64,
    pub h_inf: f64,
    pub h_max: f64,
    pub h_low: f64,
    pub r_sec: f64,
    pub extracted_bits: u64,
    pub reinvested_bits: u64,
}

/// Outcome of a protocol run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    /// Certificate over all check and data outcomes of completed blocks.
    pub entropy: Option<EntropyReport>,
    /// Measurements in completed blocks.
    pub m: u64,
    pub n_q: u64,
    /// Seed cost summed over blocks.
    pub t_bits: u64,
    /// `secure_rate(m, n_q, entropy.h_low, t_bits)`.
    pub r_sec: f64,
    /// Output bits delivered, reinvested bits excluded.
    pub extracted_bits: u64,
    pub seed_bits_drawn: u64,
    pub seed_bits_reinvested: u64,
    pub blocks: Vec<BlockTrace>,
    /// Why the run stopped early, if it did.
    pub aborted: Option<String>,
}

/// Report plus the delivered output bits.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub bits: BitBuf,
}

/// Runs the protocol block by block.
///
/// Each block draws its check instants from `pool`, has the source measure
/// them, certifies the block from its own checks and, when an extractor is
/// given and the block bound is positive, hashes the block's data symbols
/// at that bound. Check outcomes are never output. Running out of seed ends
/// the run with a partial report.
pub fn run_protocol<S: QuadratureSource + ?Sized>(
    config: &ProtocolConfig,
    source: &mut S,
    pool: &mut SeedPool,
    mut extractor: Option<&mut Extractor>,
) -> Result<RunOutput> {
    config.validate()?;
    if source.partition() != config.partition {
        return Err(Error::InvalidParameter("source partition differs from configuration"));
    }
    let mut bits = BitBuf::new();
    let mut all_data = BinCounts::zeros(config.partition);
    let mut all_checks = BinCounts::zeros(config.partition);
    let mut blocks = Vec::new();
    let mut aborted = None;
    let (mut start, mut reinvested, mut drawn_total) = (0u64, 0u64, 0u64);

    for (index, len) in config.block_lengths().into_iter().enumerate() {
        let index = index as u64;
        let n_q = config.check_count.resolve(len);
        let t = seed_cost(len, n_q)?;
        let before = pool.consumed();
        let checks = match select_check_instants(len, n_q, pool) {
            Ok(c) => c,
            Err(e @ Error::SeedExhausted { .. }) => {
                aborted = Some(alloc::format!("block {index}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let drawn = (pool.consumed() - before) as u64;
        drawn_total += drawn;
        let samples = source.measure(index, len as usize, &checks)?;
        let (data, check_counts) = split_counts(&samples, &checks)?;
        let report = certify_counts(&data, &check_counts, config.estimator)?;
        all_data.merge(&data)?;
        all_checks.merge(&check_counts)?;

        let mut extracted = 0u64;
        let mut block_reinvested = 0u64;
        if let Some(ex) = extractor.as_deref_mut() {
            if report.h_low > 0.0 {
                let b = ex.spec().b as f64;
                let data_symbols: Vec<i32> = samples.tagged(Tag::Data).collect();
                let mut out = BitBuf::new();
                match ex.extract(&data_symbols, &config.partition, report.h_low.min(b), &mut out) {
                    Ok(_) | Err(Error::NothingExtractable { .. }) => {}
                    Err(e) => return Err(e),
                }
                let mut skip = 0;
                if config.reinvest {
                    skip = out.len().min(t as usize);
                    pool.extend(&out.slice(0, skip));
                    block_reinvested = skip as u64;
                }
                bits.extend_from(&out.slice(skip, out.len() - skip));
                extracted = (out.len() - skip) as u64;
            }
        }
        reinvested += block_reinvested;
        blocks.push(BlockTrace {
            index,
            start,
            len,
            n_q,
            t_bits: t,
            seed_bits_drawn: drawn,
            h_inf: report.h_inf,
            h_max: report.h_max,
            h_low: report.h_low,
            r_sec: secure_rate(len, n_q, report.h_low, t),
            extracted_bits: extracted,
            reinvested_bits: block_reinvested,
        });
        start += len;
    }

    let m: u64 = blocks.iter().map(|b| b.len).sum();
    let n_q: u64 = blocks.iter().map(|b| b.n_q).sum();
    let t_bits: u64 = blocks.iter().map(|b| b.t_bits).sum();
    let entropy = if blocks.is_empty() {
        None
    } else {
        Some(certify_counts(&all_data, &all_checks, config.estimator)?)
    };
    let r_sec = entropy.map_or(0.0, |e| secure_rate(m, n_q, e.h_low, t_bits));
    Ok(RunOutput {
        report: RunReport {
            entropy,
            m,
            n_q,
            t_bits,
            r_sec,
            extracted_bits: bits.len() as u64,
            seed_bits_drawn: drawn_total,
            seed_bits_reinvested: reinvested,
            blocks,
            aborted,
        },
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{ExtractorSpec, MatrixMode};
    use crate::state::BinConvention;
    use alloc::vec;

    fn offset(j: u32, var: f64) -> Partition {
        Partition::from_bit_depth(j, 10.5 * var.sqrt(), BinConvention::Offset).unwrap()
    }

    #[test]
    fn integer_square_roots() {
        for (m, r) in [(1, 1), (2, 2), (4, 2), (5, 3), (1 << 22, 2048), ((1 << 22) + 1, 2049), (615_514_112, 24_810)] {
            assert_eq!(ceil_sqrt(m), r, "m={m}");
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(secure_rate(1000, 32, -0.5, 10), 0.0);
        assert_eq!(secure_rate(1000, 32, 0.0, 0), 0.0);
        let t = seed_cost(615_514_112, 24_810).unwrap();
        let r = secure_rate(615_514_112, 24_810, 1.3629, t);
        assert!((1.360..=1.363).contains(&r), "{r}");
        let far = secure_rate(1 << 40, 1 << 20, 1.3629, seed_cost(1 << 40, 1 << 20).unwrap());
        assert!((far - 1.3629).abs() < 1e-4);
    }

    #[test]
    fn seed_pool_accounting() {
        let mut pool = SeedPool::from_bytes(&[0b1010_0101, 0xff]);
        assert_eq!(pool.take(4).unwrap(), BigUint::from(5u32));
        assert_eq!(pool.remaining(), 12);
        assert!(matches!(pool.take(13), Err(Error::SeedExhausted { needed: 13, available: 12 })));
        pool.extend(&BitBuf::from_bools([true]));
        assert_eq!(pool.take(13).unwrap(), BigUint::from(0b1_1111_1111_1010u32));
        assert_eq!(pool.consumed(), 17);
    }

    #[test]
    fn selection_rejects_out_of_range_draws() {
        // C(5,2) = 10 needs 4 bits; 15 is rejected, 9 is accepted.
        let mut pool = SeedPool::new(BitBuf::from_words(vec![0b1001_1111], 8));
        assert_eq!(select_check_instants(5, 2, &mut pool).unwrap(), vec![3, 4]);
        assert_eq!(pool.consumed(), 8);
        let mut short = SeedPool::new(BitBuf::from_words(vec![0b1111], 4));
        assert!(matches!(select_check_instants(5, 2, &mut short), Err(Error::SeedExhausted { .. })));
    }

    #[test]
    fn block_layout() {
        let p = offset(5, 0.677);
        let mut c = ProtocolConfig::new(10_000, p);
        c.block_len = 4_000;
        assert_eq!(c.block_lengths(), vec![4_000, 4_000, 2_000]);
        c.measurements = 8_003;
        assert_eq!(c.block_lengths(), vec![4_000, 4_003]);
        c.validate().unwrap();
        c.estimator = Estimator::Exact;
        assert!(c.validate().is_err());
    }

    #[test]
    fn certify_rejects_inconsistent_tags() {
        let p = offset(3, 0.677);
        let block = SampleBlock::new(p, vec![0, 1, 2, -1], vec![Tag::Data, Tag::Check, Tag::Data, Tag::Data], SourceInfo {
            description: String::new(),
            seed: None,
        })
        .unwrap();
        assert!(matches!(certify(&block, &[2], Estimator::Plugin), Err(Error::TagMismatch { position: 1 })));
        assert!(matches!(certify(&block, &[1, 3], Estimator::Plugin), Err(Error::TagMismatch { position: 3 })));
        assert!(matches!(certify(&block, &[], Estimator::Plugin), Err(Error::TagMismatch { .. })));
    }

    #[test]
    fn degenerate_checks_give_overlap_term() {
        let p = offset(5, 0.677);
        let data = BinCounts::from_symbols(p, [0, 1, 2, 3]).unwrap();
        let checks = BinCounts::from_symbols(p, [4; 50]).unwrap();
        let r = certify_counts(&data, &checks, Estimator::Plugin).unwrap();
        assert_eq!(r.h_max, 0.0);
        assert_eq!(r.h_low, r.overlap.neg_log2());
        assert_eq!(r.h_inf, 2.0);
    }

    #[test]
    fn exact_certificate_is_entropy_composition() {
        let p = offset(5, 0.677);
        let state = GaussianState::empirical(0.677).unwrap();
        let r = exact_certificate(&state, &p, 1000).unwrap();
        let d = bin_probabilities(0.677, &p).unwrap();
        let b = min_entropy_lower_bound(p.bin_width(), p.bin_width(), max_entropy(&d).unwrap()).unwrap();
        assert_eq!(r.h_low, b.h_low);
        assert_eq!(r.h_inf, classical_min_entropy(&d).unwrap());
    }

    fn run(seed: u64, m: u64, extract: bool) -> RunOutput {
        let p = offset(5, 0.677);
        let mut cfg = ProtocolConfig::new(m, p);
        cfg.block_len = 1 << 16;
        let mut src = SimulatedSource::new(GaussianState::empirical(0.677).unwrap(), p, seed);
        let mut pool = SeedPool::simulated(1 << 16, seed);
        let spec = ExtractorSpec::new(10_000, 5, MatrixMode::Fixed, b"k".to_vec()).unwrap();
        let mut ex = Extractor::new(spec);
        run_protocol(&cfg, &mut src, &mut pool, extract.then_some(&mut ex)).unwrap()
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run(3, 200_000, true);
        let b = run(3, 200_000, true);
        assert_eq!(a.report, b.report);
        assert_eq!(a.bits, b.bits);
        assert_ne!(run(4, 200_000, false).report, a.report);
    }

    #[test]
    fn report_accounting() {
        let out = run(5, 200_000, true);
        let r = &out.report;
        assert_eq!(r.blocks.len(), 3);
        assert_eq!(r.m, 200_000);
        assert_eq!(r.n_q, r.blocks.iter().map(|b| b.n_q).sum::<u64>());
        let e = r.entropy.unwrap();
        assert_eq!(r.r_sec, secure_rate(r.m, r.n_q, e.h_low, r.t_bits));
        assert!(r.r_sec <= e.h_low);
        assert_eq!(out.bits.len() as u64, r.extracted_bits);
        assert_eq!(r.extracted_bits, r.blocks.iter().map(|b| b.extracted_bits).sum::<u64>());
        assert!(r.seed_bits_drawn >= r.t_bits);
        assert!(r.aborted.is_none());
    }

    #[test]
    fn seed_exhaustion_yields_partial_report() {
        let p = offset(5, 0.677);
        let mut cfg = ProtocolConfig::new(300_000, p);
        cfg.block_len = 100_000;
        let mut src = SimulatedSource::new(GaussianState::empirical(0.677).unwrap(), p, 1);
        let t = seed_cost(100_000, 317).unwrap() as usize;
        let mut pool = SeedPool::simulated(t + 10, 1);
        let out = run_protocol(&cfg, &mut src, &mut pool, None).unwrap();
        assert!(out.report.blocks.len() <= 1);
        assert!(out.report.aborted.is_some());
    }

    #[test]
    fn reinvestment_sustains_selection() {
        let p = offset(5, 0.677);
        let mut cfg = ProtocolConfig::new(400_000, p);
        cfg.block_len = 100_000;
        cfg.reinvest = true;
        let t = seed_cost(100_000, 317).unwrap() as usize;
        let mut src = SimulatedSource::new(GaussianState::empirical(0.677).unwrap(), p, 2);
        let mut pool = SeedPool::simulated(t + 200, 2);
        let spec = ExtractorSpec::new(10_000, 5, MatrixMode::Fixed, b"r".to_vec()).unwrap();
        let mut ex = Extractor::new(spec);
        let out = run_protocol(&cfg, &mut src, &mut pool, Some(&mut ex)).unwrap();
        assert!(out.report.aborted.is_none(), "{:?}", out.report.aborted);
        assert_eq!(out.report.blocks.len(), 4);
        assert!(out.report.seed_bits_reinvested > 0);
    }

    #[test]
    fn recorded_source_runs_out() {
        let p = offset(5, 0.677);
        let block = crate::state::sample_quadrature(&GaussianState::empirical(0.677).unwrap(), Quadrature::P, &p, 1000, 1)
            .unwrap();
        let mut src = RecordedSource::new(block);
        let s = src.measure(0, 600, &[3, 7]).unwrap();
        assert_eq!(s.tags()[7], Tag::Check);
        assert!(matches!(src.measure(1, 600, &[]), Err(Error::InsufficientData { .. })));
    }
}
