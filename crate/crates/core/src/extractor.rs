//! Two-universal hashing by random binary matrices.
//!
//! An input block of `n` bits is multiplied by an `n × l` matrix over GF(2).
//! Row `i` of the matrix is XORed into the output whenever input bit `i` is
//! set, so the product costs one pass over the set bits.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::bits::BitBuf;
use crate::state::Partition;
use crate::{Error, Result};

/// Dense binary matrix stored row by row, `l` bits per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(64);
        Self {
            rows,
            cols,
            stride,
            words: alloc::vec![0; rows * stride],
        }
    }

    /// `n × n` matrix with ones on the diagonal.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.rows && col < self.cols, "matrix index out of range");
        self.words[row * self.stride + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.rows && col < self.cols, "matrix index out of range");
        let w = &mut self.words[row * self.stride + col / 64];
        let mask = 1u64 << (col % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Packed words of one row; bits past `cols` are zero.
    pub fn row(&self, row: usize) -> &[u64] {
        &self.words[row * self.stride..(row + 1) * self.stride]
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Builds a matrix from a row-major bit string of length `rows·cols`.
    pub fn from_bits(bits: &BitBuf, rows: usize, cols: usize) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: bits.len(),
            });
        }
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for (k, w) in m.words[r * m.stride..(r + 1) * m.stride].iter_mut().enumerate() {
                let start = r * cols + 64 * k;
                let count = (cols - 64 * k).min(64) as u32;
                *w = bits.read_bits(start, count);
            }
        }
        Ok(m)
    }

    fn fill_random<R: Rng>(&mut self, rng: &mut R) {
        let tail = self.cols % 64;
        let mask = if tail == 0 { u64::MAX } else { (1u64 << tail) - 1 };
        rng.fill(self.words.as_mut_slice());
        for row in self.words.chunks_exact_mut(self.stride) {
            if let Some(last) = row.last_mut() {
                *last &= mask;
            }
        }
    }

    /// Rank over GF(2), by elimination on a copy.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.rows).map(|r| self.row(r).to_vec()).collect();
        let mut rank = 0;
        for col in 0..self.cols {
            let (w, bit) = (col / 64, 1u64 << (col % 64));
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & bit != 0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
                }
            }
            rank += 1;
        }
        rank
    }
}

/// How hash matrices are obtained for successive input blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MatrixMode {
    /// A fresh pseudo-random matrix for every block.
    #[default]
    PerBlock,
    /// One pseudo-random matrix reused for all blocks.
    Fixed,
    /// A fresh Toeplitz matrix per block, `n + l − 1` seed bits each.
    /// Extension for throughput, not a full random matrix.
    Toeplitz,
    /// Matrix bits taken verbatim from a caller-supplied random string,
    /// `n·l` bits per block.
    TrueRandom,
}

/// Expands `(seed, index)` into a ChaCha8 key: `SHA-256(seed ‖ index_le)`.
pub fn matrix_rng(seed: &[u8], index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed);
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Pseudo-random `n × l` matrix number `index` derived from `seed`.
pub fn random_matrix(seed: &[u8], index: u64, n: usize, l: usize) -> Result<BitMatrix> {
    if seed.is_empty() {
        return Err(Error::InvalidParameter("matrix seed must be non-empty"));
    }
    check_shape(n, l)?;
    let mut m = BitMatrix::zeros(n, l);
    m.fill_random(&mut matrix_rng(seed, index));
    Ok(m)
}

/// Toeplitz matrix `T[i][j] = s[i − j + l − 1]` from `n + l − 1` bits.
pub fn toeplitz_matrix(diagonals: &BitBuf, n: usize, l: usize) -> Result<BitMatrix> {
    check_shape(n, l)?;
    if diagonals.len() != n + l - 1 {
        return Err(Error::LengthMismatch {
            expected: n + l - 1,
            actual: diagonals.len(),
        });
    }
    // Row i is s[i + l − 1], s[i + l − 2], …, s[i]; reversing s turns each
    // row into a contiguous slice.
    let reversed = BitBuf::from_bools((0..diagonals.len()).rev().map(|k| diagonals.get(k)));
    let mut m = BitMatrix::zeros(n, l);
    for i in 0..n {
        let start = n - 1 - i;
        for k in 0..m.stride {
            let count = (l - 64 * k).min(64) as u32;
            m.words[i * m.stride + k] = reversed.read_bits(start + 64 * k, count);
        }
    }
    Ok(m)
}

/// Pseudo-random diagonals `s` of Toeplitz matrix number `index`.
pub fn toeplitz_diagonals(seed: &[u8], index: u64, n: usize, l: usize) -> Result<BitBuf> {
    if seed.is_empty() {
        return Err(Error::InvalidParameter("matrix seed must be non-empty"));
    }
    check_shape(n, l)?;
    let len = n + l - 1;
    let mut rng = matrix_rng(seed, index);
    let words = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
    Ok(BitBuf::from_words(words, len))
}

/// Pseudo-random Toeplitz matrix number `index` derived from `seed`.
pub fn random_toeplitz(seed: &[u8], index: u64, n: usize, l: usize) -> Result<BitMatrix> {
    toeplitz_matrix(&toeplitz_diagonals(seed, index, n, l)?, n, l)
}

/// Product with the Toeplitz matrix of `diagonals` without building it.
pub fn hash_toeplitz(input: &BitBuf, diagonals: &BitBuf, l: usize) -> Result<BitBuf> {
    let n = input.len();
    check_shape(n, l)?;
    if diagonals.len() != n + l - 1 {
        return Err(Error::LengthMismatch {
            expected: n + l - 1,
            actual: diagonals.len(),
        });
    }
    let reversed = BitBuf::from_bools((0..diagonals.len()).rev().map(|k| diagonals.get(k)));
    let stride = l.div_ceil(64);
    let mut acc = alloc::vec![0u64; stride];
    for (wi, &word) in input.words().iter().enumerate() {
        let mut w = word;
        while w != 0 {
            let i = wi * 64 + w.trailing_zeros() as usize;
            w &= w - 1;
            let start = n - 1 - i;
            for (k, a) in acc.iter_mut().enumerate() {
                *a ^= reversed.read_bits(start + 64 * k, (l - 64 * k).min(64) as u32);
            }
        }
    }
    Ok(BitBuf::from_words(acc, l))
}

fn check_shape(n: usize, l: usize) -> Result<()> {
    if l == 0 || l > n {
        return Err(Error::InvalidParameter("matrix needs 0 < l <= n"));
    }
    Ok(())
}

/// `output_j = ⊕_i input_i · M[i][j]`.
pub fn hash_block(input: &BitBuf, matrix: &BitMatrix) -> Result<BitBuf> {
    if input.len() != matrix.rows {
        return Err(Error::LengthMismatch {
            expected: matrix.rows,
            actual: input.len(),
        });
    }
    let mut acc = alloc::vec![0u64; matrix.stride];
    for (wi, &word) in input.words().iter().enumerate() {
        let mut w = word;
        while w != 0 {
            let row = wi * 64 + w.trailing_zeros() as usize;
            w &= w - 1;
            acc.iter_mut().zip(matrix.row(row)).for_each(|(a, r)| *a ^= r);
        }
    }
    Ok(BitBuf::from_words(acc, matrix.cols))
}

/// Below this many inputs, [`hash_batch`] hashes each block directly.
const TABLE_BATCH_MIN: usize = 32;

/// Blocks hashed together against a fixed matrix.
const BATCH_BLOCKS: usize = 4096;

/// Hashes many inputs against one matrix.
///
/// Rows are taken eight at a time: the 256 XOR combinations of each group
/// are tabulated once and every input then needs a single row-sized XOR per
/// input byte. The result equals [`hash_block`] on each input.
pub fn hash_batch(inputs: &[BitBuf], matrix: &BitMatrix) -> Result<Vec<BitBuf>> {
    if let Some(bad) = inputs.iter().find(|x| x.len() != matrix.rows) {
        return Err(Error::LengthMismatch {
            expected: matrix.rows,
            actual: bad.len(),
        });
    }
    if inputs.len() < TABLE_BATCH_MIN {
        return inputs.iter().map(|x| hash_block(x, matrix)).collect();
    }
    let mut acc = alloc::vec![0u64; inputs.len() * matrix.stride];
    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was just detected.
        unsafe { batch_kernel_avx2(inputs, matrix, &mut acc) };
        return Ok(collect_rows(&acc, matrix));
    }
    batch_kernel(inputs, matrix, &mut acc);
    Ok(collect_rows(&acc, matrix))
}

fn collect_rows(acc: &[u64], matrix: &BitMatrix) -> Vec<BitBuf> {
    acc.chunks_exact(matrix.stride)
        .map(|w| BitBuf::from_words(w.to_vec(), matrix.cols))
        .collect()
}

#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[target_feature(enable = "avx2")]
unsafe fn batch_kernel_avx2(inputs: &[BitBuf], matrix: &BitMatrix, acc: &mut [u64]) {
    batch_kernel(inputs, matrix, acc)
}

#[inline(always)]
fn batch_kernel(inputs: &[BitBuf], matrix: &BitMatrix, acc: &mut [u64]) {
    let s = matrix.stride;
    let mut table = alloc::vec![0u64; 256 * s];
    for base in (0..matrix.rows).step_by(8) {
        let group = (matrix.rows - base).min(8);
        for t in 0..group {
            let row = matrix.row(base + t);
            let half = 1usize << t;
            let (done, rest) = table.split_at_mut(half * s);
            for (dst, src) in rest[..half * s].chunks_exact_mut(s).zip(done.chunks_exact(s)) {
                dst.iter_mut().zip(src.iter().zip(row)).for_each(|(d, (a, r))| *d = a ^ r);
            }
        }
        for (x, a) in inputs.iter().zip(acc.chunks_exact_mut(s)) {
            let byte = (x.words()[base / 64] >> (base % 64) & 0xff) as usize;
            if byte != 0 {
                let t = &table[byte * s..(byte + 1) * s];
                a.iter_mut().zip(t).for_each(|(d, r)| *d ^= r);
            }
        }
    }
}

/// `⌊n·h_low/b − margin⌋` output bits for an `n`-bit block of `b`-bit
/// symbols carrying `h_low` bits of min-entropy each.
pub fn output_length(n: usize, h_low: f64, b: u32, margin: f64) -> Result<usize> {
    if !(h_low > 0.0) {
        return Err(Error::NothingExtractable { h_low });
    }
    if b == 0 || h_low > b as f64 || n % b as usize != 0 {
        return Err(Error::InvalidParameter("need 0 < h_low <= b and b dividing n"));
    }
    let l = libm::floor(n as f64 * h_low / b as f64 - margin);
    if l < 1.0 {
        return Err(Error::NothingExtractable { h_low });
    }
    Ok(l as usize)
}

/// Security margin `2·log₂(1/ε)` of the leftover hash lemma.
pub fn leftover_hash_margin(epsilon: f64) -> f64 {
    -2.0 * crate::special::log2(epsilon)
}

/// Fixed-width offset-binary code of a bin index: `index + M`, saturated to
/// `[0, 2^b − 1]`.
#[inline]
pub fn encode_symbol(index: i32, partition: &Partition, b: u32) -> u64 {
    let max = (1i64 << b) - 1;
    (index as i64 + partition.half_bins() as i64).clamp(0, max) as u64
}

/// Appends the `b`-bit codes of `symbols`, least significant bit first.
pub fn encode_symbols(symbols: &[i32], partition: &Partition, b: u32, out: &mut BitBuf) {
    let mut acc = 0u64;
    let mut filled = 0u32;
    for &s in symbols {
        let code = encode_symbol(s, partition, b);
        acc |= code << filled;
        filled += b;
        if filled >= 64 {
            out.push_bits(acc, 64);
            filled -= 64;
            acc = if filled == 0 { 0 } else { code >> (b - filled) };
        }
    }
    out.push_bits(acc, filled);
}

/// Extractor parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractorSpec {
    /// Input block length in bits.
    pub n: usize,
    /// Bits per encoded symbol.
    pub b: u32,
    pub mode: MatrixMode,
    /// Key material for the pseudo-random modes.
    pub matrix_seed: Vec<u8>,
    /// Bits subtracted before flooring the output length; zero by default.
    pub margin: f64,
}

impl ExtractorSpec {
    pub fn new(n: usize, b: u32, mode: MatrixMode, matrix_seed: Vec<u8>) -> Result<Self> {
        if b == 0 || b > 32 || n == 0 || n % b as usize != 0 {
            return Err(Error::InvalidParameter("need 0 < b <= 32 and b dividing n"));
        }
        if matrix_seed.is_empty() && mode != MatrixMode::TrueRandom {
            return Err(Error::InvalidParameter("matrix seed must be non-empty"));
        }
        Ok(Self {
            n,
            b,
            mode,
            matrix_seed,
            margin: 0.0,
        })
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    /// Symbols per input block.
    pub fn symbols_per_block(&self) -> usize {
        self.n / self.b as usize
    }

    pub fn output_length(&self, h_low: f64) -> Result<usize> {
        output_length(self.n, h_low, self.b, self.margin)
    }
}

/// Per-block extraction metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HashRecord {
    pub index: u64,
    pub l: usize,
    pub h_low: f64,
}

/// Stateful extractor: numbers input blocks across calls and supplies each
/// with its matrix.
#[derive(Debug, Clone)]
pub struct Extractor {
    spec: ExtractorSpec,
    next_block: u64,
    fixed: Option<(usize, BitMatrix)>,
    random_bits: BitBuf,
    random_cursor: usize,
}

impl Extractor {
    pub fn new(spec: ExtractorSpec) -> Self {
        Self {
            spec,
            next_block: 0,
            fixed: None,
            random_bits: BitBuf::new(),
            random_cursor: 0,
        }
    }

    /// Appends raw random bits for [`MatrixMode::TrueRandom`].
    pub fn supply_matrix_bits(&mut self, bits: &BitBuf) {
        self.random_bits.extend_from(bits);
    }

    pub fn spec(&self) -> &ExtractorSpec {
        &self.spec
    }

    /// Input blocks hashed so far.
    pub fn blocks_done(&self) -> u64 {
        self.next_block
    }

    fn matrix_at(&mut self, l: usize, index: u64) -> Result<BitMatrix> {
        let (seed, n) = (&self.spec.matrix_seed, self.spec.n);
        match self.spec.mode {
            MatrixMode::PerBlock => random_matrix(seed, index, n, l),
            MatrixMode::Toeplitz => random_toeplitz(seed, index, n, l),
            MatrixMode::Fixed => match &self.fixed {
                Some((fl, m)) if *fl == l => Ok(m.clone()),
                _ => {
                    let m = random_matrix(seed, 0, n, l)?;
                    self.fixed = Some((l, m.clone()));
                    Ok(m)
                }
            },
            MatrixMode::TrueRandom => {
                let needed = n * l;
                let available = self.random_bits.len() - self.random_cursor;
                if available < needed {
                    return Err(Error::SeedExhausted {
                        needed: needed as u64,
                        available: available as u64,
                    });
                }
                let bits = self.random_bits.slice(self.random_cursor, needed);
                self.random_cursor += needed;
                BitMatrix::from_bits(&bits, n, l)
            }
        }
    }

    /// Hashes whole `n`-bit blocks of encoded `symbols`, all certified at
    /// `h_low`, appending the output to `out`. The trailing partial block is
    /// discarded.
    pub fn extract(
        &mut self,
        symbols: &[i32],
        partition: &Partition,
        h_low: f64,
        out: &mut BitBuf,
    ) -> Result<Vec<HashRecord>> {
        let l = self.spec.output_length(h_low)?;
        let per_block = self.spec.symbols_per_block();
        let (n, b) = (self.spec.n, self.spec.b);
        let encode = |chunk: &[i32]| {
            let mut input = BitBuf::with_capacity(n);
            encode_symbols(chunk, partition, b, &mut input);
            input
        };
        let mut out_blocks = 0u64;
        if self.spec.mode == MatrixMode::Fixed {
            let matrix = self.matrix_at(l, 0)?;
            for batch in symbols[..symbols.len() / per_block * per_block].chunks(per_block * BATCH_BLOCKS) {
                let inputs: Vec<BitBuf> = batch.chunks_exact(per_block).map(encode).collect();
                for hashed in hash_batch(&inputs, &matrix)? {
                    out.extend_from(&hashed);
                }
            }
        } else {
            for chunk in symbols.chunks_exact(per_block) {
                let hashed = if self.spec.mode == MatrixMode::Toeplitz {
                    let index = self.next_block + out_blocks;
                    let diagonals = toeplitz_diagonals(&self.spec.matrix_seed, index, n, l)?;
                    hash_toeplitz(&encode(chunk), &diagonals, l)?
                } else {
                    let matrix = self.matrix_at(l, self.next_block + out_blocks)?;
                    hash_block(&encode(chunk), &matrix)?
                };
                out.extend_from(&hashed);
                out_blocks += 1;
            }
        }
        let blocks = (symbols.len() / per_block) as u64;
        let records = (self.next_block..self.next_block + blocks)
            .map(|index| HashRecord { index, l, h_low })
            .collect();
        self.next_block += blocks;
        Ok(records)
    }
}

/// One-shot extraction of a symbol sequence certified at `h_low`.
pub fn extract_stream(
    symbols: &[i32],
    partition: &Partition,
    spec: &ExtractorSpec,
    h_low: f64,
) -> Result<(BitBuf, Vec<HashRecord>)> {
    let mut ex = Extractor::new(spec.clone());
    let mut out = BitBuf::new();
    let records = ex.extract(symbols, partition, h_low, &mut out)?;
    Ok((out, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::BinConvention;
    use rand::Rng;

    fn naive(input: &BitBuf, m: &BitMatrix) -> BitBuf {
        BitBuf::from_bools((0..m.cols()).map(|j| {
            (0..m.rows()).fold(false, |acc, i| acc ^ (input.get(i) & m.get(i, j)))
        }))
    }

    fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitBuf {
        BitBuf::from_bools((0..len).map(|_| rng.random::<bool>()))
    }

    #[test]
    fn output_length_examples() {
        assert_eq!(output_length(10_000, 1.3629, 5, 0.0).unwrap(), 2725);
        assert_eq!(output_length(10_000, 5.0, 5, 0.0).unwrap(), 10_000);
        assert_eq!(output_length(10_000, 0.5, 5, 0.0).unwrap(), 1000);
        assert_eq!(output_length(10_000, 0.5, 5, 100.0).unwrap(), 900);
        assert!(matches!(output_length(10_000, 0.0, 5, 0.0), Err(Error::NothingExtractable { .. })));
        assert!(matches!(output_length(10_000, -1.0, 5, 0.0), Err(Error::NothingExtractable { .. })));
        assert!(output_length(10_000, 5.5, 5, 0.0).is_err());
        assert!(output_length(10_001, 1.0, 5, 0.0).is_err());
        assert!((leftover_hash_margin(1e-10) - 66.43856189774725).abs() < 1e-12);
    }

    #[test]
    fn identity_and_zero() {
        let mut rng = matrix_rng(b"t", 0);
        let x = random_bits(&mut rng, 100);
        assert_eq!(hash_block(&x, &BitMatrix::identity(100)).unwrap(), x);
        let m = random_matrix(b"k", 0, 100, 37).unwrap();
        assert_eq!(hash_block(&BitBuf::zeros(100), &m).unwrap(), BitBuf::zeros(37));
        assert!(matches!(
            hash_block(&BitBuf::zeros(99), &m),
            Err(Error::LengthMismatch { expected: 100, actual: 99 })
        ));
    }

    #[test]
    fn product_matches_naive_oracle() {
        let mut rng = matrix_rng(b"oracle", 0);
        for trial in 0..100u64 {
            let n = rng.random_range(1..=64usize);
            let l = rng.random_range(1..=n.min(32));
            let m = random_matrix(b"oracle-matrix", trial, n, l).unwrap();
            let x = random_bits(&mut rng, n);
            assert_eq!(hash_block(&x, &m).unwrap(), naive(&x, &m));
        }
    }

    #[test]
    fn batched_product_matches_single() {
        let mut rng = matrix_rng(b"batch", 0);
        for (n, l) in [(10_000, 2725), (333, 64), (70, 9)] {
            let m = random_matrix(b"batch-m", n as u64, n, l).unwrap();
            let inputs: Vec<BitBuf> = (0..40).map(|_| random_bits(&mut rng, n)).collect();
            let batched = hash_batch(&inputs, &m).unwrap();
            for (x, h) in inputs.iter().zip(&batched) {
                assert_eq!(&hash_block(x, &m).unwrap(), h);
            }
            assert_eq!(hash_batch(&inputs[..3], &m).unwrap(), batched[..3].to_vec());
        }
    }

    #[test]
    fn hashing_is_linear() {
        let mut rng = matrix_rng(b"lin", 0);
        let m = random_matrix(b"lin-m", 0, 640, 200).unwrap();
        for _ in 0..50 {
            let x = random_bits(&mut rng, 640);
            let y = random_bits(&mut rng, 640);
            let mut xy = x.clone();
            xy.xor_assign(&y);
            let mut hx = hash_block(&x, &m).unwrap();
            hx.xor_assign(&hash_block(&y, &m).unwrap());
            assert_eq!(hash_block(&xy, &m).unwrap(), hx);
        }
    }

    #[test]
    fn generator_balance_and_distance() {
        let a = random_matrix(b"seed-a", 0, 10_000, 2725).unwrap();
        let b = random_matrix(b"seed-b", 0, 10_000, 2725).unwrap();
        assert_eq!(a, random_matrix(b"seed-a", 0, 10_000, 2725).unwrap());
        let total = (10_000 * 2725) as f64;
        assert!((a.count_ones() as f64 / total - 0.5).abs() < 0.01);
        let distance: u64 = a.words.iter().zip(&b.words).map(|(x, y)| (x ^ y).count_ones() as u64).sum();
        assert!((distance as f64 / total - 0.5).abs() < 0.01);
        assert_ne!(a, random_matrix(b"seed-a", 1, 10_000, 2725).unwrap());
        assert!(random_matrix(b"", 0, 10, 5).is_err());
    }

    #[test]
    fn random_matrices_have_full_column_rank() {
        let mut full = 0;
        for i in 0..200 {
            let m = random_matrix(b"rank", i, 64, 32).unwrap();
            if m.rank() == 32 {
                full += 1;
            }
        }
        assert!(full >= 198, "{full}");
        assert_eq!(BitMatrix::identity(17).rank(), 17);
    }

    #[test]
    fn toeplitz_structure() {
        let mut rng = matrix_rng(b"toe", 0);
        let (n, l) = (90, 70);
        let s = random_bits(&mut rng, n + l - 1);
        let m = toeplitz_matrix(&s, n, l).unwrap();
        for i in 0..n {
            for j in 0..l {
                assert_eq!(m.get(i, j), s.get(i + l - 1 - j), "({i},{j})");
            }
        }
        assert!(toeplitz_matrix(&s, n, l + 1).is_err());
    }

    #[test]
    fn implicit_toeplitz_product() {
        let mut rng = matrix_rng(b"toe2", 0);
        for (n, l) in [(200, 64), (150, 100), (10_000, 2725)] {
            let s = random_bits(&mut rng, n + l - 1);
            let m = toeplitz_matrix(&s, n, l).unwrap();
            let x = random_bits(&mut rng, n);
            assert_eq!(hash_toeplitz(&x, &s, l).unwrap(), hash_block(&x, &m).unwrap());
        }
    }

    #[test]
    fn matrix_from_row_major_bits() {
        let mut rng = matrix_rng(b"rm", 0);
        let bits = random_bits(&mut rng, 13 * 70);
        let m = BitMatrix::from_bits(&bits, 13, 70).unwrap();
        for i in 0..13 {
            for j in 0..70 {
                assert_eq!(m.get(i, j), bits.get(i * 70 + j));
            }
        }
    }

    #[test]
    fn offset_binary_codes() {
        let p = Partition::from_bit_depth(5, 8.0, BinConvention::Offset).unwrap();
        assert_eq!(encode_symbol(-16, &p, 5), 0);
        assert_eq!(encode_symbol(15, &p, 5), 31);
        assert_eq!(encode_symbol(p.overflow_low(), &p, 5), 0);
        assert_eq!(encode_symbol(p.overflow_high(), &p, 5), 31);
        assert_eq!(encode_symbol(0, &p, 5), 16);
        let mut out = BitBuf::new();
        encode_symbols(&[-16, 15, 0], &p, 5, &mut out);
        assert_eq!(out.len(), 15);
        assert_eq!(out.read_bits(10, 5), 16);
        let syms: Vec<i32> = (0..1000).map(|k| (k * 7919 % 40) - 20).collect();
        let mut fast = BitBuf::new();
        encode_symbols(&syms, &p, 5, &mut fast);
        let mut slow = BitBuf::new();
        for &s in &syms {
            slow.push_bits(encode_symbol(s, &p, 5), 5);
        }
        assert_eq!(fast, slow);
    }

    fn symbols(count: usize, seed: u64, p: &Partition) -> Vec<i32> {
        let mut rng = matrix_rng(&seed.to_le_bytes(), 0);
        (0..count)
            .map(|_| p.index_of(rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.677f64.sqrt()))
            .collect()
    }

    #[test]
    fn stream_block_accounting_and_modes() {
        let p = Partition::from_bit_depth(5, 10.5 * 0.677f64.sqrt(), BinConvention::Offset).unwrap();
        let syms = symbols(4_500, 1, &p);
        for mode in [MatrixMode::PerBlock, MatrixMode::Fixed, MatrixMode::Toeplitz] {
            let spec = ExtractorSpec::new(10_000, 5, mode, b"m".to_vec()).unwrap();
            let (bits, recs) = extract_stream(&syms, &p, &spec, 1.3629).unwrap();
            assert_eq!(recs.len(), 2);
            assert_eq!(bits.len(), 2 * 2725);
            assert_eq!(recs[1].index, 1);
        }
        let spec = ExtractorSpec::new(100, 5, MatrixMode::TrueRandom, Vec::new()).unwrap();
        let mut ex = Extractor::new(spec);
        let mut out = BitBuf::new();
        assert!(matches!(ex.extract(&syms[..20], &p, 1.0, &mut out), Err(Error::SeedExhausted { .. })));
        ex.supply_matrix_bits(&BitBuf::zeros(100 * 20));
        ex.extract(&syms[..20], &p, 1.0, &mut out).unwrap();
        assert_eq!(out, BitBuf::zeros(20));
    }

    #[test]
    fn per_block_h_low_sets_length() {
        let p = Partition::from_bit_depth(5, 10.5 * 0.677f64.sqrt(), BinConvention::Offset).unwrap();
        let syms = symbols(4_000, 2, &p);
        let spec = ExtractorSpec::new(10_000, 5, MatrixMode::PerBlock, b"m".to_vec()).unwrap();
        let mut ex = Extractor::new(spec);
        let mut out = BitBuf::new();
        let a = ex.extract(&syms[..2000], &p, 1.3629, &mut out).unwrap();
        let b = ex.extract(&syms[2000..], &p, 0.5, &mut out).unwrap();
        assert_eq!((a[0].l, b[0].l, b[0].index), (2725, 1000, 1));
        assert_eq!(out.len(), 3725);
    }

    #[test]
    fn extracted_bits_are_unbiased() {
        let p = Partition::from_bit_depth(5, 10.5 * 0.677f64.sqrt(), BinConvention::Offset).unwrap();
        let syms = symbols(200_000, 3, &p);
        let spec = ExtractorSpec::new(10_000, 5, MatrixMode::PerBlock, b"bias".to_vec()).unwrap();
        let (bits, _) = extract_stream(&syms, &p, &spec, 1.3).unwrap();
        let n = bits.len() as f64;
        assert!((bits.count_ones() as f64 / n - 0.5).abs() < 4.0 / n.sqrt());
    }
}
