//! Pipeline configuration. Every field has a default, a TOML file may set
//! any subset, and command-line flags override both.

use std::fs;
use std::path::{Path, PathBuf};

use cvqrng_core::dsp::DEFAULT_TAPS;
use cvqrng_core::entropy::Estimator;
use cvqrng_core::extractor::MatrixMode;
use cvqrng_core::protocol::CheckCount;
use cvqrng_core::state::{BinConvention, GaussianState, Partition};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: SourceConfig,
    pub dsp: DspConfig,
    pub partition: PartitionConfig,
    pub protocol: ProtocolSection,
    pub extractor: ExtractorSection,
    pub output: OutputConfig,
}

/// Where quadrature outcomes come from: a simulated state, or a raw file
/// when `input` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// `vacuum`, `thermal:MU`, `squeezed:ZETA` or `empirical:VARIANCE`.
    pub state: String,
    pub seed: u64,
    pub input: Option<PathBuf>,
    /// Voltage variance of one vacuum quadrature (variance ½), in V².
    pub shot_noise_variance: f64,
    /// White electronic noise added by `simulate`, in V².
    pub electronic_variance: f64,
    /// Samples written by `simulate`.
    pub samples: usize,
    pub sample_rate: f64,
    /// ADC full scale of raw files, in volts.
    pub full_scale: f64,
    pub adc_bits: u32,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            state: "empirical:0.677".into(),
            seed: 1,
            input: None,
            shot_noise_variance: 1e-4,
            electronic_variance: 0.0,
            samples: 1 << 20,
            sample_rate: 5e9,
            full_scale: 0.1,
            adc_bits: 16,
        }
    }
}

/// Downconversion of raw receiver waveforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    /// Whether ingested files hold receiver waveforms that still need
    /// downconversion, rather than baseband quadrature samples.
    pub enabled: bool,
    pub f0: f64,
    pub cutoff: f64,
    pub taps: usize,
    pub factor: usize,
    /// Lags of the autocorrelation trace.
    pub max_lag: usize,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            f0: 1.055e9,
            cutoff: 625e6,
            taps: DEFAULT_TAPS,
            factor: 4,
            max_lag: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub bit_depth: u32,
    /// Full scale in units of the source standard deviation; ignored when
    /// `p_max` is set.
    pub p_max_sigmas: f64,
    /// Full scale in vacuum units.
    pub p_max: Option<f64>,
    pub convention: BinConvention,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            bit_depth: 5,
            p_max_sigmas: 10.5,
            p_max: None,
            convention: BinConvention::Offset,
        }
    }
}

impl PartitionConfig {
    /// Partition for a source of standard deviation `sigma`.
    pub fn build(&self, sigma: f64) -> Result<Partition> {
        let p_max = self.p_max.unwrap_or(self.p_max_sigmas * sigma);
        Ok(Partition::from_bit_depth(self.bit_depth, p_max, self.convention)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Total measurements; all of an input file when unset.
    pub measurements: Option<u64>,
    pub check_count: CheckCount,
    pub estimator: Estimator,
    pub block_len: u64,
    pub reinvest: bool,
    /// Seed of the simulated seed pool.
    pub seed: u64,
    /// Size of the simulated seed pool; sized from the run when unset.
    pub seed_bits: Option<usize>,
    /// Seed pool read from a file instead of simulated.
    pub seed_file: Option<PathBuf>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            measurements: None,
            check_count: CheckCount::SquareRoot,
            estimator: Estimator::Bayesian,
            block_len: 1 << 22,
            reinvest: false,
            seed: 1,
            seed_bits: None,
            seed_file: None,
        }
    }
}

/// Measurements of a simulated run when none are configured.
pub const DEFAULT_MEASUREMENTS: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSection {
    /// Input bits per hash block.
    pub n: usize,
    /// Bits per encoded symbol; the partition bit depth when unset.
    pub b: Option<u32>,
    pub mode: MatrixMode,
    pub matrix_seed: String,
    pub margin: f64,
    /// Matrix bits for `true-random` mode, packed least significant first.
    pub matrix_bits_file: Option<PathBuf>,
}

impl Default for ExtractorSection {
    fn default() -> Self {
        Self {
            n: 10_000,
            b: None,
            mode: MatrixMode::PerBlock,
            matrix_seed: "cvqrng".into(),
            margin: 0.0,
            matrix_bits_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory receiving `report.json`, `blocks.csv`,
    /// `autocorrelation.csv` and `bits.bin`.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Parses `vacuum`, `thermal:MU`, `squeezed:ZETA` or `empirical:VARIANCE`.
pub fn parse_state(text: &str) -> Result<GaussianState> {
    let bad = || CliError::Validation(format!("unknown state `{text}`"));
    let (kind, arg) = match text.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (text.trim(), None),
    };
    let state = match (kind, arg) {
        ("vacuum", None) => GaussianState::vacuum(),
        ("thermal", Some(mu)) => GaussianState::thermal(mu)?,
        ("squeezed", Some(zeta)) => GaussianState::squeezed(zeta)?,
        ("empirical", Some(var)) => GaussianState::empirical(var)?,
        _ => return Err(bad()),
    };
    Ok(state)
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn state(&self) -> Result<GaussianState> {
        parse_state(&self.source.state)
    }

    /// Symbol width of the extractor input.
    pub fn symbol_bits(&self) -> u32 {
        self.extractor.b.unwrap_or(self.partition.bit_depth)
    }

    /// Range checks done before any work starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CliError::Validation(what.into()));
        self.state()?;
        let s = &self.source;
        if let Some(input) = &s.input {
            if !input.is_file() {
                return Err(CliError::Validation(format!("input {} does not exist", input.display())));
            }
        }
        if !(s.shot_noise_variance > 0.0 && s.shot_noise_variance.is_finite()) {
            return bad("shot_noise_variance must be finite and > 0");
        }
        if !(s.electronic_variance >= 0.0 && s.electronic_variance.is_finite()) {
            return bad("electronic_variance must be finite and >= 0");
        }
        if !(s.sample_rate > 0.0 && s.sample_rate.is_finite()) {
            return bad("sample_rate must be finite and > 0");
        }
        if !(s.full_scale > 0.0 && s.full_scale.is_finite()) {
            return bad("full_scale must be finite and > 0");
        }
        if !(1..=16).contains(&s.adc_bits) {
            return bad("adc_bits must be within 1..=16");
        }
        let d = &self.dsp;
        if d.taps < 3 || d.taps % 2 == 0 {
            return bad("taps must be odd and >= 3");
        }
        if d.factor == 0 {
            return bad("downsampling factor must be >= 1");
        }
        if !(d.cutoff > 0.0 && d.f0 >= 0.0) {
            return bad("cutoff must be > 0 and f0 >= 0");
        }
        let p = &self.partition;
        if !(1..=16).contains(&p.bit_depth) {
            return bad("bit_depth must be within 1..=16");
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(p.p_max_sigmas) || p.p_max.is_some_and(|x| !positive(x)) {
            return bad("p_max and p_max_sigmas must be > 0");
        }
        let pr = &self.protocol;
        if pr.measurements == Some(0) || pr.block_len == 0 {
            return bad("measurements and block_len must be > 0");
        }
        if pr.estimator == Estimator::Exact {
            return bad("estimator must be plugin or bayesian");
        }
        if let Some(f) = &pr.seed_file {
            if !f.is_file() {
                return Err(CliError::Validation(format!("seed file {} does not exist", f.display())));
            }
        }
        let e = &self.extractor;
        let b = self.symbol_bits();
        if !(1..=32).contains(&b) {
            return bad("symbol bits must be within 1..=32");
        }
        if e.n == 0 || e.n % b as usize != 0 {
            return bad("extractor n must be a positive multiple of the symbol bits");
        }
        if !(e.margin >= 0.0 && e.margin.is_finite()) {
            return bad("margin must be finite and >= 0");
        }
        if e.mode == MatrixMode::TrueRandom && e.matrix_bits_file.is_none() {
            return bad("true-random mode needs matrix_bits_file");
        }
        Ok(())
    }
}
