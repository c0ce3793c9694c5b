//! End-to-end runs: source preparation, certification, extraction.

use std::fs;
use std::path::Path;

use cvqrng_core::bits::BitBuf;
use cvqrng_core::combinatorics::seed_cost;
use cvqrng_core::dsp::{autocorrelation, downconvert, simulate_receiver, white_noise, ReceiverModel, SignalStream};
use cvqrng_core::extractor::{output_length, Extractor, ExtractorSpec, MatrixMode};
use cvqrng_core::protocol::{run_protocol, ProtocolConfig, QuadratureSource, RecordedSource, SeedPool, SimulatedSource};
use cvqrng_core::state::{Partition, Quadrature, SampleBlock, SourceInfo};

use crate::config::{PipelineConfig, DEFAULT_MEASUREMENTS};
use crate::error::{CliError, Result};
use crate::rawio::{read_raw, write_raw, RawMeta};
use crate::report::Report;
use crate::sanity::{sanity_tests, MIN_BITS};

/// A configured source, ready to measure.
pub struct PreparedSource {
    pub source: Box<dyn QuadratureSource>,
    pub partition: Partition,
    pub description: String,
    pub measurements: u64,
    /// Autocorrelation of ingested quadrature samples.
    pub autocorrelation: Option<Vec<f64>>,
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Volts to vacuum units: a vacuum quadrature has variance ½.
pub fn to_vacuum_units(volts: &[f64], shot_noise_variance: f64) -> Vec<f64> {
    let scale = (0.5 / shot_noise_variance).sqrt();
    volts.iter().map(|v| v * scale).collect()
}

pub fn prepare_source(cfg: &PipelineConfig) -> Result<PreparedSource> {
    let Some(input) = &cfg.source.input else {
        let state = cfg.state()?;
        let partition = cfg.partition.build(state.variance(Quadrature::P).sqrt())?;
        return Ok(PreparedSource {
            source: Box::new(SimulatedSource::new(state, partition, cfg.source.seed)),
            partition,
            description: format!("simulated {state}"),
            measurements: cfg.protocol.measurements.unwrap_or(DEFAULT_MEASUREMENTS),
            autocorrelation: None,
        });
    };
    let mut stream = read_raw(input)?.to_stream()?;
    if cfg.dsp.enabled {
        let d = &cfg.dsp;
        stream = downconvert(&stream, d.f0, d.cutoff, d.taps, d.factor)?;
    }
    let values = to_vacuum_units(stream.samples(), cfg.source.shot_noise_variance);
    if values.len() < 2 {
        return Err(CliError::InsufficientData(format!("{} holds {} samples", input.display(), values.len())));
    }
    let partition = cfg.partition.build(sample_sd(&values))?;
    let autocorrelation = if values.len() > 10 * cfg.dsp.max_lag {
        Some(autocorrelation(&values, cfg.dsp.max_lag)?)
    } else {
        None
    };
    let available = values.len() as u64;
    let measurements = cfg.protocol.measurements.unwrap_or(available);
    if measurements > available {
        return Err(CliError::InsufficientData(format!(
            "{measurements} measurements requested, {} holds {available}",
            input.display()
        )));
    }
    let description = format!("file {}", input.display());
    let block = SampleBlock::quantize(
        partition,
        &values,
        SourceInfo {
            description: description.clone(),
            seed: None,
        },
    );
    Ok(PreparedSource {
        source: Box::new(RecordedSource::new(block)),
        partition,
        description,
        measurements,
        autocorrelation,
    })
}

pub fn protocol_config(cfg: &PipelineConfig, partition: Partition, measurements: u64) -> ProtocolConfig {
    let mut p = ProtocolConfig::new(measurements, partition);
    p.check_count = cfg.protocol.check_count;
    p.estimator = cfg.protocol.estimator;
    p.block_len = cfg.protocol.block_len;
    p.reinvest = cfg.protocol.reinvest;
    p
}

/// Seed pool from file, or simulated with room for a few rejected draws
/// per block.
pub fn seed_pool(cfg: &PipelineConfig, protocol: &ProtocolConfig) -> Result<SeedPool> {
    if let Some(path) = &cfg.protocol.seed_file {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        return Ok(SeedPool::from_bytes(&bytes));
    }
    let bits = match cfg.protocol.seed_bits {
        Some(b) => b,
        None => {
            let mut total = 256usize;
            for len in protocol.block_lengths() {
                total += 4 * seed_cost(len, protocol.check_count.resolve(len))? as usize;
            }
            total
        }
    };
    Ok(SeedPool::simulated(bits, cfg.protocol.seed))
}

pub fn extractor(cfg: &PipelineConfig) -> Result<Extractor> {
    let e = &cfg.extractor;
    let spec = ExtractorSpec::new(e.n, cfg.symbol_bits(), e.mode, e.matrix_seed.as_bytes().to_vec())?.with_margin(e.margin);
    let mut ex = Extractor::new(spec);
    if e.mode == MatrixMode::TrueRandom {
        let path = e.matrix_bits_file.as_deref().ok_or_else(|| CliError::Validation("true-random mode needs matrix_bits_file".into()))?;
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        ex.supply_matrix_bits(&BitBuf::from_bytes(&bytes, bytes.len() * 8));
    }
    Ok(ex)
}

/// Result of `certify` or `extract`.
pub struct PipelineRun {
    pub report: Report,
    pub bits: Option<BitBuf>,
    pub autocorrelation: Option<Vec<f64>>,
}

/// Certifies, and extracts when `extract` is set.
pub fn run(cfg: &PipelineConfig, extract: bool) -> Result<PipelineRun> {
    cfg.validate()?;
    let mut prepared = prepare_source(cfg)?;
    let protocol = protocol_config(cfg, prepared.partition, prepared.measurements);
    protocol.validate()?;
    let mut pool = seed_pool(cfg, &protocol)?;
    let mut ex = if extract { Some(extractor(cfg)?) } else { None };
    let out = run_protocol(&protocol, prepared.source.as_mut(), &mut pool, ex.as_mut())?;
    let (n, b, margin) = (cfg.extractor.n, cfg.symbol_bits(), cfg.extractor.margin);
    let hash_len = |t: &cvqrng_core::protocol::BlockTrace| {
        (extract && t.h_low > 0.0)
            .then(|| output_length(n, t.h_low.min(b as f64), b, margin).ok())
            .flatten()
    };
    let mut report = Report::new(cfg.clone(), prepared.description, prepared.partition.bin_width(), &out.report, hash_len);
    let bits = if extract {
        if out.bits.len() >= MIN_BITS {
            report.sanity = sanity_tests(&out.bits)?;
        }
        Some(out.bits)
    } else {
        None
    };
    Ok(PipelineRun {
        report,
        bits,
        autocorrelation: prepared.autocorrelation,
    })
}

/// Receiver waveform (or baseband quadrature samples) for the configured
/// state, in volts.
pub fn simulate_signal(cfg: &PipelineConfig, baseband: bool) -> Result<SignalStream> {
    cfg.validate()?;
    let s = &cfg.source;
    let state = cfg.state()?;
    let signal_variance = 2.0 * s.shot_noise_variance * state.variance(Quadrature::P);
    if baseband {
        let clean = white_noise(s.samples, signal_variance, s.sample_rate, s.seed, 0)?;
        let noise = white_noise(s.samples, s.electronic_variance, s.sample_rate, s.seed, 3)?;
        let samples = clean.samples().iter().zip(noise.samples()).map(|(a, b)| a + b).collect();
        return Ok(SignalStream::new(samples, s.sample_rate, clean.origin())?);
    }
    let model = ReceiverModel {
        sample_rate: s.sample_rate,
        f0: cfg.dsp.f0,
        bandwidth: 2.0 * cfg.dsp.cutoff,
        signal_variance,
        electronic_variance: s.electronic_variance,
        taps: cfg.dsp.taps,
    };
    Ok(simulate_receiver(&model, s.samples, s.seed)?)
}

pub fn simulate_to_file(cfg: &PipelineConfig, baseband: bool, path: &Path) -> Result<RawMeta> {
    let stream = simulate_signal(cfg, baseband)?;
    write_raw(path, &stream, cfg.source.full_scale, cfg.source.adc_bits)
}

/// Downconverts a raw waveform file into a baseband file at the same full
/// scale, returning the autocorrelation of the output.
pub fn downconvert_file(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<Vec<f64>> {
    cfg.validate()?;
    let raw = read_raw(input)?;
    let d = &cfg.dsp;
    let out = downconvert(&raw.to_stream()?, d.f0, d.cutoff, d.taps, d.factor)?;
    if out.len() <= 10 * d.max_lag {
        return Err(CliError::InsufficientData(format!(
            "{} samples after downconversion, need more than {}",
            out.len(),
            10 * d.max_lag
        )));
    }
    write_raw(output, &out, raw.meta.full_scale, 16)?;
    Ok(autocorrelation(out.samples(), d.max_lag)?)
}
