//! Raw sample files: little-endian `i16` samples plus a JSON sidecar.
//!
//! A code `k` stands for the amplitude `k / 32768 · full_scale`. Captures
//! from ADCs narrower than 16 bits keep their codes in the top `adc_bits`
//! bits.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use cvqrng_core::dsp::{Origin, SignalStream};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Sidecar metadata of a raw sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMeta {
    pub sample_rate_hz: f64,
    /// Amplitude of code −32768, in volts.
    pub full_scale: f64,
    pub adc_bits: u32,
    pub dtype: String,
    pub endianness: String,
}

impl RawMeta {
    pub fn new(sample_rate_hz: f64, full_scale: f64, adc_bits: u32) -> Self {
        Self {
            sample_rate_hz,
            full_scale,
            adc_bits,
            dtype: "i16".into(),
            endianness: "little".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CliError::Format(format!("sidecar: {what}")));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be finite and > 0");
        }
        if !(self.full_scale > 0.0 && self.full_scale.is_finite()) {
            return bad("full_scale must be finite and > 0");
        }
        if !(1..=16).contains(&self.adc_bits) {
            return bad("adc_bits must be within 1..=16");
        }
        if self.dtype != "i16" {
            return bad("dtype must be \"i16\"");
        }
        if self.endianness != "little" {
            return bad("endianness must be \"little\"");
        }
        Ok(())
    }

    /// Amplitude of one code.
    pub fn amplitude(&self, code: i16) -> f64 {
        code as f64 / 32768.0 * self.full_scale
    }

    /// Nearest code on the `adc_bits` grid, clipped to the ADC range.
    pub fn code(&self, amplitude: f64) -> i16 {
        let levels = (1i32 << (self.adc_bits - 1)) as f64;
        let k = (amplitude / self.full_scale * levels).round().clamp(-levels, levels - 1.0);
        ((k as i32) << (16 - self.adc_bits)) as i16
    }
}

/// Sidecar path of a data file: `capture.raw` → `capture.raw.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut name = data.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

/// A raw capture loaded into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCapture {
    pub meta: RawMeta,
    pub codes: Vec<i16>,
}

impl RawCapture {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| self.meta.amplitude(c)).collect()
    }

    pub fn to_stream(&self) -> Result<SignalStream> {
        Ok(SignalStream::new(self.amplitudes(), self.meta.sample_rate_hz, Origin::Ingested)?)
    }
}

pub fn read_raw(path: &Path) -> Result<RawCapture> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Format(format!("{}: sidecar metadata missing", side.display())),
        _ => CliError::io(&side, e),
    })?;
    let meta: RawMeta =
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", side.display())))?;
    meta.validate()?;
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    if bytes.len() % 2 != 0 {
        return Err(CliError::PartialRead {
            path: path.to_path_buf(),
            read: bytes.len() as u64,
            expected: bytes.len() as u64 + 1,
        });
    }
    let codes = bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
    Ok(RawCapture { meta, codes })
}

/// Reads a raw file and its sidecar into a signal in volts.
pub fn ingest_raw(path: &Path) -> Result<SignalStream> {
    read_raw(path)?.to_stream()
}

pub fn write_codes(path: &Path, meta: &RawMeta, codes: &[i16]) -> Result<()> {
    meta.validate()?;
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in codes {
        w.write_all(&c.to_le_bytes()).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&side, json + "\n").map_err(|e| CliError::io(&side, e))
}

/// Quantizes a signal onto the sidecar's grid and writes both files.
pub fn write_raw(path: &Path, stream: &SignalStream, full_scale: f64, adc_bits: u32) -> Result<RawMeta> {
    let meta = RawMeta::new(stream.sample_rate(), full_scale, adc_bits);
    meta.validate()?;
    let codes: Vec<i16> = stream.samples().iter().map(|&x| meta.code(x)).collect();
    write_codes(path, &meta, &codes)?;
    Ok(meta)
}
