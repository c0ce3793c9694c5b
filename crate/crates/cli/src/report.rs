//! JSON run reports and CSV traces.
//!
//! `report.json` holds the configuration, the pooled certificate
//! (`h_inf`, `h_max`, `estimator`, `c`, `h_low`, `tail_error`), the seed
//! accounting (`t_bits`, `r_sec`), one entry per recalibration block and
//! the sanity-test results. Quantities that need at least one completed
//! block are `null` otherwise.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cvqrng_core::bits::BitBuf;
use cvqrng_core::entropy::Estimator;
use cvqrng_core::protocol::{BlockTrace, RunReport};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::sanity::SanityResult;

pub const REPORT_FILE: &str = "report.json";
pub const BLOCKS_FILE: &str = "blocks.csv";
pub const AUTOCORRELATION_FILE: &str = "autocorrelation.csv";
pub const BITS_FILE: &str = "bits.bin";

/// One recalibration block; `l` is the hash output length used, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    #[serde(flatten)]
    pub trace: BlockTrace,
    pub l: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub config: PipelineConfig,
    pub source: String,
    /// Bin width of the partition, vacuum units.
    pub delta: f64,
    pub m: u64,
    pub n_q: u64,
    pub h_inf: Option<f64>,
    pub h_max: Option<f64>,
    pub estimator: Estimator,
    /// Overlap constant.
    pub c: Option<f64>,
    pub h_low: Option<f64>,
    pub tail_error: Option<f64>,
    pub t_bits: u64,
    pub r_sec: f64,
    pub seed_bits_drawn: u64,
    pub seed_bits_reinvested: u64,
    pub extracted_bits: u64,
    pub blocks: Vec<BlockRow>,
    pub sanity: Vec<SanityResult>,
    pub aborted: Option<String>,
}

impl Report {
    pub fn new(config: PipelineConfig, source: String, delta: f64, run: &RunReport, hash_len: impl Fn(&BlockTrace) -> Option<usize>) -> Self {
        let e = run.entropy.as_ref();
        Self {
            source,
            delta,
            m: run.m,
            n_q: run.n_q,
            h_inf: e.map(|e| e.h_inf),
            h_max: e.map(|e| e.h_max),
            estimator: config.protocol.estimator,
            c: e.map(|e| e.overlap.value),
            h_low: e.map(|e| e.h_low),
            tail_error: e.map(|e| e.tail_error),
            t_bits: run.t_bits,
            r_sec: run.r_sec,
            seed_bits_drawn: run.seed_bits_drawn,
            seed_bits_reinvested: run.seed_bits_reinvested,
            extracted_bits: run.extracted_bits,
            blocks: run
                .blocks
                .iter()
                .map(|b| BlockRow {
                    trace: b.clone(),
                    l: hash_len(b),
                })
                .collect(),
            sanity: Vec::new(),
            aborted: run.aborted.clone(),
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Format(format!("report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
    }
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_blocks_csv(path: &Path, blocks: &[BlockRow]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        index: u64,
        start: u64,
        len: u64,
        n_q: u64,
        t_bits: u64,
        h_inf: f64,
        h_max: f64,
        h_low: f64,
        r_sec: f64,
        l: Option<usize>,
        extracted_bits: u64,
    }
    write_csv(
        path,
        blocks.iter().map(|b| Row {
            index: b.trace.index,
            start: b.trace.start,
            len: b.trace.len,
            n_q: b.trace.n_q,
            t_bits: b.trace.t_bits,
            h_inf: b.trace.h_inf,
            h_max: b.trace.h_max,
            h_low: b.trace.h_low,
            r_sec: b.trace.r_sec,
            l: b.l,
            extracted_bits: b.trace.extracted_bits,
        }),
    )
}

/// `(lag, value)` rows.
pub fn write_autocorrelation_csv(path: &Path, rho: &[f64]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        lag: usize,
        value: f64,
    }
    write_csv(path, rho.iter().enumerate().map(|(lag, &value)| Row { lag, value }))
}

/// Generic CSV with a header row, used by the sweep grids.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|x| x.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_bits(path: &Path, bits: &BitBuf) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&bits.to_bytes()).map_err(|e| CliError::io(path, e))
}

/// Everything a run writes, into `dir`.
pub struct Artifacts<'a> {
    pub report: &'a Report,
    pub bits: Option<&'a BitBuf>,
    pub autocorrelation: Option<&'a [f64]>,
}

pub fn emit_report(artifacts: &Artifacts<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join(REPORT_FILE);
    fs::write(&path, artifacts.report.to_json()).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    let path = dir.join(BLOCKS_FILE);
    write_blocks_csv(&path, &artifacts.report.blocks)?;
    written.push(path);
    if let Some(rho) = artifacts.autocorrelation {
        let path = dir.join(AUTOCORRELATION_FILE);
        write_autocorrelation_csv(&path, rho)?;
        written.push(path);
    }
    if let Some(bits) = artifacts.bits {
        let path = dir.join(BITS_FILE);
        write_bits(&path, bits)?;
        written.push(path);
    }
    Ok(written)
}
