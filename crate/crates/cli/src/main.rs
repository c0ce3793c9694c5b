use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use cvqrng::config::PipelineConfig;
use cvqrng::error::{CliError, Result};
use cvqrng::pipeline;
use cvqrng::report::{emit_report, write_autocorrelation_csv, Artifacts, AUTOCORRELATION_FILE};
use cvqrng::sweep::{self, Grid, SweepOptions};
use cvqrng::selftest;
use cvqrng_core::entropy::Estimator;
use cvqrng_core::extractor::MatrixMode;
use cvqrng_core::protocol::CheckCount;
use cvqrng_core::state::BinConvention;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "cvqrng", version, about = "Certified randomness from homodyne measurements of Gaussian states")]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated receiver capture as a raw file plus sidecar.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        /// Write baseband quadrature samples instead of the RF waveform.
        #[arg(long)]
        baseband: bool,
    },
    /// Downmix, filter and decimate a raw capture.
    Downconvert {
        #[arg(long)]
        output: PathBuf,
    },
    /// Certify a min-entropy bound without extracting.
    Certify,
    /// Certify and extract output bits.
    Extract,
    /// Emit a reproduction grid as CSV into the output directory.
    Sweep {
        #[arg(long, value_enum)]
        grid: Grid,
        #[arg(long, default_value_t = 200)]
        subsets: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0.22)]
        delta: f64,
    },
    /// Run the invariant suite.
    Selftest,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn check_count(s: &str) -> std::result::Result<CheckCount, String> {
    match s {
        "sqrt" | "square-root" => Ok(CheckCount::SquareRoot),
        n => n.parse().map(CheckCount::Fixed).map_err(|_| format!("expected `sqrt` or a count, got `{n}`")),
    }
}

/// Flags mirroring the configuration file.
#[derive(Args, Default)]
struct Overrides {
    /// vacuum, thermal:MU, squeezed:ZETA or empirical:VAR.
    #[arg(long, global = true, help_heading = "Source")]
    state: Option<String>,
    /// Simulation seed.
    #[arg(long, global = true, help_heading = "Source")]
    seed: Option<u64>,
    /// Raw capture to certify instead of simulating.
    #[arg(long, global = true, help_heading = "Source")]
    input: Option<PathBuf>,
    /// Shot-noise variance in V², for the vacuum-unit conversion.
    #[arg(long, global = true, help_heading = "Source")]
    shot_noise_variance: Option<f64>,
    /// Electronic noise variance in V².
    #[arg(long, global = true, help_heading = "Source")]
    electronic_variance: Option<f64>,
    /// Samples written by `simulate`.
    #[arg(long, global = true, help_heading = "Source")]
    samples: Option<usize>,
    /// ADC rate in samples/s.
    #[arg(long, global = true, help_heading = "Source")]
    sample_rate: Option<f64>,
    /// ADC full scale in volts.
    #[arg(long, global = true, help_heading = "Source")]
    full_scale: Option<f64>,
    /// ADC resolution.
    #[arg(long, global = true, help_heading = "Source")]
    adc_bits: Option<u32>,

    /// Downconvert ingested files before certification.
    #[arg(long, global = true, help_heading = "DSP")]
    dsp: Option<bool>,
    /// Mixing frequency in Hz.
    #[arg(long, global = true, help_heading = "DSP")]
    f0: Option<f64>,
    /// Lowpass cutoff in Hz.
    #[arg(long, global = true, help_heading = "DSP")]
    cutoff: Option<f64>,
    /// Lowpass length, odd.
    #[arg(long, global = true, help_heading = "DSP")]
    taps: Option<usize>,
    /// Decimation factor.
    #[arg(long, global = true, help_heading = "DSP")]
    factor: Option<usize>,
    /// Autocorrelation lags to report.
    #[arg(long, global = true, help_heading = "DSP")]
    max_lag: Option<usize>,

    /// Interior bins are 2^bit_depth.
    #[arg(long, global = true, help_heading = "Partition")]
    bit_depth: Option<u32>,
    /// Range edge in source standard deviations.
    #[arg(long, global = true, help_heading = "Partition")]
    p_max_sigmas: Option<f64>,
    /// Range edge in vacuum units, overrides --p-max-sigmas.
    #[arg(long, global = true, help_heading = "Partition")]
    p_max: Option<f64>,
    /// `centered` or `offset`.
    #[arg(long, global = true, value_parser = serde_enum::<BinConvention>, help_heading = "Partition")]
    convention: Option<BinConvention>,

    /// Measurements to consume (default: all available, or 2^22).
    #[arg(long, global = true, help_heading = "Protocol")]
    measurements: Option<u64>,
    /// `sqrt` or a fixed count per block.
    #[arg(long, global = true, value_parser = check_count, help_heading = "Protocol")]
    checks: Option<CheckCount>,
    /// `plugin` or `bayesian`.
    #[arg(long, global = true, value_parser = serde_enum::<Estimator>, help_heading = "Protocol")]
    estimator: Option<Estimator>,
    /// Measurements per recalibration block.
    #[arg(long, global = true, help_heading = "Protocol")]
    block_len: Option<u64>,
    /// Return t bits of output to the seed pool after each block.
    #[arg(long, global = true, help_heading = "Protocol")]
    reinvest: Option<bool>,
    /// Seed of the simulated seed pool.
    #[arg(long, global = true, help_heading = "Protocol")]
    pool_seed: Option<u64>,
    /// Size of the simulated seed pool.
    #[arg(long, global = true, help_heading = "Protocol")]
    seed_bits: Option<usize>,
    /// Seed pool read from a file, LSB first.
    #[arg(long, global = true, help_heading = "Protocol")]
    seed_file: Option<PathBuf>,

    /// Extractor input length in bits.
    #[arg(long, global = true, help_heading = "Extractor")]
    hash_n: Option<usize>,
    /// Bits per symbol fed to the extractor (default: bit depth).
    #[arg(long, global = true, help_heading = "Extractor")]
    symbol_bits: Option<u32>,
    /// `per-block`, `fixed`, `toeplitz` or `true-random`.
    #[arg(long, global = true, value_parser = serde_enum::<MatrixMode>, help_heading = "Extractor")]
    matrix_mode: Option<MatrixMode>,
    /// Key for pseudo-random matrices.
    #[arg(long, global = true, help_heading = "Extractor")]
    matrix_seed: Option<String>,
    /// Bits subtracted from each output length.
    #[arg(long, global = true, help_heading = "Extractor")]
    margin: Option<f64>,
    /// Matrix bits for `true-random` mode.
    #[arg(long, global = true, help_heading = "Extractor")]
    matrix_bits_file: Option<PathBuf>,

    /// Directory for reports and output bits.
    #[arg(long, global = true, help_heading = "Output")]
    out_dir: Option<PathBuf>,
}

macro_rules! set {
    ($flag:expr => $field:expr) => {
        if let Some(v) = $flag.clone() {
            $field = v;
        }
    };
    ($flag:expr => some $field:expr) => {
        if let Some(v) = $flag.clone() {
            $field = Some(v);
        }
    };
}

impl Overrides {
    fn apply(&self, c: &mut PipelineConfig) {
        set!(self.state => c.source.state);
        set!(self.seed => c.source.seed);
        set!(self.input => some c.source.input);
        set!(self.shot_noise_variance => c.source.shot_noise_variance);
        set!(self.electronic_variance => c.source.electronic_variance);
        set!(self.samples => c.source.samples);
        set!(self.sample_rate => c.source.sample_rate);
        set!(self.full_scale => c.source.full_scale);
        set!(self.adc_bits => c.source.adc_bits);
        set!(self.dsp => c.dsp.enabled);
        set!(self.f0 => c.dsp.f0);
        set!(self.cutoff => c.dsp.cutoff);
        set!(self.taps => c.dsp.taps);
        set!(self.factor => c.dsp.factor);
        set!(self.max_lag => c.dsp.max_lag);
        set!(self.bit_depth => c.partition.bit_depth);
        set!(self.p_max_sigmas => c.partition.p_max_sigmas);
        set!(self.p_max => some c.partition.p_max);
        set!(self.convention => c.partition.convention);
        set!(self.measurements => some c.protocol.measurements);
        set!(self.checks => c.protocol.check_count);
        set!(self.estimator => c.protocol.estimator);
        set!(self.block_len => c.protocol.block_len);
        set!(self.reinvest => c.protocol.reinvest);
        set!(self.pool_seed => c.protocol.seed);
        set!(self.seed_bits => some c.protocol.seed_bits);
        set!(self.seed_file => some c.protocol.seed_file);
        set!(self.hash_n => c.extractor.n);
        set!(self.symbol_bits => some c.extractor.b);
        set!(self.matrix_mode => c.extractor.mode);
        set!(self.matrix_seed => c.extractor.matrix_seed);
        set!(self.margin => c.extractor.margin);
        set!(self.matrix_bits_file => some c.extractor.matrix_bits_file);
        set!(self.out_dir => c.output.dir);
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

fn run_pipeline(cfg: &PipelineConfig, extract: bool) -> Result<()> {
    let start = Instant::now();
    let run = pipeline::run(cfg, extract)?;
    let r = &run.report;
    println!("source      {}", r.source);
    println!("m {}  n_Q {}  t {} bits  blocks {}", r.m, r.n_q, r.t_bits, r.blocks.len());
    println!(
        "h_inf {}  h_max {} ({})  c {}  h_low {}",
        fmt_opt(r.h_inf),
        fmt_opt(r.h_max),
        r.estimator.name(),
        r.c.map_or_else(|| "n/a".into(), |c| format!("{c:.6e}")),
        fmt_opt(r.h_low)
    );
    println!("r_sec {:.6} bits/measurement", r.r_sec);
    if extract {
        let secs = start.elapsed().as_secs_f64();
        println!("extracted {} bits in {secs:.2} s", r.extracted_bits);
        for s in &r.sanity {
            println!("sanity {:<20} {:>10.4} <= {:<8.4} {}", s.test, s.statistic, s.threshold, if s.pass { "pass" } else { "FAIL" });
        }
    }
    if let Some(why) = &r.aborted {
        eprintln!("warning: run stopped early: {why}");
    }
    let artifacts = Artifacts {
        report: r,
        bits: run.bits.as_ref(),
        autocorrelation: run.autocorrelation.as_deref(),
    };
    for path in emit_report(&artifacts, &cfg.output.dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn input_of(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.source
        .input
        .as_deref()
        .ok_or_else(|| CliError::Validation("--input is required".into()))
}

fn execute(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    match cli.command {
        Command::Simulate { output, baseband } => {
            let meta = pipeline::simulate_to_file(&cfg, baseband, &output)?;
            println!("wrote {} samples at {} Hz to {}", cfg.source.samples, meta.sample_rate_hz, output.display());
        }
        Command::Downconvert { output } => {
            let input = input_of(&cfg)?.to_path_buf();
            let rho = pipeline::downconvert_file(&cfg, &input, &output)?;
            std::fs::create_dir_all(&cfg.output.dir).map_err(|e| CliError::io(&cfg.output.dir, e))?;
            let csv = cfg.output.dir.join(AUTOCORRELATION_FILE);
            write_autocorrelation_csv(&csv, &rho)?;
            let worst = rho.iter().skip(1).fold(0.0f64, |a, r| a.max(r.abs()));
            println!("wrote {} and {}; max |rho_k| over k >= 1: {worst:.5}", output.display(), csv.display());
        }
        Command::Certify => run_pipeline(&cfg, false)?,
        Command::Extract => run_pipeline(&cfg, true)?,
        Command::Sweep { grid, subsets, trials, delta } => {
            let table = sweep::run(grid, &cfg, &SweepOptions { subsets, trials, delta })?;
            std::fs::create_dir_all(&cfg.output.dir).map_err(|e| CliError::io(&cfg.output.dir, e))?;
            let name = serde_json::to_value(grid).expect("grid serializes");
            let path = cfg.output.dir.join(format!("sweep-{}.csv", name.as_str().unwrap_or("grid")));
            table.write(&path)?;
            println!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        Command::Selftest => {
            let checks = selftest::run();
            for c in &checks {
                println!("{} {:<38} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.pass));
        }
        Command::ShowConfig => {
            cfg.validate()?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
