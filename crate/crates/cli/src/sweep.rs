//! Reproduction grids: entropy versus resolution and state, check-count
//! studies, rate curves and noise resiliency.

use std::path::Path;

use clap::ValueEnum;
use cvqrng_core::combinatorics::seed_cost;
use cvqrng_core::entropy::{analytic_entropies, estimate_max_entropy, min_entropy, min_entropy_lower_bound};
use cvqrng_core::protocol::{ceil_sqrt, exact_certificate, run_protocol, secure_rate, SeedPool, SimulatedSource};
use cvqrng_core::state::{
    bin_probabilities, simulation_rng, squeezed_thermal_pair, BinConvention, BinCounts, GaussianState, Partition,
    Quadrature,
};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, DEFAULT_MEASUREMENTS};
use crate::error::Result;
use crate::pipeline::{protocol_config, seed_pool};
use crate::report::write_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    /// Exact bounds versus bin width for the vacuum and a μ = 2 thermal state.
    Fig2,
    /// Mean bound over random check subsets versus bit depth and n_Q.
    Fig3,
    /// Squeezed versus thermal twin states with equal data statistics.
    S2,
    /// Binned distributions of the configured state at each bit depth.
    S7,
    /// Secure rate versus run length, simulated checks.
    S8,
    /// Bound versus local-oscillator power under a calibrated noise floor.
    S9,
}

/// Knobs shared by the grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Random check subsets averaged per point (`fig3`).
    pub subsets: usize,
    /// Simulated check sets per point (`s8`).
    pub trials: usize,
    /// Bin width of the `s2` comparison.
    pub delta: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            subsets: 200,
            trials: 100,
            delta: 0.22,
        }
    }
}

/// A CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_table(path, &self.header, &self.rows)
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| *h == name).expect("known column");
        self.rows.iter().map(|r| r[i]).collect()
    }
}

pub fn run(grid: Grid, cfg: &PipelineConfig, opts: &SweepOptions) -> Result<Table> {
    cfg.validate()?;
    match grid {
        Grid::Fig2 => fig2(),
        Grid::Fig3 => fig3(cfg, opts),
        Grid::S2 => s2(opts.delta),
        Grid::S7 => s7(cfg),
        Grid::S8 => s8(cfg, opts),
        Grid::S9 => s9(cfg),
    }
}

/// Bit depths of the resolution study, finest first.
pub const DEPTHS: [u32; 6] = [8, 7, 6, 5, 4, 3];

fn centered(delta: f64, sigma: f64) -> Result<Partition> {
    Ok(Partition::covering(delta, 12.0 * sigma, BinConvention::Centered)?)
}

fn fig2() -> Result<Table> {
    let mut rows = Vec::new();
    for mu in [0.0, 2.0] {
        let state = GaussianState::thermal(mu)?;
        let sigma = state.variance(Quadrature::P).sqrt();
        for i in 0..=30 {
            let delta = 10f64.powf(-3.0 + 0.1 * i as f64);
            let e = exact_certificate(&state, &centered(delta, sigma)?, 1)?;
            let a = analytic_entropies(mu, delta)?;
            rows.push(vec![mu, delta, e.h_inf, e.h_max, e.overlap.neg_log2(), e.h_low, a.h_inf_approx, a.h_low_approx]);
        }
    }
    Ok(Table {
        header: vec!["mu", "delta", "h_inf", "h_max", "neg_log2_c", "h_low", "h_inf_approx", "h_low_approx"],
        rows,
    })
}

/// Check counts `m·10^{−i}` for `i = 1..4`, plus `⌈√m⌉`.
pub fn fig3_check_counts(m: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=4).map(|i| m / 10u64.pow(i)).filter(|&n| n >= 2).collect();
    out.push(ceil_sqrt(m));
    out.sort_unstable();
    out.dedup();
    out
}

fn fig3(cfg: &PipelineConfig, opts: &SweepOptions) -> Result<Table> {
    let state = cfg.state()?;
    let m = cfg.protocol.measurements.unwrap_or(DEFAULT_MEASUREMENTS);
    let (sd_p, sd_q) = (state.variance(Quadrature::P).sqrt(), state.variance(Quadrature::Q).sqrt());
    let mut rng = simulation_rng(cfg.source.seed, 0);
    let data: Vec<f64> = (0..m).map(|_| sd_p * rng.sample::<f64, _>(StandardNormal)).collect();
    let checks: Vec<f64> = (0..m).map(|_| sd_q * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut rows = Vec::new();
    for depth in DEPTHS {
        let p = Partition::from_bit_depth(depth, cfg.partition.p_max.unwrap_or(cfg.partition.p_max_sigmas * sd_p), cfg.partition.convention)?;
        let slot = |x: f64| p.slot_of(p.index_of(x)).expect("index_of stays in range");
        let mut data_counts = vec![0u64; p.slot_count()];
        for &x in &data {
            data_counts[slot(x)] += 1;
        }
        let h_inf = min_entropy(BinCounts::from_counts(p, data_counts)?.frequencies()?.probs())?;
        let check_slots: Vec<u16> = checks.iter().map(|&x| slot(x) as u16).collect();
        for n_q in fig3_check_counts(m) {
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..opts.subsets {
                let mut counts = vec![0u64; p.slot_count()];
                for i in index::sample(&mut rng, m as usize, n_q as usize) {
                    counts[check_slots[i] as usize] += 1;
                }
                let h_max = estimate_max_entropy(&BinCounts::from_counts(p, counts)?, cfg.protocol.estimator)?;
                let h = min_entropy_lower_bound(p.bin_width(), p.bin_width(), h_max)?.h_low;
                sum += h;
                sum2 += h * h;
            }
            let k = opts.subsets as f64;
            let mean = sum / k;
            let sd = ((sum2 / k - mean * mean) * k / (k - 1.0).max(1.0)).max(0.0).sqrt();
            rows.push(vec![depth as f64, n_q as f64, mean, sd, h_inf]);
        }
    }
    Ok(Table {
        header: vec!["bit_depth", "n_q", "mean_h_low", "sd_h_low", "h_inf"],
        rows,
    })
}

fn s2(delta: f64) -> Result<Table> {
    let mut rows = Vec::new();
    for i in 1..=20 {
        let zeta = 1.0 + 0.1 * i as f64;
        let (sq, th) = squeezed_thermal_pair(zeta)?;
        let widest = sq.variance(Quadrature::Q).max(sq.variance(Quadrature::P)).max(th.variance(Quadrature::P)).sqrt();
        let p = centered(delta, widest)?;
        let a = exact_certificate(&sq, &p, 1)?;
        let b = exact_certificate(&th, &p, 1)?;
        rows.push(vec![zeta, (zeta * zeta - 1.0) / 2.0, delta, a.h_inf, b.h_inf, a.h_max, b.h_max, a.h_low, b.h_low]);
    }
    Ok(Table {
        header: vec![
            "zeta",
            "mu",
            "delta",
            "h_inf_squeezed",
            "h_inf_thermal",
            "h_max_squeezed",
            "h_max_thermal",
            "h_low_squeezed",
            "h_low_thermal",
        ],
        rows,
    })
}

fn s7(cfg: &PipelineConfig) -> Result<Table> {
    let var = cfg.state()?.variance(Quadrature::P);
    let mut rows = Vec::new();
    for depth in DEPTHS {
        let mut pc = cfg.partition.clone();
        pc.bit_depth = depth;
        let p = pc.build(var.sqrt())?;
        let dist = bin_probabilities(var, &p)?;
        for (slot, &prob) in dist.probs().iter().enumerate() {
            let k = p.index_of_slot(slot);
            rows.push(vec![depth as f64, k as f64, p.center(k), prob]);
        }
    }
    Ok(Table {
        header: vec!["bit_depth", "index", "center", "probability"],
        rows,
    })
}

fn s8(cfg: &PipelineConfig, opts: &SweepOptions) -> Result<Table> {
    let state = cfg.state()?;
    let sd_q = state.variance(Quadrature::Q).sqrt();
    let mut rng = simulation_rng(cfg.source.seed, 1);
    let mut rows = Vec::new();
    for depth in [7, 6, 5, 4] {
        let mut pc = cfg.partition.clone();
        pc.bit_depth = depth;
        let p = pc.build(state.variance(Quadrature::P).sqrt())?;
        let asymptotic = exact_certificate(&state, &p, 1)?.h_low;
        for e in 8..=20 {
            let m = 10f64.powf(e as f64 / 2.0).round() as u64;
            let n_q = ceil_sqrt(m);
            let t = seed_cost(m, n_q)?;
            let mut rates = Vec::with_capacity(opts.trials);
            for _ in 0..opts.trials {
                let mut counts = BinCounts::zeros(p);
                for _ in 0..n_q {
                    counts.record(p.index_of(sd_q * rng.sample::<f64, _>(StandardNormal)))?;
                }
                let h_max = estimate_max_entropy(&counts, cfg.protocol.estimator)?;
                let h = min_entropy_lower_bound(p.bin_width(), p.bin_width(), h_max)?.h_low;
                rates.push(secure_rate(m, n_q, h, t));
            }
            let k = rates.len() as f64;
            let mean = rates.iter().sum::<f64>() / k;
            let sd = (rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
            rows.push(vec![depth as f64, m as f64, n_q as f64, t as f64, mean, sd, asymptotic]);
        }
    }
    Ok(Table {
        header: vec!["bit_depth", "m", "n_q", "t_bits", "mean_r_sec", "sd_r_sec", "asymptotic"],
        rows,
    })
}

/// Shot-noise slope of the calibrated receiver, V²/W.
pub const CALIBRATION_SLOPE: f64 = 0.0108;
/// Electronic-noise floor of the calibrated receiver, V².
pub const CALIBRATION_INTERCEPT: f64 = 2.579e-5;

/// Quadrature variance in vacuum units at local-oscillator power `watts`:
/// the electronic floor adds `a/(s·P)` vacuum variances.
pub fn variance_at_power(watts: f64) -> f64 {
    0.5 * (1.0 + CALIBRATION_INTERCEPT / (CALIBRATION_SLOPE * watts))
}

fn s9(cfg: &PipelineConfig) -> Result<Table> {
    let mut rows = Vec::new();
    for i in 1..=13 {
        let mw = 0.5 * i as f64;
        let var = variance_at_power(mw * 1e-3);
        let state = GaussianState::empirical(var)?;
        let p = cfg.partition.build(var.sqrt())?;
        let m = cfg.protocol.measurements.unwrap_or(DEFAULT_MEASUREMENTS);
        let mut protocol = protocol_config(cfg, p, m);
        protocol.block_len = protocol.block_len.max(m);
        let mut pool: SeedPool = seed_pool(cfg, &protocol)?;
        let mut source = SimulatedSource::new(state, p, cfg.source.seed + i);
        let e = run_protocol(&protocol, &mut source, &mut pool, None)?.report.entropy.expect("one block completed");
        rows.push(vec![mw, var, e.h_inf, e.h_max, e.h_low]);
    }
    Ok(Table {
        header: vec!["power_mw", "variance", "h_inf", "h_max", "h_low"],
        rows,
    })
}
