//! Receiver signal processing: downmixing, linear-phase low-pass filtering,
//! decimation, autocorrelation and shot-noise calibration.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::state::simulation_rng;
use crate::{Error, Result};

/// Where a stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Origin {
    Simulated,
    Ingested,
}

/// Real-valued samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStream {
    samples: Vec<f64>,
    sample_rate: f64,
    origin: Origin,
}

impl SignalStream {
    pub fn new(samples: Vec<f64>, sample_rate: f64, origin: Origin) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter("sample rate must be finite and > 0"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("samples must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
            origin,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, samples: Vec<f64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
            origin: self.origin,
        }
    }
}

fn check_frequency(f: f64, sample_rate: f64) -> Result<()> {
    if !(f > 0.0 && f < sample_rate / 2.0) {
        return Err(Error::InvalidParameter("frequency must lie in (0, fs/2)"));
    }
    Ok(())
}

/// Multiplies by the carrier `2·cos(2π·f0·t)`, moving the band at `f0` to
/// baseband with unit gain.
pub fn downmix(stream: &SignalStream, f0: f64) -> Result<SignalStream> {
    check_frequency(f0, stream.sample_rate)?;
    let w = 2.0 * PI * f0 / stream.sample_rate;
    let samples = stream
        .samples
        .iter()
        .enumerate()
        .map(|(n, &x)| 2.0 * x * (w * n as f64).cos())
        .collect();
    Ok(stream.with_samples(samples, stream.sample_rate))
}

/// Stopband attenuation the default window is tuned for.
pub const DEFAULT_ATTENUATION_DB: f64 = 60.0;

/// Default filter length.
pub const DEFAULT_TAPS: usize = 129;

/// Modified Bessel function `I₀(x)` by its power series.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser shape parameter for a stopband attenuation in dB.
pub fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

/// Kaiser-windowed sinc low-pass filter with the −6 dB point at `cutoff`,
/// normalized to unit DC gain.
pub fn design_lowpass(cutoff: f64, sample_rate: f64, taps: usize) -> Result<Vec<f64>> {
    check_frequency(cutoff, sample_rate)?;
    if taps < 3 || taps % 2 == 0 {
        return Err(Error::InvalidParameter("tap count must be odd and >= 3"));
    }
    let fc = cutoff / sample_rate;
    let beta = kaiser_beta(DEFAULT_ATTENUATION_DB);
    let half = (taps / 2) as f64;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|k| {
            let t = k as f64 - half;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let r = t / half;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|c| *c /= dc);
    Ok(h)
}

/// Magnitude response of `taps` at frequency `f`.
pub fn frequency_response(taps: &[f64], f: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * f / sample_rate;
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, &h)| {
        let phase = w * k as f64;
        (re + h * phase.cos(), im - h * phase.sin())
    });
    (re * re + im * im).sqrt()
}

/// `y[i] = Σ_k h[k]·x[i + k]` for every `i` with a full window: the filter
/// startup transient is dropped, so the output is `taps − 1` samples shorter.
fn convolve_valid(x: &[f64], h: &[f64], step: usize) -> Vec<f64> {
    if x.len() < h.len() {
        return Vec::new();
    }
    let outputs = (x.len() - h.len()) / step + 1;
    (0..outputs)
        .map(|i| {
            let window = &x[i * step..i * step + h.len()];
            window.iter().zip(h.iter().rev()).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Linear-phase low-pass filter; drops the `taps − 1` startup samples.
pub fn fir_lowpass(stream: &SignalStream, cutoff: f64, taps: usize) -> Result<SignalStream> {
    let h = design_lowpass(cutoff, stream.sample_rate, taps)?;
    Ok(stream.with_samples(convolve_valid(&stream.samples, &h, 1), stream.sample_rate))
}

/// Keeps every `factor`-th sample.
pub fn downsample(stream: &SignalStream, factor: usize) -> Result<SignalStream> {
    if factor < 1 {
        return Err(Error::InvalidParameter("downsampling factor must be >= 1"));
    }
    let samples = stream.samples.iter().step_by(factor).copied().collect();
    Ok(stream.with_samples(samples, stream.sample_rate / factor as f64))
}

/// Low-pass filtering followed by downsampling, evaluating only the kept
/// outputs. Equals `downsample(fir_lowpass(..), factor)`.
pub fn fir_decimate(stream: &SignalStream, cutoff: f64, taps: usize, factor: usize) -> Result<SignalStream> {
    if factor < 1 {
        return Err(Error::InvalidParameter("downsampling factor must be >= 1"));
    }
    let h = design_lowpass(cutoff, stream.sample_rate, taps)?;
    Ok(stream.with_samples(
        convolve_valid(&stream.samples, &h, factor),
        stream.sample_rate / factor as f64,
    ))
}

/// Normalized autocorrelation `ρ_0 ..= ρ_max_lag`.
pub fn autocorrelation(samples: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let needed = 10 * max_lag.max(1) + 1;
    if samples.len() < needed {
        return Err(Error::InsufficientData {
            needed: needed as u64,
            available: samples.len() as u64,
        });
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let c0: f64 = centered.iter().map(|x| x * x).sum();
    if c0 == 0.0 {
        return Err(Error::InvalidParameter("constant signal has no autocorrelation"));
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            centered.iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect())
}

/// Straight-line fit of measured variance against local-oscillator power.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationFit {
    /// V²/W.
    pub slope: f64,
    /// Classical noise floor, V².
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Powers (W) of the first and last point in the linear region.
    pub linear_range: (f64, f64),
    /// Points used in the fit.
    pub points_used: usize,
    pub saturation_detected: bool,
}

impl CalibrationFit {
    /// Degrees of freedom of the residuals.
    pub fn dof(&self) -> usize {
        self.points_used - 2
    }

    /// Vacuum variance (V²) at power `p` according to the fit.
    pub fn predict(&self, p: f64) -> f64 {
        self.intercept + self.slope * p
    }
}

struct LineFit {
    slope: f64,
    intercept: f64,
    slope_se: f64,
    intercept_se: f64,
    residual_sd: f64,
}

fn fit_line(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    let residual_sd = if n > 2.0 { (ssr / (n - 2.0)).sqrt() } else { 0.0 };
    LineFit {
        slope,
        intercept,
        slope_se: residual_sd / sxx.sqrt(),
        intercept_se: residual_sd * (1.0 / n + mx * mx / sxx).sqrt(),
        residual_sd,
    }
}

/// Fits `variance = intercept + slope·power` over the linear region.
///
/// The region starts with the lowest-power half of the points and grows one
/// point at a time while the next point lies within three residual standard
/// deviations of the current line. The first point outside marks the onset
/// of saturation.
pub fn shot_noise_calibration(points: &[(f64, f64)]) -> Result<CalibrationFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            available: points.len() as u64,
        });
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::InvalidParameter("calibration points must be finite"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = sorted.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let floor = 1e-12 * scale;
    let mut used = (sorted.len() / 2).max(3);
    let mut fit = fit_line(&sorted[..used]);
    while used < sorted.len() {
        let (x, y) = sorted[used];
        let residual = y - fit.intercept - fit.slope * x;
        if residual.abs() > 3.0 * fit.residual_sd.max(floor) {
            break;
        }
        used += 1;
        fit = fit_line(&sorted[..used]);
    }
    if !(fit.slope > 0.0) {
        return Err(Error::NoLinearRegion);
    }
    Ok(CalibrationFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.slope_se,
        intercept_stderr: fit.intercept_se,
        linear_range: (sorted[0].0, sorted[used - 1].0),
        points_used: used,
        saturation_detected: used < sorted.len(),
    })
}

/// Simulated receiver: a quantum signal occupying `[f0 − B/2, f0 + B/2]`
/// plus white electronic noise, sampled at `sample_rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReceiverModel {
    pub sample_rate: f64,
    pub f0: f64,
    /// Width of the signal band.
    pub bandwidth: f64,
    /// Quadrature variance of the signal at baseband.
    pub signal_variance: f64,
    /// Variance of the white electronic noise over the full sampled band.
    pub electronic_variance: f64,
    pub taps: usize,
}

impl Default for ReceiverModel {
    fn default() -> Self {
        Self {
            sample_rate: 5.0e9,
            f0: 1.055e9,
            bandwidth: 1.25e9,
            signal_variance: 1.0,
            electronic_variance: 0.0,
            taps: DEFAULT_TAPS,
        }
    }
}

/// White Gaussian noise with the given variance.
pub fn white_noise(count: usize, variance: f64, sample_rate: f64, seed: u64, stream: u64) -> Result<SignalStream> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidParameter("variance must be >= 0"));
    }
    let sd = variance.sqrt();
    let mut rng = simulation_rng(seed, stream);
    let samples = (0..count).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    SignalStream::new(samples, sample_rate, Origin::Simulated)
}

/// `count` samples of the receiver output. The baseband quadratures are
/// band-limited to `B/2` and unit-normalized to `signal_variance` before
/// being placed on the carrier.
pub fn simulate_receiver(model: &ReceiverModel, count: usize, seed: u64) -> Result<SignalStream> {
    check_frequency(model.f0, model.sample_rate)?;
    let half_band = model.bandwidth / 2.0;
    if model.f0 - half_band <= 0.0 || model.f0 + half_band >= model.sample_rate / 2.0 {
        return Err(Error::InvalidParameter("signal band must fit inside (0, fs/2)"));
    }
    let h = design_lowpass(half_band, model.sample_rate, model.taps)?;
    let gain = h.iter().map(|c| c * c).sum::<f64>().sqrt();
    let raw = count + model.taps - 1;
    let i_raw = white_noise(raw, 1.0, model.sample_rate, seed, 1)?;
    let q_raw = white_noise(raw, 1.0, model.sample_rate, seed, 2)?;
    let i = convolve_valid(i_raw.samples(), &h, 1);
    let q = convolve_valid(q_raw.samples(), &h, 1);
    let sd = model.signal_variance.sqrt() / gain;
    let noise = white_noise(count, model.electronic_variance, model.sample_rate, seed, 3)?;
    let w = 2.0 * PI * model.f0 / model.sample_rate;
    let samples = (0..count)
        .map(|n| {
            let phase = w * n as f64;
            // Half the power in each quadrature, so downmixing by 2·cos
            // returns I at the full signal variance.
            sd * (i[n] * phase.cos() - q[n] * phase.sin()) + noise.samples[n]
        })
        .collect();
    SignalStream::new(samples, model.sample_rate, Origin::Simulated)
}

/// Downmix, low-pass at `cutoff` and decimate by `factor`.
pub fn downconvert(stream: &SignalStream, f0: f64, cutoff: f64, taps: usize, factor: usize) -> Result<SignalStream> {
    fir_decimate(&downmix(stream, f0)?, cutoff, taps, factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn stream(samples: Vec<f64>) -> SignalStream {
        SignalStream::new(samples, 5e9, Origin::Simulated).unwrap()
    }

    #[test]
    fn stream_validation() {
        assert!(SignalStream::new(vec![1.0], 0.0, Origin::Ingested).is_err());
        assert!(SignalStream::new(vec![f64::NAN], 1.0, Origin::Ingested).is_err());
    }

    #[test]
    fn downmix_of_carrier_has_dc_and_image() {
        let f0 = 1.055e9;
        let w = 2.0 * PI * f0 / 5e9;
        let x = stream((0..20_000).map(|n| (w * n as f64).cos()).collect());
        let y = downmix(&x, f0).unwrap();
        let dc = y.samples().iter().sum::<f64>() / y.len() as f64;
        assert!((dc - 1.0).abs() < 1e-3);
        let image = y.samples().iter().enumerate().map(|(n, v)| (v - 1.0) * (2.0 * w * n as f64).cos()).sum::<f64>()
            / y.len() as f64;
        assert!((image - 0.5).abs() < 1e-3);
        let zero = downmix(&stream(vec![0.0; 100]), f0).unwrap();
        assert!(zero.samples().iter().all(|&v| v == 0.0));
        assert!(downmix(&x, 2.6e9).is_err());
        assert!(downmix(&x, 0.0).is_err());
    }

    #[test]
    fn lowpass_design_properties() {
        let h = design_lowpass(625e6, 5e9, DEFAULT_TAPS).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..h.len() / 2 {
            assert_eq!(h[k], h[h.len() - 1 - k]);
        }
        assert!((frequency_response(&h, 0.0, 5e9) - 1.0).abs() < 1e-3);
        for f in [1.2 * 625e6, 1.5 * 625e6, 2.0e9] {
            let att = -20.0 * frequency_response(&h, f, 5e9).log10();
            assert!(att >= 40.0, "f={f} att={att}");
        }
        assert!(design_lowpass(625e6, 5e9, 128).is_err());
        assert!(design_lowpass(625e6, 5e9, 1).is_err());
        assert!(design_lowpass(3e9, 5e9, 129).is_err());
    }

    #[test]
    fn constant_and_impulse() {
        let c = fir_lowpass(&stream(vec![2.5; 500]), 625e6, 129).unwrap();
        assert_eq!(c.len(), 500 - 128);
        assert!(c.samples().iter().all(|v| (v - 2.5).abs() < 1e-12));
        let mut imp = vec![0.0; 300];
        imp[150] = 1.0;
        let y = fir_lowpass(&stream(imp), 625e6, 129).unwrap();
        let h = design_lowpass(625e6, 5e9, 129).unwrap();
        // Output index i sees the impulse at tap 150 − i.
        for (i, v) in y.samples().iter().enumerate() {
            let k = 150i64 - i as i64;
            let expected = if (0..129).contains(&k) { h[128 - k as usize] } else { 0.0 };
            assert!((v - expected).abs() < 1e-15);
        }
        let peak = y.samples().iter().cloned().fold(f64::MIN, f64::max);
        let at = y.samples().iter().position(|&v| v == peak).unwrap();
        for d in 1..60 {
            assert!((y.samples()[at - d] - y.samples()[at + d]).abs() < 1e-15);
        }
    }

    #[test]
    fn downsampling() {
        let x = stream((0..100).map(|v| v as f64).collect());
        assert_eq!(downsample(&x, 1).unwrap(), x);
        let y = downsample(&x, 4).unwrap();
        assert_eq!(y.sample_rate(), 1.25e9);
        assert_eq!(y.samples()[..3], [0.0, 4.0, 8.0]);
        assert!(downsample(&x, 0).is_err());
    }

    #[test]
    fn decimation_equals_filter_then_downsample() {
        let x = white_noise(5_000, 1.0, 5e9, 9, 0).unwrap();
        let a = fir_decimate(&x, 625e6, 65, 4).unwrap();
        let b = downsample(&fir_lowpass(&x, 625e6, 65).unwrap(), 4).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.samples().iter().zip(b.samples()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn autocorrelation_basics() {
        let x = white_noise(100_000, 2.0, 1.0, 3, 0).unwrap();
        let rho = autocorrelation(x.samples(), 20).unwrap();
        assert_eq!(rho[0], 1.0);
        let bound = 4.0 / (x.len() as f64).sqrt();
        assert!(rho[1..].iter().all(|r| r.abs() < bound));
        assert!(matches!(autocorrelation(&[1.0; 50], 5), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn exact_line_is_recovered() {
        let pts: Vec<(f64, f64)> = (1..=12).map(|k| (k as f64 * 1e-3, 3e-5 + 0.02 * k as f64 * 1e-3)).collect();
        let fit = shot_noise_calibration(&pts).unwrap();
        assert!((fit.slope / 0.02 - 1.0).abs() < 1e-12);
        assert!((fit.intercept / 3e-5 - 1.0).abs() < 1e-12);
        assert!(!fit.saturation_detected);
        assert_eq!(fit.linear_range, (1e-3, 12e-3));
    }

    #[test]
    fn calibration_errors() {
        assert!(matches!(
            shot_noise_calibration(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(Error::InsufficientData { .. })
        ));
        let falling: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 10.0 - k as f64)).collect();
        assert!(matches!(shot_noise_calibration(&falling), Err(Error::NoLinearRegion)));
    }

    #[test]
    fn receiver_chain_recovers_signal_variance() {
        let model = ReceiverModel {
            signal_variance: 0.8,
            ..ReceiverModel::default()
        };
        let raw = simulate_receiver(&model, 400_000, 5).unwrap();
        let base = downconvert(&raw, model.f0, 625e6, 129, 4).unwrap();
        assert_eq!(base.sample_rate(), 1.25e9);
        let n = base.len() as f64;
        let var = base.samples().iter().map(|x| x * x).sum::<f64>() / n;
        assert!((var / 0.8 - 1.0).abs() < 0.03, "{var}");
    }
}
