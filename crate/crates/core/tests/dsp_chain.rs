use std::f64::consts::PI;

use cvqrng_core::dsp::{
    autocorrelation, design_lowpass, downconvert, downmix, fir_decimate, fir_lowpass,
    shot_noise_calibration, simulate_receiver, white_noise, ReceiverModel,
};

const FS: f64 = 5e9;
const CUTOFF: f64 = 625e6;

/// Autocorrelation of white noise through `h`, by Wiener-Khinchin:
/// `ρ_k = Σ_j h_j h_{j+k} / Σ_j h_j²`.
fn filtered_noise_correlation(h: &[f64], k: usize) -> f64 {
    let energy: f64 = h.iter().map(|v| v * v).sum();
    (0..h.len().saturating_sub(k)).map(|j| h[j] * h[j + k]).sum::<f64>() / energy
}

#[test]
fn lowpass_noise_correlation_matches_filter_oracle() {
    let h = design_lowpass(CUTOFF, FS, 129).unwrap();
    let x = white_noise(1_000_128, 1.0, FS, 21, 0).unwrap();
    let y = fir_lowpass(&x, CUTOFF, 129).unwrap();
    let rho = autocorrelation(y.samples(), 40).unwrap();
    let tol = 5.0 / (y.len() as f64).sqrt() * 3.0;
    for (k, r) in rho.iter().enumerate().skip(1) {
        let oracle = filtered_noise_correlation(&h, k);
        assert!((r - oracle).abs() < tol, "k={k} rho={r} oracle={oracle}");
    }
}

#[test]
fn ideal_rate_four_b_has_zeros_at_even_lags() {
    let fs = 4.0 * CUTOFF;
    let h = design_lowpass(CUTOFF, fs, 129).unwrap();
    for k in 1..=20 {
        let oracle = filtered_noise_correlation(&h, k);
        let ideal = (PI * k as f64 / 2.0).sin() / (PI * k as f64 / 2.0);
        assert!((oracle - ideal).abs() < 0.02, "k={k}");
        if k % 2 == 0 {
            assert!(oracle.abs() < 0.02);
        }
    }
}

#[test]
fn filtered_variance_follows_noise_bandwidth() {
    let h = design_lowpass(CUTOFF, FS, 129).unwrap();
    let gain: f64 = h.iter().map(|v| v * v).sum();
    let x = white_noise(1_000_128, 3.0, FS, 22, 0).unwrap();
    let y = fir_lowpass(&x, CUTOFF, 129).unwrap();
    let var = y.samples().iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    assert!((var / (3.0 * gain) - 1.0).abs() < 0.02, "{var}");
    assert!((gain - 2.0 * CUTOFF / FS).abs() < 0.01);
}

fn jarque_bera(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0)
}

#[test]
fn chain_preserves_gaussianity() {
    let model = ReceiverModel::default();
    let raw = simulate_receiver(&model, 4_000_512, 23).unwrap();
    let base = downconvert(&raw, model.f0, CUTOFF, 129, 4).unwrap();
    assert!(base.len() >= 1_000_000);
    // χ²(2) critical value at 1%.
    assert!(jarque_bera(&base.samples()[..1_000_000]) < 9.21);
}

/// Averaged Hann-windowed periodogram on `segment`-point blocks, bins
/// `0..segment/2`.
fn power_spectrum(x: &[f64], segment: usize) -> Vec<f64> {
    let mut psd = vec![0.0; segment / 2];
    let hann: Vec<f64> = (0..segment)
        .map(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / segment as f64).cos())
        .collect();
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..segment)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / segment as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let blocks = x.len() / segment;
    for b in 0..blocks {
        let s = &x[b * segment..(b + 1) * segment];
        for (f, p) in psd.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, (v, w)) in s.iter().zip(&hann).enumerate() {
                let v = v * w;
                let idx = f * t % segment;
                re += v * cos[idx];
                im -= v * sin[idx];
            }
            *p += (re * re + im * im) / blocks as f64;
        }
    }
    psd
}

#[test]
fn band_at_carrier_comes_down_flat() {
    let model = ReceiverModel::default();
    let raw = simulate_receiver(&model, 2_000_512, 24).unwrap();
    let mixed = downmix(&raw, model.f0).unwrap();
    let base = fir_lowpass(&mixed, CUTOFF, 129).unwrap();
    let psd = power_spectrum(&base.samples()[..1_966_080], 128);
    // 128 bins over 5 GHz: bin width 39 MHz. Flat through 550 MHz.
    let flat: Vec<f64> = psd[1..=14].to_vec();
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    for (i, p) in flat.iter().enumerate() {
        assert!((p / mean - 1.0).abs() < 0.1, "bin {} ratio {}", i + 1, p / mean);
    }
    // Well above the cutoff the band is gone.
    assert!(psd[30] / mean < 1e-4);
}

#[test]
fn decimated_noise_is_white_for_fifty_lags() {
    let taps = 4097;
    let n = 1_000_000;
    let x = white_noise(4 * n + taps, 1.0, FS, 25, 0).unwrap();
    let y = fir_decimate(&x, CUTOFF, taps, 4).unwrap();
    let rho = autocorrelation(&y.samples()[..n], 50).unwrap();
    let bound = 5.0 / (n as f64).sqrt();
    assert!(rho[1..].iter().all(|r| r.abs() < bound));
}

#[test]
fn calibration_with_noise_and_rolloff() {
    use rand::Rng;
    let (m, a) = (0.0108, 2.579e-5);
    let mut rng = cvqrng_core::state::simulation_rng(26, 0);
    let pts: Vec<(f64, f64)> = (1..=20)
        .map(|k| {
            let p = k as f64 * 0.5e-3;
            let clean = if p <= 7e-3 { a + m * p } else { a + m * 7e-3 + 0.3 * m * (p - 7e-3) };
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            (p, clean + 2e-7 * noise)
        })
        .collect();
    let fit = shot_noise_calibration(&pts).unwrap();
    assert!(fit.saturation_detected);
    assert!(fit.linear_range.1 <= 7e-3 + 1e-12);
    assert!((fit.slope - m).abs() < 3.0 * fit.slope_stderr);
    assert!((fit.intercept - a).abs() < 3.0 * fit.intercept_stderr);
}
