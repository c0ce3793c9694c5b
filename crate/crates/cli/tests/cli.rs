use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cvqrng::config::PipelineConfig;
use cvqrng::error::CliError;
use cvqrng::pipeline;
use cvqrng::rawio::{ingest_raw, read_raw, sidecar_path, write_codes, write_raw, RawMeta};
use cvqrng::report::Report;
use cvqrng::sweep::{self, fig3_check_counts, Grid, SweepOptions};
use cvqrng_core::combinatorics::seed_cost;
use cvqrng_core::dsp::{Origin, SignalStream};
use cvqrng_core::extractor::MatrixMode;
use cvqrng_core::protocol::secure_rate;
use tempfile::TempDir;

fn cvqrng(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvqrng")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.protocol.measurements = Some(200_000);
    cfg.extractor.mode = MatrixMode::Fixed;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

#[test]
fn raw_file_round_trips_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("x.raw");
    let meta = RawMeta::new(1.25e9, 0.2, 16);
    let codes: Vec<i16> = (0..1000).map(|i| ((i * 7919) % 65536 - 32768) as i16).collect();
    write_codes(&path, &meta, &codes).unwrap();
    let back = read_raw(&path).unwrap();
    assert_eq!(back.codes, codes);
    assert_eq!(back.meta, meta);

    // Amplitudes already on the grid survive write_raw → ingest_raw exactly.
    let stream = SignalStream::new(back.amplitudes(), 1.25e9, Origin::Simulated).unwrap();
    let again = dir.path().join("y.raw");
    write_raw(&again, &stream, 0.2, 16).unwrap();
    assert_eq!(ingest_raw(&again).unwrap().samples(), stream.samples());
}

#[test]
fn full_scale_one_maps_codes_into_unit_interval() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("x.raw");
    write_codes(&path, &RawMeta::new(1e9, 1.0, 16), &[i16::MIN, -16384, 0, 8192, i16::MAX]).unwrap();
    let s = ingest_raw(&path).unwrap();
    assert_eq!(s.samples(), &[-1.0, -0.5, 0.0, 0.25, 32767.0 / 32768.0]);
    assert!(s.samples().iter().all(|x| (-1.0..=1.0).contains(x)));
}

#[test]
fn bad_metadata_and_truncation_are_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("x.raw");
    fs::write(&path, [0u8; 8]).unwrap();
    assert!(matches!(ingest_raw(&path), Err(CliError::Format(_))), "missing sidecar");

    fs::write(
        sidecar_path(&path),
        r#"{"sample_rate_hz":0,"full_scale":1,"adc_bits":16,"dtype":"i16","endianness":"little"}"#,
    )
    .unwrap();
    let err = ingest_raw(&path).unwrap_err();
    assert!(matches!(err, CliError::Format(_)));
    assert_eq!(err.exit_code(), 2);

    write_codes(&path, &RawMeta::new(1e9, 1.0, 16), &[1, 2, 3]).unwrap();
    fs::write(&path, [0u8; 5]).unwrap();
    let err = ingest_raw(&path).unwrap_err();
    assert!(matches!(err, CliError::PartialRead { .. }));
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn report_round_trips_and_rate_is_consistent() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let run = pipeline::run(&cfg, true).unwrap();
    let r = &run.report;
    assert_eq!(Report::from_json(&r.to_json()).unwrap(), *r);

    let t = seed_cost(r.m, r.n_q).unwrap();
    assert_eq!(r.t_bits, t);
    let again = secure_rate(r.m, r.n_q, r.h_low.unwrap(), r.t_bits);
    assert!((again - r.r_sec).abs() <= 1e-12);
    assert_eq!(r.extracted_bits as usize, run.bits.as_ref().unwrap().len());
    assert_eq!(r.sanity.len(), 3);

    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    for key in ["config", "h_inf", "h_max", "estimator", "c", "h_low", "tail_error", "t_bits", "r_sec", "blocks", "sanity"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let out = cvqrng(&[
            "extract",
            "--measurements",
            "150000",
            "--matrix-mode",
            "per-block",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["report.json", "blocks.csv", "bits.bin"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        if file == "report.json" {
            // Only the output directory differs.
            let strip = |v: Vec<u8>| {
                let mut j: serde_json::Value = serde_json::from_slice(&v).unwrap();
                j["config"]["output"] = serde_json::Value::Null;
                j
            };
            assert_eq!(strip(x), strip(y));
        } else {
            assert_eq!(x, y, "{file}");
        }
    }
}

#[test]
fn simulated_pipeline_through_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let rf = d.join("rf.raw");
    let bb = d.join("bb.raw");
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let out = cvqrng(&["simulate", "--samples", "800000", "--taps", "1025", "--output", &s(&rf)]);
    assert!(out.status.success());
    let out = cvqrng(&["downconvert", "--input", &s(&rf), "--taps", "1025", "--output", &s(&bb), "--out-dir", &s(d)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.join("autocorrelation.csv")).unwrap();
    assert!(csv.starts_with("lag,value\n0,1"));
    assert_eq!(csv.lines().count(), 52);
    assert_eq!(read_raw(&bb).unwrap().meta.sample_rate_hz, 1.25e9);

    let cert = d.join("cert");
    let out = cvqrng(&["certify", "--input", &s(&bb), "--block-len", "100000", "--out-dir", &s(&cert)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = Report::load(&cert.join("report.json")).unwrap();
    // The file was written at σ'² = 0.677: the 5-bit bound sits between the
    // negative 3-bit regime and the data entropy.
    assert!(r.h_low.unwrap() > 0.0 && r.h_low.unwrap() < r.h_inf.unwrap());
    assert!(r.blocks.len() == 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    assert_eq!(cvqrng(&["certify", "--taps", "128", "--out-dir", out_dir]).status.code(), Some(2));
    assert_eq!(cvqrng(&["certify", "--state", "coherent:1"]).status.code(), Some(2));

    let path = dir.path().join("tiny.raw");
    write_codes(&path, &RawMeta::new(1e9, 1.0, 16), &[100; 2000]).unwrap();
    let out = cvqrng(&["certify", "--input", path.to_str().unwrap(), "--measurements", "5000", "--out-dir", out_dir]);
    assert_eq!(out.status.code(), Some(3));

    let blocker = dir.path().join("file");
    fs::write(&blocker, b"").unwrap();
    let out = cvqrng(&["certify", "--measurements", "10000", "--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    assert_eq!(cvqrng(&["selftest"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "[partition]\nbit_depth = 3\n[extractor]\nn = 9000\n").unwrap();
    let out = cvqrng(&["--config", path.to_str().unwrap(), "show-config", "--bit-depth", "4"]);
    assert!(out.status.success());
    let cfg = PipelineConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.partition.bit_depth, 4);
    assert_eq!(cfg.extractor.n, 9000);
}

#[test]
fn fig3_rows_average_two_hundred_subsets() {
    let mut cfg = PipelineConfig::default();
    cfg.protocol.measurements = Some(20_000);
    let t = sweep::run(Grid::Fig3, &cfg, &SweepOptions::default()).unwrap();
    assert_eq!(t.header, vec!["bit_depth", "n_q", "mean_h_low", "sd_h_low", "h_inf"]);
    let counts = fig3_check_counts(20_000);
    assert_eq!(t.rows.len(), 6 * counts.len());
    for (i, row) in t.rows.iter().enumerate() {
        assert_eq!(row[1], counts[i % counts.len()] as f64);
        assert!(row[3] >= 0.0);
    }
    // At 3 bits the bound is negative while the data entropy is about one.
    let three: Vec<&Vec<f64>> = t.rows.iter().filter(|r| r[0] == 3.0).collect();
    assert!(three.iter().all(|r| r[2] < 0.0 && (r[4] - 1.0).abs() < 0.1));
}

#[test]
fn every_grid_produces_rows() {
    let mut cfg = PipelineConfig::default();
    cfg.protocol.measurements = Some(20_000);
    let opts = SweepOptions {
        subsets: 5,
        trials: 2,
        delta: 0.22,
    };
    for grid in [Grid::Fig2, Grid::S2, Grid::S7, Grid::S8, Grid::S9] {
        let t = sweep::run(grid, &cfg, &opts).unwrap();
        assert!(!t.rows.is_empty(), "{grid:?}");
        assert!(t.rows.iter().all(|r| r.len() == t.header.len() && r.iter().all(|x| x.is_finite())));
    }
    let s9 = sweep::run(Grid::S9, &cfg, &opts).unwrap();
    let h = s9.column("h_low");
    assert!(h.first() < h.last(), "more LO power certifies more");
}
