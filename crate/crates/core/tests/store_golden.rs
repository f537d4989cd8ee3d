//! Byte-exact CSV output and on-disk trace files.

use std::path::{Path, PathBuf};

use tmsq::analysis::{CovarianceScan, DelayScanResult, SqueezeMode};
use tmsq::dsp::{Spectrum, SpectrumUnit};
use tmsq::model::SqueezerParams;
use tmsq::store::{self, read_traces, write_traces, write_traces_as, SampleFormat, StoreError};
use tmsq::synth::synthesize;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn assert_golden(written: &Path, name: &str) {
    let got = std::fs::read_to_string(written).unwrap();
    let want = std::fs::read_to_string(fixture(name)).unwrap();
    assert_eq!(got, want, "{name} differs from the fixture");
}

#[test]
fn spectrum_csv_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let s = Spectrum {
        freqs: vec![48828.125, 97656.25, 146484.375],
        values: vec![-5.012, -60.0, 0.1],
        resolution: 48828.125,
        unit: SpectrumUnit::DbRelShot,
        stderr: Some(vec![0.05, f64::INFINITY, 0.0501]),
        valid: Some(vec![true, false, true]),
    };
    let path = dir.path().join("s.csv");
    store::write_spectrum_csv(&path, &s).unwrap();
    assert_golden(&path, "spectrum.csv");
    assert_eq!(store::spectrum_csv(&s), std::fs::read(&path).unwrap());

    let bare = Spectrum {
        stderr: None,
        valid: None,
        unit: SpectrumUnit::Absolute,
        values: vec![4e-8, 1.25e-8, 3.3e-9],
        ..s
    };
    store::write_spectrum_csv(&path, &bare).unwrap();
    assert_golden(&path, "spectrum_absolute.csv");
}

#[test]
fn delay_scan_csv_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let r = DelayScanResult {
        delays: vec![9e-9, 10e-9, 11e-9],
        objective: vec![-2.5, -3.0, -2.75],
        best_delay: 10.4e-9,
        best_objective: -3.1,
        refinement: vec![(10.2e-9, -3.05), (10.4e-9, -3.1)],
        band: (0.5e6, 15e6),
        coarse_step: 1e-9,
        tolerance: 0.05e-9,
        mode: SqueezeMode::Difference,
    };
    let path = dir.path().join("d.csv");
    store::write_delay_scan_csv(&path, &r).unwrap();
    assert_golden(&path, "delayscan.csv");
}

#[test]
fn covariance_csv_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let scan = CovarianceScan {
        bin_width: 200e3,
        probe_center: 1e6,
        spacings: vec![0.0, 0.5, 1.0],
        covariances: vec![8e-8, 4e-8, 0.0],
        standard_errors: vec![1e-9, 1e-9, 5e-10],
        shot_psd: 4e-8,
    };
    let path = dir.path().join("c.csv");
    store::write_covariance_csv(&path, &scan).unwrap();
    assert_golden(&path, "covariance.csv");
}

#[test]
fn trace_files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.tmsq");
    let codes = synthesize(&SqueezerParams::apparatus(), 50e6, 1 << 14, 4).unwrap();
    let bytes = write_traces(&path, &codes).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, bytes);
    assert_eq!(read_traces(&path).unwrap(), codes);
    // 6 channels of i16 plus the header and metadata.
    assert!(bytes > 6 * 2 * (1 << 14) && bytes < 6 * 2 * (1 << 14) + 4096);

    let ideal = synthesize(&SqueezerParams::paper_like(), 50e6, 1 << 14, 4).unwrap();
    write_traces_as(&path, &ideal, SampleFormat::F64).unwrap();
    assert_eq!(read_traces(&path).unwrap(), ideal);
    // Only the final file remains; the temporary sibling was renamed away.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let f32_back = {
        write_traces_as(&path, &ideal, SampleFormat::F32).unwrap();
        read_traces(&path).unwrap()
    };
    let worst = f32_back
        .probe
        .iter()
        .zip(&ideal.probe)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn missing_and_corrupt_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tmsq");
    assert!(matches!(read_traces(&missing), Err(StoreError::Io { .. })));
    let junk = dir.path().join("junk.tmsq");
    std::fs::write(&junk, b"not a trace file at all, just text").unwrap();
    assert!(matches!(read_traces(&junk), Err(StoreError::BadMagic(_))));
}
