#![allow(dead_code)]

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

use tmsq::dsp::Spectrum;

static HEAVY: Mutex<()> = Mutex::new(());

/// Serialises the memory-hungry tests of one binary.
pub fn heavy() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

/// One unbuffered, uncaptured result line.
pub fn report(id: &str, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] {id} {name}: {verdict} ({detail}; {:.1} s)\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Largest `|a − b|` over bins of `a` inside `[lo, hi]`, together with its frequency.
pub fn max_gap(a: &Spectrum, b: impl Fn(usize, f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    a.band(lo, hi)
        .map(|i| ((a.values[i] - b(i, a.freqs[i])).abs(), a.freqs[i]))
        .fold((0.0, f64::NAN), |m, x| if x.0 > m.0 { x } else { m })
}

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_tmsq")
}
