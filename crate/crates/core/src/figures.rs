//! Canned end-to-end reproductions: synthesize, analyse, write one CSV per curve.
//!
//! Every output is a pure function of the run configuration and the seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::{
    self, oscillation_envelope, optimize_delay, qumode_scan, squeezing_spectrum, AnalysisError, DelayScanOptions,
    LowFreqOptions, QumodeScanOptions, SpectrumOptions, SqueezeMode,
};
use crate::config::{format_f64, RunConfig};
use crate::dsp::Spectrum;
use crate::model::{LockQuadrature, SqueezerParams};
use crate::store::{self, StoreError};
use crate::synth::{synthesize, synthesize_with, SynthError, SynthOptions};

/// Sample rate of the sub-Hz record: 2^24 samples span exactly 10 s.
pub const LOWFREQ_SAMPLE_RATE: f64 = 1_677_721.6;
pub const LOWFREQ_SAMPLES: usize = 1 << 24;
/// Long record for the narrow-bin check: 2^24 samples at 2^20 Hz, 16 s.
pub const NARROW_BIN_SAMPLE_RATE: f64 = 1_048_576.0;
pub const NARROW_BIN_SAMPLES: usize = 1 << 24;
pub const NARROW_BIN_CENTER: f64 = 100.0e3;
pub const NARROW_BIN_WIDTH: f64 = 5.0;
pub const OSCILLATION_DELAY: f64 = 200.0e-9;

#[derive(Debug, Error)]
pub enum FigureError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    /// `key=value` lines, also written to `<fig>_summary.txt`.
    pub summary: Vec<String>,
}

struct Emitter<'a> {
    dir: &'a Path,
    prefix: &'static str,
    files: Vec<PathBuf>,
    summary: Vec<String>,
}

impl<'a> Emitter<'a> {
    fn spectrum(&mut self, name: &str, s: &Spectrum) -> Result<(), StoreError> {
        let path = self.dir.join(format!("{}_{name}.csv", self.prefix));
        store::write_spectrum_csv(&path, s)?;
        self.files.push(path);
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.summary.push(format!("{key}={value}"));
    }

    fn finish(mut self, cfg: &RunConfig, seed: u64) -> Result<FigureOutput, StoreError> {
        let cfg_path = self.dir.join(format!("{}_config.txt", self.prefix));
        let mut text = format!("seed = {seed}\n");
        text.push_str(&cfg.to_text());
        store::write_atomic(&cfg_path, text.as_bytes())?;
        self.files.push(cfg_path);
        let path = self.dir.join(format!("{}_summary.txt", self.prefix));
        let body: String = self.summary.iter().fold(String::new(), |mut acc, l| {
            let _ = writeln!(acc, "{l}");
            acc
        });
        store::write_atomic(&path, body.as_bytes())?;
        self.files.push(path);
        Ok(FigureOutput {
            files: self.files,
            summary: self.summary,
        })
    }
}

fn ns(t: f64) -> String {
    format!("{:.3}", t * 1e9)
}

fn db(v: f64) -> String {
    format!("{v:.3}")
}

/// Runs one figure into `outdir` (created if missing).
pub fn run(fig: Figure, cfg: &RunConfig, seed: u64, outdir: &Path) -> Result<FigureOutput, FigureError> {
    cfg.validate()?;
    std::fs::create_dir_all(outdir).map_err(|source| StoreError::Io {
        path: outdir.display().to_string(),
        source,
    })?;
    let mut out = Emitter {
        dir: outdir,
        prefix: fig.name(),
        files: Vec::new(),
        summary: Vec::new(),
    };
    match fig {
        Figure::Fig2 => fig2(cfg, seed, &mut out)?,
        Figure::Fig3 => fig3(cfg, seed, &mut out)?,
        Figure::Fig4 => fig4(cfg, seed, &mut out)?,
        Figure::Fig5 => fig5(cfg, seed, &mut out)?,
    }
    Ok(out.finish(cfg, seed)?)
}

fn subtract(params: &SqueezerParams) -> SpectrumOptions {
    SpectrumOptions {
        subtract_dark: params.electronic_noise > 0.0,
        ..Default::default()
    }
}

/// Shot noise, default delay, optimum delay, anti-squeezing, 200 ns delay.
fn fig2(cfg: &RunConfig, seed: u64, out: &mut Emitter) -> Result<(), FigureError> {
    let p = &cfg.params;
    let traces = synthesize(p, cfg.sample_rate, cfg.samples, seed)?;
    let opts = subtract(p);
    let sq = SqueezeMode::squeezed(p.lock);

    // A second, independent vacuum record against the reference.
    let shot_traces = synthesize(&p.vacuum(), cfg.sample_rate, cfg.samples, seed ^ 0x5eed_0001)?;
    out.spectrum("i_shot", &squeezing_spectrum(&shot_traces, sq, 0.0, &opts)?)?;
    drop(shot_traces);

    let default = squeezing_spectrum(&traces, sq, 0.0, &opts)?;
    out.spectrum("ii_default_delay", &default)?;

    let scan = optimize_delay(
        &traces,
        &DelayScanOptions {
            mode: sq,
            spectrum: opts,
            ..Default::default()
        },
    )?;
    let path = out.dir.join("fig2_delayscan.csv");
    store::write_delay_scan_csv(&path, &scan)?;
    out.files.push(path);
    let best = scan.best_delay;

    let optimum = squeezing_spectrum(&traces, sq, best, &opts)?;
    out.spectrum("iii_optimum_delay", &optimum)?;
    let anti = squeezing_spectrum(&traces, sq.other(), best, &opts)?;
    out.spectrum("iv_antisqueezing", &anti)?;
    let env = oscillation_envelope(&traces, best, OSCILLATION_DELAY, (0.5e6, 15.0e6), sq, &opts)?;
    out.spectrum("v_delay_200ns", &env.spectrum)?;

    out.note("best_delay_ns", ns(best));
    out.note("objective_at_best_db", db(scan.best_objective));
    let band = |s: &Spectrum, lo: f64, hi: f64| s.mean_over(lo, hi).map_or("nan".to_string(), db);
    out.note("default_delay_mean_db_0.5_15MHz", band(&default, 0.5e6, 15e6));
    out.note("optimum_delay_mean_db_0.5_15MHz", band(&optimum, 0.5e6, 15e6));
    out.note("optimum_delay_db_at_1MHz", db(optimum.value_at(1e6)));
    out.note("antisqueezing_db_at_1MHz", db(anti.value_at(1e6)));
    out.note("oscillation_period_hz", format!("{:.0}", env.period));
    Ok(())
}

/// Amplitude-difference (X lock) and phase-sum (P lock) spectra.
fn fig3(cfg: &RunConfig, seed: u64, out: &mut Emitter) -> Result<(), FigureError> {
    let t = cfg.params.group_delay;
    for (lock, tag, sub_seed) in [(LockQuadrature::X, "x", 0u64), (LockQuadrature::P, "p", 1)] {
        let p = SqueezerParams {
            lock,
            ..cfg.params.clone()
        };
        let traces = synthesize(&p, cfg.sample_rate, cfg.samples, seed.wrapping_add(sub_seed))?;
        let sq = SqueezeMode::squeezed(lock);
        let opts = subtract(&p);
        let squeezed = squeezing_spectrum(&traces, sq, t, &opts)?;
        let anti = squeezing_spectrum(&traces, sq.other(), t, &opts)?;
        let name = format!("{tag}_{}", sq.as_str());
        out.spectrum(&name, &squeezed)?;
        out.spectrum(&format!("{tag}_antisqueezing"), &anti)?;
        if opts.subtract_dark {
            let raw = squeezing_spectrum(&traces, sq, t, &SpectrumOptions::default())?;
            out.spectrum(&format!("{name}_no_subtraction"), &raw)?;
        }
        out.note(&format!("{name}_db_at_1MHz"), db(squeezed.value_at(1e6)));
        out.note(&format!("{name}_db_at_100kHz"), db(squeezed.value_at(100e3)));
        out.note(&format!("{tag}_antisqueezing_db_at_1MHz"), db(anti.value_at(1e6)));
    }
    Ok(())
}

/// Sub-Hz squeezing from a single 10 s record, RF high-pass removed.
fn fig4(cfg: &RunConfig, seed: u64, out: &mut Emitter) -> Result<(), FigureError> {
    let p = SqueezerParams {
        highpass: 0.0,
        ..cfg.params.clone()
    };
    let traces = synthesize(&p, LOWFREQ_SAMPLE_RATE, LOWFREQ_SAMPLES, seed)?;
    let opts = LowFreqOptions {
        mode: SqueezeMode::squeezed(p.lock),
        t_extra: p.group_delay,
        subtract_dark: p.electronic_noise > 0.0,
        ..Default::default()
    };
    let s = analysis::lowfreq_spectrum(&traces, &opts)?;
    let keep = s.band(0.0, 100.0);
    let trimmed = Spectrum {
        freqs: s.freqs[keep.clone()].to_vec(),
        values: s.values[keep.clone()].to_vec(),
        stderr: s.stderr.as_ref().map(|e| e[keep.clone()].to_vec()),
        valid: s.valid.as_ref().map(|v| v[keep.clone()].to_vec()),
        ..s.clone()
    };
    out.spectrum("lowfreq", &trimmed)?;
    let sub_hz = s.band(0.0, 0.99);
    let worst = sub_hz.clone().map(|i| s.values[i]).fold(f64::NEG_INFINITY, f64::max);
    out.note("resolution_hz", format_f64(s.resolution));
    out.note("bins_below_1Hz", sub_hz.len());
    out.note("worst_bin_below_1Hz_db", db(worst));
    out.note("mean_db_below_1Hz", db(linear_mean_db(&s, sub_hz)));
    out.note("mean_db_1_100Hz", db(linear_mean_db(&s, s.band(1.0, 100.0))));
    Ok(())
}

/// Bin covariance against bin spacing for three widths, plus a 5 Hz check.
fn fig5(cfg: &RunConfig, seed: u64, out: &mut Emitter) -> Result<(), FigureError> {
    let p = &cfg.params;
    let traces = synthesize(p, cfg.sample_rate, cfg.samples, seed)?;
    let sq = SqueezeMode::squeezed(p.lock);
    let best = optimize_delay(
        &traces,
        &DelayScanOptions {
            mode: sq,
            spectrum: subtract(p),
            ..Default::default()
        },
    )?
    .best_delay;
    out.note("delay_ns", ns(best));
    for (width, tag) in [(200.0e3, "w200khz"), (50.0e3, "w50khz"), (1.0e3, "w1khz")] {
        let scan = qumode_scan(
            &traces,
            &QumodeScanOptions {
                bin_width: width,
                t_extra: best,
                ..Default::default()
            },
        )?;
        write_scan(out, tag, &scan)?;
    }
    drop(traces);

    let long = synthesize_with(
        p,
        NARROW_BIN_SAMPLE_RATE,
        NARROW_BIN_SAMPLES,
        seed ^ 0x5eed_0005,
        SynthOptions { vacuum: false, dark: false },
    )?;
    let scan = qumode_scan(
        &long,
        &QumodeScanOptions {
            probe_center: NARROW_BIN_CENTER,
            bin_width: NARROW_BIN_WIDTH,
            t_extra: p.group_delay,
            ..Default::default()
        },
    )?;
    write_scan(out, "w5hz", &scan)?;
    Ok(())
}

/// dB of the mean linear ratio; single-periodogram bins are exponentially
/// distributed, so averaging their dB values would read about 2.5 dB low.
pub fn linear_mean_db(s: &Spectrum, bins: std::ops::Range<usize>) -> f64 {
    let count = bins.len() as f64;
    let sum: f64 = bins.map(|i| 10f64.powf(s.values[i] / 10.0)).sum();
    10.0 * (sum / count).log10()
}

fn write_scan(out: &mut Emitter, tag: &str, scan: &analysis::CovarianceScan) -> Result<(), StoreError> {
    let path = out.dir.join(format!("fig5_{tag}.csv"));
    store::write_covariance_csv(&path, scan)?;
    out.files.push(path);
    let fit = scan.fit_triangular();
    out.note(&format!("{tag}_scale_rel_shot"), format!("{:.4}", fit.scale / scan.shot_psd));
    out.note(&format!("{tag}_max_abs_residual_se"), format!("{:.3}", fit.max_abs_residual()));
    out.note(&format!("{tag}_max_abs_z_beyond_1"), format!("{:.3}", scan.max_abs_z_beyond(1.0)));
    Ok(())
}
