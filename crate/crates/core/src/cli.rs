//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error (files, formats,
//! configuration text), 4 precondition failure reported by the analysis.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    self, DelayScanOptions, Estimator, LowFreqOptions, QumodeScanOptions, SpectrumOptions, SqueezeMode,
};
use crate::config::{ConfigError, RunConfig, CONFIG_ENV};
use crate::dsp::{Spectrum, WelchConfig};
use crate::figures::{self, Figure, FigureError};
use crate::store::{self, SampleFormat, StoreError};

#[derive(Debug, Parser)]
#[command(name = "tmsq", version, about = "Two-mode squeezed vacuum homodyne simulator and analyser")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// key = value configuration file layered over the built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set eta_probe=0.9`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a trace set and store it.
    Synth(SynthArgs),
    /// Squeezing spectrum in dB relative to shot noise.
    Spectrum(SpectrumArgs),
    /// Search for the conjugate delay that maximises squeezing.
    Delayscan(DelayScanArgs),
    /// Probe/conjugate frequency-bin covariance against bin spacing.
    Binscan(BinScanArgs),
    /// Sub-Hz spectrum from one long transform.
    Lowfreq(LowFreqArgs),
    /// Reproduce one figure end to end.
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Difference,
    Sum,
}

impl From<ModeArg> for SqueezeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Difference => SqueezeMode::Difference,
            ModeArg::Sum => SqueezeMode::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    F64,
    F32,
    I16,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Welch,
    Autocorr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FigureArg {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Sample format; defaults to the lossless one for the record.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct EstimatorOpts {
    #[arg(long, value_enum, default_value = "welch")]
    pub estimator: EstimatorArg,
    /// Segment length in samples (power of two).
    #[arg(long, default_value_t = 1024)]
    pub segment: usize,
    #[arg(long)]
    pub subtract_dark: bool,
}

impl EstimatorOpts {
    fn options(&self) -> SpectrumOptions {
        SpectrumOptions {
            estimator: match self.estimator {
                EstimatorArg::Welch => Estimator::Welch(WelchConfig::display(self.segment)),
                EstimatorArg::Autocorr => Estimator::Autocorrelation { segment: self.segment },
            },
            subtract_dark: self.subtract_dark,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "difference")]
    pub mode: ModeArg,
    /// Extra delay applied to the conjugate, ns.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub delay_ns: f64,
    #[command(flatten)]
    pub est: EstimatorOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DelayScanArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Evaluation band `LO,HI` in Hz.
    #[arg(long, value_parser = parse_pair, default_value = "0.5e6,15e6")]
    pub band: (f64, f64),
    /// Search window `LO,HI` in ns.
    #[arg(long, value_parser = parse_pair, default_value = "-25,25", allow_hyphen_values = true)]
    pub window: (f64, f64),
    #[arg(long, value_enum, default_value = "difference")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub est: EstimatorOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BinScanArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Probe bin centre, Hz.
    #[arg(long, default_value_t = 1.0e6)]
    pub probe_center: f64,
    /// Bin width, Hz.
    #[arg(long, default_value_t = 200.0e3)]
    pub bin_width: f64,
    /// Largest spacing in bin widths.
    #[arg(long, default_value_t = 2.0)]
    pub max_spacing: f64,
    /// Spacing increment in bin widths.
    #[arg(long, default_value_t = 0.25)]
    pub step: f64,
    /// Extra delay applied to the conjugate, ns.
    #[arg(long, default_value_t = 10.4, allow_negative_numbers = true)]
    pub delay_ns: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LowFreqArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "difference")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 10.4, allow_negative_numbers = true)]
    pub delay_ns: f64,
    #[arg(long)]
    pub subtract_dark: bool,
    /// Shortest accepted record, s.
    #[arg(long, default_value_t = 10.0)]
    pub min_duration: f64,
    /// Highest frequency written, Hz.
    #[arg(long, default_value_t = 100.0)]
    pub max_freq: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub figure: FigureArg,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "figures")]
    pub outdir: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `LO,HI`, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug)]
pub enum Failure {
    Data(String),
    Precondition(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Data(_) => 3,
            Failure::Precondition(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Data(m) | Failure::Precondition(m) => m,
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Traces(_) => Failure::Precondition(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Params(_) | ConfigError::Acquisition(_) => Failure::Precondition(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<analysis::AnalysisError> for Failure {
    fn from(e: analysis::AnalysisError) -> Self {
        Failure::Precondition(e.to_string())
    }
}

impl From<crate::synth::SynthError> for Failure {
    fn from(e: crate::synth::SynthError) -> Self {
        Failure::Precondition(e.to_string())
    }
}

impl From<FigureError> for Failure {
    fn from(e: FigureError) -> Self {
        match e {
            FigureError::Store(s) => s.into(),
            FigureError::Config(c) => c.into(),
            other => Failure::Precondition(other.to_string()),
        }
    }
}

/// Built-in defaults, then the config file, then `--set` overrides.
pub fn effective_config(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        cfg.apply_file(path)?;
    }
    for pair in overrides {
        cfg.apply_pair(pair)?;
    }
    Ok(cfg)
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

/// Runs a parsed command; returns the summary lines for stdout.
pub fn run(cli: &Cli) -> Result<Vec<String>, Failure> {
    match cli.threads {
        Some(0) => Err(Failure::Precondition("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Precondition(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<Vec<String>, Failure> {
    let config = || effective_config(cli.config.as_deref(), &cli.overrides);
    match &cli.command {
        Command::Synth(a) => {
            let cfg = config()?;
            cfg.validate()?;
            let mut traces = crate::synth::synthesize(&cfg.params, cfg.sample_rate, cfg.samples, a.seed)?;
            if let Some(path) = &cli.config {
                traces.meta.insert("config_file".into(), path.display().to_string());
            }
            let format = match a.format {
                None => SampleFormat::lossless_for(&traces),
                Some(FormatArg::F64) => SampleFormat::F64,
                Some(FormatArg::F32) => SampleFormat::F32,
                Some(FormatArg::I16) => SampleFormat::I16,
            };
            let bytes = store::write_traces_as(&a.out, &traces, format)?;
            Ok(vec![format!(
                "wrote {} samples x {} channels ({bytes} bytes) to {}",
                traces.n(),
                2 * (1 + traces.dark.is_some() as usize + traces.vacuum.is_some() as usize),
                a.out.display()
            )])
        }
        Command::Spectrum(a) => {
            let traces = store::read_traces(&a.input)?;
            let s = analysis::squeezing_spectrum(&traces, a.mode.into(), a.delay_ns * 1e-9, &a.est.options())?;
            store::write_spectrum_csv(&a.out, &s)?;
            Ok(vec![spectrum_summary(&s, &a.out)])
        }
        Command::Delayscan(a) => {
            let traces = store::read_traces(&a.input)?;
            let opts = DelayScanOptions {
                band: a.band,
                window: (a.window.0 * 1e-9, a.window.1 * 1e-9),
                mode: a.mode.into(),
                spectrum: a.est.options(),
                ..Default::default()
            };
            let r = analysis::optimize_delay(&traces, &opts)?;
            store::write_delay_scan_csv(&a.out, &r)?;
            Ok(vec![format!(
                "best_delay_ns={:.3} objective_db={:.3} grid_points={} refinements={}",
                r.best_delay * 1e9,
                r.best_objective,
                r.delays.len(),
                r.refinement.len()
            )])
        }
        Command::Binscan(a) => {
            let traces = store::read_traces(&a.input)?;
            let opts = QumodeScanOptions {
                probe_center: a.probe_center,
                bin_width: a.bin_width,
                max_spacing: a.max_spacing,
                step: a.step,
                t_extra: a.delay_ns * 1e-9,
                segments: None,
            };
            let scan = analysis::qumode_scan(&traces, &opts)?;
            store::write_covariance_csv(&a.out, &scan)?;
            let fit = scan.fit_triangular();
            Ok(vec![format!(
                "scale_rel_shot={:.4} max_abs_residual_se={:.3} max_abs_z_beyond_1={:.3}",
                fit.scale / scan.shot_psd,
                fit.max_abs_residual(),
                scan.max_abs_z_beyond(1.0)
            )])
        }
        Command::Lowfreq(a) => {
            let traces = store::read_traces(&a.input)?;
            let opts = LowFreqOptions {
                mode: a.mode.into(),
                t_extra: a.delay_ns * 1e-9,
                subtract_dark: a.subtract_dark,
                min_duration: a.min_duration,
                ..Default::default()
            };
            let s = analysis::lowfreq_spectrum(&traces, &opts)?;
            let keep = s.band(0.0, a.max_freq);
            let s = Spectrum {
                freqs: s.freqs[keep.clone()].to_vec(),
                values: s.values[keep.clone()].to_vec(),
                stderr: s.stderr.as_ref().map(|e| e[keep.clone()].to_vec()),
                valid: s.valid.as_ref().map(|v| v[keep.clone()].to_vec()),
                ..s.clone()
            };
            store::write_spectrum_csv(&a.out, &s)?;
            Ok(vec![spectrum_summary(&s, &a.out)])
        }
        Command::Figure(a) => {
            let cfg = config()?;
            let fig = match a.figure {
                FigureArg::Fig2 => Figure::Fig2,
                FigureArg::Fig3 => Figure::Fig3,
                FigureArg::Fig4 => Figure::Fig4,
                FigureArg::Fig5 => Figure::Fig5,
            };
            let out = figures::run(fig, &cfg, a.seed, &a.outdir)?;
            let mut lines = out.summary;
            lines.push(format!("wrote {} files to {}", out.files.len(), a.outdir.display()));
            Ok(lines)
        }
    }
}

fn spectrum_summary(s: &Spectrum, out: &Path) -> String {
    let invalid = (0..s.len()).filter(|&i| !s.is_valid(i)).count();
    format!(
        "wrote {} bins ({} invalid) at {:.4} Hz resolution to {}",
        s.len(),
        invalid,
        s.resolution,
        out.display()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair("0.5e6,15e6"), Ok((0.5e6, 15e6)));
        assert_eq!(parse_pair("-25, 25"), Ok((-25.0, 25.0)));
        assert!(parse_pair("1;2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "eta_probe = 0.5\nsamples = 32768\n").unwrap();
        let cfg = effective_config(Some(&path), &["eta_probe=0.7".into()]).unwrap();
        assert_eq!(cfg.params.eta_probe, 0.7);
        assert_eq!(cfg.samples, 32768);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["tmsq", "nonsense"]), ExitCode::from(2));
        assert_eq!(main_with_args(["tmsq", "spectrum"]), ExitCode::from(2));
    }

    #[test]
    fn missing_file_is_data_error() {
        let code = main_with_args(["tmsq", "spectrum", "--in", "/nonexistent/x.tmsq", "--out", "/tmp/x.csv"]);
        assert_eq!(code, ExitCode::from(3));
    }

    #[test]
    fn bad_parameters_are_precondition_failures() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t.tmsq");
        let code = main_with_args([
            "tmsq",
            "--set",
            "eta_probe=1.5",
            "synth",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, ExitCode::from(4));
    }
}
