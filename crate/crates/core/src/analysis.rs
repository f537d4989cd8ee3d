//! Shot-normalized squeezing spectra, delay compensation and qumode scans.
//!
//! All spectra here are ratios of a combined-channel PSD to the PSD of the
//! same combination formed from the vacuum reference records, reported in dB.

use std::borrow::Cow;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dsp::{
    self, apply_delay, mean_product_jackknife, psd_autocorr, psd_welch, spectral_matrix, DspError, FourierRecord,
    FrequencyBin, SpectralMatrix, Spectrum, SpectrumUnit, WelchConfig,
};
use crate::model::LockQuadrature;
use crate::synth::{ChannelPair, SampleUnits, SynthError, TraceSet};

/// Display floor for dB ratios.
pub const DB_FLOOR: f64 = -60.0;
const DB_PER_NEPER_POWER: f64 = 10.0 / std::f64::consts::LN_10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("trace set has no {0} records")]
    MissingReference(&'static str),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Traces(#[from] SynthError),
    #[error("band [{lo}, {hi}] Hz must satisfy 0 < lo < hi < {nyquist}")]
    Band { lo: f64, hi: f64, nyquist: f64 },
    #[error("delay search window [{lo}, {hi}] s with step {step} s is degenerate")]
    Window { lo: f64, hi: f64, step: f64 },
    #[error("no valid bins inside the evaluation band")]
    NoValidBins,
    #[error("{periods:.2} oscillation periods in band; need at least 1")]
    TooFewPeriods { periods: f64 },
    #[error("oscillation not resolved above the noise")]
    NoOscillation,
    #[error("record lasts {duration} s; need at least {required} s")]
    RecordTooShort { duration: f64, required: f64 },
    #[error("bad scan setting: {0}")]
    Scan(&'static str),
}

/// Which channel combination is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeMode {
    /// `(probe − conjugate)/√2`: amplitude difference.
    Difference,
    /// `(probe + conjugate)/√2`: phase sum.
    Sum,
}

impl SqueezeMode {
    pub fn sign(self) -> f64 {
        match self {
            SqueezeMode::Difference => -1.0,
            SqueezeMode::Sum => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SqueezeMode::Difference => "difference",
            SqueezeMode::Sum => "sum",
        }
    }

    /// The combination a lock on `lock` holds squeezed.
    pub fn squeezed(lock: LockQuadrature) -> Self {
        match lock {
            LockQuadrature::X => SqueezeMode::Difference,
            LockQuadrature::P => SqueezeMode::Sum,
        }
    }

    pub fn other(self) -> Self {
        match self {
            SqueezeMode::Difference => SqueezeMode::Sum,
            SqueezeMode::Sum => SqueezeMode::Difference,
        }
    }
}

/// PSD estimator used for the broadband spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Welch(WelchConfig),
    /// Transform of the averaged biased autocorrelation over non-overlapping
    /// segments of this length.
    Autocorrelation { segment: usize },
}

impl Estimator {
    /// Welch configuration with the same expectation and grid.
    fn welch(self) -> WelchConfig {
        match self {
            Estimator::Welch(cfg) => cfg,
            Estimator::Autocorrelation { segment } => WelchConfig::exact(segment),
        }
    }

    fn estimate(self, x: &[f64], fs: f64) -> Result<Spectrum, DspError> {
        match self {
            Estimator::Welch(cfg) => psd_welch(x, fs, &cfg),
            Estimator::Autocorrelation { segment } => psd_autocorr(x, fs, segment),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub estimator: Estimator,
    pub subtract_dark: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::Welch(WelchConfig::display(1024)),
            subtract_dark: false,
        }
    }
}

/// Samples of `ch` in shot-noise σ.
fn shot_units<'a>(traces: &TraceSet, ch: &'a [f64]) -> Cow<'a, [f64]> {
    match traces.units {
        SampleUnits::ShotSigma => Cow::Borrowed(ch),
        SampleUnits::AdcCodes { step } => Cow::Owned(ch.iter().map(|v| v * step).collect()),
    }
}

/// `(probe ± conjugate delayed by t_extra)/√2`.
pub fn combine(probe: &[f64], conjugate: &[f64], fs: f64, t_extra: f64, mode: SqueezeMode) -> Result<Vec<f64>, DspError> {
    if probe.len() != conjugate.len() {
        return Err(DspError::LengthMismatch(probe.len(), conjugate.len()));
    }
    let delayed = apply_delay(conjugate, fs, t_extra)?;
    let s = mode.sign();
    Ok(probe
        .iter()
        .zip(&delayed)
        .map(|(p, c)| (p + s * c) * FRAC_1_SQRT_2)
        .collect())
}

fn pair_psd(
    traces: &TraceSet,
    pair: (&[f64], &[f64]),
    mode: SqueezeMode,
    t_extra: f64,
    estimator: Estimator,
) -> Result<Spectrum, DspError> {
    let p = shot_units(traces, pair.0);
    let c = shot_units(traces, pair.1);
    let x = combine(&p, &c, traces.fs, t_extra, mode)?;
    estimator.estimate(&x, traces.fs)
}

fn references<'a>(
    traces: &'a TraceSet,
    subtract_dark: bool,
) -> Result<(&'a ChannelPair, Option<&'a ChannelPair>), AnalysisError> {
    traces.validate()?;
    let vacuum = traces.vacuum.as_ref().ok_or(AnalysisError::MissingReference("vacuum"))?;
    let dark = if subtract_dark {
        Some(traces.dark.as_ref().ok_or(AnalysisError::MissingReference("dark"))?)
    } else {
        None
    };
    Ok((vacuum, dark))
}

/// Per-bin `10·log10((signal − dark)/(shot − dark))`, DC and Nyquist dropped.
///
/// Bins where either difference is not positive are flagged invalid and
/// carry [`DB_FLOOR`].
pub fn ratio_db(signal: &Spectrum, shot: &Spectrum, dark: Option<&Spectrum>) -> Spectrum {
    let n = signal.len();
    let rel_var = |s: &Spectrum, k: usize| -> f64 { s.stderr.as_ref().map_or(0.0, |e| e[k] * e[k]) };
    let mut freqs = Vec::with_capacity(n.saturating_sub(2));
    let mut values = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for k in 1..n.saturating_sub(1) {
        let d = dark.map_or(0.0, |d| d.values[k]);
        let dvar = dark.map_or(0.0, |d| rel_var(d, k));
        let s = signal.values[k] - d;
        let h = shot.values[k] - d;
        let ok = s > 0.0 && h > 0.0;
        freqs.push(signal.freqs[k]);
        valid.push(ok);
        if ok {
            values.push((10.0 * (s / h).log10()).max(DB_FLOOR));
            let rs = (rel_var(signal, k) + dvar) / (s * s);
            let rh = (rel_var(shot, k) + dvar) / (h * h);
            stderr.push(DB_PER_NEPER_POWER * (rs + rh).sqrt());
        } else {
            values.push(DB_FLOOR);
            stderr.push(f64::INFINITY);
        }
    }
    Spectrum {
        freqs,
        values,
        resolution: signal.resolution,
        unit: SpectrumUnit::DbRelShot,
        stderr: Some(stderr),
        valid: Some(valid),
    }
}

/// Squeezing (or anti-squeezing) spectrum in dB relative to shot noise after
/// delaying the conjugate by `t_extra`.
pub fn squeezing_spectrum(
    traces: &TraceSet,
    mode: SqueezeMode,
    t_extra: f64,
    opts: &SpectrumOptions,
) -> Result<Spectrum, AnalysisError> {
    let (vacuum, dark) = references(traces, opts.subtract_dark)?;
    let est = opts.estimator;
    let signal = pair_psd(traces, (&traces.probe, &traces.conjugate), mode, t_extra, est)?;
    let shot = pair_psd(traces, (&vacuum.probe, &vacuum.conjugate), mode, t_extra, est)?;
    let dark = dark
        .map(|d| pair_psd(traces, (&d.probe, &d.conjugate), mode, t_extra, est))
        .transpose()?;
    Ok(ratio_db(&signal, &shot, dark.as_ref()))
}

fn check_band(band: (f64, f64), fs: f64) -> Result<(), AnalysisError> {
    let nyquist = 0.5 * fs;
    let (lo, hi) = band;
    if lo > 0.0 && lo < hi && hi < nyquist {
        Ok(())
    } else {
        Err(AnalysisError::Band { lo, hi, nyquist })
    }
}

/// Spectral matrices of the signal pair and the combined reference PSDs,
/// in shot-noise units.
struct Matrices {
    signal: SpectralMatrix,
    shot: Vec<f64>,
    dark: Option<Vec<f64>>,
}

impl Matrices {
    fn new(traces: &TraceSet, mode: SqueezeMode, opts: &SpectrumOptions) -> Result<Self, AnalysisError> {
        let (vacuum, dark) = references(traces, opts.subtract_dark)?;
        let cfg = opts.estimator.welch();
        let fs = traces.fs;
        let matrix = |pair: (&[f64], &[f64])| {
            spectral_matrix(&shot_units(traces, pair.0), &shot_units(traces, pair.1), fs, &cfg)
        };
        let signal = matrix((&traces.probe, &traces.conjugate))?;
        let mut shot = Vec::new();
        matrix((&vacuum.probe, &vacuum.conjugate))?.combined(0.0, mode.sign(), &mut shot);
        let dark = dark
            .map(|d| -> Result<Vec<f64>, DspError> {
                let mut out = Vec::new();
                matrix((&d.probe, &d.conjugate))?.combined(0.0, mode.sign(), &mut out);
                Ok(out)
            })
            .transpose()?;
        Ok(Self { signal, shot, dark })
    }

    fn ratio(&self, k: usize, value: f64) -> Option<f64> {
        let d = self.dark.as_ref().map_or(0.0, |d| d[k]);
        let (s, h) = (value - d, self.shot[k] - d);
        (s > 0.0 && h > 0.0).then(|| s / h)
    }

    /// dB spectrum of an arbitrary combined PSD on the signal grid.
    fn to_db(&self, combined: &[f64], rel_se: f64) -> Spectrum {
        let n = combined.len();
        let mut values = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for k in 1..n - 1 {
            match self.ratio(k, combined[k]) {
                Some(r) => {
                    values.push((10.0 * r.log10()).max(DB_FLOOR));
                    valid.push(true);
                }
                None => {
                    values.push(DB_FLOOR);
                    valid.push(false);
                }
            }
        }
        let se = DB_PER_NEPER_POWER * rel_se * 2f64.sqrt();
        Spectrum {
            freqs: self.signal.freqs[1..n - 1].to_vec(),
            stderr: Some(vec![se; values.len()]),
            values,
            resolution: self.signal.resolution,
            unit: SpectrumUnit::DbRelShot,
            valid: Some(valid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayScanOptions {
    /// Evaluation band for the objective, Hz.
    pub band: (f64, f64),
    /// Search window for the extra conjugate delay, seconds.
    pub window: (f64, f64),
    pub coarse_step: f64,
    pub tolerance: f64,
    pub mode: SqueezeMode,
    pub spectrum: SpectrumOptions,
}

impl Default for DelayScanOptions {
    fn default() -> Self {
        Self {
            band: (0.5e6, 15.0e6),
            window: (-25.0e-9, 25.0e-9),
            coarse_step: 1.0e-9,
            tolerance: 0.05e-9,
            mode: SqueezeMode::Difference,
            spectrum: SpectrumOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayScanResult {
    /// Coarse grid, seconds.
    pub delays: Vec<f64>,
    /// Mean squeezing over the band at each grid delay, dB.
    pub objective: Vec<f64>,
    pub best_delay: f64,
    pub best_objective: f64,
    /// Delays and objective values visited by the golden-section refinement.
    pub refinement: Vec<(f64, f64)>,
    pub band: (f64, f64),
    pub coarse_step: f64,
    pub tolerance: f64,
    pub mode: SqueezeMode,
}

/// Finds the extra conjugate delay that minimises the band-averaged dB level
/// of `opts.mode`. `mode` should be the squeezed combination.
///
/// Delaying `y` by `τ` multiplies its cross spectrum with `x` by
/// `e^(−i2πfτ)`, so the objective is evaluated for every delay from a single
/// spectral matrix of the record.
pub fn optimize_delay(traces: &TraceSet, opts: &DelayScanOptions) -> Result<DelayScanResult, AnalysisError> {
    check_band(opts.band, traces.fs)?;
    let (lo, hi) = opts.window;
    let step = opts.coarse_step;
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && hi - lo >= step && opts.tolerance > 0.0) {
        return Err(AnalysisError::Window { lo, hi, step });
    }
    let m = Matrices::new(traces, opts.mode, &opts.spectrum)?;
    let bins: Vec<usize> = {
        let f = &m.signal.freqs;
        (1..f.len() - 1).filter(|&k| f[k] >= opts.band.0 && f[k] <= opts.band.1).collect()
    };
    if bins.is_empty() {
        return Err(AnalysisError::NoValidBins);
    }
    let sign = opts.mode.sign();
    let objective = |tau: f64| -> Option<f64> {
        let mut comb = Vec::new();
        m.signal.combined(tau, sign, &mut comb);
        let (sum, count) = bins
            .iter()
            .filter_map(|&k| m.ratio(k, comb[k]))
            .fold((0.0, 0usize), |(s, c), r| (s + 10.0 * r.log10(), c + 1));
        (count > 0).then(|| sum / count as f64)
    };

    let points = ((hi - lo) / step).round() as usize;
    let delays: Vec<f64> = (0..=points).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let values: Vec<f64> = delays
        .par_iter()
        .map(|&t| objective(t).ok_or(AnalysisError::NoValidBins))
        .collect::<Result<_, _>>()?;
    let (imin, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });

    // Golden-section search on the bracket around the coarse minimum.
    let mut refinement = Vec::new();
    let mut a = (delays[imin] - step).max(lo);
    let mut b = (delays[imin] + step).min(hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |t: f64, log: &mut Vec<(f64, f64)>| -> Result<f64, AnalysisError> {
        let v = objective(t).ok_or(AnalysisError::NoValidBins)?;
        log.push((t, v));
        Ok(v)
    };
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c, &mut refinement)?;
    let mut fd = eval(d, &mut refinement)?;
    while b - a > opts.tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c, &mut refinement)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d, &mut refinement)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fmid = eval(mid, &mut refinement)?;
    let (best_delay, best_objective) = if fmid <= values[imin] {
        (mid, fmid)
    } else {
        (delays[imin], values[imin])
    };
    Ok(DelayScanResult {
        delays,
        objective: values,
        best_delay,
        best_objective,
        refinement,
        band: opts.band,
        coarse_step: step,
        tolerance: opts.tolerance,
        mode: opts.mode,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationEnvelope {
    /// Extra delay relative to the reference, seconds.
    pub delay: f64,
    /// Oscillation period in Hz.
    pub period: f64,
    /// Frequencies of the spectrum's extrema, alternating min/max.
    pub extrema: Vec<f64>,
    /// The spectrum at `reference_delay + delay`.
    pub spectrum: Spectrum,
    /// Per-bin minimum over the delay dither.
    pub lower: Spectrum,
    /// Per-bin maximum over the delay dither.
    pub upper: Spectrum,
}

/// Spectrum at a large extra delay, its oscillation period and envelopes.
///
/// A delay change `δ` rotates the cross term of the combined PSD by
/// `e^(−i2πfδ)`; over a dither spanning one period at each bin the combined
/// PSD therefore sweeps `½(Pxx + Pyy) ± |Pxy|`, which are the envelopes
/// reported here. The period comes from the spacing of the extrema, located
/// where the phase of the rotated cross spectrum crosses multiples of π.
pub fn oscillation_envelope(
    traces: &TraceSet,
    reference_delay: f64,
    delay: f64,
    band: (f64, f64),
    mode: SqueezeMode,
    opts: &SpectrumOptions,
) -> Result<OscillationEnvelope, AnalysisError> {
    check_band(band, traces.fs)?;
    let periods = delay.abs() * (band.1 - band.0);
    if !(periods >= 1.0) {
        return Err(AnalysisError::TooFewPeriods { periods });
    }
    let m = Matrices::new(traces, mode, opts)?;
    let s = &m.signal;
    let tau = reference_delay + delay;
    let n = s.freqs.len();
    let rel_se = s.variance_factor.sqrt();

    let mut comb = Vec::new();
    s.combined(tau, mode.sign(), &mut comb);
    let mean: Vec<f64> = (0..n).map(|k| 0.5 * (s.pxx[k] + s.pyy[k])).collect();
    let lower: Vec<f64> = (0..n).map(|k| mean[k] - s.pxy[k].norm()).collect();
    let upper: Vec<f64> = (0..n).map(|k| mean[k] + s.pxy[k].norm()).collect();

    // Phase of the rotated cross term, averaged over a fraction of the
    // expected period, along the contiguous run where it is resolved.
    let rotated: Vec<Complex64> = (0..n)
        .map(|k| s.pxy[k] * Complex64::from_polar(1.0, -2.0 * PI * s.freqs[k] * tau))
        .collect();
    let half = ((1.0 / (delay.abs() * s.resolution)) / 16.0).round().max(0.0) as usize;
    let start = s.freqs.partition_point(|&f| f < band.0).max(1 + half);
    let mut phase: Vec<(f64, f64)> = Vec::new();
    for k in start..n.saturating_sub(1 + half) {
        if s.freqs[k] > band.1 {
            break;
        }
        let avg: Complex64 = rotated[k - half..=k + half].iter().sum::<Complex64>() / (2 * half + 1) as f64;
        let noise = (s.pxx[k] * s.pyy[k]).sqrt() * rel_se / ((2 * half + 1) as f64).sqrt();
        if avg.norm() < 5.0 * noise {
            break;
        }
        let mut p = avg.arg();
        if let Some(&(_, last)) = phase.last() {
            p += 2.0 * PI * ((last - p) / (2.0 * PI)).round();
        }
        phase.push((s.freqs[k], p));
    }
    // Each multiple of π is counted once, on first passage, so phase noise
    // near a crossing cannot register it twice.
    let mut extrema = Vec::new();
    if let (Some(&(_, first)), Some(&(_, last))) = (phase.first(), phase.last()) {
        let dir = if last >= first { 1.0 } else { -1.0 };
        let mut next = if dir > 0.0 { (first / PI).floor() + 1.0 } else { (first / PI).ceil() - 1.0 };
        for w in phase.windows(2) {
            let ((f0, p0), (f1, p1)) = (w[0], w[1]);
            let target = PI * next;
            if dir * (p1 - target) >= 0.0 && dir * (p0 - target) < 0.0 {
                extrema.push(f0 + (target - p0) / (p1 - p0) * (f1 - f0));
                next += dir;
            }
        }
    }
    if extrema.len() < 2 {
        return Err(AnalysisError::NoOscillation);
    }
    // Least-squares slope of extremum frequency against its index.
    let cnt = extrema.len() as f64;
    let jm = (cnt - 1.0) / 2.0;
    let fm = extrema.iter().sum::<f64>() / cnt;
    let (num, den) = extrema.iter().enumerate().fold((0.0, 0.0), |(nu, de), (j, f)| {
        let dj = j as f64 - jm;
        (nu + dj * (f - fm), de + dj * dj)
    });
    let period = 2.0 * num / den;

    Ok(OscillationEnvelope {
        delay,
        period,
        extrema,
        spectrum: m.to_db(&comb, rel_se),
        lower: m.to_db(&lower, rel_se),
        upper: m.to_db(&upper, rel_se),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QumodeScanOptions {
    pub probe_center: f64,
    pub bin_width: f64,
    /// Largest conjugate-bin offset, in bin widths.
    pub max_spacing: f64,
    /// Offset increment, in bin widths.
    pub step: f64,
    /// Extra conjugate delay applied before filtering, seconds.
    pub t_extra: f64,
    /// Jackknife blocks; `None` picks a default from the record and width.
    pub segments: Option<usize>,
}

impl Default for QumodeScanOptions {
    fn default() -> Self {
        Self {
            probe_center: 1.0e6,
            bin_width: 200.0e3,
            max_spacing: 2.0,
            step: 0.25,
            t_extra: 10.4e-9,
            segments: None,
        }
    }
}

/// Probe–conjugate bin covariance against the conjugate-bin offset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceScan {
    pub bin_width: f64,
    pub probe_center: f64,
    /// Offsets of the conjugate bin centre, in bin widths.
    pub spacings: Vec<f64>,
    /// Covariance divided by bin width, shot-noise σ² per Hz.
    pub covariances: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Shot-noise PSD over the probe bin, same unit as `covariances`.
    pub shot_psd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangularFit {
    /// Fitted covariance at zero offset.
    pub scale: f64,
    pub scale_stderr: f64,
    /// `(value − fit)/stderr` per point.
    pub residuals: Vec<f64>,
}

impl TriangularFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

impl CovarianceScan {
    pub fn z_scores(&self) -> Vec<f64> {
        self.covariances
            .iter()
            .zip(&self.standard_errors)
            .map(|(c, s)| if *s > 0.0 { c / s } else { 0.0 })
            .collect()
    }

    /// Covariances relative to the shot-noise PSD.
    pub fn normalized(&self) -> Vec<f64> {
        self.covariances.iter().map(|c| c / self.shot_psd).collect()
    }

    /// Largest `|z|` among offsets strictly greater than `spacing`.
    pub fn max_abs_z_beyond(&self, spacing: f64) -> f64 {
        self.spacings
            .iter()
            .zip(self.z_scores())
            .filter(|(s, _)| **s > spacing + 1e-9)
            .fold(0.0, |m, (_, z)| m.max(z.abs()))
    }

    /// Weighted least-squares fit of `K · max(0, 1 − s)`.
    pub fn fit_triangular(&self) -> TriangularFit {
        let shape: Vec<f64> = self.spacings.iter().map(|s| (1.0 - s).max(0.0)).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for ((t, c), se) in shape.iter().zip(&self.covariances).zip(&self.standard_errors) {
            let w = 1.0 / (se * se);
            num += w * t * c;
            den += w * t * t;
        }
        let scale = if den > 0.0 { num / den } else { 0.0 };
        let residuals = shape
            .iter()
            .zip(&self.covariances)
            .zip(&self.standard_errors)
            .map(|((t, c), se)| (c - scale * t) / se)
            .collect();
        TriangularFit {
            scale,
            scale_stderr: if den > 0.0 { den.sqrt().recip() } else { f64::INFINITY },
            residuals,
        }
    }
}

/// Sweeps the conjugate bin upward from the probe bin and records the
/// width-normalized covariance of the square-filtered channels.
pub fn qumode_scan(traces: &TraceSet, opts: &QumodeScanOptions) -> Result<CovarianceScan, AnalysisError> {
    traces.validate()?;
    if !(opts.step > 0.0 && opts.max_spacing >= 0.0 && opts.max_spacing.is_finite()) {
        return Err(AnalysisError::Scan("step must be > 0 and max_spacing >= 0"));
    }
    let fs = traces.fs;
    let w = opts.bin_width;
    let probe_bin = FrequencyBin::new(opts.probe_center, w);
    probe_bin.validate(fs)?;
    FrequencyBin::new(opts.probe_center + opts.max_spacing * w, w).validate(fs)?;

    let probe = FourierRecord::new(&shot_units(traces, &traces.probe), fs)?;
    let conj = FourierRecord::new(&shot_units(traces, &traces.conjugate), fs)?.delayed(opts.t_extra)?;
    let segments = opts
        .segments
        .unwrap_or_else(|| dsp::jackknife_segments(traces.duration(), w));
    let xf = probe.square_band(&probe_bin)?;

    let steps = (opts.max_spacing / opts.step + 1e-9).floor() as usize;
    let spacings: Vec<f64> = (0..=steps).map(|i| i as f64 * opts.step).collect();
    let results: Vec<(f64, f64)> = spacings
        .par_iter()
        .map(|s| -> Result<(f64, f64), AnalysisError> {
            let bin = FrequencyBin::new(opts.probe_center + s * w, w);
            let yf = conj.square_band(&bin)?;
            let (mean, se) = mean_product_jackknife(&xf, &yf, segments)?;
            Ok((mean / w, se / w))
        })
        .collect::<Result<_, _>>()?;

    let shot_psd = match &traces.vacuum {
        Some(v) => FourierRecord::new(&shot_units(traces, &v.probe), fs)?.mean_psd(&probe_bin)?,
        None => 2.0 / fs,
    };
    Ok(CovarianceScan {
        bin_width: w,
        probe_center: opts.probe_center,
        spacings,
        covariances: results.iter().map(|r| r.0).collect(),
        standard_errors: results.iter().map(|r| r.1).collect(),
        shot_psd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowFreqOptions {
    pub mode: SqueezeMode,
    pub t_extra: f64,
    pub subtract_dark: bool,
    /// Shortest accepted record, seconds.
    pub min_duration: f64,
    /// Half-width, in bins, of the moving average applied to the shot reference.
    pub shot_smoothing: usize,
}

impl Default for LowFreqOptions {
    fn default() -> Self {
        Self {
            mode: SqueezeMode::Difference,
            t_extra: 10.4e-9,
            subtract_dark: false,
            min_duration: 10.0,
            shot_smoothing: 50,
        }
    }
}

/// Single full-record transform, resolution `1/duration`.
///
/// The signal bins are raw periodogram values (relative standard error 1).
/// The shot reference is the vacuum periodogram averaged over
/// `±shot_smoothing` neighbouring bins, so it adds little scatter of its own.
pub fn lowfreq_spectrum(traces: &TraceSet, opts: &LowFreqOptions) -> Result<Spectrum, AnalysisError> {
    let (vacuum, dark) = references(traces, opts.subtract_dark)?;
    let required = opts.min_duration;
    let duration = traces.duration();
    if duration < required * (1.0 - 1e-12) {
        return Err(AnalysisError::RecordTooShort { duration, required });
    }
    let fs = traces.fs;
    let periodogram = |pair: (&[f64], &[f64])| -> Result<Spectrum, DspError> {
        let p = shot_units(traces, pair.0);
        let c = shot_units(traces, pair.1);
        let x = combine(&p, &c, fs, opts.t_extra, opts.mode)?;
        Ok(FourierRecord::new(&x, fs)?.periodogram())
    };
    let signal = periodogram((&traces.probe, &traces.conjugate))?;
    let shot = smooth(&periodogram((&vacuum.probe, &vacuum.conjugate))?, opts.shot_smoothing);
    let dark = dark
        .map(|d| periodogram((&d.probe, &d.conjugate)).map(|s| smooth(&s, opts.shot_smoothing)))
        .transpose()?;
    Ok(ratio_db(&signal, &shot, dark.as_ref()))
}

/// Moving average over interior bins (DC and Nyquist excluded), with the
/// standard error reduced accordingly.
fn smooth(s: &Spectrum, half: usize) -> Spectrum {
    let n = s.len();
    let mut prefix = vec![0.0; n + 1];
    for k in 0..n {
        let v = if k == 0 || k == n - 1 { 0.0 } else { s.values[k] };
        prefix[k + 1] = prefix[k] + v;
    }
    let mut values = s.values.clone();
    let mut stderr = s.values.clone();
    for k in 1..n.saturating_sub(1) {
        let lo = k.saturating_sub(half).max(1);
        let hi = (k + half).min(n - 2);
        let count = (hi - lo + 1) as f64;
        values[k] = (prefix[hi + 1] - prefix[lo]) / count;
        stderr[k] = values[k] / count.sqrt();
    }
    Spectrum {
        values,
        stderr: Some(stderr),
        ..s.clone()
    }
}
