//! Two-channel spectral estimation and filtering.
//!
//! Conventions used throughout:
//!
//! * DFTs are unnormalized, `X[k] = Σ x[t] e^(−i2πkt/n)`.
//! * PSDs are one-sided, in (input units)² per Hz, so that the sum of
//!   `psd · Δf` over all bins equals the mean square of the input.
//! * Cross spectra are `E[X* · Y]`: for `y` equal to `x` delayed by `τ`
//!   the cross spectrum is `P_xx · e^(−i2πfτ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fourier::{self, RealFft};

/// Segments handled by one parallel work item. Fixed so that the summation
/// order, and therefore every bit of the result, does not depend on the
/// number of worker threads.
const SEGMENTS_PER_TASK: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("input is empty")]
    Empty,
    #[error("sample rate must be positive, got {0}")]
    SampleRate(f64),
    #[error("segment length {0} is not a power of two >= 2")]
    SegmentNotPowerOfTwo(usize),
    #[error("segment length {segment} exceeds record length {n}")]
    SegmentTooLong { segment: usize, n: usize },
    #[error("overlap fraction {0} must lie in [0, 1)")]
    Overlap(f64),
    #[error("channel lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("delay {tau} s exceeds the record duration {duration} s")]
    DelayTooLong { tau: f64, duration: f64 },
    #[error("frequency bin [{lo}, {hi}] Hz is not inside (0, {nyquist}) Hz")]
    BinOutOfBand { lo: f64, hi: f64, nyquist: f64 },
    #[error("frequency bin width must be positive, got {0}")]
    BinWidth(f64),
    #[error("frequency bin of width {width} Hz contains no DFT bin at resolution {resolution} Hz")]
    BinTooNarrow { width: f64, resolution: f64 },
    #[error("transition bandwidth {0} Hz must be positive and smaller than the bin")]
    Transition(f64),
    #[error("need at least 2 resampling segments, got {0}")]
    Segments(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Periodic window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Segmentation for averaged-periodogram estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment: usize,
    pub window: Window,
    pub overlap: f64,
}

impl WelchConfig {
    /// Hann, 50 % overlap: lower variance, for display spectra.
    pub fn display(segment: usize) -> Self {
        Self {
            segment,
            window: Window::Hann,
            overlap: 0.5,
        }
    }

    /// Rectangular, no overlap: exact Parseval bookkeeping.
    pub fn exact(segment: usize) -> Self {
        Self {
            segment,
            window: Window::Rectangular,
            overlap: 0.0,
        }
    }

    fn step(&self) -> usize {
        let overlap = (self.overlap * self.segment as f64).floor() as usize;
        (self.segment - overlap).max(1)
    }

    fn check(&self, n: usize) -> Result<(), DspError> {
        check_segment(self.segment, n)?;
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(DspError::Overlap(self.overlap));
        }
        Ok(())
    }

    pub fn segment_count(&self, n: usize) -> usize {
        if n < self.segment {
            0
        } else {
            (n - self.segment) / self.step() + 1
        }
    }

    /// Variance of the averaged periodogram relative to the square of its
    /// mean, for Gaussian input with a smooth spectrum.
    pub fn variance_factor(&self, n: usize) -> f64 {
        let k = self.segment_count(n);
        let w = self.window.coefficients(self.segment);
        let power: f64 = w.iter().map(|v| v * v).sum();
        let step = self.step();
        let mut sum = 1.0;
        let mut j = 1;
        while j < k && j * step < self.segment {
            let lag = j * step;
            let c: f64 = (0..self.segment - lag).map(|i| w[i] * w[i + lag]).sum();
            let rho = (c / power).powi(2);
            sum += 2.0 * (1.0 - j as f64 / k as f64) * rho;
            j += 1;
        }
        sum / k as f64
    }
}

fn check_segment(segment: usize, n: usize) -> Result<(), DspError> {
    if segment < 2 || !segment.is_power_of_two() {
        return Err(DspError::SegmentNotPowerOfTwo(segment));
    }
    if segment > n {
        return Err(DspError::SegmentTooLong { segment, n });
    }
    Ok(())
}

fn check_rate(fs: f64) -> Result<(), DspError> {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(DspError::SampleRate(fs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumUnit {
    /// Power per Hz in the units of the input record.
    Absolute,
    /// Decibels relative to the shot-noise reference.
    DbRelShot,
}

impl SpectrumUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumUnit::Absolute => "per_hz",
            SpectrumUnit::DbRelShot => "db_rel_shot",
        }
    }
}

/// One-sided spectrum on an ascending frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub resolution: f64,
    pub unit: SpectrumUnit,
    /// One-standard-deviation statistical uncertainty per bin, same unit.
    pub stderr: Option<Vec<f64>>,
    /// `false` marks bins whose value is a floor rather than a measurement.
    pub valid: Option<Vec<bool>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid.as_ref().map_or(true, |v| v[i])
    }

    /// Indices of bins with `lo <= f <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.freqs.partition_point(|&f| f < lo);
        let end = self.freqs.partition_point(|&f| f <= hi);
        start..end.max(start)
    }

    /// Index of the bin closest to `f`.
    pub fn nearest(&self, f: f64) -> usize {
        let i = self.freqs.partition_point(|&x| x < f);
        if i == 0 {
            0
        } else if i >= self.freqs.len() {
            self.freqs.len() - 1
        } else if (self.freqs[i] - f) < (f - self.freqs[i - 1]) {
            i
        } else {
            i - 1
        }
    }

    pub fn value_at(&self, f: f64) -> f64 {
        self.values[self.nearest(f)]
    }

    /// Mean of the valid values in `[lo, hi]`, or `None` if there are none.
    pub fn mean_over(&self, lo: f64, hi: f64) -> Option<f64> {
        let (sum, count) = self
            .band(lo, hi)
            .filter(|&i| self.is_valid(i))
            .fold((0.0, 0usize), |(s, c), i| (s + self.values[i], c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// `Σ value · Δf`; meaningful for absolute PSDs only.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution
    }
}

/// Complex cross spectrum `E[X* Y]`, one-sided.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub resolution: f64,
    pub segments: usize,
}

/// Auto and cross spectra of a channel pair from a single pass over the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    pub freqs: Vec<f64>,
    pub resolution: f64,
    pub pxx: Vec<f64>,
    pub pyy: Vec<f64>,
    pub pxy: Vec<Complex64>,
    pub variance_factor: f64,
}

impl SpectralMatrix {
    /// PSD of `(x ± y_τ)/√2` where `y_τ` is `y` delayed by `tau`.
    /// `sign` is −1 for the difference and +1 for the sum.
    pub fn combined(&self, tau: f64, sign: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.freqs.iter().enumerate().map(|(k, &f)| {
            let rot = Complex64::from_polar(1.0, -2.0 * PI * f * tau);
            0.5 * (self.pxx[k] + self.pyy[k] + 2.0 * sign * (self.pxy[k] * rot).re)
        }));
    }
}

fn one_sided_scale(k: usize, segment: usize, fs: f64, window_power: f64) -> f64 {
    if k == 0 || k == segment / 2 {
        1.0 / (fs * window_power)
    } else {
        2.0 / (fs * window_power)
    }
}

fn grid(segment: usize, fs: f64) -> Vec<f64> {
    (0..=segment / 2).map(|k| k as f64 * fs / segment as f64).collect()
}

/// Sums `visit(acc, segment_index)` over `count` segments in a fixed order.
fn accumulate<T, F>(count: usize, init: T, visit: F) -> T
where
    T: Clone + Send + Sync + AddAssignAll,
    F: Fn(&mut T, usize) + Sync,
{
    let tasks = count.div_ceil(SEGMENTS_PER_TASK);
    let partials: Vec<T> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut acc = init.clone();
            let first = task * SEGMENTS_PER_TASK;
            for s in first..(first + SEGMENTS_PER_TASK).min(count) {
                visit(&mut acc, s);
            }
            acc
        })
        .collect();
    let mut total = init;
    for p in &partials {
        total.add_assign_all(p);
    }
    total
}

fn windowed_segment(x: &[f64], start: usize, window: &[f64]) -> Vec<f64> {
    x[start..start + window.len()].iter().zip(window).map(|(v, w)| v * w).collect()
}

trait AddAssignAll {
    fn add_assign_all(&mut self, other: &Self);
}

impl AddAssignAll for Vec<f64> {
    fn add_assign_all(&mut self, other: &Self) {
        self.iter_mut().zip(other).for_each(|(a, b)| *a += b);
    }
}

impl AddAssignAll for (Vec<f64>, Vec<f64>, Vec<Complex64>) {
    fn add_assign_all(&mut self, other: &Self) {
        self.0.add_assign_all(&other.0);
        self.1.add_assign_all(&other.1);
        self.2.iter_mut().zip(&other.2).for_each(|(a, b)| *a += b);
    }
}

/// Welch averaged-periodogram PSD.
///
/// Each segment is multiplied by the window and scaled by `1 / (fs · Σw²)`,
/// which makes the estimate unbiased for white noise under any window and
/// keeps Parseval exact for the rectangular, non-overlapping case.
pub fn psd_welch(x: &[f64], fs: f64, cfg: &WelchConfig) -> Result<Spectrum, DspError> {
    check_rate(fs)?;
    cfg.check(x.len())?;
    let l = cfg.segment;
    let bins = l / 2 + 1;
    let count = cfg.segment_count(x.len());
    let window = cfg.window.coefficients(l);
    let step = cfg.step();
    let fft = RealFft::new(l);
    let sums = accumulate(count, vec![0.0; bins], |acc, s| {
        let xs = fft.forward(&windowed_segment(x, s * step, &window));
        for (a, v) in acc.iter_mut().zip(&xs) {
            *a += v.norm_sqr();
        }
    });
    let power: f64 = window.iter().map(|w| w * w).sum();
    let values: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(k, s)| s * one_sided_scale(k, l, fs, power) / count as f64)
        .collect();
    let rel = cfg.variance_factor(x.len()).sqrt();
    let stderr = values.iter().map(|v| v * rel).collect();
    Ok(Spectrum {
        freqs: grid(l, fs),
        values,
        resolution: fs / l as f64,
        unit: SpectrumUnit::Absolute,
        stderr: Some(stderr),
        valid: None,
    })
}

/// PSD from the Fourier transform of the averaged biased autocorrelation.
///
/// The record is cut into non-overlapping segments of length `segment`; each
/// contributes its biased autocorrelation `r[m] = (1/L) Σ x[t] x[t+m]` for
/// `|m| < L`, the lags are averaged, and the averaged sequence is transformed.
/// On the segment's DFT grid this is algebraically the rectangular-window
/// Welch estimate.
pub fn psd_autocorr(x: &[f64], fs: f64, segment: usize) -> Result<Spectrum, DspError> {
    check_rate(fs)?;
    check_segment(segment, x.len())?;
    let r = averaged_autocorrelation(x, segment);
    Ok(psd_from_autocorrelation(&r, fs, x.len() / segment))
}

/// Averaged biased autocorrelation for lags `0..segment`.
pub fn averaged_autocorrelation(x: &[f64], segment: usize) -> Vec<f64> {
    let l = segment;
    let count = x.len() / l;
    let padded = RealFft::new(2 * l);
    let sums = accumulate(count, vec![0.0; l], |acc, s| {
        // Zero-padding to 2L turns the circular correlation into the linear one.
        let spec = padded.forward(&x[s * l..(s + 1) * l]);
        let power: Vec<Complex64> = spec.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        let circ = padded.inverse(power);
        for (a, c) in acc.iter_mut().zip(&circ[..l]) {
            *a += c / l as f64;
        }
    });
    sums.into_iter().map(|s| s / count as f64).collect()
}

/// One-sided PSD on the `L`-point grid from lags `r[0..L]`.
pub fn psd_from_autocorrelation(r: &[f64], fs: f64, segments: usize) -> Spectrum {
    let l = r.len();
    let mut sym = vec![0.0; 2 * l];
    sym[0] = r[0];
    for m in 1..l {
        sym[m] = r[m];
        sym[2 * l - m] = r[m];
    }
    let s = fourier::forward(&sym);
    let values: Vec<f64> = (0..=l / 2)
        .map(|k| {
            let scale = if k == 0 || k == l / 2 { 1.0 } else { 2.0 };
            scale * s[2 * k].re / fs
        })
        .collect();
    let rel = 1.0 / (segments.max(1) as f64).sqrt();
    let stderr = values.iter().map(|v| v * rel).collect();
    Spectrum {
        freqs: grid(l, fs),
        values,
        resolution: fs / l as f64,
        unit: SpectrumUnit::Absolute,
        stderr: Some(stderr),
        valid: None,
    }
}

/// Auto and cross spectra of `(x, y)` in one pass.
pub fn spectral_matrix(x: &[f64], y: &[f64], fs: f64, cfg: &WelchConfig) -> Result<SpectralMatrix, DspError> {
    check_rate(fs)?;
    if x.len() != y.len() {
        return Err(DspError::LengthMismatch(x.len(), y.len()));
    }
    cfg.check(x.len())?;
    let l = cfg.segment;
    let bins = l / 2 + 1;
    let init = (vec![0.0; bins], vec![0.0; bins], vec![Complex64::new(0.0, 0.0); bins]);
    let window = cfg.window.coefficients(l);
    let step = cfg.step();
    let fft = RealFft::new(l);
    let (sxx, syy, sxy) = accumulate(cfg.segment_count(x.len()), init, |acc, s| {
        let xs = fft.forward(&windowed_segment(x, s * step, &window));
        let ys = fft.forward(&windowed_segment(y, s * step, &window));
        for k in 0..xs.len() {
            acc.0[k] += xs[k].norm_sqr();
            acc.1[k] += ys[k].norm_sqr();
            acc.2[k] += xs[k].conj() * ys[k];
        }
    });
    let count = cfg.segment_count(x.len()) as f64;
    let power: f64 = window.iter().map(|w| w * w).sum();
    let scale = |k: usize| one_sided_scale(k, l, fs, power) / count;
    Ok(SpectralMatrix {
        freqs: grid(l, fs),
        resolution: fs / l as f64,
        pxx: sxx.iter().enumerate().map(|(k, v)| v * scale(k)).collect(),
        pyy: syy.iter().enumerate().map(|(k, v)| v * scale(k)).collect(),
        pxy: sxy.iter().enumerate().map(|(k, v)| v * scale(k)).collect(),
        variance_factor: cfg.variance_factor(x.len()),
    })
}

/// Cross power spectral density `E[X* Y]`.
pub fn cross_psd(x: &[f64], y: &[f64], fs: f64, cfg: &WelchConfig) -> Result<CrossSpectrum, DspError> {
    let m = spectral_matrix(x, y, fs, cfg)?;
    Ok(CrossSpectrum {
        freqs: m.freqs,
        values: m.pxy,
        resolution: m.resolution,
        segments: cfg.segment_count(x.len()),
    })
}

fn nyquist_sign(tau: f64, fs: f64) -> f64 {
    if ((tau * fs).round() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn delay_spectrum(spec: &mut [Complex64], n: usize, fs: f64, tau: f64) {
    // Odd lengths have no Nyquist bin.
    let last = if n % 2 == 0 { spec.len() - 1 } else { spec.len() };
    for (k, v) in spec.iter_mut().enumerate().take(last).skip(1) {
        let phase = -2.0 * PI * (k as f64 / n as f64) * (tau * fs);
        *v *= Complex64::from_polar(1.0, phase);
    }
    // A real record cannot carry a fractional phase at Nyquist; use the
    // nearest whole-sample sign so integer delays stay exact shifts.
    if n % 2 == 0 {
        spec[last] *= nyquist_sign(tau, fs);
    }
}

/// Delays `x` by `tau` seconds (circularly) with a frequency-domain phase ramp.
/// Positive `tau` moves features later in time.
pub fn apply_delay(x: &[f64], fs: f64, tau: f64) -> Result<Vec<f64>, DspError> {
    check_rate(fs)?;
    if x.is_empty() {
        return Err(DspError::Empty);
    }
    let duration = x.len() as f64 / fs;
    if !tau.is_finite() || tau.abs() > duration {
        return Err(DspError::DelayTooLong { tau, duration });
    }
    if tau == 0.0 {
        return Ok(x.to_vec());
    }
    let fft = RealFft::new(x.len());
    let mut spec = fft.forward(x);
    delay_spectrum(&mut spec, x.len(), fs, tau);
    Ok(fft.inverse(spec))
}

/// One frequency-bin qumode: `[center − width/2, center + width/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBin {
    pub center: f64,
    pub width: f64,
}

impl FrequencyBin {
    pub fn new(center: f64, width: f64) -> Self {
        Self { center, width }
    }

    pub fn lo(&self) -> f64 {
        self.center - 0.5 * self.width
    }

    pub fn hi(&self) -> f64 {
        self.center + 0.5 * self.width
    }

    pub fn validate(&self, fs: f64) -> Result<(), DspError> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(DspError::BinWidth(self.width));
        }
        let nyquist = 0.5 * fs;
        if !(self.lo() > 0.0 && self.hi() < nyquist) {
            return Err(DspError::BinOutOfBand {
                lo: self.lo(),
                hi: self.hi(),
                nyquist,
            });
        }
        Ok(())
    }
}

/// A record held in the frequency domain, for repeated band selection.
#[derive(Debug, Clone)]
pub struct FourierRecord {
    fs: f64,
    n: usize,
    spec: Vec<Complex64>,
}

impl FourierRecord {
    pub fn new(x: &[f64], fs: f64) -> Result<Self, DspError> {
        check_rate(fs)?;
        if x.is_empty() {
            return Err(DspError::Empty);
        }
        Ok(Self {
            fs,
            n: x.len(),
            spec: fourier::forward(x),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.fs
    }

    pub fn resolution(&self) -> f64 {
        self.fs / self.n as f64
    }

    pub fn delayed(&self, tau: f64) -> Result<Self, DspError> {
        let duration = self.n as f64 / self.fs;
        if !tau.is_finite() || tau.abs() > duration {
            return Err(DspError::DelayTooLong { tau, duration });
        }
        let mut out = self.clone();
        if tau != 0.0 {
            delay_spectrum(&mut out.spec, self.n, self.fs, tau);
        }
        Ok(out)
    }

    /// DFT indices `k` with `lo <= k·Δf < hi`.
    pub fn bin_range(&self, bin: &FrequencyBin) -> Result<std::ops::Range<usize>, DspError> {
        bin.validate(self.fs)?;
        let df = self.resolution();
        let start = (bin.lo() / df - 1e-9).ceil().max(1.0) as usize;
        let end = ((bin.hi() / df - 1e-9).ceil() as usize).min(self.spec.len() - 1);
        if end <= start {
            return Err(DspError::BinTooNarrow {
                width: bin.width,
                resolution: df,
            });
        }
        Ok(start..end)
    }

    /// Hard-edged (non-causal) band selection.
    pub fn square_band(&self, bin: &FrequencyBin) -> Result<Vec<f64>, DspError> {
        let range = self.bin_range(bin)?;
        let mut spec = vec![Complex64::new(0.0, 0.0); self.spec.len()];
        spec[range.clone()].copy_from_slice(&self.spec[range]);
        Ok(fourier::inverse(spec, self.n))
    }

    /// Mean one-sided PSD over the bin.
    pub fn mean_psd(&self, bin: &FrequencyBin) -> Result<f64, DspError> {
        let range = self.bin_range(bin)?;
        let count = range.len() as f64;
        let scale = 2.0 / (self.fs * self.n as f64);
        Ok(self.spec[range].iter().map(|v| v.norm_sqr()).sum::<f64>() * scale / count)
    }

    pub fn to_time(&self) -> Vec<f64> {
        fourier::inverse(self.spec.clone(), self.n)
    }

    /// Single full-length periodogram (rectangular window), resolution `fs/n`.
    pub fn periodogram(&self) -> Spectrum {
        let scale_mid = 2.0 / (self.fs * self.n as f64);
        let last = self.spec.len() - 1;
        let nyquist = (self.n % 2 == 0).then_some(last);
        let values = self
            .spec
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let s = if k == 0 || Some(k) == nyquist { 0.5 * scale_mid } else { scale_mid };
                v.norm_sqr() * s
            })
            .collect::<Vec<_>>();
        Spectrum {
            freqs: (0..=last).map(|k| k as f64 * self.resolution()).collect(),
            stderr: Some(values.clone()),
            values,
            resolution: self.resolution(),
            unit: SpectrumUnit::Absolute,
            valid: None,
        }
    }
}

/// Zeroes every DFT bin outside `bin` and transforms back.
pub fn bandpass_square(x: &[f64], fs: f64, bin: &FrequencyBin) -> Result<Vec<f64>, DspError> {
    FourierRecord::new(x, fs)?.square_band(bin)
}

/// Causal linear-phase FIR band-pass (Blackman-windowed sinc) whose
/// transition bands are about `transition` Hz wide, centred on the bin edges.
/// The output is aligned with the input (the first `taps` samples are the
/// start-up transient) and the filter length is returned alongside it.
pub fn bandpass_fir(x: &[f64], fs: f64, bin: &FrequencyBin, transition: f64) -> Result<(Vec<f64>, usize), DspError> {
    check_rate(fs)?;
    bin.validate(fs)?;
    if !(transition > 0.0 && transition < bin.width) {
        return Err(DspError::Transition(transition));
    }
    if x.is_empty() {
        return Err(DspError::Empty);
    }
    // Blackman main lobe: transition ≈ 5.5 fs / taps.
    let taps = ((5.5 * fs / transition).ceil() as usize) | 1;
    let mid = (taps / 2) as f64;
    let sinc = |v: f64| if v == 0.0 { 1.0 } else { (PI * v).sin() / (PI * v) };
    let (lo, hi) = (bin.lo() / fs, bin.hi() / fs);
    let h: Vec<f64> = (0..taps)
        .map(|i| {
            let m = i as f64 - mid;
            let w = 0.42 - 0.5 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos()
                + 0.08 * (4.0 * PI * i as f64 / (taps - 1) as f64).cos();
            w * (2.0 * hi * sinc(2.0 * hi * m) - 2.0 * lo * sinc(2.0 * lo * m))
        })
        .collect();
    let size = (x.len() + taps - 1).next_power_of_two();
    let fft = RealFft::new(size);
    let xs = fft.forward(x);
    let hs = fft.forward(&h);
    let prod: Vec<Complex64> = xs.iter().zip(&hs).map(|(a, b)| a * b).collect();
    let mut y = fft.inverse(prod);
    y.truncate(x.len());
    Ok((y, taps))
}

/// Mean of `a·b` with a jackknife standard error over `segments` contiguous
/// blocks of samples.
pub fn mean_product_jackknife(a: &[f64], b: &[f64], segments: usize) -> Result<(f64, f64), DspError> {
    if a.len() != b.len() {
        return Err(DspError::LengthMismatch(a.len(), b.len()));
    }
    if segments < 2 || segments > a.len() {
        return Err(DspError::Segments(segments));
    }
    let n = a.len();
    let bounds: Vec<usize> = (0..=segments).map(|g| g * n / segments).collect();
    let sums: Vec<f64> = bounds
        .windows(2)
        .map(|w| (w[0]..w[1]).map(|t| a[t] * b[t]).sum())
        .collect();
    let total: f64 = sums.iter().sum();
    let mean = total / n as f64;
    let leave_out: Vec<f64> = bounds
        .windows(2)
        .zip(&sums)
        .map(|(w, s)| (total - s) / (n - (w[1] - w[0])) as f64)
        .collect();
    let g = segments as f64;
    let avg = leave_out.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * leave_out.iter().map(|v| (v - avg).powi(2)).sum::<f64>();
    Ok((mean, var.sqrt()))
}

/// Bin-width-normalized covariance of two band-limited channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinCovariance {
    /// Sample covariance of the filtered outputs divided by the bin width.
    pub value: f64,
    pub stderr: f64,
    /// Set when the two bins do not have the same width.
    pub unequal_widths: bool,
}

impl BinCovariance {
    pub fn z(&self) -> f64 {
        if self.stderr > 0.0 {
            self.value / self.stderr
        } else {
            0.0
        }
    }
}

/// Default number of jackknife blocks for a bin of `width` Hz over a record of
/// `duration` seconds: each block spans at least ten filter correlation times.
pub fn jackknife_segments(duration: f64, width: f64) -> usize {
    ((duration * width / 10.0).floor() as usize).clamp(8, 32)
}

pub fn bin_covariance(
    x: &[f64],
    y: &[f64],
    fs: f64,
    bin_x: &FrequencyBin,
    bin_y: &FrequencyBin,
) -> Result<BinCovariance, DspError> {
    if x.len() != y.len() {
        return Err(DspError::LengthMismatch(x.len(), y.len()));
    }
    let xr = FourierRecord::new(x, fs)?;
    let yr = FourierRecord::new(y, fs)?;
    let segments = jackknife_segments(x.len() as f64 / fs, bin_x.width.min(bin_y.width));
    bin_covariance_records(&xr, &yr, bin_x, bin_y, segments)
}

pub fn bin_covariance_records(
    x: &FourierRecord,
    y: &FourierRecord,
    bin_x: &FrequencyBin,
    bin_y: &FrequencyBin,
    segments: usize,
) -> Result<BinCovariance, DspError> {
    if x.len() != y.len() {
        return Err(DspError::LengthMismatch(x.len(), y.len()));
    }
    let xf = x.square_band(bin_x)?;
    let yf = y.square_band(bin_y)?;
    let (mean, se) = mean_product_jackknife(&xf, &yf, segments)?;
    let width = 0.5 * (bin_x.width + bin_y.width);
    Ok(BinCovariance {
        value: mean / width,
        stderr: se / width,
        unequal_widths: (bin_x.width - bin_y.width).abs() > 1e-12 * width,
    })
}
