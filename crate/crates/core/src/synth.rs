//! Sampled homodyne records with prescribed joint second-order statistics.
//!
//! The locked-quadrature squeezed and anti-squeezed channels are drawn
//! independently in the frequency domain with the model's spectra at zero
//! net delay, mixed into probe and conjugate, and then pushed through the
//! measurement chain: the conjugate is advanced by the group delay, the RF
//! high-pass is applied, white electronic noise is added downstream of it,
//! and the result is optionally quantized.
//!
//! Records are circular. DC and Nyquist bins are zero.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::config;
use crate::fourier::RealFft;
use crate::model::{Branch, LockQuadrature, ModelError, SqueezerParams};

/// Frequency bins drawn from one RNG substream.
const BLOCK: usize = 4096;
pub const MIN_SAMPLES: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("sample count {0} is not a power of two >= 2^14")]
    SampleCount(usize),
    #[error("sample rate must be positive, got {0}")]
    SampleRate(f64),
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error("channel `{name}` has {len} samples, expected {n}")]
    ChannelLength { name: &'static str, len: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleUnits {
    /// Shot-noise standard deviations of one detector.
    ShotSigma,
    /// Integer digitizer codes; multiply by `step` for shot-noise σ.
    AdcCodes { step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    pub probe: Vec<f64>,
    pub conjugate: Vec<f64>,
}

/// A synchronized probe/conjugate record with optional references.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub fs: f64,
    pub probe: Vec<f64>,
    pub conjugate: Vec<f64>,
    /// Electronic noise only (local oscillators blocked).
    pub dark: Option<ChannelPair>,
    /// Vacuum at the signal ports: the shot-noise reference.
    pub vacuum: Option<ChannelPair>,
    pub units: SampleUnits,
    pub meta: BTreeMap<String, String>,
}

impl TraceSet {
    pub fn n(&self) -> usize {
        self.probe.len()
    }

    pub fn duration(&self) -> f64 {
        self.n() as f64 / self.fs
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(SynthError::SampleRate(self.fs));
        }
        let n = self.n();
        let mut channels: Vec<(&'static str, usize)> = vec![("conjugate", self.conjugate.len())];
        if let Some(d) = &self.dark {
            channels.push(("dark_probe", d.probe.len()));
            channels.push(("dark_conjugate", d.conjugate.len()));
        }
        if let Some(v) = &self.vacuum {
            channels.push(("vacuum_probe", v.probe.len()));
            channels.push(("vacuum_conjugate", v.conjugate.len()));
        }
        for (name, len) in channels {
            if len != n {
                return Err(SynthError::ChannelLength { name, len, n });
            }
        }
        Ok(())
    }
}

/// Which auxiliary records to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthOptions {
    pub vacuum: bool,
    pub dark: bool,
}

impl SynthOptions {
    pub fn for_params(params: &SqueezerParams) -> Self {
        Self {
            vacuum: true,
            dark: params.electronic_noise > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Record {
    Signal = 1,
    Vacuum = 2,
    Dark = 3,
}

#[derive(Debug, Clone, Copy)]
enum Component {
    Squeezed = 1,
    Antisqueezed = 2,
    ElectronicProbe = 3,
    ElectronicConjugate = 4,
}

fn stream_id(record: Record, component: Component, block: usize) -> u64 {
    ((record as u64) << 56) | ((component as u64) << 48) | block as u64
}

/// Fills `out[k]` (for `k` in `1..n/2`) with circular complex Gaussians of
/// variance `n · psd(k)`. The draws for a given bin depend only on
/// `(seed, record, component, k)`.
fn draw_bins<F>(out: &mut [Complex64], n: usize, seed: u64, record: Record, component: Component, psd: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    let half = n / 2;
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(record, component, b));
        for (i, v) in chunk.iter_mut().enumerate() {
            let k = b * BLOCK + i;
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v = if k == 0 || k >= half {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(re, im) * (0.5 * n as f64 * psd(k)).sqrt()
            };
        }
    });
}

fn check_acquisition(params: &SqueezerParams, fs: f64, n: usize) -> Result<(), SynthError> {
    params.validate()?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(SynthError::SampleRate(fs));
    }
    if n < MIN_SAMPLES || !n.is_power_of_two() {
        return Err(SynthError::SampleCount(n));
    }
    Ok(())
}

/// Synthesizes the signal record plus a vacuum reference, and dark records
/// when the electronic noise is non-zero.
pub fn synthesize(params: &SqueezerParams, fs: f64, n: usize, seed: u64) -> Result<TraceSet, SynthError> {
    synthesize_with(params, fs, n, seed, SynthOptions::for_params(params))
}

pub fn synthesize_with(
    params: &SqueezerParams,
    fs: f64,
    n: usize,
    seed: u64,
    options: SynthOptions,
) -> Result<TraceSet, SynthError> {
    check_acquisition(params, fs, n)?;
    let fft = RealFft::new(n);
    let (probe, conjugate) = optical_record(params, &fft, fs, n, seed, Record::Signal);
    let vacuum = options.vacuum.then(|| {
        let (probe, conjugate) = optical_record(&params.vacuum(), &fft, fs, n, seed, Record::Vacuum);
        ChannelPair { probe, conjugate }
    });
    let dark = options.dark.then(|| {
        let (probe, conjugate) = electronic_only(params, &fft, n, seed);
        ChannelPair { probe, conjugate }
    });
    let mut set = TraceSet {
        fs,
        probe,
        conjugate,
        dark,
        vacuum,
        units: SampleUnits::ShotSigma,
        meta: BTreeMap::new(),
    };
    if params.adc_bits > 0 {
        digitize(&mut set, params.adc_bits, params.adc_fullscale);
    }
    set.meta.insert("seed".into(), seed.to_string());
    set.meta.insert("sample_rate_hz".into(), config::format_f64(fs));
    set.meta.insert("samples".into(), n.to_string());
    set.meta.insert("lock_quadrature".into(), params.lock.as_str().into());
    set.meta.insert("params_digest".into(), config::params_digest(params));
    for (k, v) in config::params_to_pairs(params) {
        set.meta.insert(format!("param.{k}"), v);
    }
    Ok(set)
}

fn optical_record(
    params: &SqueezerParams,
    fft: &RealFft,
    fs: f64,
    n: usize,
    seed: u64,
    record: Record,
) -> (Vec<f64>, Vec<f64>) {
    let bins = n / 2 + 1;
    let df = fs / n as f64;
    let net_zero = |k: usize, branch| params.joint_variance_net(k as f64 * df, 0.0, branch);
    let mut sq = vec![Complex64::new(0.0, 0.0); bins];
    let mut anti = vec![Complex64::new(0.0, 0.0); bins];
    draw_bins(&mut sq, n, seed, record, Component::Squeezed, |k| net_zero(k, Branch::Squeezed));
    draw_bins(&mut anti, n, seed, record, Component::Antisqueezed, |k| net_zero(k, Branch::Antisqueezed));

    let mut eprobe = vec![Complex64::new(0.0, 0.0); bins];
    let mut econj = vec![Complex64::new(0.0, 0.0); bins];
    let s_elec = params.electronic_noise;
    if s_elec > 0.0 {
        draw_bins(&mut eprobe, n, seed, record, Component::ElectronicProbe, |_| s_elec);
        draw_bins(&mut econj, n, seed, record, Component::ElectronicConjugate, |_| s_elec);
    }

    let conj_sign = match params.lock {
        LockQuadrature::X => 1.0,
        LockQuadrature::P => -1.0,
    };
    // Reuse the draw buffers for the channel spectra.
    let mut probe = sq;
    let mut conj = anti;
    probe
        .par_iter_mut()
        .zip(conj.par_iter_mut())
        .zip(eprobe.par_iter().zip(econj.par_iter()))
        .enumerate()
        .for_each(|(k, ((p, c), (ep, ec)))| {
            let (s, a) = (*p, *c);
            let f = k as f64 * df;
            // X lock: probe − conjugate is the squeezed channel.
            // P lock: probe + conjugate is.
            let mut pk = (a + s) * FRAC_1_SQRT_2;
            let mut ck = (a - s) * (FRAC_1_SQRT_2 * conj_sign);
            // The conjugate arrives `group_delay` early.
            ck *= Complex64::from_polar(1.0, 2.0 * PI * f * params.group_delay);
            if params.highpass > 0.0 {
                let x = Complex64::new(0.0, f / params.highpass);
                let h = x / (1.0 + x);
                pk *= h;
                ck *= h;
            }
            *p = pk + ep;
            *c = ck + ec;
        });
    let last = bins - 1;
    for spec in [&mut probe, &mut conj] {
        spec[0] = Complex64::new(0.0, 0.0);
        spec[last] = Complex64::new(0.0, 0.0);
    }
    (fft.inverse(probe), fft.inverse(conj))
}

fn electronic_only(params: &SqueezerParams, fft: &RealFft, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let bins = n / 2 + 1;
    let s_elec = params.electronic_noise;
    let mut p = vec![Complex64::new(0.0, 0.0); bins];
    let mut c = vec![Complex64::new(0.0, 0.0); bins];
    draw_bins(&mut p, n, seed, Record::Dark, Component::ElectronicProbe, |_| s_elec);
    draw_bins(&mut c, n, seed, Record::Dark, Component::ElectronicConjugate, |_| s_elec);
    (fft.inverse(p), fft.inverse(c))
}

fn digitize(set: &mut TraceSet, bits: u32, fullscale: f64) {
    let step = adc_step(bits, fullscale);
    let to_codes = |x: &mut Vec<f64>| {
        let q = quantize_codes(x, bits, fullscale);
        *x = q.codes.into_iter().map(|c| c as f64).collect();
        q.clipped
    };
    let mut clipped = to_codes(&mut set.probe) + to_codes(&mut set.conjugate);
    for pair in [set.dark.as_mut(), set.vacuum.as_mut()].into_iter().flatten() {
        clipped += to_codes(&mut pair.probe) + to_codes(&mut pair.conjugate);
    }
    set.units = SampleUnits::AdcCodes { step };
    set.meta.insert("adc_clipped".into(), clipped.to_string());
}

/// Code spacing of a mid-tread quantizer whose outermost codes sit exactly
/// at `±fullscale`: `2^bits − 1` levels, `2 · fullscale / (2^bits − 2)` apart.
/// A 1-bit converter keeps only the zero code.
pub fn adc_step(bits: u32, fullscale: f64) -> f64 {
    2.0 * fullscale / ((1u64 << bits) - 2).max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCodes {
    pub codes: Vec<i32>,
    pub clipped: usize,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub samples: Vec<f64>,
    pub clipped: usize,
    pub step: f64,
}

pub fn quantize_codes(samples: &[f64], bits: u32, fullscale: f64) -> QuantizedCodes {
    assert!((1..=16).contains(&bits), "bits must lie in 1..=16");
    assert!(fullscale > 0.0, "fullscale must be positive");
    let step = adc_step(bits, fullscale);
    let max_code = (1i32 << (bits - 1)) - 1;
    let mut clipped = 0;
    let codes = samples
        .iter()
        .map(|&x| {
            if x.abs() > fullscale {
                clipped += 1;
            }
            ((x / step).round() as i32).clamp(-max_code, max_code)
        })
        .collect();
    QuantizedCodes { codes, clipped, step }
}

/// Mid-tread uniform quantizer with saturation at `±fullscale`.
pub fn quantize(samples: &[f64], bits: u32, fullscale: f64) -> Quantized {
    let q = quantize_codes(samples, bits, fullscale);
    Quantized {
        samples: q.codes.iter().map(|&c| c as f64 * q.step).collect(),
        clipped: q.clipped,
        step: q.step,
    }
}
