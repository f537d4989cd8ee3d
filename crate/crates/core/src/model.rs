//! Closed-form spectra of a lossy two-mode squeezed vacuum seen by a pair of
//! balanced homodyne detectors.
//!
//! Everything here is expressed in shot-noise units: a vacuum input gives a
//! joint-quadrature noise of exactly 1 at every sideband frequency. The
//! functions are the reference curves the synthesizer draws from and the
//! analysis pipeline is checked against.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Which joint quadrature the noise lock holds squeezed.
///
/// `X` squeezes the amplitude difference (probe − conjugate), `P` squeezes
/// the phase sum (probe + conjugate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LockQuadrature {
    X,
    P,
}

impl LockQuadrature {
    pub fn as_str(self) -> &'static str {
        match self {
            LockQuadrature::X => "X",
            LockQuadrature::P => "P",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Squeezed,
    Antisqueezed,
}

/// Physical description of the squeezer, the detection chain and the digitizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezerParams {
    /// Squeeze parameter at zero sideband frequency.
    pub r0: f64,
    /// Frequency (Hz) at which the squeeze parameter has fallen to `r0 / 2`.
    pub gain_bandwidth: f64,
    /// Steepness of the roll-off; 1 is a Lorentzian in `r(f)`.
    pub profile_order: u32,
    pub eta_probe: f64,
    pub eta_conjugate: f64,
    /// Arrival-time difference between the beams in seconds; the conjugate
    /// leads the probe by this amount.
    pub group_delay: f64,
    pub lock: LockQuadrature,
    /// RMS relative local-oscillator phase error of the lock, radians.
    pub lock_jitter: f64,
    /// White electronic noise PSD per detector channel, shot-noise units.
    pub electronic_noise: f64,
    /// First-order high-pass corner of the RF chain in Hz; 0 disables it.
    pub highpass: f64,
    /// Digitizer resolution in bits; 0 means an ideal (unquantized) record.
    pub adc_bits: u32,
    /// Digitizer full-scale range in shot-noise standard deviations.
    pub adc_fullscale: f64,
}

impl Default for SqueezerParams {
    fn default() -> Self {
        Self::paper_like()
    }
}

/// Squeeze parameter giving `squeezing_db` (negative) of joint-quadrature noise
/// for a lossless-delay measurement with efficiency `eta` on both beams.
pub fn r0_for_squeezing_db(squeezing_db: f64, eta: f64) -> f64 {
    let target = 10f64.powf(squeezing_db / 10.0);
    -0.5 * ((target - (1.0 - eta)) / eta).ln()
}

impl SqueezerParams {
    /// The canonical preset: −5.0 dB of delay-compensated squeezing at low
    /// frequency with 85 % efficiency per beam, shot noise reached by 15 MHz,
    /// a 10.4 ns group delay and an ideal detection chain.
    pub fn paper_like() -> Self {
        Self {
            r0: r0_for_squeezing_db(-5.0, 0.85),
            gain_bandwidth: 5.0e6,
            profile_order: 2,
            eta_probe: 0.85,
            eta_conjugate: 0.85,
            group_delay: 10.4e-9,
            lock: LockQuadrature::X,
            lock_jitter: 0.0,
            electronic_noise: 0.0,
            highpass: 0.0,
            adc_bits: 0,
            adc_fullscale: 8.0,
        }
    }

    /// `paper_like` seen through the measurement chain used for the broadband
    /// spectra: RF-splitter high-pass at 300 kHz, electronic noise 13 dB below
    /// shot noise and an 8-bit digitizer spanning ±8 shot-noise σ.
    pub fn apparatus() -> Self {
        Self {
            electronic_noise: 0.05,
            highpass: 300.0e3,
            adc_bits: 8,
            ..Self::paper_like()
        }
    }

    /// The same apparatus with the squeezer turned off.
    pub fn vacuum(&self) -> Self {
        Self {
            r0: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), ModelError> {
            if ok {
                Ok(())
            } else {
                Err(ModelError::OutOfRange { name, value, reason })
            }
        }
        check(self.r0.is_finite() && self.r0 >= 0.0, "r0", self.r0, "must be finite and >= 0")?;
        check(
            self.gain_bandwidth.is_finite() && self.gain_bandwidth > 0.0,
            "gain_bandwidth",
            self.gain_bandwidth,
            "must be > 0",
        )?;
        check(
            (1..=8).contains(&self.profile_order),
            "profile_order",
            self.profile_order as f64,
            "must be between 1 and 8",
        )?;
        check((0.0..=1.0).contains(&self.eta_probe), "eta_probe", self.eta_probe, "must lie in [0, 1]")?;
        check(
            (0.0..=1.0).contains(&self.eta_conjugate),
            "eta_conjugate",
            self.eta_conjugate,
            "must lie in [0, 1]",
        )?;
        check(self.group_delay.is_finite(), "group_delay", self.group_delay, "must be finite")?;
        check(
            self.lock_jitter.is_finite() && self.lock_jitter >= 0.0,
            "lock_jitter",
            self.lock_jitter,
            "must be >= 0",
        )?;
        check(
            self.electronic_noise.is_finite() && self.electronic_noise >= 0.0,
            "electronic_noise",
            self.electronic_noise,
            "must be >= 0",
        )?;
        check(
            self.highpass.is_finite() && self.highpass >= 0.0,
            "highpass",
            self.highpass,
            "must be >= 0",
        )?;
        check(
            self.adc_bits == 0 || (2..=16).contains(&self.adc_bits),
            "adc_bits",
            self.adc_bits as f64,
            "must be 0 (ideal) or between 2 and 16",
        )?;
        if self.adc_bits > 0 {
            check(
                self.adc_fullscale.is_finite() && self.adc_fullscale > 0.0,
                "adc_fullscale",
                self.adc_fullscale,
                "must be > 0",
            )?;
        }
        Ok(())
    }

    pub fn mean_efficiency(&self) -> f64 {
        0.5 * (self.eta_probe + self.eta_conjugate)
    }

    pub fn geometric_efficiency(&self) -> f64 {
        (self.eta_probe * self.eta_conjugate).sqrt()
    }

    /// Squeeze parameter at sideband frequency `f`:
    /// `r0 / (1 + (f / f_b)^(2·order))`.
    pub fn squeeze_profile(&self, f: f64) -> f64 {
        let x = (f / self.gain_bandwidth).powi(2 * self.profile_order as i32);
        self.r0 / (1.0 + x)
    }

    /// Per-beam quadrature noise `A(f)`, identical for probe and conjugate.
    pub fn single_beam_noise(&self, f: f64) -> f64 {
        let r = self.squeeze_profile(f);
        let e = self.mean_efficiency();
        e * (2.0 * r).cosh() + 1.0 - e
    }

    /// Magnitude of the probe–conjugate correlation `C(f)`, reduced by the
    /// lock phase jitter.
    pub fn correlation(&self, f: f64) -> f64 {
        let r = self.squeeze_profile(f);
        let jitter = (-0.5 * self.lock_jitter * self.lock_jitter).exp();
        self.geometric_efficiency() * (2.0 * r).sinh() * jitter
    }

    /// Joint-quadrature noise after the conjugate has been delayed by `t_extra`.
    pub fn joint_variance(&self, f: f64, t_extra: f64, branch: Branch) -> f64 {
        self.joint_variance_net(f, self.group_delay - t_extra, branch)
    }

    /// Joint-quadrature noise for a net inter-beam delay `net_delay`.
    pub fn joint_variance_net(&self, f: f64, net_delay: f64, branch: Branch) -> f64 {
        let a = self.single_beam_noise(f);
        let c = self.correlation(f) * (2.0 * PI * f * net_delay).cos();
        match branch {
            Branch::Squeezed => a - c,
            Branch::Antisqueezed => a + c,
        }
    }

    /// Real part of the probe–conjugate cross spectrum after delaying the
    /// conjugate by `t_extra`. Positive for an X lock (the sum is noisy),
    /// negative for a P lock.
    pub fn cross_spectrum(&self, f: f64, t_extra: f64) -> f64 {
        let net = self.group_delay - t_extra;
        let c = self.correlation(f) * (2.0 * PI * f * net).cos();
        match self.lock {
            LockQuadrature::X => c,
            LockQuadrature::P => -c,
        }
    }

    pub fn squeezing_db(&self, f: f64, t_extra: f64, branch: Branch) -> f64 {
        10.0 * self.joint_variance(f, t_extra, branch).log10()
    }

    /// Power response of the first-order RF high-pass.
    pub fn highpass_gain(&self, f: f64) -> f64 {
        if self.highpass <= 0.0 {
            1.0
        } else {
            let x = f / self.highpass;
            x * x / (1.0 + x * x)
        }
    }

    /// Expected ratio of measured joint noise to measured shot noise when the
    /// electronic noise is added after the high-pass and not subtracted.
    pub fn measured_ratio(&self, f: f64, t_extra: f64, branch: Branch) -> f64 {
        let h = self.highpass_gain(f);
        let e = self.electronic_noise;
        (self.joint_variance(f, t_extra, branch) * h + e) / (h + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lossless(r0: f64, fb: f64) -> SqueezerParams {
        SqueezerParams {
            r0,
            gain_bandwidth: fb,
            profile_order: 1,
            eta_probe: 1.0,
            eta_conjugate: 1.0,
            group_delay: 0.0,
            ..SqueezerParams::paper_like()
        }
    }

    #[test]
    fn profile_examples() {
        let p = lossless(1.0, 10e6);
        assert_eq!(p.squeeze_profile(0.0), 1.0);
        assert_eq!(p.squeeze_profile(10e6), 0.5);
        let p = lossless(0.576, 10e6);
        assert!((p.squeeze_profile(5e6) - 0.4608).abs() < 1e-12);
    }

    #[test]
    fn lossless_squeezing_at_five_db() {
        // e^(-2 * 0.576) = 0.31600...
        let p = lossless(0.576, 1e12);
        let v = p.joint_variance(0.0, 0.0, Branch::Squeezed);
        assert!((v - 0.3160).abs() < 1e-4, "{v}");
        assert!((10.0 * v.log10() + 5.0).abs() < 0.01);
    }

    #[test]
    fn vacuum_is_shot_noise() {
        let p = SqueezerParams {
            eta_probe: 0.3,
            eta_conjugate: 0.9,
            group_delay: 37e-9,
            ..SqueezerParams::paper_like().vacuum()
        };
        for f in [0.0, 1e3, 2.5e6, 19e6] {
            for t in [0.0, 10e-9, 200e-9] {
                assert_eq!(p.joint_variance(f, t, Branch::Squeezed), 1.0);
                assert_eq!(p.joint_variance(f, t, Branch::Antisqueezed), 1.0);
                assert_eq!(p.cross_spectrum(f, t), 0.0);
            }
        }
    }

    #[test]
    fn long_delay_flips_to_antisqueezing_at_half_period() {
        let p = SqueezerParams {
            group_delay: 200e-9,
            ..SqueezerParams::paper_like()
        };
        let f = 2.5e6;
        let v = p.joint_variance(f, 0.0, Branch::Squeezed);
        let envelope = p.single_beam_noise(f) + p.correlation(f);
        assert!((v - envelope).abs() < 1e-12);
    }

    #[test]
    fn cross_spectrum_examples() {
        let p = lossless(1.0, 5e6);
        let r1 = p.squeeze_profile(1e6);
        assert!((p.cross_spectrum(1e6, 0.0) - (2.0 * r1).sinh()).abs() < 1e-12);
        // 2π f T = π/2
        let q = SqueezerParams { group_delay: 0.25e-6, ..p.clone() };
        assert!(q.cross_spectrum(1e6, 0.0).abs() < 1e-12);
        let q = SqueezerParams { lock: LockQuadrature::P, ..p };
        assert!(q.cross_spectrum(1e6, 0.0) < 0.0);
    }

    #[test]
    fn paper_like_preset_levels() {
        let p = SqueezerParams::paper_like();
        let low = p.squeezing_db(100e3, p.group_delay, Branch::Squeezed);
        assert!((low + 5.0).abs() < 0.01, "{low}");
        let anti = p.squeezing_db(100e3, p.group_delay, Branch::Antisqueezed);
        assert!(anti > 5.0, "{anti}");
        let edge = p.squeezing_db(15e6, p.group_delay, Branch::Squeezed);
        assert!(edge.abs() < 0.1, "{edge}");
    }

    #[test]
    fn validation_rejects_bad_values() {
        let good = SqueezerParams::paper_like();
        assert!(good.validate().is_ok());
        assert!(SqueezerParams { eta_probe: 1.2, ..good.clone() }.validate().is_err());
        assert!(SqueezerParams { r0: -0.1, ..good.clone() }.validate().is_err());
        assert!(SqueezerParams { gain_bandwidth: 0.0, ..good.clone() }.validate().is_err());
        assert!(SqueezerParams { adc_bits: 1, ..good.clone() }.validate().is_err());
        assert!(SqueezerParams { electronic_noise: -1.0, ..good }.validate().is_err());
    }

    fn params_strategy() -> impl Strategy<Value = SqueezerParams> {
        (0.0..2.0f64, 1e5..3e7f64, 1u32..4, 0.0..=1.0f64, 0.0..=1.0f64, -300e-9..300e-9f64).prop_map(
            |(r0, fb, order, ep, ec, t)| SqueezerParams {
                r0,
                gain_bandwidth: fb,
                profile_order: order,
                eta_probe: ep,
                eta_conjugate: ec,
                group_delay: t,
                ..SqueezerParams::paper_like()
            },
        )
    }

    proptest! {
        #[test]
        fn uncertainty_product_lossless(r0 in 0.0..2.5f64, f in 0.0..5e7f64) {
            let p = lossless(r0, 7e6);
            let prod = p.joint_variance(f, 0.0, Branch::Squeezed)
                * p.joint_variance(f, 0.0, Branch::Antisqueezed);
            prop_assert!((prod - 1.0).abs() < 1e-6);
        }

        #[test]
        fn loss_floor_and_ordering(p in params_strategy(), f in 0.0..4e7f64) {
            let sq = p.joint_variance(f, 0.0, Branch::Squeezed);
            let anti = p.joint_variance(f, 0.0, Branch::Antisqueezed);
            prop_assert!(sq > 0.0);
            prop_assert!(sq >= 1.0 - p.eta_probe.max(p.eta_conjugate) - 1e-12);
            prop_assert!((sq + anti - 2.0 * p.single_beam_noise(f)).abs() < 1e-9 * anti.max(1.0));
            if (2.0 * PI * f * p.group_delay).cos() > 0.0 {
                prop_assert!(sq <= anti);
            }
            prop_assert!(p.cross_spectrum(f, 0.0).abs() <= p.correlation(f) + 1e-12);
        }

        #[test]
        fn delay_symmetry(p in params_strategy(), f in 0.0..4e7f64, t in 0.0..500e-9f64) {
            for b in [Branch::Squeezed, Branch::Antisqueezed] {
                let a = p.joint_variance_net(f, t, b);
                let c = p.joint_variance_net(f, -t, b);
                prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn profile_monotone(p in params_strategy(), f in 0.0..4e7f64, df in 0.0..1e7f64) {
            prop_assert!(p.squeeze_profile(f + df) <= p.squeeze_profile(f));
            let half = p.squeeze_profile(p.gain_bandwidth);
            prop_assert!((half - p.r0 / 2.0).abs() < 1e-12);
        }
    }
}
