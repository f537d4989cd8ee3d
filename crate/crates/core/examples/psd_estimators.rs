//! Welch and autocorrelation PSDs of the squeezed difference channel.

use tmsq::analysis::{combine, SqueezeMode};
use tmsq::dsp::{psd_autocorr, psd_welch, WelchConfig};
use tmsq::model::{Branch, SqueezerParams};
use tmsq::synth::synthesize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 50e6;
    let p = SqueezerParams::paper_like();
    let t = synthesize(&p, fs, 1 << 20, 2)?;
    let diff = combine(&t.probe, &t.conjugate, fs, p.group_delay, SqueezeMode::Difference)?;

    let hann = psd_welch(&diff, fs, &WelchConfig::display(1024))?;
    let rect = psd_welch(&diff, fs, &WelchConfig::exact(1024))?;
    let ac = psd_autocorr(&diff, fs, 1024)?;
    let shot = 2.0 / fs;

    println!("{:>8}  {:>8}  {:>8}  {:>8}  {:>8}", "f MHz", "hann", "rect", "autocorr", "model");
    for f in [0.2e6, 1e6, 3e6, 6e6, 10e6, 15e6] {
        let db = |s: &tmsq::dsp::Spectrum| 10.0 * (s.value_at(f) / shot).log10();
        println!(
            "{:>8.2}  {:>8.3}  {:>8.3}  {:>8.3}  {:>8.3}",
            f / 1e6,
            db(&hann),
            db(&rect),
            db(&ac),
            p.squeezing_db(f, p.group_delay, Branch::Squeezed)
        );
    }

    let worst = rect
        .values
        .iter()
        .zip(&ac.values)
        .map(|(a, b)| ((a - b) / a).abs())
        .fold(0.0, f64::max);
    let power = diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64;
    println!("rectangular Welch vs autocorrelation: max relative gap {worst:.1e}");
    println!("Parseval: integral {:.6} vs variance {:.6}", rect.integral(), power);
    Ok(())
}
