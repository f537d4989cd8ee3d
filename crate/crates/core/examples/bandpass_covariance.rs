//! Square frequency bins, bin covariance, and why FIR bins need guard bands.

use tmsq::dsp::{apply_delay, bandpass_fir, bandpass_square, bin_covariance, mean_product_jackknife, FrequencyBin};
use tmsq::model::SqueezerParams;
use tmsq::synth::{synthesize_with, SynthOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 50e6;
    let p = SqueezerParams::paper_like();
    let t = synthesize_with(&p, fs, 1 << 20, 3, SynthOptions { vacuum: false, dark: false })?;
    let conj = apply_delay(&t.conjugate, fs, p.group_delay)?;
    let shot = 2.0 / fs;

    let probe = FrequencyBin::new(1e6, 200e3);
    let band = bandpass_square(&t.probe, fs, &probe)?;
    let var = band.iter().map(|v| v * v).sum::<f64>() / band.len() as f64;
    println!("probe bin variance {:.5} vs single-beam model {:.5}", var, p.single_beam_noise(1e6) * shot * probe.width);

    println!("square bins, conjugate offset in widths:");
    for s in [0.0, 0.5, 1.0, 1.5] {
        let bin = FrequencyBin::new(probe.center + s * probe.width, probe.width);
        let c = bin_covariance(&t.probe, &conj, fs, &probe, &bin)?;
        println!("  {s:>4}  {:>8.4} x shot  z = {:>7.2}", c.value / shot, c.z());
    }

    println!("FIR bins with 100 kHz transitions:");
    let (yp, taps) = bandpass_fir(&t.probe, fs, &probe, 100e3)?;
    for s in [1.0, 1.5] {
        let bin = FrequencyBin::new(probe.center + s * probe.width, probe.width);
        let (yc, _) = bandpass_fir(&conj, fs, &bin, 100e3)?;
        let (m, se) = mean_product_jackknife(&yp[taps..], &yc[taps..], 16)?;
        println!("  {s:>4}  z = {:>7.2}", m / se);
    }
    Ok(())
}
