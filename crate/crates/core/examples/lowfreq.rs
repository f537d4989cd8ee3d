//! Squeezing at sub-Hz frequencies from one long, slowly sampled record.

use tmsq::analysis::{lowfreq_spectrum, LowFreqOptions};
use tmsq::figures::linear_mean_db;
use tmsq::model::SqueezerParams;
use tmsq::synth::synthesize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SqueezerParams::paper_like();
    // 16 s at 16384 Hz: resolution 1/16 Hz.
    let t = synthesize(&p, 16384.0, 1 << 18, 8)?;
    let s = lowfreq_spectrum(
        &t,
        &LowFreqOptions {
            t_extra: p.group_delay,
            ..Default::default()
        },
    )?;
    println!("resolution {} Hz", s.resolution);
    for i in s.band(0.0, 1.0) {
        println!("  {:>6.4} Hz  {:>6.2} dB", s.freqs[i], s.values[i]);
    }
    // Single-periodogram bins scatter by several dB; average in linear units.
    println!("below 1 Hz: {:.2} dB", linear_mean_db(&s, s.band(0.0, 1.0)));
    println!("1-100 Hz:   {:.2} dB", linear_mean_db(&s, s.band(1.0, 100.0)));

    let short = synthesize(&p, 16384.0, 1 << 16, 8)?;
    if let Err(e) = lowfreq_spectrum(&short, &LowFreqOptions::default()) {
        println!("4 s record: {e}");
    }
    Ok(())
}
