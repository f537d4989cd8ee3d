//! Squeezing spectra relative to shot noise, with and without dark subtraction.

use tmsq::analysis::{squeezing_spectrum, Estimator, SpectrumOptions, SqueezeMode};
use tmsq::dsp::WelchConfig;
use tmsq::model::SqueezerParams;
use tmsq::synth::synthesize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SqueezerParams::apparatus();
    let t = synthesize(&p, 50e6, 1 << 20, 4)?;
    let raw = SpectrumOptions {
        estimator: Estimator::Welch(WelchConfig::display(4096)),
        subtract_dark: false,
    };
    let sub = SpectrumOptions { subtract_dark: true, ..raw };

    let none = squeezing_spectrum(&t, SqueezeMode::Difference, 0.0, &raw)?;
    let comp = squeezing_spectrum(&t, SqueezeMode::Difference, p.group_delay, &raw)?;
    let clean = squeezing_spectrum(&t, SqueezeMode::Difference, p.group_delay, &sub)?;
    let anti = squeezing_spectrum(&t, SqueezeMode::Sum, p.group_delay, &sub)?;

    println!("{:>8}  {:>9}  {:>9}  {:>9}  {:>9}", "f MHz", "no delay", "delayed", "dark sub", "anti");
    for f in [0.05e6, 0.2e6, 0.5e6, 1e6, 3e6, 6e6, 10e6, 15e6] {
        println!(
            "{:>8.2}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9.2}",
            f / 1e6,
            none.value_at(f),
            comp.value_at(f),
            clean.value_at(f),
            anti.value_at(f)
        );
    }
    let invalid = (0..clean.len()).filter(|&i| !clean.is_valid(i)).count();
    println!("{invalid} bins flagged invalid after subtraction");
    Ok(())
}
