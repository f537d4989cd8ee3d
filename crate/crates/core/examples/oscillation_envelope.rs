//! A badly mismatched delay makes the spectrum oscillate between the
//! squeezed and anti-squeezed levels.

use tmsq::analysis::{oscillation_envelope, SpectrumOptions, SqueezeMode};
use tmsq::model::SqueezerParams;
use tmsq::synth::synthesize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SqueezerParams::paper_like();
    let t = synthesize(&p, 50e6, 1 << 20, 6)?;
    let opts = SpectrumOptions::default();
    for extra in [200e-9, 100e-9] {
        let env = oscillation_envelope(&t, p.group_delay, extra, (0.5e6, 15e6), SqueezeMode::Difference, &opts)?;
        println!(
            "{:.0} ns: period {:.3} MHz from {} extrema",
            extra * 1e9,
            env.period / 1e6,
            env.extrema.len()
        );
        for f in [1e6, 2.5e6, 5e6, 7.5e6] {
            let i = env.spectrum.nearest(f);
            println!(
                "  {:>5.2} MHz  {:>6.2} dB  in [{:>6.2}, {:>5.2}]",
                f / 1e6,
                env.spectrum.values[i],
                env.lower.values[i],
                env.upper.values[i]
            );
        }
    }
    if let Err(e) = oscillation_envelope(&t, p.group_delay, 0.0, (0.5e6, 15e6), SqueezeMode::Difference, &opts) {
        println!("no extra delay: {e}");
    }
    Ok(())
}
