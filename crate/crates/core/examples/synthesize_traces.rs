//! Synthesize a record and look at what comes out.

use tmsq::model::SqueezerParams;
use tmsq::synth::{synthesize, SampleUnits};

fn variance(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 50e6;
    let n = 1 << 18;

    let ideal = synthesize(&SqueezerParams::paper_like(), fs, n, 1)?;
    println!("ideal chain: {} samples, {:.3} ms", ideal.n(), ideal.duration() * 1e3);
    println!("  probe variance     {:.4}", variance(&ideal.probe));
    println!("  conjugate variance {:.4}", variance(&ideal.conjugate));
    let vac = ideal.vacuum.as_ref().expect("vacuum reference");
    println!("  vacuum variance    {:.4} (shot units)", variance(&vac.probe));
    println!("  dark record        {}", ideal.dark.is_some());

    let app = synthesize(&SqueezerParams::apparatus(), fs, n, 1)?;
    if let SampleUnits::AdcCodes { step } = app.units {
        let max = app.probe.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!("apparatus chain: codes of {step:.5} shot sigma, largest |code| {max}");
    }
    for (k, v) in &app.meta {
        println!("  {k} = {v}");
    }

    // Same seed, same record, whatever the thread count.
    let again = synthesize(&SqueezerParams::paper_like(), fs, n, 1)?;
    assert_eq!(again, ideal);
    Ok(())
}
