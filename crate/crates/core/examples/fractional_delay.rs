//! Sub-sample delays by a frequency-domain phase ramp.

use std::f64::consts::PI;

use tmsq::dsp::apply_delay;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 50e6;
    let n = 1 << 12;
    // 1 MHz falls on a DFT bin of this record, so the ramp is exact.
    let f = (1e6 * n as f64 / fs).round() * fs / n as f64;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();

    let tau = 10.4e-9;
    let y = apply_delay(&x, fs, tau)?;
    // Phase of the delayed sine from its projection on sin and cos.
    let (s, c) = y.iter().enumerate().fold((0.0, 0.0), |(s, c), (i, v)| {
        let w = 2.0 * PI * f * i as f64 / fs;
        (s + v * w.sin(), c + v * w.cos())
    });
    let phase = -c.atan2(s);
    println!("delay {:.1} ns at {:.4} MHz: phase {:.6} rad, expected {:.6}", tau * 1e9, f / 1e6, phase, 2.0 * PI * f * tau);

    let shifted = apply_delay(&x, fs, 3.0 / fs)?;
    let err = (0..n).map(|i| (shifted[i] - x[(i + n - 3) % n]).abs()).fold(0.0, f64::max);
    println!("three-sample delay vs circular shift: max error {err:.1e}");

    let back = apply_delay(&y, fs, -tau)?;
    let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip: max error {err:.1e}");

    match apply_delay(&x, fs, 1.0) {
        Err(e) => println!("a 1 s delay on a {:.0} us record: {e}", n as f64 / fs * 1e6),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
