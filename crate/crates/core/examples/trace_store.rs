//! Trace files and CSV output.

use tmsq::analysis::{squeezing_spectrum, SpectrumOptions, SqueezeMode};
use tmsq::model::SqueezerParams;
use tmsq::store::{read_traces, spectrum_csv, write_traces, write_traces_as, SampleFormat};
use tmsq::synth::synthesize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let codes = synthesize(&SqueezerParams::apparatus(), 50e6, 1 << 16, 9)?;
    let floats = synthesize(&SqueezerParams::paper_like(), 50e6, 1 << 16, 9)?;

    let a = dir.path().join("apparatus.tmsq");
    let b = dir.path().join("ideal.tmsq");
    let c = dir.path().join("ideal32.tmsq");
    println!("i16 codes: {} bytes", write_traces(&a, &codes)?);
    println!("f64:       {} bytes", write_traces(&b, &floats)?);
    println!("f32:       {} bytes", write_traces_as(&c, &floats, SampleFormat::F32)?);
    assert_eq!(read_traces(&a)?, codes);
    assert_eq!(read_traces(&b)?, floats);

    let s = squeezing_spectrum(&read_traces(&b)?, SqueezeMode::Difference, 10.4e-9, &SpectrumOptions::default())?;
    let csv = String::from_utf8(spectrum_csv(&s))?;
    for line in csv.lines().take(4) {
        println!("{line}");
    }

    let mut bad = std::fs::read(&a)?;
    bad.truncate(bad.len() / 2);
    std::fs::write(&a, &bad)?;
    println!("truncated file: {}", read_traces(&a).unwrap_err());
    Ok(())
}
