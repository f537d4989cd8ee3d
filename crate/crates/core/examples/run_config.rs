//! Layered `key = value` configuration.

use std::path::Path;

use tmsq::config::{params_digest, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut cfg = RunConfig::default();
    cfg.apply_file(&presets.join("apparatus.conf"))?;
    cfg.apply_pair("eta_conjugate = 0.8")?;
    cfg.validate()?;
    print!("{}", cfg.to_text());
    println!("digest {}", params_digest(&cfg.params));

    for bad in ["eta_probe = 1.5", "gain = 3", "r0 3"] {
        let mut c = RunConfig::default();
        let err = c.apply_str(bad).map_err(|e| e.to_string()).and_then(|_| c.validate().map_err(|e| e.to_string()));
        println!("{bad:<16} -> {}", err.unwrap_err());
    }
    Ok(())
}
