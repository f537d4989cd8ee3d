//! A canned end-to-end figure on a shortened record.

use tmsq::config::RunConfig;
use tmsq::figures::{run, Figure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::default();
    cfg.apply_file(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/apparatus.conf"))?;
    cfg.samples = 1 << 20;
    let out = run(Figure::Fig3, &cfg, 7, dir.path())?;
    for line in &out.summary {
        println!("{line}");
    }
    for f in &out.files {
        println!("  {}", f.file_name().unwrap().to_string_lossy());
    }
    Ok(())
}
