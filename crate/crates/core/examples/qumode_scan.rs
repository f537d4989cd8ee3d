//! Covariance between a probe bin and a sliding conjugate bin.

use tmsq::analysis::{qumode_scan, QumodeScanOptions};
use tmsq::model::SqueezerParams;
use tmsq::synth::synthesize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SqueezerParams::paper_like();
    let t = synthesize(&p, 50e6, 1 << 21, 7)?;
    for width in [200e3, 50e3] {
        let scan = qumode_scan(
            &t,
            &QumodeScanOptions {
                bin_width: width,
                t_extra: p.group_delay,
                ..Default::default()
            },
        )?;
        let fit = scan.fit_triangular();
        println!(
            "{:.0} kHz bins: K = {:.3} x shot, worst residual {:.2} SE",
            width / 1e3,
            fit.scale / scan.shot_psd,
            fit.max_abs_residual()
        );
        let z = scan.z_scores();
        for (i, s) in scan.spacings.iter().enumerate() {
            println!("  {s:>5.2}  {:>7.3} x shot  z = {:>7.2}", scan.normalized()[i], z[i]);
        }
    }
    Ok(())
}
