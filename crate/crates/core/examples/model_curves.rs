//! Analytic joint-quadrature noise of the default squeezer.

use tmsq::model::{Branch, SqueezerParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SqueezerParams::paper_like();
    p.validate()?;
    println!("r0 = {:.4}, f_b = {} MHz, order {}", p.r0, p.gain_bandwidth / 1e6, p.profile_order);
    println!("{:>8}  {:>9}  {:>9}  {:>9}  {:>12}", "f MHz", "sq dB", "anti dB", "no comp", "200 ns net");
    for f in [0.1e6, 1e6, 2.5e6, 5e6, 7.5e6, 10e6, 15e6, 20e6] {
        let t = p.group_delay;
        println!(
            "{:>8.2}  {:>9.3}  {:>9.3}  {:>9.3}  {:>12.3}",
            f / 1e6,
            p.squeezing_db(f, t, Branch::Squeezed),
            p.squeezing_db(f, t, Branch::Antisqueezed),
            p.squeezing_db(f, 0.0, Branch::Squeezed),
            10.0 * p.joint_variance_net(f, 200e-9, Branch::Squeezed).log10(),
        );
    }
    let app = SqueezerParams::apparatus();
    println!("\nmeasured ratio through the apparatus chain, no dark subtraction:");
    for f in [10e3, 30e3, 100e3, 300e3, 1e6] {
        let r = app.measured_ratio(f, app.group_delay, Branch::Squeezed);
        println!("  {:>7.0} kHz  {:>7.3} dB", f / 1e3, 10.0 * r.log10());
    }
    Ok(())
}
