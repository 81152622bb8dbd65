//! Detected rate against pulse power up to and past the first π pulse.
//!
//! cargo run --example rabi_fit

use qd_cascade::fit::{fit_rabi, per_pulse_efficiency};
use qd_cascade::model::rabi_rate;

fn main() -> qd_cascade::Result<()> {
    let (pi_power, max_rate) = (0.65, 392e3);
    // a slow drift on top of the ideal curve
    let rows: Vec<(f64, f64)> = (1..=30)
        .map(|i| {
            let p = 0.05 * i as f64;
            (p, rabi_rate(p, pi_power, max_rate).unwrap() * (1.0 + 0.01 * (7.0 * p).sin()))
        })
        .collect();
    let fit = fit_rabi(&rows)?;
    let (p, sp) = fit.get("pi_power").expect("parameter");
    let (r, sr) = fit.get("max_rate").expect("parameter");
    println!("pi pulse at {p:.4} ± {sp:.4} µW, peak rate {:.1} ± {:.1} kHz", r / 1e3, sr / 1e3);
    println!("per-pulse efficiency at the pi pulse: {:.2e}", per_pulse_efficiency(r, 76e6));
    Ok(())
}
