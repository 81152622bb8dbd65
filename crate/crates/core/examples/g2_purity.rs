//! Hanbury Brown–Twiss on the XX arm: a laser-like source against a single
//! pair source with a small re-excitation probability.
//!
//! cargo run --release --example g2_purity [target_g2]

use qd_cascade::correlator::{cross_correlate, g2_pulsed};
use qd_cascade::model::CascadeParams;
use qd_cascade::sim::{reexcite_prob_for_g2, simulate, simulate_coherent, Channel, CoherentConfig, DetectionConfig};

fn main() -> qd_cascade::Result<()> {
    let target: f64 = std::env::args().nth(1).map_or(0.008, |a| a.parse().expect("g2 value"));
    let rep_period = DetectionConfig::default().rep_period;
    let window = (3.5 * rep_period).ceil() as i64 + 16;

    let laser = simulate_coherent(&CoherentConfig {
        rep_period,
        n_pulses: 500_000,
        mean_detected: 2.0,
        jitter_fwhm: 89.0,
        seed: 1,
    })?;
    let g2 = g2_pulsed(&cross_correlate(&laser, Channel::XxT, Channel::XxR, window, 16)?, rep_period, 3)?;
    println!("coherent source:  g2(0) = {:.4} ± {:.4}", g2.value, g2.sigma);

    let reexcite = reexcite_prob_for_g2(target, 1.0)?;
    let config = DetectionConfig {
        n_pulses: 2_000_000,
        eta_xx: 0.5,
        eta_x: 0.0,
        reexcite_prob: reexcite,
        seed: 2,
        ..Default::default()
    };
    let tags = simulate(&CascadeParams::measured(), &config)?;
    let hist = cross_correlate(&tags, Channel::XxT, Channel::XxR, window, 16)?;
    let g2 = g2_pulsed(&hist, rep_period, 3)?;
    println!("re-excitation probability {reexcite:.5} for a target of {target}");
    println!(
        "pair source:      g2(0) = {:.4} ± {:.4}  ({} central, {:.0} per side peak)",
        g2.value, g2.sigma, g2.central_counts, g2.mean_side_counts
    );
    println!("single-photon purity 1 - g2 = {:.1} %", 100.0 * (1.0 - g2.value));
    Ok(())
}
