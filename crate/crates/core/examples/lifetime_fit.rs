//! Decay histograms against the laser clock and the two lifetime fits. The
//! exciton fit holds the biexciton lifetime at the value fitted first.
//!
//! cargo run --release --example lifetime_fit [n_pulses]

use qd_cascade::correlator::{sync_histogram, Histogram};
use qd_cascade::fit::{fit_lifetime, LifetimeKind};
use qd_cascade::model::CascadeParams;
use qd_cascade::sim::{simulate, Channel, DetectionConfig, TimeTagStream};

fn arm(tags: &TimeTagStream, channels: [Channel; 2], rep_period: f64) -> qd_cascade::Result<Histogram> {
    let mut hist = sync_histogram(tags, channels[0], rep_period, 4)?;
    hist.accumulate(&sync_histogram(tags, channels[1], rep_period, 4)?)?;
    Ok(hist)
}

fn main() -> qd_cascade::Result<()> {
    let n_pulses: u64 = std::env::args().nth(1).map_or(1_000_000, |a| a.parse().expect("pulse count"));
    let truth = CascadeParams::measured();
    let config = DetectionConfig { n_pulses, eta_xx: 0.5, eta_x: 0.5, ..Default::default() };
    let tags = simulate(&truth, &config)?;

    let guess = CascadeParams { t1_x: 400.0, t1_xx: 150.0, ..truth };
    let xx = fit_lifetime(&arm(&tags, [Channel::XxT, Channel::XxR], config.rep_period)?, LifetimeKind::Xx, &guess)?;
    let (t1_xx, s_xx) = xx.get("t1_xx_ps").expect("lifetime");
    let x_hist = arm(&tags, [Channel::XT, Channel::XR], config.rep_period)?;
    let x = fit_lifetime(&x_hist, LifetimeKind::X, &CascadeParams { t1_xx, ..guess })?;
    let (t1_x, s_x) = x.get("t1_x_ps").expect("lifetime");

    println!("XX: T1 = {t1_xx:.2} ± {s_xx:.2} ps (configured {}), chi2/dof {:.3}", truth.t1_xx, xx.chi2_reduced);
    println!("X:  T1 = {t1_x:.2} ± {s_x:.2} ps (configured {}), chi2/dof {:.3}", truth.t1_x, x.chi2_reduced);
    println!("\n{}", x.to_csv());
    Ok(())
}
