//! Write a simulated acquisition to disk, read it back and cross-correlate
//! the two arms.
//!
//! cargo run --release --example time_tags [path.qtt|path.csv]

use std::path::PathBuf;

use qd_cascade::correlator::cross_correlate;
use qd_cascade::model::CascadeParams;
use qd_cascade::poincare::PolarizationLabel;
use qd_cascade::sim::{simulate, Channel, DetectionConfig};
use qd_cascade::tagfile;

fn main() -> qd_cascade::Result<()> {
    let path = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("tags_H-H.qtt"), PathBuf::from);
    let config = DetectionConfig {
        n_pulses: 200_000,
        eta_xx: 0.3,
        eta_x: 0.3,
        basis_first: PolarizationLabel::H,
        basis_second: PolarizationLabel::H,
        dark_rate: 200.0,
        ..Default::default()
    };
    let tags = simulate(&CascadeParams::measured(), &config)?;
    tagfile::save(&tags, &path)?;
    let back = tagfile::load(&path)?;
    assert_eq!(back, tags);
    println!("{} records round-tripped through {}", back.len(), path.display());
    for ch in Channel::ALL {
        println!("  {ch:>5}: {}", back.count(ch));
    }

    let hist = cross_correlate(&back, Channel::XxT, Channel::XT, 1000, 32)?;
    println!("\nXX_T → X_T coincidences per 32 ps bin");
    for k in (0..hist.len()).filter(|&k| hist.counts[k] > 0) {
        println!("{:6} {:5} {}", hist.bin_start(k), hist.counts[k], "#".repeat((hist.counts[k] / 40) as usize));
    }
    Ok(())
}
