//! Fine structure splitting from a half-wave-plate scan of both lines.
//!
//! cargo run --example fss_fit [noise_uev]

use qd_cascade::fit::{fit_fss, FssSample};
use qd_cascade::model::fss_energy_shift;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> qd_cascade::Result<()> {
    let noise: f64 = std::env::args().nth(1).map_or(0.5, |a| a.parse().expect("noise in µeV"));
    let (splitting, phase) = (5.79, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let jitter = Normal::new(0.0, noise).expect("finite noise");
    let samples: Vec<FssSample> = (0..=36)
        .map(|i| {
            let angle = 5.0 * i as f64;
            FssSample {
                angle_deg: angle,
                e_x: fss_energy_shift(angle, splitting, phase, 0.0) + jitter.sample(&mut rng),
                e_xx: fss_energy_shift(angle, -splitting, phase, 0.0) + jitter.sample(&mut rng),
            }
        })
        .collect();

    let with_noise = fit_fss(&samples, Some(noise))?;
    let from_scatter = fit_fss(&samples, None)?;
    for (label, fit) in [("known noise", &with_noise), ("from scatter", &from_scatter)] {
        let (delta, sigma) = fit.get("delta_fss_uev").expect("derived");
        let (diff, diff_sigma) = fit.get("delta_difference_uev").expect("derived");
        println!("{label:>13}: joint {delta:.3} ± {sigma:.3} µeV, difference {diff:.3} ± {diff_sigma:.3} µeV");
    }
    println!("phase {:.3} rad (set {phase})", with_noise.value("phase_rad"));
    Ok(())
}
