//! Simulate the nine projection settings, build the 36-combination tomogram
//! and follow the negativity as a function of X–XX delay.
//!
//! cargo run --release --example entanglement_tomography [projection_accuracy]

use std::time::Instant;

use qd_cascade::model::CascadeParams;
use qd_cascade::poincare::PolarizationLabel;
use qd_cascade::sim::{simulate, DetectionConfig};
use qd_cascade::state::negativity2n;
use qd_cascade::tomography::{
    assemble_tomogram, corotating_average_matrix, model_negativity, model_negativity_corotating,
    model_negativity_window, negativity_vs_delay_with, window_average_matrix, SeriesOptions, SettingAcquisition,
};

fn main() -> qd_cascade::Result<()> {
    let accuracy: f64 = std::env::args().nth(1).map_or(1.0, |a| a.parse().expect("accuracy in [0, 1]"));
    let params = CascadeParams::measured();
    let clock = Instant::now();

    let mut acquisitions = Vec::new();
    for (n, &first) in PolarizationLabel::SETTINGS.iter().enumerate() {
        for (m, &second) in PolarizationLabel::SETTINGS.iter().enumerate() {
            let config = DetectionConfig {
                n_pulses: 1_000_000,
                eta_xx: 0.25,
                eta_x: 0.25,
                projection_accuracy: accuracy,
                basis_first: first,
                basis_second: second,
                seed: 100 + (3 * n + m) as u64,
                ..Default::default()
            };
            acquisitions.push(SettingAcquisition {
                basis_first: first,
                basis_second: second,
                tags: simulate(&params, &config)?,
            });
        }
    }
    println!("simulated 9 settings in {:.1?}", clock.elapsed());

    let tomo = assemble_tomogram(&acquisitions, 3000, 4)?;
    println!("tomogram: {} coincidences in {} bins ({:.1?})", tomo.total(), tomo.n_bins(), clock.elapsed());

    let peak = window_average_matrix(&tomo, 0.0, 4.0)?;
    println!(
        "2n in [0, 4) ps: {:.3} from {} counts (model {:.3})",
        negativity2n(&peak.rho),
        peak.total_counts,
        model_negativity_window(0.0, 4.0, &params, accuracy)?
    );

    let options = SeriesOptions { n_bootstrap: 100, range: Some((-200.0, 2000.0)), ..Default::default() };
    let series = negativity_vs_delay_with(&tomo, 32, &options)?;
    println!("delay_ps   2n      sigma   model   counts");
    for k in 0..series.len() {
        let t = series.delay_centers[k];
        println!(
            "{t:8.0}  {:6.3}  {:6.3}  {:6.3}  {}",
            series.values[k],
            series.errors[k],
            model_negativity_window(t - 16.0, t + 16.0, &params, accuracy)?,
            series.counts[k]
        );
    }
    let t1 = params.t1_x;
    let (plateau, plateau_err) = series.weighted_mean(t1, 3.0 * t1)?;
    println!(
        "plateau [T1, 3 T1]: {plateau:.3} ± {plateau_err:.3} (model at 2 T1: {:.3})",
        model_negativity(2.0 * t1, &params, accuracy)?
    );
    let (mean, mean_err) = series.weighted_mean(0.0, t1)?;
    println!("count-weighted mean over [0, T1]: {mean:.3} ± {mean_err:.3}");
    let corot = corotating_average_matrix(&tomo, 0.0, t1, 32, params.precession_omega())?;
    println!(
        "co-rotating average over [0, T1]: 2n = {:.3} (model {:.3})",
        negativity2n(&corot),
        model_negativity_corotating(0.0, t1, 32.0, &params, accuracy)?
    );
    let pooled = window_average_matrix(&tomo, 0.0, t1)?;
    println!(
        "pooled counts over [0, T1]: 2n = {:.3} (model {:.3})",
        negativity2n(&pooled.rho),
        model_negativity_window(0.0, t1, &params, accuracy)?
    );
    println!("total {:.1?}", clock.elapsed());
    Ok(())
}
