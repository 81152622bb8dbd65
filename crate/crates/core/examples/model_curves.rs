//! Jitter-free and jitter-convolved coincidence curves for a few analyzer
//! pairs, plus the state at a chosen delay.
//!
//! cargo run --example model_curves [delay_ps]

use qd_cascade::model::{model_coincidence, theory_coincidence, CascadeParams};
use qd_cascade::poincare::PolarizationLabel::{self, *};
use qd_cascade::state::{cascade_ket, density_from_ket, negativity2n};
use qd_cascade::tomography::{jitter_limited_plateau, model_negativity, precession_angle};

fn main() -> qd_cascade::Result<()> {
    let delay: f64 = std::env::args().nth(1).map_or(500.0, |a| a.parse().expect("delay in ps"));
    let params = CascadeParams::measured();
    println!(
        "precession period {:.1} ps, two-photon jitter FWHM {:.1} ps",
        params.precession_period(),
        params.jitter_2p_fwhm()
    );

    let pairs: [(PolarizationLabel, PolarizationLabel); 4] = [(H, H), (H, V), (D, D), (R, L)];
    print!("{:>8}", "delay");
    for (i, j) in pairs {
        print!("  {:>9} {:>9}", format!("{i}{j} bare"), format!("{i}{j} conv"));
    }
    println!();
    for step in 0..=24 {
        let t = -200.0 + 100.0 * step as f64;
        print!("{t:8.0}");
        for (i, j) in pairs {
            let bare = if t >= 0.0 { theory_coincidence(i.coords(), j.coords(), t, &params)? } else { 0.0 };
            print!("  {:9.2e} {:9.2e}", bare, model_coincidence(i.coords(), j.coords(), t, &params));
        }
        println!();
    }

    let rho = density_from_ket(&cascade_ket(delay, params.fss)?)?;
    println!("\nat {delay} ps the pair state has precessed by {:.3} rad", precession_angle(delay, &params));
    println!("2n of the emitted state: {:.6}", negativity2n(&rho));
    println!("2n expected after timing jitter: {:.3}", model_negativity(delay, &params, 1.0)?);
    println!("long-delay limit set by jitter: {:.3}", jitter_limited_plateau(&params));
    Ok(())
}
