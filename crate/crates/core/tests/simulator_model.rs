//! Simulated coincidence histograms against the closed-form model.

use qd_cascade::correlator::cross_correlate;
use qd_cascade::model::{model_coincidence, CascadeParams};
use qd_cascade::poincare::PolarizationLabel::{self, *};
use qd_cascade::sim::{simulate, Channel, DetectionConfig};

/// Pearson χ² per bin of one detector pair against the expected counts.
fn reduced_chi2(first: PolarizationLabel, second: PolarizationLabel, xx: Channel, x: Channel) -> (f64, u64) {
    let params = CascadeParams::measured();
    let config = DetectionConfig {
        n_pulses: 2_000_000,
        eta_xx: 0.3,
        eta_x: 0.3,
        basis_first: first,
        basis_second: second,
        seed: 77,
        ..DetectionConfig::default()
    };
    let tags = simulate(&params, &config).unwrap();
    let bin = 16;
    let hist = cross_correlate(&tags, xx, x, 2000, bin).unwrap();
    let outcome_xx = if xx == Channel::XxT { first } else { first.orthogonal() };
    let outcome_x = if x == Channel::XT { second } else { second.orthogonal() };
    let pairs = config.n_pulses as f64 * config.eta_xx * config.eta_x;
    let mut chi2 = 0.0;
    let mut bins = 0;
    for k in 0..hist.len() {
        // integrate the density across the bin
        let lo = hist.bin_start(k) as f64;
        let expected: f64 = (0..bin)
            .map(|s| model_coincidence(outcome_xx.coords(), outcome_x.coords(), lo + s as f64 + 0.5, &params))
            .sum::<f64>()
            * pairs;
        if expected > 5.0 {
            chi2 += (hist.counts[k] as f64 - expected).powi(2) / expected;
            bins += 1;
        }
    }
    (chi2 / bins as f64, hist.total())
}

#[test]
fn detector_pairs_follow_the_model() {
    for (first, second, xx, x) in [
        (H, H, Channel::XxT, Channel::XT),
        (H, D, Channel::XxT, Channel::XR),
        (D, D, Channel::XxT, Channel::XT),
        (D, R, Channel::XxR, Channel::XT),
        (R, R, Channel::XxT, Channel::XR),
    ] {
        let (chi2, total) = reduced_chi2(first, second, xx, x);
        assert!(total > 10_000, "{first}-{second}: {total}");
        assert!(chi2 < 1.5, "{first}-{second} {xx}/{x}: reduced χ² {chi2}");
    }
}
