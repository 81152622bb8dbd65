//! Curve fits: the least-squares engine and the characterization fits built
//! on it.

mod fss;
mod lifetime;
pub mod lm;
mod psf;
mod rabi;

pub use fss::{fit_fss, FssSample};
pub use lifetime::{fit_lifetime, fit_lifetime_in, LifetimeKind, LifetimeModel};
pub use lm::{least_squares_fit, Data, FitResult, FnModel, Model};
pub use psf::{fit_psf, GaussianModel};
pub use rabi::{fit_rabi, RabiModel};

/// Abbe-type resolution limit `0.51 λ / NA`, in the unit of `wavelength`.
pub fn diffraction_limit(wavelength: f64, numerical_aperture: f64) -> f64 {
    0.51 * wavelength / numerical_aperture
}

/// Detected photons per excitation pulse.
pub fn per_pulse_efficiency(detected_rate_hz: f64, rep_rate_hz: f64) -> f64 {
    detected_rate_hz / rep_rate_hz
}

/// Energy per pulse in J for an average power in W.
pub fn pulse_energy(average_power_w: f64, rep_rate_hz: f64) -> f64 {
    average_power_w / rep_rate_hz
}
