//! Closed-form cascade curves: polarization-resolved coincidence densities,
//! their jitter-smoothed counterparts, sync-referenced lifetime curves,
//! fine-structure energy shifts and the Rabi saturation law.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faddeeva::{gauss_exp_convolution, gauss_exp_moment1};
use crate::poincare::PoincareCoord;
use crate::state::PLANCK_UEV_PS;

/// `FWHM / sigma` of a normal distribution, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Emitter and detector parameters. Times in ps, energies in µeV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub t1_x: f64,
    pub t1_xx: f64,
    pub fss: f64,
    pub jitter_1p_fwhm: f64,
    pub planck_uev_ps: f64,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self::measured()
    }
}

impl CascadeParams {
    /// Lifetimes, splitting and detector jitter of the characterized dot.
    pub fn measured() -> Self {
        Self { t1_x: 320.0, t1_xx: 222.7, fss: 5.79, jitter_1p_fwhm: 89.0, planck_uev_ps: PLANCK_UEV_PS }
    }

    pub fn new(t1_x: f64, t1_xx: f64, fss: f64, jitter_1p_fwhm: f64) -> Result<Self> {
        let p = Self { t1_x, t1_xx, fss, jitter_1p_fwhm, planck_uev_ps: PLANCK_UEV_PS };
        p.validate()?;
        Ok(p)
    }

    /// Lifetimes must be positive; `fss` and jitter may be zero for the
    /// idealized limits.
    pub fn validate(&self) -> Result<()> {
        let ok = self.t1_x > 0.0
            && self.t1_xx > 0.0
            && self.fss >= 0.0
            && self.jitter_1p_fwhm >= 0.0
            && self.planck_uev_ps > 0.0
            && [self.t1_x, self.t1_xx, self.fss, self.jitter_1p_fwhm].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid cascade parameters {self:?}")))
        }
    }

    /// `h / fss`; infinite when `fss = 0`.
    pub fn precession_period(&self) -> f64 {
        self.planck_uev_ps / self.fss
    }

    /// Angular precession frequency `2 pi fss / h` in rad/ps.
    pub fn precession_omega(&self) -> f64 {
        2.0 * PI * self.fss / self.planck_uev_ps
    }

    pub fn jitter_2p_fwhm(&self) -> f64 {
        SQRT_2 * self.jitter_1p_fwhm
    }

    pub fn sigma_1p(&self) -> f64 {
        fwhm_to_sigma(self.jitter_1p_fwhm)
    }

    pub fn sigma_2p(&self) -> f64 {
        fwhm_to_sigma(self.jitter_2p_fwhm())
    }
}

/// Coincidence density (per ps) for projections `i` (XX) and `j` (X) at
/// delay `delta_tau = t_X - t_XX >= 0`, normalized so that the four
/// outcomes of a setting sum to the exciton decay density.
pub fn theory_coincidence(i: PoincareCoord, j: PoincareCoord, delta_tau: f64, params: &CascadeParams) -> Result<f64> {
    if !(delta_tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative delay {delta_tau}")));
    }
    let t1 = params.t1_x;
    let prefactor = (-delta_tau / t1).exp() / (2.0 * t1);
    let arg = 0.5 * (i.phi + j.phi) + PI * delta_tau * params.fss / params.planck_uev_ps;
    let amp = Complex64::new(((i.theta - j.theta) / 2.0).cos() * arg.cos(), 0.0)
        + Complex64::i() * ((i.theta + j.theta) / 2.0).cos() * arg.sin();
    Ok(prefactor * amp.norm_sqr())
}

/// Decomposition `theory = e^{-t/T}/(2T) [mean + swing cos(phase + omega t)]`.
#[derive(Debug, Clone, Copy)]
struct Harmonics {
    mean: f64,
    swing: f64,
    phase: f64,
}

impl Harmonics {
    fn new(i: PoincareCoord, j: PoincareCoord) -> Self {
        let a = ((i.theta - j.theta) / 2.0).cos();
        let b = ((i.theta + j.theta) / 2.0).cos();
        Self { mean: 0.5 * (a * a + b * b), swing: 0.5 * (a * a - b * b), phase: i.phi + j.phi }
    }
}

/// [`theory_coincidence`] convolved with the two-photon timing jitter
/// (normal distribution of FWHM `sqrt 2 * jitter_1p_fwhm`).
pub fn model_coincidence(i: PoincareCoord, j: PoincareCoord, delta_tau: f64, params: &CascadeParams) -> f64 {
    let h = Harmonics::new(i, j);
    let t1 = params.t1_x;
    let omega = params.precession_omega();
    let sigma = params.sigma_2p();
    if sigma == 0.0 {
        if delta_tau < 0.0 {
            return 0.0;
        }
        let osc = h.mean + h.swing * (h.phase + omega * delta_tau).cos();
        return (-delta_tau / t1).exp() / (2.0 * t1) * osc;
    }
    let flat = gauss_exp_convolution(Complex64::new(1.0 / t1, 0.0), delta_tau, sigma).re;
    let rotating = if h.swing != 0.0 {
        let f = gauss_exp_convolution(Complex64::new(1.0 / t1, -omega), delta_tau, sigma);
        (Complex64::from_polar(1.0, h.phase) * f).re
    } else {
        0.0
    };
    ((h.mean * flat + h.swing * rotating) / (2.0 * t1)).max(0.0)
}

/// Sync-referenced XX decay: exponential (rate `1/T1_XX`) smoothed by the
/// single-photon jitter. Unit area.
pub fn lifetime_curve_xx(tau: f64, params: &CascadeParams) -> f64 {
    exp_density(params.t1_xx, tau, params.sigma_1p())
}

/// Sync-referenced X decay: XX and X exponentials in sequence, smoothed by
/// the single-photon jitter. Unit area.
pub fn lifetime_curve_x(tau: f64, params: &CascadeParams) -> f64 {
    let (tx, txx) = (params.t1_x, params.t1_xx);
    let sigma = params.sigma_1p();
    let rel = (tx - txx).abs() / tx.max(txx);
    if rel < 1e-7 {
        let t = 0.5 * (tx + txx);
        return if sigma == 0.0 {
            if tau < 0.0 {
                0.0
            } else {
                tau * (-tau / t).exp() / (t * t)
            }
        } else {
            (gauss_exp_moment1(1.0 / t, tau, sigma) / (t * t)).max(0.0)
        };
    }
    if sigma == 0.0 {
        if tau < 0.0 {
            return 0.0;
        }
        return ((-tau / tx).exp() - (-tau / txx).exp()) / (tx - txx);
    }
    let fx = gauss_exp_convolution((1.0 / tx).into(), tau, sigma).re;
    let fxx = gauss_exp_convolution((1.0 / txx).into(), tau, sigma).re;
    ((fx - fxx) / (tx - txx)).max(0.0)
}

fn exp_density(t1: f64, tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if tau < 0.0 { 0.0 } else { (-tau / t1).exp() / t1 };
    }
    (gauss_exp_convolution((1.0 / t1).into(), tau, sigma).re / t1).max(0.0)
}

/// Emission energy shift seen behind a half-wave plate at `halfwave_angle`
/// degrees followed by a fixed polarizer.
pub fn fss_energy_shift(halfwave_angle_deg: f64, amplitude: f64, phase: f64, offset: f64) -> f64 {
    offset + 0.5 * amplitude * (4.0 * halfwave_angle_deg.to_radians() + phase).sin()
}

/// Ideal two-level pulse-area law, pulse area proportional to `sqrt(power)`.
pub fn rabi_rate(pulse_power: f64, pi_power: f64, max_rate: f64) -> Result<f64> {
    if !(pi_power > 0.0) {
        return Err(Error::InvalidArgument("pi-pulse power must be positive".into()));
    }
    if pulse_power < 0.0 {
        return Err(Error::InvalidArgument("pulse power must be non-negative".into()));
    }
    Ok(max_rate * (FRAC_PI_2 * (pulse_power / pi_power).sqrt()).sin().powi(2))
}

/// Which closed-form curve a [`ModelCurve`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Theory,
    Model,
}

/// A curve sampled on a uniform delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCurve {
    pub label: String,
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub params: CascadeParams,
}

impl ModelCurve {
    pub fn sample(
        kind: CurveKind,
        (i, j): (crate::poincare::PolarizationLabel, crate::poincare::PolarizationLabel),
        params: &CascadeParams,
        start: f64,
        step: f64,
        n: usize,
    ) -> Result<Self> {
        if !(step > 0.0) || n == 0 {
            return Err(Error::InvalidArgument("grid needs positive step and at least one point".into()));
        }
        let (ci, cj) = (i.coords(), j.coords());
        let values = (0..n)
            .map(|k| {
                let t = start + k as f64 * step;
                match kind {
                    CurveKind::Model => model_coincidence(ci, cj, t, params),
                    CurveKind::Theory if t < 0.0 => 0.0,
                    CurveKind::Theory => theory_coincidence(ci, cj, t, params).unwrap_or(0.0),
                }
            })
            .collect();
        Ok(Self { label: format!("{i}-{j}"), start, step, values, params: *params })
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.start + k as f64 * self.step)
    }

    pub fn to_csv(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "# pair={}, t1_x_ps={}, t1_xx_ps={}, fss_uev={}, jitter_1p_fwhm_ps={}\n",
            self.label, p.t1_x, p.t1_xx, p.fss, p.jitter_1p_fwhm
        );
        for (t, v) in self.grid().zip(&self.values) {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }
}
