use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::lm::{least_squares_fit, Data, FitResult, Model};

/// Line energies behind a half-wave plate at `angle_deg`, in µeV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FssSample {
    pub angle_deg: f64,
    pub e_x: f64,
    pub e_xx: f64,
}

/// `offset_branch ± (a sin 4θ + b cos 4θ)`, `+` for X and `-` for XX.
struct JointBranches;

impl Model<(f64, bool)> for JointBranches {
    fn names(&self) -> Vec<String> {
        ["sin_coeff", "cos_coeff", "offset_x", "offset_xx"].map(String::from).to_vec()
    }

    fn value(&self, x: &(f64, bool), p: &[f64]) -> f64 {
        let mut g = [0.0; 4];
        self.gradient(x, p, &mut g);
        g.iter().zip(p).map(|(a, b)| a * b).sum()
    }

    fn gradient(&self, &(angle, is_x): &(f64, bool), _: &[f64], out: &mut [f64]) {
        let arg = 4.0 * angle.to_radians();
        let sign = if is_x { 1.0 } else { -1.0 };
        out[0] = sign * arg.sin();
        out[1] = sign * arg.cos();
        out[2] = if is_x { 1.0 } else { 0.0 };
        out[3] = if is_x { 0.0 } else { 1.0 };
    }
}

/// `offset + a sin 4θ + b cos 4θ` for the X − XX difference.
struct Difference;

impl Model<f64> for Difference {
    fn names(&self) -> Vec<String> {
        ["sin_coeff", "cos_coeff", "offset"].map(String::from).to_vec()
    }

    fn value(&self, angle: &f64, p: &[f64]) -> f64 {
        let arg = 4.0 * angle.to_radians();
        p[0] * arg.sin() + p[1] * arg.cos() + p[2]
    }

    fn gradient(&self, angle: &f64, _: &[f64], out: &mut [f64]) {
        let arg = 4.0 * angle.to_radians();
        out[0] = arg.sin();
        out[1] = arg.cos();
        out[2] = 1.0;
    }
}

/// Amplitude `scale * sqrt(a^2 + b^2)` with its propagated error.
fn amplitude(fit: &FitResult, scale: f64) -> (f64, f64) {
    let (a, b) = (fit.params[0], fit.params[1]);
    let cov = &fit.covariance;
    let r = a.hypot(b);
    let var = if r > 0.0 {
        (a * a * cov[0][0] + b * b * cov[1][1] + 2.0 * a * b * cov[0][1]) / (r * r)
    } else {
        0.5 * (cov[0][0] + cov[1][1])
    };
    (scale * r, scale * var.max(0.0).sqrt())
}

/// Joint fit of both branches with opposite sign, plus an independent fit of
/// their difference. `noise` is the per-energy 1σ error in µeV; without it
/// the errors are estimated from the scatter.
///
/// Reports `delta_fss_uev` and `phase_rad` from the joint fit and
/// `delta_difference_uev` from the difference.
pub fn fit_fss(samples: &[FssSample], noise: Option<f64>) -> Result<FitResult> {
    if samples.len() < 8 {
        return Err(Error::InvalidArgument(format!("{} angle samples, need at least 8", samples.len())));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.angle_deg), hi.max(s.angle_deg)));
    if hi - lo < 90.0 {
        return Err(Error::InvalidArgument(format!("angles span {:.1}°, need 90°", hi - lo)));
    }
    let spread = |f: fn(&FssSample) -> f64| {
        let (lo, hi) =
            samples.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    if spread(|s| s.e_x) == 0.0 && spread(|s| s.e_xx) == 0.0 {
        return Err(Error::Degenerate("constant line energies".into()));
    }
    let x: Vec<(f64, bool)> = samples.iter().flat_map(|s| [(s.angle_deg, true), (s.angle_deg, false)]).collect();
    let y: Vec<f64> = samples.iter().flat_map(|s| [s.e_x, s.e_xx]).collect();
    let mean_x = samples.iter().map(|s| s.e_x).sum::<f64>() / samples.len() as f64;
    let mean_xx = samples.iter().map(|s| s.e_xx).sum::<f64>() / samples.len() as f64;
    let fit_data = |x, y| match noise {
        Some(s) => Data::new(x, y, vec![s; samples.len() * 2]),
        None => Data::unweighted(x, y),
    };
    let joint = least_squares_fit(&JointBranches, &fit_data(x, y)?, &[0.0, 0.0, mean_x, mean_xx])?;
    let joint = if noise.is_none() { joint.scaled_by_chi2() } else { joint };

    let angles: Vec<f64> = samples.iter().map(|s| s.angle_deg).collect();
    let diff: Vec<f64> = samples.iter().map(|s| s.e_x - s.e_xx).collect();
    let diff_data = match noise {
        Some(s) => Data::new(angles, diff, vec![s * std::f64::consts::SQRT_2; samples.len()])?,
        None => Data::unweighted(angles, diff)?,
    };
    let difference = least_squares_fit(&Difference, &diff_data, &[0.0, 0.0, mean_x - mean_xx])?;
    let difference = if noise.is_none() { difference.scaled_by_chi2() } else { difference };

    let (delta, delta_sigma) = amplitude(&joint, 2.0);
    let (a, b) = (joint.params[0], joint.params[1]);
    let r2 = a * a + b * b;
    let phase_sigma = if r2 > 0.0 {
        let c = &joint.covariance;
        ((b * b * c[0][0] + a * a * c[1][1] - 2.0 * a * b * c[0][1]) / (r2 * r2)).max(0.0).sqrt()
    } else {
        std::f64::consts::PI
    };
    let (diff_delta, diff_sigma) = amplitude(&difference, 1.0);
    let mut out = joint;
    out.push_derived("delta_fss_uev", delta, delta_sigma);
    out.push_derived("phase_rad", b.atan2(a), phase_sigma);
    out.push_derived("delta_difference_uev", diff_delta, diff_sigma);
    Ok(out)
}
