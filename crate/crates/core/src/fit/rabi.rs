use crate::error::{Error, Result};
use crate::fit::lm::{least_squares_fit, Data, FitResult, Model};
use crate::model::rabi_rate;

/// Parameters `(pi_power, max_rate)` of [`rabi_rate`].
pub struct RabiModel;

impl Model<f64> for RabiModel {
    fn names(&self) -> Vec<String> {
        ["pi_power", "max_rate"].map(String::from).to_vec()
    }

    fn value(&self, power: &f64, p: &[f64]) -> f64 {
        rabi_rate(*power, p[0], p[1]).unwrap_or(f64::NAN)
    }

    fn gradient(&self, power: &f64, p: &[f64], out: &mut [f64]) {
        let arg = std::f64::consts::FRAC_PI_2 * (power / p[0]).sqrt();
        let s = arg.sin();
        out[0] = -p[1] * 2.0 * s * arg.cos() * arg / (2.0 * p[0]);
        out[1] = s * s;
    }
}

/// Fits detected rate against excitation power. Rates carry no errors; the
/// covariance is scaled by the residual scatter.
pub fn fit_rabi(rows: &[(f64, f64)]) -> Result<FitResult> {
    if rows.len() < 5 {
        return Err(Error::InvalidArgument(format!("{} power points, need at least 5", rows.len())));
    }
    if rows.iter().any(|&(p, r)| !(p >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument("powers must be non-negative and rates finite".into()));
    }
    let &(peak_power, peak_rate) = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    if !(peak_power > 0.0 && peak_rate > 0.0) {
        return Err(Error::Degenerate("no excitation signal".into()));
    }
    let (x, y) = rows.iter().copied().unzip();
    let fit = least_squares_fit(&RabiModel, &Data::unweighted(x, y)?, &[peak_power, peak_rate])?;
    let pi_power = fit.value("pi_power");
    if rows.iter().all(|&(p, _)| p < 0.25 * pi_power) {
        return Err(Error::Degenerate(format!("no curvature: all powers below P_pi/4 = {}", 0.25 * pi_power)));
    }
    if rows.iter().all(|&(p, _)| p <= pi_power) {
        return Err(Error::InvalidArgument("no power point beyond the first maximum".into()));
    }
    Ok(fit.scaled_by_chi2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::lm::central_difference;

    fn samples(pi_power: f64, max_rate: f64, powers: &[f64]) -> Vec<(f64, f64)> {
        powers.iter().map(|&p| (p, rabi_rate(p, pi_power, max_rate).unwrap())).collect()
    }

    #[test]
    fn exact_recovery() {
        let powers: Vec<f64> = (1..=16).map(|i| 0.1 * i as f64).collect();
        let fit = fit_rabi(&samples(0.65, 392e3, &powers)).unwrap();
        assert!((fit.value("pi_power") - 0.65).abs() < 1e-9);
        assert!((fit.value("max_rate") / 392e3 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn needs_curvature() {
        let low = samples(0.65, 392e3, &[0.01, 0.02, 0.05, 0.08, 0.12, 0.15]);
        assert!(fit_rabi(&low).is_err());
        assert!(fit_rabi(&low[..4]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.65, 392e3];
        for power in [0.1, 0.65, 1.3] {
            let mut g = [0.0; 2];
            let mut fd = [0.0; 2];
            RabiModel.gradient(&power, &p, &mut g);
            central_difference(|q| RabiModel.value(&power, q), &p, &mut fd);
            for (a, b) in g.iter().zip(fd) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }
}
