use crate::correlator::Histogram;
use crate::error::{Error, Result};
use crate::fit::lm::{least_squares_fit, Data, FitResult, Model};
use crate::model::{lifetime_curve_x, lifetime_curve_xx, CascadeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifetimeKind {
    X,
    Xx,
}

/// `amplitude * curve(t - t0) + background` with the jitter held at the
/// configured value. For the X decay the XX lifetime is held fixed too: the
/// rise-and-decay curve is symmetric in the two lifetimes.
#[derive(Debug, Clone, Copy)]
pub struct LifetimeModel {
    pub kind: LifetimeKind,
    pub base: CascadeParams,
}

impl LifetimeModel {
    pub fn lifetime_name(&self) -> &'static str {
        match self.kind {
            LifetimeKind::X => "t1_x_ps",
            LifetimeKind::Xx => "t1_xx_ps",
        }
    }

    fn curve(&self, tau: f64, lifetime: f64) -> f64 {
        match self.kind {
            LifetimeKind::X => lifetime_curve_x(tau, &CascadeParams { t1_x: lifetime, ..self.base }),
            LifetimeKind::Xx => lifetime_curve_xx(tau, &CascadeParams { t1_xx: lifetime, ..self.base }),
        }
    }
}

impl Model<f64> for LifetimeModel {
    fn names(&self) -> Vec<String> {
        ["amplitude", "t0_ps", "background", self.lifetime_name()].map(String::from).to_vec()
    }

    fn value(&self, t: &f64, p: &[f64]) -> f64 {
        if !(p[3] > 0.0) {
            return f64::NAN;
        }
        p[0] * self.curve(t - p[1], p[3]) + p[2]
    }
}

/// Fits a sync-referenced decay histogram. The range defaults to 1.5 ns
/// before the rising edge through twelve initial lifetimes after it.
pub fn fit_lifetime(hist: &Histogram, kind: LifetimeKind, init: &CascadeParams) -> Result<FitResult> {
    fit_lifetime_in(hist, kind, init, None)
}

pub fn fit_lifetime_in(
    hist: &Histogram,
    kind: LifetimeKind,
    init: &CascadeParams,
    range: Option<(f64, f64)>,
) -> Result<FitResult> {
    init.validate()?;
    let populated = hist.counts.iter().filter(|&&c| c > 0).count();
    if populated < 10 {
        return Err(Error::InvalidArgument(format!("only {populated} populated bins, need 10")));
    }
    let model = LifetimeModel { kind, base: *init };
    let lifetime = match kind {
        LifetimeKind::X => init.t1_x,
        LifetimeKind::Xx => init.t1_xx,
    };
    let mut sorted: Vec<u64> = hist.counts.clone();
    sorted.sort_unstable();
    let background = sorted[sorted.len() / 2] as f64;
    let (peak_bin, &peak) = hist.counts.iter().enumerate().max_by_key(|(_, c)| **c).expect("non-empty");
    let threshold = background + 0.5 * (peak as f64 - background);
    let edge_bin = (0..=peak_bin).find(|&k| hist.counts[k] as f64 >= threshold).unwrap_or(peak_bin);
    let t0 = hist.bin_center(edge_bin);
    let (lo, hi) = range.unwrap_or((t0 - 1500.0, t0 + 12.0 * lifetime));
    let (x, y): (Vec<f64>, Vec<f64>) = (0..hist.len())
        .map(|k| (hist.bin_center(k), hist.counts[k] as f64))
        .filter(|(t, _)| (lo..=hi).contains(t))
        .unzip();
    let signal: f64 = y.iter().map(|v| v - background).sum::<f64>().max(1.0);
    let mut fit = least_squares_fit(
        &model,
        &Data::poisson(x.clone(), y.clone())?,
        &[signal * hist.bin_width as f64, t0, background, lifetime],
    )?;
    // Weights from the fitted means instead of the observed counts; at the
    // fixed point these are the Poisson likelihood equations.
    for _ in 0..REWEIGHT_ROUNDS {
        let sigma = x.iter().map(|t| model.value(t, &fit.params).max(MIN_VARIANCE).sqrt()).collect();
        let next = least_squares_fit(&model, &Data::new(x.clone(), y.clone(), sigma)?, &fit.params)?;
        let settled = next.params.iter().zip(&fit.params).all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
        fit = next;
        if settled {
            break;
        }
    }
    Ok(fit)
}

const REWEIGHT_ROUNDS: usize = 20;
const MIN_VARIANCE: f64 = 1e-2;
