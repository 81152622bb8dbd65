//! Time-resolved polarization tomography of X–XX pairs.
//!
//! Each measurement setting `(I, J)` with `I, J ∈ {H, D, R}` fills four of
//! the 36 combinations through the two output ports of each projection
//! unit. Delays are `t_X - t_XX`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::correlator::{cross_correlate, Histogram};
use crate::error::{Error, Result};
use crate::faddeeva::gauss_exp_convolution;
use crate::linalg::Mat4;
use crate::mle::{
    combination_index, combination_label, expected_counts, mle_reconstruct_from, mle_reconstruct_with, MleOptions,
    Reconstruction, N_COMBOS,
};
use crate::model::CascadeParams;
use crate::poincare::PolarizationLabel;
use crate::sim::{outcome_labels, Channel, TimeTagStream};
use crate::state::{negativity2n, DensityMatrix};

/// Detector pairs in the order of [`outcome_labels`].
pub const DETECTOR_PAIRS: [(Channel, Channel); 4] = [
    (Channel::XxT, Channel::XT),
    (Channel::XxT, Channel::XR),
    (Channel::XxR, Channel::XT),
    (Channel::XxR, Channel::XR),
];

/// One acquisition at a fixed projection setting.
#[derive(Debug, Clone)]
pub struct SettingAcquisition {
    pub basis_first: PolarizationLabel,
    pub basis_second: PolarizationLabel,
    pub tags: TimeTagStream,
}

/// The four detector-pair histograms of one setting, already correlated.
#[derive(Debug, Clone)]
pub struct SettingHistograms {
    pub basis_first: PolarizationLabel,
    pub basis_second: PolarizationLabel,
    pub histograms: [Histogram; 4],
    pub exposure: u64,
}

fn setting_slot(first: PolarizationLabel, second: PolarizationLabel) -> Result<usize> {
    let pos = |l: PolarizationLabel| PolarizationLabel::SETTINGS.iter().position(|&s| s == l);
    match (pos(first), pos(second)) {
        (Some(a), Some(b)) => Ok(3 * a + b),
        _ => Err(Error::InvalidArgument(format!("{first}/{second} is not a projection setting"))),
    }
}

fn setting_name(slot: usize) -> String {
    format!("{}-{}", PolarizationLabel::SETTINGS[slot / 3], PolarizationLabel::SETTINGS[slot % 3])
}

/// Coincidences of all 36 combinations on a uniform delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TomogramCounts {
    pub start: i64,
    pub bin_width: i64,
    /// One row of 36 counts per delay bin.
    pub counts: Vec<[u64; N_COMBOS]>,
    /// Pulses recorded in each setting, ordered `H-H, H-D, H-R, D-H, ...`.
    pub exposures: [u64; 9],
}

impl TomogramCounts {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_start(&self, k: usize) -> i64 {
        self.start + k as i64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) as f64 + 0.5 * self.bin_width as f64
    }

    pub fn end(&self) -> i64 {
        self.bin_start(self.n_bins())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn combination_total(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }

    /// Merges `factor` adjacent delay bins.
    pub fn rebin(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("rebin factor must be positive".into()));
        }
        let counts = self
            .counts
            .chunks(factor)
            .map(|chunk| {
                let mut row = [0u64; N_COMBOS];
                for r in chunk {
                    for (a, b) in row.iter_mut().zip(r) {
                        *a += b;
                    }
                }
                row
            })
            .collect();
        Ok(Self { start: self.start, bin_width: self.bin_width * factor as i64, counts, exposures: self.exposures })
    }

    /// Counts summed over the bins whose centres lie in `[lo, hi)`.
    pub fn window_counts(&self, lo: f64, hi: f64) -> Result<[f64; N_COMBOS]> {
        if lo < self.start as f64 || hi > self.end() as f64 || !(hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "window [{lo}, {hi}) outside the tomogram span [{}, {})",
                self.start,
                self.end()
            )));
        }
        let mut out = [0.0; N_COMBOS];
        let mut any = false;
        for (k, row) in self.counts.iter().enumerate() {
            if (lo..hi).contains(&self.bin_center(k)) {
                any = true;
                for (a, &b) in out.iter_mut().zip(row) {
                    *a += b as f64;
                }
            }
        }
        if !any || out.iter().sum::<f64>() == 0.0 {
            return Err(Error::EmptyWindow);
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# bin_width_ps={}, start_ps={}", self.bin_width, self.start);
        for (slot, e) in self.exposures.iter().enumerate() {
            let _ = write!(s, ", pulses_{}={e}", setting_name(slot));
        }
        s.push_str("\ndelay_ps");
        for k in 0..N_COMBOS {
            s.push(',');
            s.push_str(&combination_label(k));
        }
        s.push('\n');
        for (k, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{}", self.bin_start(k));
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut bin_width = None;
        let mut exposures = [0u64; 9];
        let mut columns: Option<Vec<usize>> = None;
        let mut rows: Vec<(i64, [u64; N_COMBOS])> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split(',') {
                    let Some((key, value)) = field.split_once('=') else { continue };
                    let key = key.trim();
                    let value = value.trim();
                    if key == "bin_width_ps" {
                        bin_width = Some(value.parse::<i64>().map_err(|e| Error::Parse(format!("bin_width_ps: {e}")))?);
                    } else if let Some(name) = key.strip_prefix("pulses_") {
                        let slot = (0..9)
                            .find(|&s| setting_name(s) == name)
                            .ok_or_else(|| Error::Parse(format!("unknown setting {name}")))?;
                        exposures[slot] = value.parse().map_err(|e| Error::Parse(format!("{key}: {e}")))?;
                    }
                }
                continue;
            }
            if line.starts_with("delay_ps") {
                let mut map = Vec::new();
                for label in line.split(',').skip(1) {
                    let (a, b) =
                        label.trim().split_once('-').ok_or_else(|| Error::Parse(format!("bad column {label:?}")))?;
                    map.push(combination_index(a.parse()?, b.parse()?));
                }
                let mut seen = map.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != N_COMBOS || map.len() != N_COMBOS {
                    return Err(Error::MissingSettings("tomogram needs all 36 combinations".into()));
                }
                columns = Some(map);
                continue;
            }
            let map = columns.as_ref().ok_or_else(|| Error::Parse("data before header".into()))?;
            let mut fields = line.split(',');
            let delay = fields
                .next()
                .and_then(|f| f.trim().parse::<i64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad row {line:?}")))?;
            let mut row = [0u64; N_COMBOS];
            for (col, field) in fields.enumerate() {
                let k = *map.get(col).ok_or_else(|| Error::Parse(format!("too many fields in {line:?}")))?;
                row[k] = field.trim().parse().map_err(|e| Error::Parse(format!("{line:?}: {e}")))?;
            }
            rows.push((delay, row));
        }
        let start = rows.first().ok_or_else(|| Error::Parse("tomogram has no rows".into()))?.0;
        let bin_width = match bin_width {
            Some(w) => w,
            None if rows.len() > 1 => rows[1].0 - rows[0].0,
            None => return Err(Error::Parse("bin width missing".into())),
        };
        if bin_width < 1 {
            return Err(Error::InconsistentGrid(format!("bin width {bin_width}")));
        }
        for (k, (d, _)) in rows.iter().enumerate() {
            if *d != start + k as i64 * bin_width {
                return Err(Error::InconsistentGrid(format!("row {k} at {d} ps")));
            }
        }
        Ok(Self { start, bin_width, counts: rows.into_iter().map(|(_, r)| r).collect(), exposures })
    }
}

/// Correlates the four detector pairs of every setting and relabels them
/// into the 36-combination tensor.
pub fn assemble_tomogram(acquisitions: &[SettingAcquisition], window: i64, bin_width: i64) -> Result<TomogramCounts> {
    let per_setting: Result<Vec<SettingHistograms>> = acquisitions
        .par_iter()
        .map(|acq| {
            let mut hists = Vec::with_capacity(4);
            for (xx, x) in DETECTOR_PAIRS {
                hists.push(cross_correlate(&acq.tags, xx, x, window, bin_width)?);
            }
            Ok(SettingHistograms {
                basis_first: acq.basis_first,
                basis_second: acq.basis_second,
                histograms: hists.try_into().expect("four detector pairs"),
                exposure: acq.tags.count(Channel::Sync) as u64,
            })
        })
        .collect();
    tomogram_from_histograms(&per_setting?)
}

pub fn tomogram_from_histograms(settings: &[SettingHistograms]) -> Result<TomogramCounts> {
    let mut seen = [false; 9];
    let first = settings.first().ok_or_else(|| Error::MissingSettings("no settings".into()))?;
    let grid = &first.histograms[0];
    let mut tomo = TomogramCounts {
        start: grid.start,
        bin_width: grid.bin_width,
        counts: vec![[0; N_COMBOS]; grid.len()],
        exposures: [0; 9],
    };
    for s in settings {
        let slot = setting_slot(s.basis_first, s.basis_second)?;
        seen[slot] = true;
        tomo.exposures[slot] += s.exposure;
        for (hist, (a, b)) in s.histograms.iter().zip(outcome_labels(s.basis_first, s.basis_second)) {
            if !hist.same_grid(grid) {
                return Err(Error::InconsistentGrid(format!("setting {}-{}", s.basis_first, s.basis_second)));
            }
            let k = combination_index(a, b);
            for (row, &c) in tomo.counts.iter_mut().zip(&hist.counts) {
                row[k] += c;
            }
        }
    }
    let missing: Vec<String> = (0..9).filter(|&s| !seen[s]).map(setting_name).collect();
    if !missing.is_empty() {
        return Err(Error::MissingSettings(missing.join(", ")));
    }
    Ok(tomo)
}

/// Entanglement negativity per delay bin.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativitySeries {
    pub bin_width: f64,
    pub delay_centers: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub counts: Vec<u64>,
    pub low_statistics: Vec<bool>,
}

impl NegativitySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Count-weighted mean of the bins centred in `[lo, hi)` and its
    /// propagated uncertainty.
    pub fn weighted_mean(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let mut w_sum = 0.0;
        let mut acc = 0.0;
        let mut var = 0.0;
        for k in 0..self.len() {
            if (lo..hi).contains(&self.delay_centers[k]) {
                let w = self.counts[k] as f64;
                w_sum += w;
                acc += w * self.values[k];
                var += (w * self.errors[k]).powi(2);
            }
        }
        if w_sum == 0.0 {
            return Err(Error::EmptyWindow);
        }
        Ok((acc / w_sum, var.sqrt() / w_sum))
    }

    pub fn to_csv(&self) -> String {
        let low: Vec<String> =
            (0..self.len()).filter(|&k| self.low_statistics[k]).map(|k| format!("{}", self.delay_centers[k])).collect();
        let mut s = format!(
            "# bin_width_ps={}, low_statistics_delays_ps=[{}]\ndelay_ps,two_n,sigma\n",
            self.bin_width,
            low.join(" ")
        );
        for k in 0..self.len() {
            let _ = writeln!(s, "{},{},{}", self.delay_centers[k], self.values[k], self.errors[k]);
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Restrict to output bins centred in this range.
    pub range: Option<(f64, f64)>,
    pub mle: MleOptions,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { n_bootstrap: 100, seed: 1, range: None, mle: MleOptions::default() }
    }
}

fn row_to_f64(row: &[u64; N_COMBOS]) -> [f64; N_COMBOS] {
    row.map(|c| c as f64)
}

fn output_factor(tomo: &TomogramCounts, bin_width_out: i64) -> Result<usize> {
    if bin_width_out < tomo.bin_width || bin_width_out % tomo.bin_width != 0 {
        return Err(Error::InvalidArgument(format!(
            "output bin width {bin_width_out} ps is not a multiple of {} ps",
            tomo.bin_width
        )));
    }
    Ok((bin_width_out / tomo.bin_width) as usize)
}

/// Parametric bootstrap: Poisson replicas of the fitted expectations.
pub fn bootstrap_negativity(
    counts: &[f64; N_COMBOS],
    fit: &Reconstruction,
    n_replicas: usize,
    seed: u64,
    options: &MleOptions,
) -> Result<f64> {
    if n_replicas < 2 {
        return Ok(0.0);
    }
    let mut setting_total = [0.0; 9];
    for (k, c) in counts.iter().enumerate() {
        setting_total[crate::mle::setting_of(k)] += c;
    }
    let unit = expected_counts(&fit.rho, 1.0);
    let means: [f64; N_COMBOS] = std::array::from_fn(|k| unit[k] * setting_total[crate::mle::setting_of(k)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_replicas);
    for _ in 0..n_replicas {
        let replica: [f64; N_COMBOS] = std::array::from_fn(|k| match Poisson::new(means[k]) {
            Ok(p) if means[k] > 0.0 => p.sample(&mut rng),
            _ => 0.0,
        });
        match mle_reconstruct_from(&replica, fit, options) {
            Ok(r) => values.push(negativity2n(&r.rho)),
            Err(Error::EmptyWindow | Error::NonConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if values.len() < 2 {
        return Ok(f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn negativity_vs_delay(tomo: &TomogramCounts, bin_width_out: i64) -> Result<NegativitySeries> {
    negativity_vs_delay_with(tomo, bin_width_out, &SeriesOptions::default())
}

/// Reconstructs every non-empty output bin. Bins are independent and run in
/// parallel; bootstrap replicas are seeded by `(seed, bin)`.
pub fn negativity_vs_delay_with(
    tomo: &TomogramCounts,
    bin_width_out: i64,
    options: &SeriesOptions,
) -> Result<NegativitySeries> {
    let coarse = tomo.rebin(output_factor(tomo, bin_width_out)?)?;
    let bins: Vec<usize> = (0..coarse.n_bins())
        .filter(|&k| coarse.counts[k].iter().any(|&c| c > 0))
        .filter(|&k| options.range.is_none_or(|(lo, hi)| (lo..hi).contains(&coarse.bin_center(k))))
        .collect();
    let results: Result<Vec<(usize, f64, f64, u64, bool)>> = bins
        .par_iter()
        .map(|&k| {
            let counts = row_to_f64(&coarse.counts[k]);
            let fit = mle_reconstruct_with(&counts, &options.mle)?;
            let sigma = bootstrap_negativity(
                &counts,
                &fit,
                options.n_bootstrap,
                options.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                &options.mle,
            )?;
            Ok((k, negativity2n(&fit.rho), sigma, coarse.counts[k].iter().sum(), fit.low_statistics))
        })
        .collect();
    let mut series = NegativitySeries {
        bin_width: bin_width_out as f64,
        delay_centers: Vec::new(),
        values: Vec::new(),
        errors: Vec::new(),
        counts: Vec::new(),
        low_statistics: Vec::new(),
    };
    for (k, value, sigma, n, low) in results? {
        series.delay_centers.push(coarse.bin_center(k));
        series.values.push(value);
        series.errors.push(sigma);
        series.counts.push(n);
        series.low_statistics.push(low);
    }
    Ok(series)
}

/// One reconstruction from the counts summed over `[lo, hi)`.
pub fn window_average_matrix(tomo: &TomogramCounts, lo: f64, hi: f64) -> Result<Reconstruction> {
    mle_reconstruct_with(&tomo.window_counts(lo, hi)?, &MleOptions::default())
}

/// Average state over `[lo, hi)` in the frame co-rotating with the
/// precession: each output bin is reconstructed, the X photon is rotated by
/// `diag(1, e^{i omega t})` at the bin centre, and the results are mixed with
/// weights equal to the bin counts.
pub fn corotating_average_matrix(
    tomo: &TomogramCounts,
    lo: f64,
    hi: f64,
    bin_width_out: i64,
    precession_omega: f64,
) -> Result<DensityMatrix> {
    let coarse = tomo.rebin(output_factor(tomo, bin_width_out)?)?;
    let parts: Result<Vec<(f64, DensityMatrix)>> = (0..coarse.n_bins())
        .filter(|&k| (lo..hi).contains(&coarse.bin_center(k)))
        .filter(|&k| coarse.counts[k].iter().any(|&c| c > 0))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let counts = row_to_f64(&coarse.counts[k]);
            let fit = mle_reconstruct_with(&counts, &MleOptions::default())?;
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            let u_x = [[one, zero], [zero, Complex64::from_polar(1.0, precession_omega * coarse.bin_center(k))]];
            Ok((fit.total_counts, fit.rho.local_rotate(&[[one, zero], [zero, one]], &u_x)))
        })
        .collect();
    DensityMatrix::mixture(&parts?)
}

/// State expected at observed delay `t` for a maximally entangled cascade
/// seen through two-photon timing jitter and depolarizing projections of
/// the given accuracy.
pub fn model_density_matrix(t: f64, params: &CascadeParams, projection_accuracy: f64) -> Result<DensityMatrix> {
    model_state_from_coherence(coherence_at(t, params), projection_accuracy)
}

/// Model `2n` at observed delay `t`.
pub fn model_negativity(t: f64, params: &CascadeParams, projection_accuracy: f64) -> Result<f64> {
    Ok(negativity2n(&model_density_matrix(t, params, projection_accuracy)?))
}

/// Model `2n` of the counts pooled over `[lo, hi)`.
pub fn model_negativity_window(lo: f64, hi: f64, params: &CascadeParams, projection_accuracy: f64) -> Result<f64> {
    if !(hi > lo) {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let (rate, coh) = integrated_phasor(lo, hi, params);
    let c = if rate > 0.0 { coh / rate } else { Complex64::new(0.0, 0.0) };
    Ok(negativity2n(&model_state_from_coherence(c, projection_accuracy)?))
}

/// Model counterpart of [`corotating_average_matrix`] for bins of
/// `bin_width` starting at `lo`.
pub fn model_negativity_corotating(
    lo: f64,
    hi: f64,
    bin_width: f64,
    params: &CascadeParams,
    projection_accuracy: f64,
) -> Result<f64> {
    if !(hi > lo) || !(bin_width > 0.0) {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let omega = params.precession_omega();
    let (mut rate, mut coh) = (0.0, Complex64::new(0.0, 0.0));
    let mut start = lo;
    while start < hi {
        let end = (start + bin_width).min(hi);
        let (r, c) = integrated_phasor(start, end, params);
        rate += r;
        coh += c * Complex64::from_polar(1.0, -omega * 0.5 * (start + end));
        start = end;
    }
    let c = if rate > 0.0 { Complex64::new(coh.norm() / rate, 0.0) } else { Complex64::new(0.0, 0.0) };
    Ok(negativity2n(&model_state_from_coherence(c, projection_accuracy)?))
}

/// Simpson integrals of the pair rate and of the rate-weighted phasor.
fn integrated_phasor(lo: f64, hi: f64, params: &CascadeParams) -> (f64, Complex64) {
    let n = ((hi - lo).ceil() as usize).max(8) * 2;
    let h = (hi - lo) / n as f64;
    let (mut rate, mut coh) = (0.0, Complex64::new(0.0, 0.0));
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let (r, c) = rate_and_phasor(lo + i as f64 * h, params);
        rate += w * r;
        coh += w * c;
    }
    (rate * h / 3.0, coh * (h / 3.0))
}

/// Pair rate at observed delay `t` (up to a constant) and the same rate
/// weighted by the precession phasor `e^{i omega dtau}`.
fn rate_and_phasor(t: f64, params: &CascadeParams) -> (f64, Complex64) {
    let rate = 1.0 / params.t1_x;
    let omega = params.precession_omega();
    let sigma = params.sigma_2p();
    if sigma == 0.0 {
        if t < 0.0 {
            return (0.0, Complex64::new(0.0, 0.0));
        }
        let r = (-rate * t).exp();
        return (r, Complex64::from_polar(r, omega * t));
    }
    let flat = gauss_exp_convolution(Complex64::new(rate, 0.0), t, sigma).re;
    let rotating = gauss_exp_convolution(Complex64::new(rate, -omega), t, sigma);
    (flat, rotating)
}

fn coherence_at(t: f64, params: &CascadeParams) -> Complex64 {
    let (r, c) = rate_and_phasor(t, params);
    if r > 0.0 {
        c / r
    } else {
        // far before the pulse the conditional delay is pinned at zero
        Complex64::new(1.0, 0.0)
    }
}

fn model_state_from_coherence(c: Complex64, accuracy: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::InvalidArgument(format!("projection accuracy {accuracy} outside [0, 1]")));
    }
    let s2 = accuracy * accuracy;
    let mut m = Mat4::from_real_diag([0.25 * (1.0 + s2), 0.25 * (1.0 - s2), 0.25 * (1.0 - s2), 0.25 * (1.0 + s2)]);
    // the ket carries e^{-i omega dtau} on |VV>
    m.0[0][3] = 0.5 * s2 * c;
    m.0[3][0] = 0.5 * s2 * c.conj();
    DensityMatrix::new(m)
}

/// Coherence of jitter alone at long delays, `exp(-omega^2 sigma^2 / 2)`.
pub fn jitter_limited_plateau(params: &CascadeParams) -> f64 {
    let x = params.precession_omega() * params.sigma_2p();
    (-0.5 * x * x).exp()
}

/// Angle in radians the X state precesses over `delay` ps.
pub fn precession_angle(delay: f64, params: &CascadeParams) -> f64 {
    2.0 * PI * delay / params.precession_period()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::{combination, mle_reconstruct};
    use crate::state::{cascade_ket, density_from_ket};
    use PolarizationLabel::*;

    fn all_settings(tags: TimeTagStream) -> Vec<SettingAcquisition> {
        PolarizationLabel::SETTINGS
            .iter()
            .flat_map(|&a| PolarizationLabel::SETTINGS.map(|b| (a, b)))
            .map(|(a, b)| SettingAcquisition { basis_first: a, basis_second: b, tags: tags.clone() })
            .collect()
    }

    #[test]
    fn empty_streams_give_zero_tensor() {
        let tomo = assemble_tomogram(&all_settings(TimeTagStream::default()), 100, 4).unwrap();
        assert_eq!(tomo.total(), 0);
        assert_eq!(tomo.n_bins(), 51);
        assert!(matches!(window_average_matrix(&tomo, 0.0, 20.0), Err(Error::EmptyWindow)));
    }

    #[test]
    fn missing_setting_is_reported() {
        let mut acqs = all_settings(TimeTagStream::default());
        acqs.retain(|a| !(a.basis_first == D && a.basis_second == R));
        match assemble_tomogram(&acqs, 100, 4) {
            Err(Error::MissingSettings(s)) => assert_eq!(s, "D-R"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_grids_rejected() {
        let h = Histogram::symmetric(100, 4).unwrap();
        let g = Histogram::symmetric(100, 5).unwrap();
        let mut settings: Vec<SettingHistograms> = PolarizationLabel::SETTINGS
            .iter()
            .flat_map(|&a| PolarizationLabel::SETTINGS.map(|b| (a, b)))
            .map(|(a, b)| SettingHistograms {
                basis_first: a,
                basis_second: b,
                histograms: [h.clone(), h.clone(), h.clone(), h.clone()],
                exposure: 1,
            })
            .collect();
        settings[4].histograms[2] = g;
        assert!(matches!(tomogram_from_histograms(&settings), Err(Error::InconsistentGrid(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let mut tomo = TomogramCounts { start: -8, bin_width: 4, counts: vec![[0; N_COMBOS]; 4], exposures: [7; 9] };
        tomo.counts[1][5] = 3;
        tomo.counts[3][35] = 11;
        let text = tomo.to_csv();
        assert!(text.lines().nth(1).unwrap().starts_with("delay_ps,H-H,H-V,H-D"));
        assert_eq!(TomogramCounts::from_csv(&text).unwrap(), tomo);
    }

    #[test]
    fn corotating_model() {
        // without jitter only the phase spread inside each bin is lost; for an
        // exponential weight over one bin that is the |E[e^{i omega u}]| factor
        let bare = CascadeParams { jitter_1p_fwhm: 0.0, ..CascadeParams::measured() };
        let (w, g) = (bare.precession_omega(), 1.0 / bare.t1_x);
        let width = 32.0;
        let phasor = Complex64::new(g, 0.0) / Complex64::new(g, -w)
            * (Complex64::new(-(g * width), w * width).exp() - 1.0)
            / ((-(g * width)).exp() - 1.0);
        let expected = phasor.norm();
        let single = model_negativity_corotating(0.0, width, width, &bare, 1.0).unwrap();
        assert!((single - expected).abs() < 1e-6, "{single} vs {expected}");
        let p = CascadeParams::measured();
        let wide = model_negativity_corotating(0.0, 320.0, width, &p, 1.0).unwrap();
        assert!(wide < single && wide > jitter_limited_plateau(&p) - 0.05, "{wide}");
        assert!(wide > model_negativity_window(0.0, 320.0, &p, 1.0).unwrap());
        assert!(model_negativity_corotating(5.0, 5.0, 32.0, &p, 1.0).is_err());
    }

    #[test]
    fn single_bin_window_equals_per_bin_result() {
        let rho = density_from_ket(&cascade_ket(100.0, 5.79).unwrap()).unwrap();
        let counts = expected_counts(&rho, 400.0).map(|c| c.round() as u64);
        let tomo = TomogramCounts { start: 0, bin_width: 4, counts: vec![counts, [0; N_COMBOS]], exposures: [1; 9] };
        let a = window_average_matrix(&tomo, 0.0, 4.0).unwrap();
        let b = mle_reconstruct(&row_to_f64(&counts)).unwrap();
        assert!(a.rho.matrix().max_abs_diff(b.rho.matrix()) < 1e-9);
    }

    #[test]
    fn series_on_born_counts() {
        // delay-resolved counts of the ideal cascade
        let params = CascadeParams { jitter_1p_fwhm: 0.0, ..CascadeParams::measured() };
        let rows: Vec<[u64; N_COMBOS]> = (0..20)
            .map(|k| {
                let rho = density_from_ket(&cascade_ket(16.0 * k as f64 + 8.0, params.fss).unwrap()).unwrap();
                expected_counts(&rho, 2000.0).map(|c| c.round() as u64)
            })
            .collect();
        let tomo = TomogramCounts { start: 0, bin_width: 16, counts: rows, exposures: [1; 9] };
        let opts = SeriesOptions { n_bootstrap: 20, ..Default::default() };
        let series = negativity_vs_delay_with(&tomo, 16, &opts).unwrap();
        assert_eq!(series.len(), 20);
        for (v, e) in series.values.iter().zip(&series.errors) {
            assert!(*v > 0.97, "{v}");
            assert!(*e >= 0.0 && *e < 0.05);
        }
        assert!(negativity_vs_delay(&tomo, 24).is_err());
        // co-rotating average of pure cascade states stays maximally entangled
        let avg = corotating_average_matrix(&tomo, 0.0, 320.0, 16, params.precession_omega()).unwrap();
        assert!(negativity2n(&avg) > 0.97);
    }

    #[test]
    fn model_limits() {
        let ideal = CascadeParams { jitter_1p_fwhm: 0.0, ..CascadeParams::measured() };
        for t in [0.0, 100.0, 700.0] {
            assert!((model_negativity(t, &ideal, 1.0).unwrap() - 1.0).abs() < 1e-9);
        }
        let p = CascadeParams::measured();
        let plateau = jitter_limited_plateau(&p);
        assert!((model_negativity(3.0 * p.t1_x, &p, 1.0).unwrap() - plateau).abs() < 1e-6);
        // Bloch shrink s on both photons: 2n = s^2 |c| - (1 - s^2)/2
        let s2 = 0.96f64 * 0.96;
        let expect = s2 * plateau - 0.5 * (1.0 - s2);
        assert!((model_negativity(3.0 * p.t1_x, &p, 0.96).unwrap() - expect).abs() < 1e-6);
        let early = model_negativity(-100.0, &p, 1.0).unwrap();
        assert!(early > model_negativity(0.0, &p, 1.0).unwrap());
        // a narrow window matches the point value
        let w = model_negativity_window(400.0, 404.0, &p, 1.0).unwrap();
        assert!((w - model_negativity(402.0, &p, 1.0).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn model_state_matches_projection_counts() {
        // the model matrix reproduces the closed-form coincidence ratios
        let p = CascadeParams::measured();
        let t = 250.0;
        let rho = model_density_matrix(t, &p, 1.0).unwrap();
        let rates = expected_counts(&rho, 1.0);
        for k in 0..N_COMBOS {
            let (a, b) = combination(k);
            let direct = crate::model::model_coincidence(a.coords(), b.coords(), t, &p);
            let norm: f64 = [(H, H), (H, V), (V, H), (V, V)]
                .iter()
                .map(|(x, y)| crate::model::model_coincidence(x.coords(), y.coords(), t, &p))
                .sum();
            assert!((rates[k] - direct / norm).abs() < 1e-9, "{}", combination_label(k));
        }
    }
}
