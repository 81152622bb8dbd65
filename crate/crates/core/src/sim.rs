//! Monte Carlo generation of time-tagged detection events.
//!
//! Each laser pulse emits a SYNC record and, with probability `prep_prob`,
//! one XX–X cascade. The pair is projected by two polarization units (a
//! transmitted and a reflected detector behind each), thinned by detection
//! efficiency and smeared by per-detector Gaussian jitter. Dark counts are a
//! homogeneous Poisson process per detector.
//!
//! Randomness is keyed by `(seed, block)` where a block is a fixed run of
//! consecutive pulses, so blocks are generated in parallel and the result
//! does not depend on the thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CascadeParams;
use crate::poincare::{pair_ket, pair_projector, PolarizationLabel};
use crate::state::{cascade_ket, density_from_ket};

/// Pulses per RNG block.
pub const BLOCK_PULSES: u64 = 1 << 14;

/// Detector channel. Codes 0–4 are the on-disk channel codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    XxT = 0,
    XxR = 1,
    XT = 2,
    XR = 3,
    Sync = 4,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Self::XxT, Self::XxR, Self::XT, Self::XR, Self::Sync];
    pub const DETECTORS: [Channel; 4] = [Self::XxT, Self::XxR, Self::XT, Self::XR];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL.get(code as usize).copied().ok_or_else(|| Error::Parse(format!("invalid channel code {code}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::XxT => "XX_T",
            Self::XxR => "XX_R",
            Self::XT => "X_T",
            Self::XR => "X_R",
            Self::Sync => "SYNC",
        }
    }

    /// Detector for a photon of the given arm and port.
    pub fn detector(xx_photon: bool, transmitted: bool) -> Self {
        match (xx_photon, transmitted) {
            (true, true) => Self::XxT,
            (true, false) => Self::XxR,
            (false, true) => Self::XT,
            (false, false) => Self::XR,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown channel {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeTag {
    pub timestamp: i64,
    pub channel: Channel,
}

impl TimeTag {
    fn sort_key(&self) -> (i64, bool, Channel) {
        (self.timestamp, self.channel != Channel::Sync, self.channel)
    }
}

/// Time order; at equal timestamps SYNC comes first so that a detection
/// coinciding with a sync belongs to the period that sync opens.
impl Ord for TimeTag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for TimeTag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Detection records ordered by timestamp.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimeTagStream {
    records: Vec<TimeTag>,
}

impl TimeTagStream {
    /// Sorts the records into time order.
    pub fn from_unsorted(mut records: Vec<TimeTag>) -> Self {
        records.sort();
        Self { records }
    }

    pub fn from_sorted(records: Vec<TimeTag>) -> Result<Self> {
        if let Some(w) = records.windows(2).find(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::Parse(format!("timestamps decrease: {} after {}", w[1].timestamp, w[0].timestamp)));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TimeTag] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }

    /// Photon detections on the four detectors.
    pub fn detections(&self) -> usize {
        self.records.iter().filter(|r| r.channel != Channel::Sync).count()
    }

    pub fn timestamps(&self, channel: Channel) -> Vec<i64> {
        self.records.iter().filter(|r| r.channel == channel).map(|r| r.timestamp).collect()
    }
}

/// Excitation, projection and detector settings of one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Laser period in ps.
    pub rep_period: f64,
    pub n_pulses: u64,
    pub eta_xx: f64,
    pub eta_x: f64,
    /// Probability that a pulse prepares the biexciton.
    pub prep_prob: f64,
    /// Dark counts per detector, Hz.
    pub dark_rate: f64,
    /// Probability that a projection follows the ideal Born statistics;
    /// otherwise the port is a fair coin.
    pub projection_accuracy: f64,
    pub basis_first: PolarizationLabel,
    pub basis_second: PolarizationLabel,
    pub seed: u64,
    /// Probability that a prepared pulse re-excites and emits a second cascade.
    pub reexcite_prob: f64,
    /// Delay between a SYNC record and the excitation pulse at the emitter, ps.
    pub sync_delay: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            rep_period: 13157.9,
            n_pulses: 1_000_000,
            eta_xx: 0.0026,
            eta_x: 0.0026,
            prep_prob: 1.0,
            dark_rate: 0.0,
            projection_accuracy: 1.0,
            basis_first: PolarizationLabel::H,
            basis_second: PolarizationLabel::H,
            seed: 0,
            reexcite_prob: 0.0,
            sync_delay: 1000.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("eta_xx", self.eta_xx),
            ("eta_x", self.eta_x),
            ("prep_prob", self.prep_prob),
            ("projection_accuracy", self.projection_accuracy),
            ("reexcite_prob", self.reexcite_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.rep_period > 0.0) {
            return Err(Error::InvalidArgument("rep_period must be positive".into()));
        }
        if !(self.dark_rate >= 0.0) {
            return Err(Error::InvalidArgument("dark_rate must be non-negative".into()));
        }
        if !self.sync_delay.is_finite() {
            return Err(Error::InvalidArgument("sync_delay must be finite".into()));
        }
        Ok(())
    }

    /// Expected detected photons per pulse on all four detectors, ignoring
    /// dark counts.
    pub fn expected_yield(&self) -> f64 {
        self.prep_prob * (1.0 + self.reexcite_prob) * (self.eta_xx + self.eta_x)
    }

    pub fn pulse_time(&self, index: u64) -> i64 {
        (index as f64 * self.rep_period).round() as i64
    }
}

/// Detector-pair outcome probabilities `(T,T), (T,R), (R,T), (R,R)` for the
/// cascade state at `delta_tau`, projected on `basis_first ⊗ basis_second`.
pub fn born_probabilities(
    delta_tau: f64,
    params: &CascadeParams,
    basis_first: PolarizationLabel,
    basis_second: PolarizationLabel,
) -> Result<[f64; 4]> {
    let rho = density_from_ket(&cascade_ket(delta_tau, params.fss)?)?;
    let mut out = [0.0; 4];
    for (k, (a, b)) in outcome_labels(basis_first, basis_second).into_iter().enumerate() {
        out[k] = rho.matrix().trace_product(&pair_projector(a.coords(), b.coords())).re.max(0.0);
    }
    Ok(out)
}

/// Labels reached by the `(T,T), (T,R), (R,T), (R,R)` detector pairs.
pub fn outcome_labels(
    first: PolarizationLabel,
    second: PolarizationLabel,
) -> [(PolarizationLabel, PolarizationLabel); 4] {
    [
        (first, second),
        (first, second.orthogonal()),
        (first.orthogonal(), second),
        (first.orthogonal(), second.orthogonal()),
    ]
}

struct Sampler {
    xx_decay: Exp<f64>,
    x_decay: Exp<f64>,
    jitter: Option<Normal<f64>>,
    pair_kets: [[num_complex::Complex64; 4]; 4],
}

impl Sampler {
    fn new(params: &CascadeParams, config: &DetectionConfig) -> Result<Self> {
        let bad = |e: rand_distr::ExpError| Error::InvalidArgument(e.to_string());
        let sigma = params.sigma_1p();
        let pair_kets =
            outcome_labels(config.basis_first, config.basis_second).map(|(a, b)| pair_ket(&a.ket(), &b.ket()));
        Ok(Self {
            xx_decay: Exp::new(1.0 / params.t1_xx).map_err(bad)?,
            x_decay: Exp::new(1.0 / params.t1_x).map_err(bad)?,
            jitter: if sigma > 0.0 {
                Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?)
            } else {
                None
            },
            pair_kets,
        })
    }

    fn stamp(&self, rng: &mut ChaCha8Rng, t: f64) -> i64 {
        let jitter = self.jitter.map_or(0.0, |n| n.sample(rng));
        (t + jitter).round() as i64
    }

    fn cascade(
        &self,
        rng: &mut ChaCha8Rng,
        t0: f64,
        params: &CascadeParams,
        config: &DetectionConfig,
        out: &mut Vec<TimeTag>,
    ) -> Result<()> {
        let t_xx = t0 + self.xx_decay.sample(rng);
        let delta_tau = self.x_decay.sample(rng);
        let psi = cascade_ket(delta_tau, params.fss)?;

        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = 3;
        for (k, ket) in self.pair_kets.iter().enumerate() {
            acc += psi.overlap(ket).norm_sqr();
            if u < acc {
                outcome = k;
                break;
            }
        }
        let mut xx_transmitted = outcome < 2;
        let mut x_transmitted = outcome % 2 == 0;
        if config.projection_accuracy < 1.0 {
            if rng.random::<f64>() >= config.projection_accuracy {
                xx_transmitted = rng.random::<bool>();
            }
            if rng.random::<f64>() >= config.projection_accuracy {
                x_transmitted = rng.random::<bool>();
            }
        }
        if rng.random::<f64>() < config.eta_xx {
            let t = self.stamp(rng, t_xx);
            out.push(TimeTag { timestamp: t, channel: Channel::detector(true, xx_transmitted) });
        }
        if rng.random::<f64>() < config.eta_x {
            let t = self.stamp(rng, t_xx + delta_tau);
            out.push(TimeTag { timestamp: t, channel: Channel::detector(false, x_transmitted) });
        }
        Ok(())
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn dark_counts(rng: &mut ChaCha8Rng, rate_hz: f64, start_ps: f64, end_ps: f64, out: &mut Vec<TimeTag>) -> Result<()> {
    if rate_hz <= 0.0 || end_ps <= start_ps {
        return Ok(());
    }
    let mean = rate_hz * 1e-12 * (end_ps - start_ps);
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for channel in Channel::DETECTORS {
        let n = poisson.sample(rng) as u64;
        for _ in 0..n {
            let t = rng.random_range(start_ps..end_ps);
            out.push(TimeTag { timestamp: t.floor() as i64, channel });
        }
    }
    Ok(())
}

fn merge_blocks(blocks: Vec<Vec<TimeTag>>) -> TimeTagStream {
    // each block is sorted; the stable sort merges the runs
    let mut records: Vec<TimeTag> = blocks.into_iter().flatten().collect();
    records.sort();
    TimeTagStream { records }
}

fn run_blocks<F>(n_pulses: u64, f: F) -> Result<TimeTagStream>
where
    F: Fn(u64, u64, u64) -> Result<Vec<TimeTag>> + Sync,
{
    let n_blocks = n_pulses.div_ceil(BLOCK_PULSES);
    let blocks: Result<Vec<Vec<TimeTag>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let first = b * BLOCK_PULSES;
            let last = (first + BLOCK_PULSES).min(n_pulses);
            let mut v = f(b, first, last)?;
            v.sort();
            Ok(v)
        })
        .collect();
    Ok(merge_blocks(blocks?))
}

/// Time tags of one acquisition with fixed projection settings.
pub fn simulate(params: &CascadeParams, config: &DetectionConfig) -> Result<TimeTagStream> {
    params.validate()?;
    config.validate()?;
    let sampler = Sampler::new(params, config)?;
    run_blocks(config.n_pulses, |block, first, last| {
        let mut rng = block_rng(config.seed, block);
        let mut out = Vec::with_capacity(((last - first) as f64 * (1.0 + 2.0 * config.expected_yield())) as usize + 16);
        for pulse in first..last {
            let t_sync = config.pulse_time(pulse);
            out.push(TimeTag { timestamp: t_sync, channel: Channel::Sync });
            if rng.random::<f64>() < config.prep_prob {
                let t0 = t_sync as f64 + config.sync_delay;
                sampler.cascade(&mut rng, t0, params, config, &mut out)?;
                if config.reexcite_prob > 0.0 && rng.random::<f64>() < config.reexcite_prob {
                    sampler.cascade(&mut rng, t0, params, config, &mut out)?;
                }
            }
        }
        let start = first as f64 * config.rep_period;
        let end = last as f64 * config.rep_period;
        dark_counts(&mut rng, config.dark_rate, start, end, &mut out)?;
        Ok(out)
    })
}

/// Re-excitation probability giving a target pulsed `g2(0)` of the XX
/// emission at preparation probability `prep_prob`.
///
/// Photon number per pulse is 0, 1 or 2 with `p1 = q(1 - e)`, `p2 = q e`, so
/// `g2 = 2 p2 / (p1 + 2 p2)^2 = 2 e / (q (1 + e)^2)`.
pub fn reexcite_prob_for_g2(g2: f64, prep_prob: f64) -> Result<f64> {
    if !(g2 >= 0.0) || !(prep_prob > 0.0) {
        return Err(Error::InvalidArgument("g2 >= 0 and prep_prob > 0 required".into()));
    }
    // q g2 (1 + e)^2 = 2 e  ->  k e^2 + (2k - 2) e + k = 0 with k = q g2
    let k = prep_prob * g2;
    if k == 0.0 {
        return Ok(0.0);
    }
    let b = 2.0 * k - 2.0;
    let disc = b * b - 4.0 * k * k;
    if disc < 0.0 {
        return Err(Error::InvalidArgument(format!("g2 = {g2} unreachable at prep_prob = {prep_prob}")));
    }
    let e = (-b - disc.sqrt()) / (2.0 * k);
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidArgument(format!("g2 = {g2} unreachable at prep_prob = {prep_prob}")));
    }
    Ok(e)
}

/// Attenuated-laser reference: Poisson photon numbers split 50:50 onto the
/// `XX_T` and `XX_R` detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentConfig {
    pub rep_period: f64,
    pub n_pulses: u64,
    /// Mean detected photons per pulse summed over both detectors.
    pub mean_detected: f64,
    pub jitter_fwhm: f64,
    pub seed: u64,
}

pub fn simulate_coherent(config: &CoherentConfig) -> Result<TimeTagStream> {
    if !(config.mean_detected >= 0.0) || !(config.rep_period > 0.0) {
        return Err(Error::InvalidArgument("invalid coherent source configuration".into()));
    }
    let half = 0.5 * config.mean_detected;
    let sigma = crate::model::fwhm_to_sigma(config.jitter_fwhm);
    run_blocks(config.n_pulses, |block, first, last| {
        let mut rng = block_rng(config.seed, block);
        let poisson = if half > 0.0 {
            Some(Poisson::new(half).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        } else {
            None
        };
        let jitter = Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut out = Vec::new();
        for pulse in first..last {
            let t = (pulse as f64 * config.rep_period).round() as i64;
            out.push(TimeTag { timestamp: t, channel: Channel::Sync });
            let Some(poisson) = poisson else { continue };
            for channel in [Channel::XxT, Channel::XxR] {
                let n = poisson.sample(&mut rng) as u64;
                for _ in 0..n {
                    let dt = jitter.sample(&mut rng);
                    out.push(TimeTag { timestamp: t + dt.round() as i64, channel });
                }
            }
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PolarizationLabel::*;

    fn small_config() -> DetectionConfig {
        DetectionConfig { n_pulses: 50_000, eta_xx: 0.5, eta_x: 0.5, seed: 11, ..Default::default() }
    }

    #[test]
    fn born_probabilities_examples() {
        let params = CascadeParams::measured();
        let p = born_probabilities(0.0, &params, H, H).unwrap();
        for (a, b) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = born_probabilities(0.0, &params, D, D).unwrap();
        for (a, b) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        let quarter = 0.25 * params.precession_period();
        let p = born_probabilities(quarter, &params, R, R).unwrap();
        for a in p {
            assert!((a - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn born_probabilities_sum_to_one() {
        let params = CascadeParams::measured();
        for i in PolarizationLabel::ALL {
            for j in PolarizationLabel::ALL {
                for dt in [0.0, 77.0, 512.0] {
                    let s: f64 = born_probabilities(dt, &params, i, j).unwrap().iter().sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampler_probabilities_match_projector_route() {
        let params = CascadeParams::measured();
        let config = DetectionConfig { basis_first: R, basis_second: D, ..Default::default() };
        let sampler = Sampler::new(&params, &config).unwrap();
        let dt = 333.0;
        let psi = cascade_ket(dt, params.fss).unwrap();
        let reference = born_probabilities(dt, &params, R, D).unwrap();
        for (ket, p) in sampler.pair_kets.iter().zip(reference) {
            assert!((psi.overlap(ket).norm_sqr() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn no_efficiency_only_sync() {
        let config = DetectionConfig { n_pulses: 40_000, eta_xx: 0.0, eta_x: 0.0, ..small_config() };
        let tags = simulate(&CascadeParams::measured(), &config).unwrap();
        assert_eq!(tags.len(), 40_000);
        assert_eq!(tags.count(Channel::Sync), 40_000);
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let params = CascadeParams::measured();
        let a = simulate(&params, &small_config()).unwrap();
        let b = simulate(&params, &small_config()).unwrap();
        assert_eq!(a, b);
        let c = simulate(&params, &DetectionConfig { seed: 12, ..small_config() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stream_is_sorted_with_exact_sync_count() {
        let config = DetectionConfig { dark_rate: 5e4, ..small_config() };
        let tags = simulate(&CascadeParams::measured(), &config).unwrap();
        assert!(tags.records().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(tags.count(Channel::Sync) as u64, config.n_pulses);
    }

    #[test]
    fn detection_yield_matches_efficiencies() {
        let config = DetectionConfig { n_pulses: 200_000, prep_prob: 0.4, eta_xx: 0.3, eta_x: 0.2, ..small_config() };
        let tags = simulate(&CascadeParams::measured(), &config).unwrap();
        let expected = config.n_pulses as f64 * config.expected_yield();
        let got = tags.detections() as f64;
        assert!((got - expected).abs() < 5.0 * expected.sqrt(), "{got} vs {expected}");
    }

    #[test]
    fn dark_count_rate() {
        let config = DetectionConfig { eta_xx: 0.0, eta_x: 0.0, dark_rate: 1e5, n_pulses: 100_000, ..small_config() };
        let tags = simulate(&CascadeParams::measured(), &config).unwrap();
        let duration_s = config.n_pulses as f64 * config.rep_period * 1e-12;
        let expected = 4.0 * 1e5 * duration_s;
        let got = tags.detections() as f64;
        assert!((got - expected).abs() < 5.0 * expected.sqrt());
    }

    #[test]
    fn reexcitation_inversion() {
        let e = reexcite_prob_for_g2(0.008, 1.0).unwrap();
        let g2 = 2.0 * e / (1.0 + e).powi(2);
        assert!((g2 - 0.008).abs() < 1e-12);
        assert_eq!(reexcite_prob_for_g2(0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn channel_codes_roundtrip() {
        for c in Channel::ALL {
            assert_eq!(Channel::from_code(c.code()).unwrap(), c);
            assert_eq!(c.label().parse::<Channel>().unwrap(), c);
        }
        assert!(Channel::from_code(5).is_err());
    }
}
