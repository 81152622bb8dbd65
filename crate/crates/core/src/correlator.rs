//! Coincidence histograms from time-tag streams.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{Channel, TimeTagStream};

/// Uniform histogram; bin `k` covers `[start + k w, start + (k + 1) w)` ps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub bin_width: i64,
    pub start: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn zeros(start: i64, bin_width: i64, n_bins: usize) -> Result<Self> {
        if bin_width < 1 {
            return Err(Error::InvalidArgument(format!("bin width {bin_width} ps < 1 ps")));
        }
        if n_bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        Ok(Self { bin_width, start, counts: vec![0; n_bins] })
    }

    /// Bins covering `[-window, window]` with `0` on a bin edge.
    pub fn symmetric(window: i64, bin_width: i64) -> Result<Self> {
        if bin_width < 1 {
            return Err(Error::InvalidArgument(format!("bin width {bin_width} ps < 1 ps")));
        }
        if window < bin_width {
            return Err(Error::InvalidArgument(format!("window {window} ps narrower than bin width {bin_width} ps")));
        }
        let n_bins = (2 * window / bin_width + 1) as usize;
        Self::zeros(-window, bin_width, n_bins)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, k: usize) -> i64 {
        self.start + k as i64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) as f64 + 0.5 * self.bin_width as f64
    }

    pub fn end(&self) -> i64 {
        self.bin_start(self.counts.len())
    }

    pub fn bin_index(&self, delay: i64) -> Option<usize> {
        let k = (delay - self.start).div_euclid(self.bin_width);
        (0..self.counts.len() as i64).contains(&k).then_some(k as usize)
    }

    pub fn add(&mut self, delay: i64) {
        if let Some(k) = self.bin_index(delay) {
            self.counts[k] += 1;
        }
    }

    /// Merges `factor` adjacent bins; a partial trailing group becomes one bin.
    pub fn rebin(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("rebin factor must be positive".into()));
        }
        let counts = self.counts.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(Self { bin_width: self.bin_width * factor as i64, start: self.start, counts })
    }

    pub fn same_grid(&self, other: &Histogram) -> bool {
        self.bin_width == other.bin_width && self.start == other.start && self.len() == other.len()
    }

    pub fn accumulate(&mut self, other: &Histogram) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::InconsistentGrid(format!(
                "({}, {}, {}) vs ({}, {}, {})",
                self.start,
                self.bin_width,
                self.len(),
                other.start,
                other.bin_width,
                other.len()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Sum of the bins whose centers fall in `[lo, hi)`.
    pub fn integrate(&self, lo: f64, hi: f64) -> u64 {
        (0..self.len()).filter(|&k| (lo..hi).contains(&self.bin_center(k))).map(|k| self.counts[k]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# bin_width_ps={}, start_ps={}\nbin_start_ps,count\n", self.bin_width, self.start);
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.bin_start(k), c);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut bin_width = None;
        for line in text.lines().map(str::trim) {
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split(',') {
                    if let Some((k, v)) = field.split_once('=') {
                        if k.trim() == "bin_width_ps" {
                            bin_width = Some(parse_i64(v)?);
                        }
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with("bin_start") {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad histogram row {line:?}")))?;
            let count = b.trim().parse::<u64>().map_err(|e| Error::Parse(format!("{line:?}: {e}")))?;
            rows.push((parse_i64(a)?, count));
        }
        let (start, _) = *rows.first().ok_or_else(|| Error::Parse("empty histogram".into()))?;
        let bin_width = match bin_width {
            Some(w) => w,
            None if rows.len() > 1 => rows[1].0 - rows[0].0,
            None => return Err(Error::Parse("bin width missing".into())),
        };
        let mut h = Self::zeros(start, bin_width, rows.len())?;
        for (k, (t, c)) in rows.into_iter().enumerate() {
            if t != h.bin_start(k) {
                return Err(Error::InconsistentGrid(format!("row {k} starts at {t} ps")));
            }
            h.counts[k] = c;
        }
        Ok(h)
    }
}

fn parse_i64(s: &str) -> Result<i64> {
    s.trim().parse::<i64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Histogram of `t_b - t_a` over all pairs with `|t_b - t_a| <= window`.
///
/// With `ch_a == ch_b` every unordered pair of distinct records is counted in
/// both orders, so the result is symmetric.
pub fn cross_correlate(
    tags: &TimeTagStream,
    ch_a: Channel,
    ch_b: Channel,
    window: i64,
    bin_width: i64,
) -> Result<Histogram> {
    let mut hist = Histogram::symmetric(window, bin_width)?;
    let mut recent_a: VecDeque<i64> = VecDeque::new();
    let mut recent_b: VecDeque<i64> = VecDeque::new();
    let expire = |buf: &mut VecDeque<i64>, t: i64| {
        while buf.front().is_some_and(|&old| t - old > window) {
            buf.pop_front();
        }
    };
    for r in tags.records() {
        let t = r.timestamp;
        if ch_a == ch_b {
            if r.channel != ch_a {
                continue;
            }
            expire(&mut recent_a, t);
            for &old in &recent_a {
                hist.add(t - old);
                hist.add(old - t);
            }
            recent_a.push_back(t);
        } else if r.channel == ch_a {
            expire(&mut recent_b, t);
            for &tb in &recent_b {
                hist.add(tb - t);
            }
            recent_a.push_back(t);
        } else if r.channel == ch_b {
            expire(&mut recent_a, t);
            for &ta in &recent_a {
                hist.add(t - ta);
            }
            recent_b.push_back(t);
        }
    }
    Ok(hist)
}

/// Arrival times of `ch` relative to the preceding SYNC, folded into
/// `[0, rep_period)`. Events before the first SYNC are dropped.
pub fn sync_histogram(tags: &TimeTagStream, ch: Channel, rep_period: f64, bin_width: i64) -> Result<Histogram> {
    if !(rep_period > 0.0) {
        return Err(Error::InvalidArgument("rep_period must be positive".into()));
    }
    let n_bins = (rep_period / bin_width.max(1) as f64).ceil() as usize;
    let mut hist = Histogram::zeros(0, bin_width, n_bins)?;
    let mut last_sync = None;
    for r in tags.records() {
        if r.channel == Channel::Sync {
            last_sync = Some(r.timestamp);
        } else if r.channel == ch {
            if let Some(ts) = last_sync {
                let folded = ((r.timestamp - ts) as f64).rem_euclid(rep_period);
                let k = ((folded / bin_width as f64).floor() as usize).min(n_bins - 1);
                hist.counts[k] += 1;
            }
        }
    }
    if last_sync.is_none() {
        return Err(Error::NoSync);
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Estimate {
    pub value: f64,
    pub sigma: f64,
    pub central_counts: u64,
    pub mean_side_counts: f64,
}

/// Pulsed `g2(0)`: central-peak area over the mean of `n_side_peaks` side
/// peaks on each side, each integrated over one full period centred on the
/// peak.
pub fn g2_pulsed(hist: &Histogram, rep_period: f64, n_side_peaks: usize) -> Result<G2Estimate> {
    g2_pulsed_window(hist, rep_period, n_side_peaks, rep_period)
}

/// As [`g2_pulsed`] with an integration window of `window` ps per peak.
pub fn g2_pulsed_window(hist: &Histogram, rep_period: f64, n_side_peaks: usize, window: f64) -> Result<G2Estimate> {
    if n_side_peaks == 0 {
        return Err(Error::InvalidArgument("need at least one side peak per side".into()));
    }
    if !(window > 0.0 && window <= rep_period) {
        return Err(Error::InvalidArgument(format!("integration window {window} outside (0, {rep_period}]")));
    }
    let reach = n_side_peaks as f64 * rep_period + 0.5 * window;
    if (hist.start as f64) > -reach + 0.5 || (hist.end() as f64) < reach - 0.5 {
        return Err(Error::InvalidArgument(format!(
            "histogram [{}, {}) ps does not span {n_side_peaks} side peaks",
            hist.start,
            hist.end()
        )));
    }
    let peak = |k: f64| hist.integrate(k * rep_period - 0.5 * window, k * rep_period + 0.5 * window);
    let central = peak(0.0);
    let mut side_total = 0u64;
    for k in 1..=n_side_peaks {
        side_total += peak(k as f64) + peak(-(k as f64));
    }
    if side_total == 0 {
        return Err(Error::ZeroSideCounts);
    }
    let n_side = 2 * n_side_peaks;
    let mean_side = side_total as f64 / n_side as f64;
    let value = central as f64 / mean_side;
    // Poisson errors on the central area and the side sum
    let rel_sq = if central > 0 { 1.0 / central as f64 } else { 0.0 } + 1.0 / side_total as f64;
    let sigma = if central > 0 { value * rel_sq.sqrt() } else { 1.0 / mean_side };
    Ok(G2Estimate { value, sigma, central_counts: central, mean_side_counts: mean_side })
}
