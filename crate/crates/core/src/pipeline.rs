//! File-to-file commands behind the `qd-cascade` binary. Each command reads
//! its inputs from the resolved [`RunConfig`], writes artifacts into
//! `output_dir` and returns the summary lines it printed into them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::{parse_setting, RunConfig};
use crate::correlator::{cross_correlate, g2_pulsed_window, sync_histogram, Histogram};
use crate::error::{Error, Result};
use crate::fit::{self, FitResult, FssSample, LifetimeKind};
use crate::hyper::{HyperspectralCube, Map2D};
use crate::mle::{combination, combination_label, mle_reconstruct, setting_of, N_COMBOS};
use crate::model::{model_coincidence, theory_coincidence, CascadeParams};
use crate::sim::{simulate, Channel};
use crate::state::{DensityMatrix, DensityMatrixDocument};
use crate::tagfile;
use crate::tomography::{
    assemble_tomogram, corotating_average_matrix, jitter_limited_plateau, model_negativity_corotating,
    model_negativity_window, negativity_vs_delay_with, window_average_matrix, SeriesOptions, SettingAcquisition,
    TomogramCounts,
};

pub const TOOL: &str = "qd-cascade";

/// Header stamped on every text artifact.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub unix_time: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig, deterministic: bool) -> Self {
        let unix_time =
            (!deterministic).then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Self { command: command.to_string(), config_hash: config.hash(), unix_time }
    }

    pub fn header(&self) -> String {
        let mut s = format!("# {TOOL} {}\n# config_hash={}\n", self.command, self.config_hash);
        if let Some(t) = self.unix_time {
            let _ = writeln!(s, "# generated_unix_s={t}");
        }
        s
    }
}

/// Files written and summary lines of one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

struct Writer<'a> {
    dir: PathBuf,
    provenance: &'a Provenance,
    outcome: Outcome,
}

impl<'a> Writer<'a> {
    fn new(config: &RunConfig, provenance: &'a Provenance) -> Result<Self> {
        let dir = config.output_dir();
        fs::create_dir_all(&dir)?;
        let mut w = Self { dir, provenance, outcome: Outcome::default() };
        w.raw("config.txt", &config.to_text())?;
        Ok(w)
    }

    fn raw(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{}{body}", self.provenance.header()))?;
        self.outcome.files.push(path.clone());
        Ok(path)
    }

    fn json(&mut self, name: &str, mut doc: DensityMatrixDocument) -> Result<()> {
        doc.config_hash = Some(self.provenance.config_hash.clone());
        let path = self.dir.join(name);
        fs::write(&path, doc.to_json()?)?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn line(&mut self, text: String) {
        self.outcome.lines.push(text);
    }

    fn finish(mut self, summary_name: Option<&str>) -> Result<Outcome> {
        if let Some(name) = summary_name {
            let body: String = self.outcome.lines.iter().map(|l| format!("{l}\n")).collect();
            self.raw(name, &body)?;
        }
        Ok(self.outcome)
    }
}

fn tag_file_name(first: impl std::fmt::Display, second: impl std::fmt::Display) -> String {
    format!("tags_{first}-{second}.qtt")
}

/// One QTT1 file per requested setting, plus a manifest.
pub fn cmd_simulate(config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let params = config.cascade()?;
    let mut w = Writer::new(config, provenance)?;
    let mut manifest = String::from("setting,file,records,xx_t,xx_r,x_t,x_r,sync\n");
    for setting in config.settings() {
        let detection = config.detection(setting)?;
        let tags = simulate(&params, &detection)?;
        let name = tag_file_name(setting.0, setting.1);
        let path = w.dir.join(&name);
        tagfile::save(&tags, &path)?;
        let counts = Channel::ALL.map(|c| tags.count(c));
        let _ = writeln!(
            manifest,
            "{}-{},{name},{},{},{},{},{},{}",
            setting.0,
            setting.1,
            tags.len(),
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            counts[4]
        );
        w.line(format!("{}-{}: {} records → {name}", setting.0, setting.1, tags.len()));
        w.outcome.files.push(path);
    }
    w.raw("simulate.csv", &manifest)?;
    w.finish(None)
}

fn single_input(config: &RunConfig) -> Result<PathBuf> {
    match config.inputs().as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Error::InvalidArgument("no input given (set --input)".into())),
        many => Err(Error::InvalidArgument(format!("expected one input, got {}", many.len()))),
    }
}

/// Cross-correlation of `channel_a` and `channel_b`, or a decay histogram
/// against the laser when `channel_a` is SYNC.
pub fn cmd_correlate(config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let tags = tagfile::load(&single_input(config)?)?;
    if tags.is_empty() {
        return Err(Error::InvalidArgument("input stream has no records".into()));
    }
    let (a, b) = (config.channel("channel_a"), config.channel("channel_b"));
    let rep_period = config.float("rep_period_ps");
    let bin_width = config.integer("bin_width_ps") as i64;
    let mut w = Writer::new(config, provenance)?;
    if a == Channel::Sync {
        let hist = sync_histogram(&tags, b, rep_period, bin_width)?;
        w.raw(&format!("decay_{}.csv", b.label()), &hist.to_csv())?;
        w.line(format!("{} events from {b} after SYNC", hist.total()));
        return w.finish(None);
    }
    let window = config.integer("window_ps") as i64;
    let hist = cross_correlate(&tags, a, b, window, bin_width)?;
    w.raw(&format!("correlation_{}_{}.csv", a.label(), b.label()), &hist.to_csv())?;
    w.line(format!("{} coincidences {a}→{b} within ±{window} ps", hist.total()));
    let side_peaks = config.integer("g2_side_peaks") as usize;
    if window as f64 >= (side_peaks as f64 + 0.5) * rep_period {
        let peak_window = config.optional_float("g2_window_ps").unwrap_or(rep_period);
        let g2 = g2_pulsed_window(&hist, rep_period, side_peaks, peak_window)?;
        w.line(format!("g2(0) = {:.4} ± {:.4}", g2.value, g2.sigma));
    }
    w.finish(Some("correlate_summary.txt"))
}

/// Tag files named `tags_I-J.*`, expanding directories.
pub fn collect_tag_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.starts_with("tags_")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidArgument("no tag files found in input".into()));
    }
    Ok(files)
}

fn load_acquisition(path: &Path) -> Result<SettingAcquisition> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let label = stem.rsplit('_').next().unwrap_or_default();
    let (basis_first, basis_second) = parse_setting(label)
        .map_err(|_| Error::InvalidArgument(format!("{}: file name must end in _I-J", path.display())))?;
    Ok(SettingAcquisition { basis_first, basis_second, tags: tagfile::load(path)? })
}

fn load_acquisitions(config: &RunConfig) -> Result<Vec<SettingAcquisition>> {
    collect_tag_files(&config.inputs())?.iter().map(|p| load_acquisition(p)).collect()
}

fn build_tomogram(config: &RunConfig, acquisitions: &[SettingAcquisition]) -> Result<TomogramCounts> {
    let tomo =
        assemble_tomogram(acquisitions, config.integer("window_ps") as i64, config.integer("bin_width_ps") as i64)?;
    if tomo.total() == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok(tomo)
}

fn average_window(config: &RunConfig, params: &CascadeParams) -> (f64, f64) {
    (config.float("average_lo_ps"), config.optional_float("average_hi_ps").unwrap_or(params.t1_x))
}

/// Tomogram CSV and the pooled density matrix of the averaging window.
pub fn cmd_tomo(config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let params = config.cascade()?;
    let acquisitions = load_acquisitions(config)?;
    let tomo = build_tomogram(config, &acquisitions)?;
    let mut w = Writer::new(config, provenance)?;
    w.raw("tomogram.csv", &tomo.to_csv())?;
    w.line(format!("{} coincidences in {} settings", tomo.total(), acquisitions.len()));
    let (lo, hi) = average_window(config, &params);
    let pooled = window_average_matrix(&tomo, lo, hi)?;
    w.json("rho_window.json", DensityMatrixDocument::new(&pooled.rho, [lo, hi], pooled.total_counts as u64))?;
    w.line(format!("pooled [{lo}, {hi}) ps: 2n = {:.3}", crate::state::negativity2n(&pooled.rho)));
    w.finish(None)
}

fn negativity_analysis(config: &RunConfig, tomo: &TomogramCounts, w: &mut Writer) -> Result<()> {
    let params = config.cascade()?;
    let series_bin = config.integer("series_bin_ps") as i64;
    let options = SeriesOptions {
        n_bootstrap: config.integer("n_bootstrap") as usize,
        seed: config.integer("bootstrap_seed"),
        range: Some((config.float("series_lo_ps"), config.float("series_hi_ps"))),
        ..SeriesOptions::default()
    };
    let series = negativity_vs_delay_with(tomo, series_bin, &options)?;
    w.raw("negativity.csv", &series.to_csv())?;
    let accuracy = config.float("projection_accuracy");

    let peak_width = config.float("peak_window_ps");
    match tomo.window_counts(0.0, peak_width).and_then(|c| mle_reconstruct(&c)) {
        Ok(peak) => {
            w.json(
                "rho_peak.json",
                DensityMatrixDocument::new(&peak.rho, [0.0, peak_width], peak.total_counts as u64),
            )?;
            let low = if peak.low_statistics { " (low statistics)" } else { "" };
            w.line(format!(
                "peak [0, {peak_width}) ps: 2n = {:.3}{low}, model {:.3}",
                crate::state::negativity2n(&peak.rho),
                model_negativity_window(0.0, peak_width, &params, accuracy)?
            ));
        }
        Err(Error::EmptyWindow) => w.line(format!("peak [0, {peak_width}) ps: no coincidences")),
        Err(e) => return Err(e),
    }

    let (lo, hi) = average_window(config, &params);
    let model = model_negativity_corotating(lo, hi, series_bin as f64, &params, accuracy)?;
    match corotating_average_matrix(tomo, lo, hi, series_bin, params.precession_omega()) {
        Ok(rho) => {
            w.json(
                "rho_corotating.json",
                DensityMatrixDocument::new(&rho, [lo, hi], tomo.window_counts(lo, hi).map(total).unwrap_or(0)),
            )?;
            w.line(format!(
                "co-rotating average [{lo}, {hi}) ps: 2n = {:.3}, model {model:.3}",
                crate::state::negativity2n(&rho)
            ));
        }
        Err(Error::EmptyWindow) => w.line(format!("co-rotating average [{lo}, {hi}) ps: no coincidences")),
        Err(e) => return Err(e),
    }
    match window_average_matrix(tomo, lo, hi) {
        Ok(pooled) => {
            w.json("rho_pooled.json", DensityMatrixDocument::new(&pooled.rho, [lo, hi], pooled.total_counts as u64))?;
            w.line(format!(
                "pooled counts [{lo}, {hi}) ps: 2n = {:.3}, model {:.3}",
                crate::state::negativity2n(&pooled.rho),
                model_negativity_window(lo, hi, &params, accuracy)?
            ));
        }
        Err(Error::EmptyWindow) => {}
        Err(e) => return Err(e),
    }
    if let Ok((mean, sigma)) = series.weighted_mean(lo, hi) {
        w.line(format!("series mean [{lo}, {hi}) ps: 2n = {mean:.3} ± {sigma:.3}"));
    }
    w.line(format!("jitter-limited plateau: {:.3}", jitter_limited_plateau(&params)));
    Ok(())
}

fn total(counts: [f64; N_COMBOS]) -> u64 {
    counts.iter().sum::<f64>() as u64
}

/// Negativity series, peak and averaged states from a tomogram CSV.
pub fn cmd_negativity(config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let tomo = TomogramCounts::from_csv(&fs::read_to_string(single_input(config)?)?)?;
    if tomo.total() == 0 {
        return Err(Error::EmptyWindow);
    }
    let mut w = Writer::new(config, provenance)?;
    negativity_analysis(config, &tomo, &mut w)?;
    w.finish(Some("negativity_summary.txt"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    LifetimeX,
    LifetimeXx,
    Fss,
    Rabi,
    Psf,
}

impl FitKind {
    pub const ALL: [FitKind; 5] = [Self::LifetimeX, Self::LifetimeXx, Self::Fss, Self::Rabi, Self::Psf];

    pub fn name(self) -> &'static str {
        match self {
            Self::LifetimeX => "lifetime-x",
            Self::LifetimeXx => "lifetime-xx",
            Self::Fss => "fss",
            Self::Rabi => "rabi",
            Self::Psf => "psf",
        }
    }
}

impl FromStr for FitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fit kind {s:?}")))
    }
}

/// Numeric CSV rows, skipping comments and a header line.
fn numeric_rows(text: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == width => rows.push(v),
            Ok(_) => return Err(Error::Parse(format!("expected {width} columns in {line:?}"))),
            Err(_) if rows.is_empty() => {}
            Err(e) => return Err(Error::Parse(format!("{line:?}: {e}"))),
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no data rows in input".into()));
    }
    Ok(rows)
}

pub fn run_fit(kind: FitKind, config: &RunConfig, text: &str) -> Result<FitResult> {
    let params = config.cascade()?;
    match kind {
        FitKind::LifetimeX | FitKind::LifetimeXx => {
            let hist = Histogram::from_csv(text)?;
            let kind = if kind == FitKind::LifetimeX { LifetimeKind::X } else { LifetimeKind::Xx };
            let range = match (config.optional_float("fit_lo_ps"), config.optional_float("fit_hi_ps")) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => return Err(Error::InvalidArgument("set both fit_lo_ps and fit_hi_ps, or neither".into())),
            };
            fit::fit_lifetime_in(&hist, kind, &params, range)
        }
        FitKind::Fss => {
            let samples: Vec<FssSample> = numeric_rows(text, 3)?
                .into_iter()
                .map(|r| FssSample { angle_deg: r[0], e_x: r[1], e_xx: r[2] })
                .collect();
            fit::fit_fss(&samples, config.optional_float("fss_noise_uev"))
        }
        FitKind::Rabi => {
            let rows: Vec<(f64, f64)> = numeric_rows(text, 2)?.into_iter().map(|r| (r[0], r[1])).collect();
            fit::fit_rabi(&rows)
        }
        FitKind::Psf => fit::fit_psf(&Map2D::from_csv(text)?),
    }
}

/// Fit of one CSV input, written as `fit_<kind>.csv`.
pub fn cmd_fit(kind: FitKind, config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let text = fs::read_to_string(single_input(config)?)?;
    let result = run_fit(kind, config, &text)?;
    let mut w = Writer::new(config, provenance)?;
    w.raw(&format!("fit_{}.csv", kind.name()), &result.to_csv())?;
    for (i, name) in result.names.iter().enumerate() {
        w.line(format!("{name} = {} ± {}", result.params[i], result.sigmas[i]));
    }
    w.line(format!("chi2_reduced = {:.4}", result.chi2_reduced));
    w.finish(None)
}

/// Band-integrated map of a cube file.
pub fn cmd_hyper_map(config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let cube = HyperspectralCube::read(fs::File::open(single_input(config)?)?)?;
    let (lo, hi) = (config.float("band_lo_nm"), config.float("band_hi_nm"));
    let map = cube.band_integrate(lo, hi)?;
    let mut w = Writer::new(config, provenance)?;
    w.raw(&format!("band_{lo}-{hi}nm.csv"), &map.to_csv())?;
    let (ix, iy) = map.argmax();
    w.line(format!(
        "band [{lo}, {hi}] nm: brightest pixel at ({}, {}) µm with {}",
        map.x_grid[ix],
        map.y_grid[iy],
        map.get(ix, iy)
    ));
    w.finish(None)
}

/// Data, jitter-free theory and jitter-convolved model for all 36 panels.
/// Curves are scaled so each setting's four panels hold the measured total.
pub fn overlay_csv(tomo: &TomogramCounts, params: &CascadeParams) -> String {
    let bin = tomo.bin_width as f64;
    let centers: Vec<f64> = (0..tomo.n_bins()).map(|k| tomo.bin_center(k)).collect();
    let mut theory = vec![vec![0.0; centers.len()]; N_COMBOS];
    let mut model = vec![vec![0.0; centers.len()]; N_COMBOS];
    for k in 0..N_COMBOS {
        let (i, j) = combination(k);
        for (n, &t) in centers.iter().enumerate() {
            model[k][n] = model_coincidence(i.coords(), j.coords(), t, params) * bin;
            theory[k][n] =
                if t >= 0.0 { theory_coincidence(i.coords(), j.coords(), t, params).unwrap_or(0.0) * bin } else { 0.0 };
        }
    }
    let mut data_sum = [0.0; 9];
    let mut model_sum = [0.0; 9];
    for k in 0..N_COMBOS {
        data_sum[setting_of(k)] += tomo.combination_total(k) as f64;
        model_sum[setting_of(k)] += model[k].iter().sum::<f64>();
    }
    let scale: [f64; 9] = std::array::from_fn(|s| if model_sum[s] > 0.0 { data_sum[s] / model_sum[s] } else { 0.0 });
    let mut s = String::from("delay_ps");
    for k in 0..N_COMBOS {
        let label = combination_label(k);
        let _ = write!(s, ",{label}_data,{label}_theory,{label}_model");
    }
    s.push('\n');
    for (n, t) in centers.iter().enumerate() {
        let _ = write!(s, "{t}");
        for k in 0..N_COMBOS {
            let f = scale[setting_of(k)];
            let _ = write!(s, ",{},{},{}", tomo.counts[n][k], theory[k][n] * f, model[k][n] * f);
        }
        s.push('\n');
    }
    s
}

/// Comparison line for the diffraction-limited spot size.
pub fn diffraction_line(wavelength_nm: f64, numerical_aperture: f64) -> String {
    format!(
        "diffraction limit: 0.51 × {wavelength_nm} nm / {numerical_aperture} = {:.0} nm",
        fit::diffraction_limit(wavelength_nm, numerical_aperture)
    )
}

/// Full analysis of a set of tag files: decay fits, tomogram, overlay,
/// negativity and the efficiency and diffraction-limit lines.
pub fn cmd_report(config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let params = config.cascade()?;
    let acquisitions = load_acquisitions(config)?;
    let tomo = build_tomogram(config, &acquisitions)?;
    let mut w = Writer::new(config, provenance)?;

    let rep_period = config.float("rep_period_ps");
    let rep_rate = 1e12 / rep_period;
    let detector_rate = config.float("detector_rate_hz");
    w.line(format!(
        "per-pulse efficiency: {:.0} kHz / {:.1} MHz = {:.2e}",
        detector_rate / 1e3,
        rep_rate / 1e6,
        detector_rate / rep_rate
    ));
    let pulses: usize = acquisitions.iter().map(|a| a.tags.count(Channel::Sync)).sum();
    let detections: usize = acquisitions.iter().map(|a| a.tags.detections()).sum();
    if pulses > 0 {
        w.line(format!(
            "recorded per-pulse yield: {detections} / {pulses} = {:.3e}",
            detections as f64 / pulses as f64
        ));
    }
    let (wavelength, na) = (config.float("wavelength_nm"), config.float("numerical_aperture"));
    w.line(diffraction_line(wavelength, na));

    let bin_width = config.integer("bin_width_ps") as i64;
    for (name, kind, channels) in
        [("xx", LifetimeKind::Xx, [Channel::XxT, Channel::XxR]), ("x", LifetimeKind::X, [Channel::XT, Channel::XR])]
    {
        let mut decay: Option<Histogram> = None;
        for acq in &acquisitions {
            for ch in channels {
                let h = sync_histogram(&acq.tags, ch, rep_period, bin_width)?;
                match decay.as_mut() {
                    Some(d) => d.accumulate(&h)?,
                    None => decay = Some(h),
                }
            }
        }
        let Some(decay) = decay else { continue };
        w.raw(&format!("decay_{name}.csv"), &decay.to_csv())?;
        match fit::fit_lifetime(&decay, kind, &params) {
            Ok(f) => {
                let key = if kind == LifetimeKind::X { "t1_x_ps" } else { "t1_xx_ps" };
                let (v, s) = f.get(key).expect("lifetime parameter");
                w.line(format!("{key} fit: {v:.1} ± {s:.1} (configured {})", config.get(key)));
                w.raw(&format!("fit_lifetime-{name}.csv"), &f.to_csv())?;
            }
            Err(e) => w.line(format!("{name} lifetime fit failed: {e}")),
        }
    }

    w.raw("tomogram.csv", &tomo.to_csv())?;
    w.raw("overlay.csv", &overlay_csv(&tomo, &params))?;
    w.line(format!("{} coincidences within ±{} ps", tomo.total(), config.get("window_ps")));
    negativity_analysis(config, &tomo, &mut w)?;
    w.finish(Some("summary.txt"))
}

/// Density matrix written by any command, for downstream checks.
pub fn read_density_matrix(path: &Path) -> Result<DensityMatrix> {
    DensityMatrixDocument::from_json(&fs::read_to_string(path)?)?.density_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_in(dir: &Path, pairs: &[(&str, &str)]) -> RunConfig {
        let mut c = RunConfig::default();
        c.set("output_dir", dir.to_str().unwrap()).unwrap();
        for (k, v) in pairs {
            c.set(k, v).unwrap();
        }
        c
    }

    #[test]
    fn fit_kind_names_round_trip() {
        for k in FitKind::ALL {
            assert_eq!(k.name().parse::<FitKind>().unwrap(), k);
        }
        assert!("gauss".parse::<FitKind>().is_err());
    }

    #[test]
    fn provenance_header_respects_deterministic() {
        let c = RunConfig::default();
        let det = Provenance::new("simulate", &c, true).header();
        assert_eq!(det, format!("# qd-cascade simulate\n# config_hash={}\n", c.hash()));
        assert!(Provenance::new("simulate", &c, false).header().contains("generated_unix_s="));
    }

    #[test]
    fn simulate_then_tomo() {
        let dir = tempfile::tempdir().unwrap();
        let sim_dir = dir.path().join("sim");
        let config = config_in(&sim_dir, &[("n_pulses", "20000"), ("eta_xx", "0.2"), ("eta_x", "0.2")]);
        let out = cmd_simulate(&config, &Provenance::new("simulate", &config, true)).unwrap();
        assert_eq!(out.lines.len(), 9);
        let files = collect_tag_files(&[sim_dir.clone()]).unwrap();
        assert_eq!(files.len(), 9);

        let mut tomo_config = config_in(&dir.path().join("tomo"), &[("input", sim_dir.to_str().unwrap())]);
        tomo_config.set("window_ps", "1000").unwrap();
        let out = cmd_tomo(&tomo_config, &Provenance::new("tomo", &tomo_config, true)).unwrap();
        let text = fs::read_to_string(dir.path().join("tomo/tomogram.csv")).unwrap();
        assert!(text.contains(&format!("config_hash={}", tomo_config.hash())));
        let tomo = TomogramCounts::from_csv(&text).unwrap();
        assert_eq!(tomo.exposures, [20000; 9]);
        let rho = read_density_matrix(&dir.path().join("tomo/rho_window.json")).unwrap();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-9);
        assert!(out.lines[0].contains("coincidences"));
    }

    #[test]
    fn missing_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_in(dir.path(), &[]);
        let p = Provenance::new("tomo", &config, true);
        assert!(cmd_tomo(&config, &p).is_err());
        assert!(cmd_correlate(&config, &p).is_err());
    }

    #[test]
    fn fss_csv_fit() {
        let mut text = String::from("angle_deg,e_x_uev,e_xx_uev\n");
        for i in 0..24 {
            let a = 7.5 * i as f64;
            let s = 0.5 * 5.79 * (4.0 * a.to_radians() + 0.3).sin();
            let _ = writeln!(text, "{a},{},{}", 10.0 + s, -10.0 - s);
        }
        let fit = run_fit(FitKind::Fss, &RunConfig::default(), &text).unwrap();
        assert!((fit.value("delta_fss_uev") - 5.79).abs() < 1e-8);
    }
}
