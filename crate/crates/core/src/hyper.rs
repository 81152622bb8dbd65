//! Hyperspectral scan cubes: counts on an `x × y × λ` grid.
//!
//! Binary layout: magic `QCUBE1\0\0`; `nx`, `ny`, `nλ` as little-endian
//! `u64`; the three axes as little-endian `f64`; then the counts as
//! little-endian `u32`, x-major, then y, then λ.

use std::fmt::Write as _;
use std::io::{BufReader, BufWriter, Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QCUBE1\0\0";

#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralCube {
    /// µm
    pub x_grid: Vec<f64>,
    /// µm
    pub y_grid: Vec<f64>,
    /// nm
    pub lambda_grid: Vec<f64>,
    counts: Vec<u32>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{name} axis must be finite and strictly increasing")));
    }
    Ok(())
}

/// Bin edges at midpoints between samples; the outer edges sit half a
/// spacing beyond the end samples.
fn edges(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![axis[0] - 0.5, axis[0] + 0.5];
    }
    let mut e = Vec::with_capacity(n + 1);
    e.push(axis[0] - 0.5 * (axis[1] - axis[0]));
    for w in axis.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(axis[n - 1] + 0.5 * (axis[n - 1] - axis[n - 2]));
    e
}

impl HyperspectralCube {
    pub fn new(x_grid: Vec<f64>, y_grid: Vec<f64>, lambda_grid: Vec<f64>, counts: Vec<u32>) -> Result<Self> {
        check_axis("x", &x_grid)?;
        check_axis("y", &y_grid)?;
        check_axis("lambda", &lambda_grid)?;
        let n = x_grid.len() * y_grid.len() * lambda_grid.len();
        if counts.len() != n {
            return Err(Error::InconsistentGrid(format!("{} counts for a {n}-voxel cube", counts.len())));
        }
        Ok(Self { x_grid, y_grid, lambda_grid, counts })
    }

    pub fn from_fn(
        x_grid: Vec<f64>,
        y_grid: Vec<f64>,
        lambda_grid: Vec<f64>,
        f: impl Fn(f64, f64, f64) -> u32,
    ) -> Result<Self> {
        let mut counts = Vec::with_capacity(x_grid.len() * y_grid.len() * lambda_grid.len());
        for &x in &x_grid {
            for &y in &y_grid {
                for &l in &lambda_grid {
                    counts.push(f(x, y, l));
                }
            }
        }
        Self::new(x_grid, y_grid, lambda_grid, counts)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.x_grid.len(), self.y_grid.len(), self.lambda_grid.len())
    }

    pub fn get(&self, ix: usize, iy: usize, il: usize) -> u32 {
        let (_, ny, nl) = self.shape();
        self.counts[(ix * ny + iy) * nl + il]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn spectrum(&self, ix: usize, iy: usize) -> &[u32] {
        let (_, ny, nl) = self.shape();
        let start = (ix * ny + iy) * nl;
        &self.counts[start..start + nl]
    }

    /// Per pixel, counts with λ in `[lo, hi]`; boundary bins contribute the
    /// fraction of their width inside the band.
    pub fn band_integrate(&self, lo: f64, hi: f64) -> Result<Map2D> {
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!("band [{lo}, {hi}] is empty")));
        }
        let e = edges(&self.lambda_grid);
        let weights: Vec<f64> =
            e.windows(2).map(|w| ((hi.min(w[1]) - lo.max(w[0])) / (w[1] - w[0])).clamp(0.0, 1.0)).collect();
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::EmptyWindow);
        }
        let (nx, ny, _) = self.shape();
        let mut values = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                values.push(self.spectrum(ix, iy).iter().zip(&weights).map(|(&c, &w)| c as f64 * w).sum());
            }
        }
        Map2D::new(self.x_grid.clone(), self.y_grid.clone(), values)
    }

    /// The band covering every λ bin completely.
    pub fn full_band(&self) -> (f64, f64) {
        let e = edges(&self.lambda_grid);
        (e[0], e[e.len() - 1])
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        w.write_all(MAGIC)?;
        let (nx, ny, nl) = self.shape();
        for n in [nx, ny, nl] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in self.x_grid.iter().chain(&self.y_grid).chain(&self.lambda_grid) {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.counts {
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Parse("file too short for header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a QCUBE1 file".into()));
        }
        let mut word = [0u8; 8];
        let mut sizes = [0usize; 3];
        for s in &mut sizes {
            r.read_exact(&mut word).map_err(|_| Error::Parse("truncated header".into()))?;
            *s = usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::Parse("cube too large".into()))?;
        }
        let [nx, ny, nl] = sizes;
        let n =
            nx.checked_mul(ny).and_then(|v| v.checked_mul(nl)).ok_or_else(|| Error::Parse("cube too large".into()))?;
        let mut axis = |len: usize| -> Result<Vec<f64>> {
            (0..len)
                .map(|_| {
                    r.read_exact(&mut word).map_err(|_| Error::Parse("truncated axes".into()))?;
                    Ok(f64::from_le_bytes(word))
                })
                .collect()
        };
        let x = axis(nx)?;
        let y = axis(ny)?;
        let l = axis(nl)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 4 * n {
            return Err(Error::Parse(format!("expected {} count bytes, found {}", 4 * n, bytes.len())));
        }
        let counts = bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Self::new(x, y, l, counts)
    }
}

/// Scalar map on an `x × y` grid, x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Map2D {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Map2D {
    pub fn new(x_grid: Vec<f64>, y_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_axis("x", &x_grid)?;
        check_axis("y", &y_grid)?;
        if values.len() != x_grid.len() * y_grid.len() {
            return Err(Error::InconsistentGrid(format!(
                "{} values for a {}×{} map",
                values.len(),
                x_grid.len(),
                y_grid.len()
            )));
        }
        Ok(Self { x_grid, y_grid, values })
    }

    pub fn from_fn(x_grid: Vec<f64>, y_grid: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = x_grid.iter().flat_map(|&x| y_grid.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(x_grid, y_grid, values)
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y_grid.len() + iy]
    }

    /// `(ix, iy)` of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let k = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .expect("maps are non-empty");
        (k / self.y_grid.len(), k % self.y_grid.len())
    }

    pub fn argmin(&self) -> (usize, usize) {
        let k = (0..self.values.len())
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .expect("maps are non-empty");
        (k / self.y_grid.len(), k % self.y_grid.len())
    }

    /// Values along x at fixed `iy`.
    pub fn row(&self, iy: usize) -> Vec<f64> {
        (0..self.x_grid.len()).map(|ix| self.get(ix, iy)).collect()
    }

    /// Values along y at fixed `ix`.
    pub fn column(&self, ix: usize) -> Vec<f64> {
        (0..self.y_grid.len()).map(|iy| self.get(ix, iy)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_um,y_um,value\n");
        for (ix, x) in self.x_grid.iter().enumerate() {
            for (iy, y) in self.y_grid.iter().enumerate() {
                let _ = writeln!(s, "{x},{y},{}", self.get(ix, iy));
            }
        }
        s
    }

    /// Reads `x_um,y_um,value` rows in any order covering a full grid.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') || line.starts_with("x_um") {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{line:?}: {e}"))))
                .collect::<Result<_>>()?;
            let [x, y, v] = fields[..] else {
                return Err(Error::Parse(format!("expected x,y,value in {line:?}")));
            };
            rows.push((x, y, v));
        }
        let axis = |pick: fn(&(f64, f64, f64)) -> f64| {
            let mut a: Vec<f64> = rows.iter().map(pick).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        };
        let (x_grid, y_grid) = (axis(|r| r.0), axis(|r| r.1));
        if rows.len() != x_grid.len() * y_grid.len() {
            return Err(Error::InconsistentGrid(format!(
                "{} rows do not fill a {}×{} grid",
                rows.len(),
                x_grid.len(),
                y_grid.len()
            )));
        }
        let mut values = vec![f64::NAN; rows.len()];
        for (x, y, v) in rows {
            let ix = x_grid.partition_point(|&g| g < x);
            let iy = y_grid.partition_point(|&g| g < y);
            values[ix * y_grid.len() + iy] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InconsistentGrid("duplicate map rows".into()));
        }
        Self::new(x_grid, y_grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(lo: f64, step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + step * i as f64).collect()
    }

    fn lens_cube() -> HyperspectralCube {
        // QD emission at 780 nm from a lens at (2, 3) µm; the laser reflection
        // at 770 nm is weaker on the lens than around it
        HyperspectralCube::from_fn(axis(0.0, 0.25, 21), axis(0.0, 0.25, 25), axis(760.0, 0.5, 61), |x, y, l| {
            let r2 = (x - 2.0).powi(2) + (y - 3.0).powi(2);
            let spot = (-r2 / (2.0 * 0.3f64.powi(2))).exp();
            let qd = 1000.0 * spot * (-(l - 780.0).powi(2) / 0.5).exp();
            let laser = 400.0 * (1.0 - 0.8 * spot) * (-(l - 770.0).powi(2) / 0.5).exp();
            (qd + laser + 2.0).round() as u32
        })
        .unwrap()
    }

    #[test]
    fn full_band_is_pixel_total() {
        let cube = lens_cube();
        let (lo, hi) = cube.full_band();
        let map = cube.band_integrate(lo, hi).unwrap();
        for ix in [0, 5, 20] {
            for iy in [0, 12, 24] {
                let total: u32 = cube.spectrum(ix, iy).iter().sum();
                assert_eq!(map.get(ix, iy), total as f64);
            }
        }
        let wide = cube.band_integrate(0.0, 2000.0).unwrap();
        assert_eq!(wide, map);
    }

    #[test]
    fn disjoint_bands_partition() {
        let cube = lens_cube();
        let (lo, hi) = cube.full_band();
        let cuts = [lo, 765.3, 771.77, 779.9, 780.25, hi];
        let full = cube.band_integrate(lo, hi).unwrap();
        let mut sum = vec![0.0; full.values.len()];
        for w in cuts.windows(2) {
            for (s, v) in sum.iter_mut().zip(cube.band_integrate(w[0], w[1]).unwrap().values) {
                *s += v;
            }
        }
        for (a, b) in sum.iter().zip(&full.values) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn partial_bin_weight() {
        let cube = HyperspectralCube::new(vec![0.0], vec![0.0], vec![1.0, 2.0, 3.0], vec![10, 20, 30]).unwrap();
        // bin 2 spans [1.5, 2.5]; a band [2.0, 2.25] covers a quarter of it
        assert_eq!(cube.band_integrate(2.0, 2.25).unwrap().values[0], 5.0);
        assert!(matches!(cube.band_integrate(10.0, 11.0), Err(Error::EmptyWindow)));
    }

    #[test]
    fn bands_localize_the_lens() {
        let cube = lens_cube();
        let qd = cube.band_integrate(779.0, 781.0).unwrap();
        let laser = cube.band_integrate(769.0, 771.0).unwrap();
        let (ix, iy) = qd.argmax();
        assert_eq!((qd.x_grid[ix], qd.y_grid[iy]), (2.0, 3.0));
        assert_eq!(laser.argmin(), (ix, iy));
    }

    #[test]
    fn file_roundtrip_and_validation() {
        let cube = lens_cube();
        let mut buf = Vec::new();
        cube.write(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(HyperspectralCube::read(&buf[..]).unwrap(), cube);
        assert!(HyperspectralCube::read(&buf[..buf.len() - 1]).is_err());
        assert!(HyperspectralCube::new(vec![0.0, 0.0], vec![0.0], vec![1.0], vec![0, 0]).is_err());
        assert!(HyperspectralCube::new(vec![0.0], vec![0.0], vec![1.0], vec![0, 0]).is_err());
    }

    #[test]
    fn map_csv_round_trip() {
        let map = Map2D::from_fn(vec![0.0, 0.5, 1.0], vec![-1.0, 2.0], |x, y| x * 10.0 + y).unwrap();
        assert_eq!(Map2D::from_csv(&map.to_csv()).unwrap(), map);
        let text = map.to_csv();
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(Map2D::from_csv(&truncated).is_err());
    }
}
