//! A synthetic hyperspectral scan over one lens: band maps for the dot line
//! and the laser, and a Gaussian fit of the dot spot.
//!
//! cargo run --example psf_hyperspectral [output.qcube]

use qd_cascade::fit::{diffraction_limit, fit_psf};
use qd_cascade::hyper::HyperspectralCube;

fn main() -> qd_cascade::Result<()> {
    let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
    let lambda: Vec<f64> = (0..200).map(|i| 770.0 + 0.1 * i as f64).collect();
    // the dot line at 780 nm sits on the lens at (0.3, -0.2) µm; laser light
    // at 772 nm is scattered everywhere except where the lens collects it
    let spot_sigma = 0.28;
    let cube = HyperspectralCube::from_fn(grid.clone(), grid, lambda, |x, y, l| {
        let r2 = (x - 0.3).powi(2) + (y + 0.2).powi(2);
        let dot = 400.0 * (-r2 / (2.0 * spot_sigma * spot_sigma)).exp() * (-((l - 780.0) / 0.1).powi(2)).exp();
        let laser = 50.0 * (1.0 - (-r2 / 0.5).exp()) * (-((l - 772.0) / 0.2).powi(2)).exp();
        (dot + laser + 1.0).round() as u32
    })?;
    if let Some(path) = std::env::args().nth(1) {
        cube.write(std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }

    let dot = cube.band_integrate(779.5, 780.5)?;
    let laser = cube.band_integrate(771.0, 773.0)?;
    let (ix, iy) = dot.argmax();
    let (lx, ly) = laser.argmin();
    println!("dot band brightest at ({:.1}, {:.1}) µm", dot.x_grid[ix], dot.y_grid[iy]);
    println!("laser band darkest at ({:.1}, {:.1}) µm", laser.x_grid[lx], laser.y_grid[ly]);

    let fit = fit_psf(&dot)?;
    let (fwhm, sigma) = fit.get("fwhm_mean").expect("derived");
    println!("spot FWHM {:.0} ± {:.0} nm (set {:.0} nm)", fwhm * 1e3, sigma * 1e3, 2.35482 * spot_sigma * 1e3);
    println!("diffraction limit 0.51 × 780 nm / 0.6 = {:.0} nm", diffraction_limit(780.0, 0.6));
    Ok(())
}
