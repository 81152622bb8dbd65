use crate::error::{Error, Result};
use crate::fit::lm::{least_squares_fit, Data, FitResult, Model};
use crate::hyper::Map2D;
use crate::model::FWHM_PER_SIGMA;

/// `amplitude exp(-(x - center)^2 / (2 sigma^2)) + offset`
pub struct GaussianModel;

impl Model<f64> for GaussianModel {
    fn names(&self) -> Vec<String> {
        ["amplitude", "center", "sigma", "offset"].map(String::from).to_vec()
    }

    fn value(&self, x: &f64, p: &[f64]) -> f64 {
        p[0] * (-0.5 * ((x - p[1]) / p[2]).powi(2)).exp() + p[3]
    }

    fn gradient(&self, x: &f64, p: &[f64], out: &mut [f64]) {
        let u = (x - p[1]) / p[2];
        let e = (-0.5 * u * u).exp();
        out[0] = e;
        out[1] = p[0] * e * u / p[2];
        out[2] = p[0] * e * u * u / p[2];
        out[3] = 1.0;
    }
}

fn fit_cut(axis: &[f64], values: &[f64], peak: usize) -> Result<FitResult> {
    let offset = values.iter().copied().fold(f64::INFINITY, f64::min);
    let amplitude = values[peak] - offset;
    let half = offset + 0.5 * amplitude;
    let above = values.iter().filter(|&&v| v >= half).count().max(1);
    let spacing = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    let sigma = (above as f64 * spacing / FWHM_PER_SIGMA).max(0.5 * spacing);
    let data = Data::unweighted(axis.to_vec(), values.to_vec())?;
    Ok(least_squares_fit(&GaussianModel, &data, &[amplitude, axis[peak], sigma, offset])?.scaled_by_chi2())
}

/// Gaussian fits along the row and the column through the brightest pixel.
///
/// Reports `x_*` and `y_*` Gaussian parameters, `fwhm_x`, `fwhm_y` and
/// `fwhm_mean`, in the units of the map axes.
pub fn fit_psf(map: &Map2D) -> Result<FitResult> {
    let (nx, ny) = (map.x_grid.len(), map.y_grid.len());
    if nx < 5 || ny < 5 {
        return Err(Error::InvalidArgument(format!("{nx}×{ny} map is too small for a PSF fit")));
    }
    let (ix, iy) = map.argmax();
    if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
        return Err(Error::Degenerate(format!("peak on image boundary at pixel ({ix}, {iy})")));
    }
    let horizontal = fit_cut(&map.x_grid, &map.row(iy), ix)?;
    let vertical = fit_cut(&map.y_grid, &map.column(ix), iy)?;
    let mut names = Vec::new();
    let mut params = Vec::new();
    let mut sigmas = Vec::new();
    let mut covariance = vec![vec![0.0; 8]; 8];
    for (block, (axis, fit)) in [("x", &horizontal), ("y", &vertical)].into_iter().enumerate() {
        for (i, n) in fit.names.iter().enumerate() {
            names.push(format!("{axis}_{n}"));
            params.push(fit.params[i]);
            sigmas.push(fit.sigmas[i]);
            for j in 0..4 {
                covariance[4 * block + i][4 * block + j] = fit.covariance[i][j];
            }
        }
    }
    let dof_x = (nx - 4) as f64;
    let dof_y = (ny - 4) as f64;
    let mut out = FitResult {
        names,
        params,
        sigmas,
        chi2_reduced: (horizontal.chi2_reduced * dof_x + vertical.chi2_reduced * dof_y) / (dof_x + dof_y),
        n_iterations: horizontal.n_iterations + vertical.n_iterations,
        converged: horizontal.converged && vertical.converged,
        covariance,
    };
    let (sx, sx_err) = horizontal.get("sigma").expect("sigma");
    let (sy, sy_err) = vertical.get("sigma").expect("sigma");
    let (fx, fy) = (FWHM_PER_SIGMA * sx.abs(), FWHM_PER_SIGMA * sy.abs());
    out.push_derived("fwhm_x", fx, FWHM_PER_SIGMA * sx_err);
    out.push_derived("fwhm_y", fy, FWHM_PER_SIGMA * sy_err);
    out.push_derived("fwhm_mean", 0.5 * (fx + fy), 0.5 * FWHM_PER_SIGMA * sx_err.hypot(sy_err));
    Ok(out)
}
