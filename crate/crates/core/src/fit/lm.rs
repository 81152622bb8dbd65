//! Levenberg–Marquardt least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e12;
const CHI2_TOLERANCE: f64 = 1e-10;
const GRADIENT_TOLERANCE: f64 = 1e-12;

/// Parametric curve `y = f(x; p)`.
pub trait Model<X> {
    fn names(&self) -> Vec<String>;

    fn value(&self, x: &X, params: &[f64]) -> f64;

    /// `∂f/∂p` at `x`. Defaults to central differences.
    fn gradient(&self, x: &X, params: &[f64], out: &mut [f64]) {
        central_difference(|p| self.value(x, p), params, out);
    }
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, params: &[f64], out: &mut [f64]) {
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let h = 1e-6 * params[i].abs().max(1e-3);
        p[i] = params[i] + h;
        let up = f(&p);
        p[i] = params[i] - h;
        let down = f(&p);
        p[i] = params[i];
        out[i] = (up - down) / (2.0 * h);
    }
}

/// Observations with 1σ errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Data<X> {
    pub x: Vec<X>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl<X> Data<X> {
    pub fn new(x: Vec<X>, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || y.len() != sigma.len() {
            return Err(Error::InvalidArgument("x, y and sigma lengths differ".into()));
        }
        if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        Ok(Self { x, y, sigma })
    }

    /// Counting data: `σ = sqrt(max(y, 1))`.
    pub fn poisson(x: Vec<X>, y: Vec<f64>) -> Result<Self> {
        let sigma = y.iter().map(|v| v.max(1.0).sqrt()).collect();
        Self::new(x, y, sigma)
    }

    pub fn unweighted(x: Vec<X>, y: Vec<f64>) -> Result<Self> {
        let sigma = vec![1.0; y.len()];
        Self::new(x, y, sigma)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub chi2_reduced: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub covariance: Vec<Vec<f64>>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `(value, sigma)` of a named parameter.
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.index(name).map(|i| (self.params[i], self.sigmas[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("no parameter {name}")).0
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("no parameter {name}")).1
    }

    /// Rescales the covariance by `chi2_reduced`, for data whose errors
    /// are unknown.
    pub fn scaled_by_chi2(mut self) -> Self {
        let s = self.chi2_reduced;
        for row in &mut self.covariance {
            for c in row.iter_mut() {
                *c *= s;
            }
        }
        self.sigmas = (0..self.params.len()).map(|i| self.covariance[i][i].max(0.0).sqrt()).collect();
        self
    }

    /// Appends a derived quantity.
    pub fn push_derived(&mut self, name: &str, value: f64, sigma: f64) {
        self.names.push(name.to_string());
        self.params.push(value);
        self.sigmas.push(sigma);
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# chi2_reduced={}, iterations={}, converged={}\nparameter,value,sigma\n",
            self.chi2_reduced, self.n_iterations, self.converged
        );
        for i in 0..self.names.len() {
            s.push_str(&format!("{},{},{}\n", self.names[i], self.params[i], self.sigmas[i]));
        }
        s
    }
}

fn residuals_and_jacobian<X, M: Model<X> + ?Sized>(
    model: &M,
    data: &Data<X>,
    params: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.len();
    let m = params.len();
    let mut r = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, m);
    let mut grad = vec![0.0; m];
    for i in 0..n {
        let s = data.sigma[i];
        r[i] = (data.y[i] - model.value(&data.x[i], params)) / s;
        model.gradient(&data.x[i], params, &mut grad);
        for j in 0..m {
            jac[(i, j)] = grad[j] / s;
        }
    }
    (r, jac)
}

fn chi2<X, M: Model<X> + ?Sized>(model: &M, data: &Data<X>, params: &[f64]) -> f64 {
    (0..data.len()).map(|i| ((data.y[i] - model.value(&data.x[i], params)) / data.sigma[i]).powi(2)).sum()
}

/// Minimizes `Σ ((y - f(x; p)) / σ)^2` starting from `init`.
pub fn least_squares_fit<X, M: Model<X> + ?Sized>(model: &M, data: &Data<X>, init: &[f64]) -> Result<FitResult> {
    let m = init.len();
    let names = model.names();
    if names.len() != m {
        return Err(Error::InvalidArgument(format!("{} initial values for {} parameters", m, names.len())));
    }
    if data.len() <= m {
        return Err(Error::InvalidArgument(format!("{} points cannot constrain {m} parameters", data.len())));
    }
    let mut params = init.to_vec();
    let mut current = chi2(model, data, &params);
    if !current.is_finite() {
        return Err(Error::InvalidArgument("model is not finite at the initial parameters".into()));
    }
    let mut damping = INITIAL_DAMPING;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (r, jac) = residuals_and_jacobian(model, data, &params);
        let normal = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut a = normal.clone();
            for j in 0..m {
                a[(j, j)] += damping * normal[(j, j)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, d)| p + d).collect();
            let next = chi2(model, data, &trial);
            if next.is_finite() && next <= current {
                let change = if current > 0.0 { (current - next) / current } else { 0.0 };
                params = trial;
                current = next;
                damping = (damping / 10.0).max(1e-15);
                accepted = true;
                if change < CHI2_TOLERANCE {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // no step of any size lowers chi2: a numerical minimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    let (_, jac) = residuals_and_jacobian(model, data, &params);
    let normal = jac.transpose() * &jac;
    let covariance = invert_normal(&normal)?;
    let dof = (data.len() - m) as f64;
    Ok(FitResult {
        names,
        sigmas: (0..m).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect(),
        covariance: (0..m).map(|i| (0..m).map(|j| covariance[(i, j)]).collect()).collect(),
        params,
        chi2_reduced: current / dof,
        n_iterations: iterations,
        converged,
    })
}

fn invert_normal(normal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    // equilibrate so that parameters of very different scale do not look singular
    let m = normal.nrows();
    let scale: Vec<f64> = (0..m).map(|i| normal[(i, i)].abs().sqrt()).collect();
    if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let scaled = DMatrix::from_fn(m, m, |i, j| normal[(i, j)] / (scale[i] * scale[j]));
    let eig = scaled.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < 1e14) {
        return Err(Error::Singular { condition });
    }
    let inv = scaled.try_inverse().ok_or(Error::Singular { condition })?;
    Ok(DMatrix::from_fn(m, m, |i, j| inv[(i, j)] / (scale[i] * scale[j])))
}

/// Closure-backed model, convenient for one-off fits.
pub struct FnModel<F> {
    names: Vec<String>,
    f: F,
}

impl<F> FnModel<F> {
    pub fn new(names: &[&str], f: F) -> Self {
        Self { names: names.iter().map(|s| s.to_string()).collect(), f }
    }
}

impl<X, F: Fn(&X, &[f64]) -> f64> Model<X> for FnModel<F> {
    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn value(&self, x: &X, params: &[f64]) -> f64 {
        (self.f)(x, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line() -> FnModel<impl Fn(&f64, &[f64]) -> f64> {
        FnModel::new(&["slope", "intercept"], |x: &f64, p: &[f64]| p[0] * x + p[1])
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = x.iter().map(|x| 2.5 * x - 1.0).collect();
        let fit = least_squares_fit(&line(), &Data::unweighted(x, y).unwrap(), &[0.0, 0.0]).unwrap();
        assert!((fit.value("slope") - 2.5).abs() < 1e-12);
        assert!((fit.value("intercept") + 1.0).abs() < 1e-12);
        assert!(fit.chi2_reduced < 1e-20);
        assert!(fit.converged);
    }

    #[test]
    fn exponential_from_poor_start() {
        let model = FnModel::new(&["amplitude", "lifetime"], |x: &f64, p: &[f64]| p[0] * (-x / p[1]).exp());
        let x: Vec<f64> = (0..=200).map(|i| 10.0 * i as f64).collect();
        let y = x.iter().map(|x| (-x / 320.0).exp()).collect();
        let fit = least_squares_fit(&model, &Data::poisson(x, y).unwrap(), &[1.0, 200.0]).unwrap();
        assert!((fit.value("lifetime") / 320.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn misfit_is_visible() {
        let model = FnModel::new(&["a", "b", "c"], |x: &f64, p: &[f64]| p[0] + p[1] * x + p[2] * x * x);
        let x: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
        let y = x.iter().map(|x| x * x * x).collect();
        let sigma = vec![0.01; 41];
        let fit = least_squares_fit(&model, &Data::new(x, y, sigma).unwrap(), &[0.0; 3]).unwrap();
        assert!(fit.converged);
        assert!(fit.chi2_reduced > 1e3);
    }

    #[test]
    fn singular_problem_reports_condition() {
        let model = FnModel::new(&["a", "b"], |x: &f64, p: &[f64]| (p[0] + p[1]) * x);
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![1.0, 2.0, 3.0];
        match least_squares_fit(&model, &Data::unweighted(x, y).unwrap(), &[0.3, 0.2]) {
            Err(Error::Singular { condition }) => assert!(condition > 1e14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_points() {
        let err = least_squares_fit(&line(), &Data::unweighted(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap(), &[0.0, 0.0]);
        assert!(err.is_err());
        assert!(Data::new(vec![1.0], vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn sigma_matches_line_formula() {
        // analytic slope error of a weighted straight-line fit
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 + 0.5 * x + if *x as i32 % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let sigma = vec![0.2; 8];
        let fit = least_squares_fit(&line(), &Data::new(x.clone(), y, sigma).unwrap(), &[0.0, 0.0]).unwrap();
        let n = 8.0;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let delta = n * sxx - sx * sx;
        let slope_sigma = 0.2 * (n / delta).sqrt();
        assert!((fit.sigma("slope") / slope_sigma - 1.0).abs() < 1e-8, "{} vs {slope_sigma}", fit.sigma("slope"));
    }

    proptest! {
        #[test]
        fn order_of_points_is_irrelevant(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = FnModel::new(&["amplitude", "lifetime"], |x: &f64, p: &[f64]| p[0] * (-x / p[1]).exp());
            let mut pts: Vec<(f64, f64)> = (0..40)
                .map(|i| {
                    let x = 25.0 * i as f64;
                    (x, 100.0 * (-x / 320.0).exp() + rng.random_range(-1.0..1.0))
                })
                .collect();
            let fit_a = least_squares_fit(&model, &Data::poisson(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect()).unwrap(), &[80.0, 250.0]).unwrap();
            for i in (1..pts.len()).rev() {
                pts.swap(i, rng.random_range(0..=i));
            }
            let fit_b = least_squares_fit(&model, &Data::poisson(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect()).unwrap(), &[80.0, 250.0]).unwrap();
            for (a, b) in fit_a.params.iter().zip(&fit_b.params) {
                prop_assert!((a - b).abs() <= 1e-8 * a.abs());
            }
        }
    }
}
