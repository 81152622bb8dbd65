//! Maximum-likelihood two-qubit state reconstruction from the 36
//! projection counts.
//!
//! The state is `rho = T^dag T / tr(T^dag T)` with `T` lower triangular
//! (4 real diagonal entries, 6 complex off-diagonal ones). The objective is
//! the extended Poisson negative log-likelihood of the unnormalized
//! `T^dag T`, whose optimum has unit trace; it is minimized by BFGS with an
//! analytic gradient from the linear-inversion seed and several random
//! starts.

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Mat4;
use crate::poincare::{pair_ket, PolarizationLabel};
use crate::state::{project_to_physical, DensityMatrix};

pub const N_COMBOS: usize = 36;
pub const N_PARAMS: usize = 16;
/// Below this many counts a reconstruction is flagged as low statistics.
pub const LOW_STATISTICS: f64 = 100.0;

const EXPECTED_FLOOR: f64 = 1e-12;

type Vec16 = SVector<f64, N_PARAMS>;
type Mat16 = SMatrix<f64, N_PARAMS, N_PARAMS>;
type Ket = [Complex64; 4];

/// `(XX basis, X basis)` of combination `k`, ordered `H, V, D, A, R, L` for
/// each photon with the X photon varying fastest.
pub fn combination(k: usize) -> (PolarizationLabel, PolarizationLabel) {
    (PolarizationLabel::ALL[k / 6], PolarizationLabel::ALL[k % 6])
}

pub fn combination_index(first: PolarizationLabel, second: PolarizationLabel) -> usize {
    6 * first.index() + second.index()
}

pub fn combination_label(k: usize) -> String {
    let (a, b) = combination(k);
    format!("{a}-{b}")
}

/// Index `0..9` of the measurement setting that produces combination `k`.
pub fn setting_of(k: usize) -> usize {
    let (a, b) = combination(k);
    3 * (a.setting().index() / 2) + b.setting().index() / 2
}

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub random_starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { random_starts: 5, max_iterations: 20_000, tolerance: 1e-10, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    pub total_counts: f64,
    pub low_statistics: bool,
    pub iterations: usize,
    /// Negative log-likelihood per count at the optimum.
    pub objective: f64,
    params: Vec16,
}

impl Reconstruction {
    /// Lower-triangular factor of the (unnormalized) optimum.
    pub fn factor(&self) -> Mat4 {
        factor_from_params(&self.params)
    }
}

struct Problem {
    kets: [Ket; N_COMBOS],
    counts: [f64; N_COMBOS],
    /// Setting total of each combination, divided by the grand total.
    exposure: [f64; N_COMBOS],
    /// Counts divided by the grand total.
    weight: [f64; N_COMBOS],
}

impl Problem {
    fn new(counts: &[f64; N_COMBOS]) -> Result<Self> {
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
        }
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyWindow);
        }
        let mut setting_total = [0.0; 9];
        for (k, c) in counts.iter().enumerate() {
            setting_total[setting_of(k)] += c;
        }
        let kets = std::array::from_fn(|k| {
            let (a, b) = combination(k);
            pair_ket(&a.ket(), &b.ket())
        });
        Ok(Self {
            kets,
            counts: *counts,
            exposure: std::array::from_fn(|k| setting_total[setting_of(k)] / total),
            weight: std::array::from_fn(|k| counts[k] / total),
        })
    }

    fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn objective(&self, x: &Vec16) -> f64 {
        let t = factor_from_params(x);
        let mut f = 0.0;
        for k in 0..N_COMBOS {
            if self.exposure[k] == 0.0 {
                continue;
            }
            let v = t.apply(&self.kets[k]);
            let mu = self.exposure[k] * norm_sqr(&v);
            f += mu - self.weight[k] * mu.max(EXPECTED_FLOOR).ln();
        }
        f
    }

    fn objective_and_gradient(&self, x: &Vec16) -> (f64, Vec16) {
        let t = factor_from_params(x);
        let mut f = 0.0;
        let mut g = Vec16::zeros();
        for k in 0..N_COMBOS {
            if self.exposure[k] == 0.0 {
                continue;
            }
            let psi = &self.kets[k];
            let v = t.apply(psi);
            let p = norm_sqr(&v);
            let mu = self.exposure[k] * p;
            f += mu - self.weight[k] * mu.max(EXPECTED_FLOOR).ln();
            let coeff = if mu > EXPECTED_FLOOR { self.exposure[k] - self.weight[k] / p } else { self.exposure[k] };
            for j in 0..4 {
                g[j] += coeff * 2.0 * (v[j].conj() * psi[j]).re;
            }
            for (slot, (j, l)) in OFF_DIAGONAL.iter().enumerate() {
                let z = v[*j].conj() * psi[*l];
                g[4 + 2 * slot] += coeff * 2.0 * z.re;
                g[5 + 2 * slot] -= coeff * 2.0 * z.im;
            }
        }
        (f, g)
    }
}

const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn norm_sqr(v: &Ket) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn factor_from_params(x: &Vec16) -> Mat4 {
    let mut t = Mat4::zeros();
    for j in 0..4 {
        t.0[j][j] = x[j].into();
    }
    for (slot, &(j, l)) in OFF_DIAGONAL.iter().enumerate() {
        t.0[j][l] = Complex64::new(x[4 + 2 * slot], x[5 + 2 * slot]);
    }
    t
}

fn params_from_factor(t: &Mat4) -> Vec16 {
    let mut x = Vec16::zeros();
    for j in 0..4 {
        x[j] = t.0[j][j].re;
    }
    for (slot, &(j, l)) in OFF_DIAGONAL.iter().enumerate() {
        x[4 + 2 * slot] = t.0[j][l].re;
        x[5 + 2 * slot] = t.0[j][l].im;
    }
    x
}

fn density_from_params(x: &Vec16) -> Result<DensityMatrix> {
    let t = factor_from_params(x);
    let m = t.adjoint() * t;
    let herm = (m + m.adjoint()).scale(0.5);
    let tr = herm.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Degenerate("reconstructed factor vanishes".into()));
    }
    DensityMatrix::new(herm.scale(1.0 / tr))
}

/// Lower-triangular `T` with `T^dag T = rho`, for positive-definite `rho`.
fn factor_of(rho: &Mat4) -> Result<Mat4> {
    // reverse the basis order so that the standard lower Cholesky factor maps
    // to an upper factor U with rho = U U^dag; then T = U^dag
    let reversed = Matrix4::from_fn(|r, c| rho.0[3 - r][3 - c]);
    let chol = reversed.cholesky().ok_or_else(|| Error::Degenerate("seed matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut t = Mat4::zeros();
    for r in 0..4 {
        for c in 0..4 {
            // U = P L P, T = U^dag
            t.0[r][c] = l[(3 - c, 3 - r)].conj();
        }
    }
    Ok(t)
}

/// Linear-inversion estimate from the Pauli-like correlators of the three
/// settings per photon.
pub fn linear_inversion(counts: &[f64; N_COMBOS]) -> Mat4 {
    use PolarizationLabel::*;
    let sign_op = |label: PolarizationLabel| {
        let plus = label.ket().as_array();
        let minus = label.orthogonal().ket().as_array();
        let mut op = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                op[r][c] = plus[r] * plus[c].conj() - minus[r] * minus[c].conj();
            }
        }
        op
    };
    let identity = [[1.0.into(), 0.0.into()], [0.0.into(), 1.0.into()]];
    let settings = [H, D, R];
    let ops = settings.map(sign_op);
    // correlator <O_a (x) O_b> and marginals, averaged over the unused setting
    let mut corr = [[0.0; 3]; 3];
    let mut first = [0.0; 3];
    let mut second = [0.0; 3];
    let mut first_n = [0.0; 3];
    let mut second_n = [0.0; 3];
    for (ia, &a) in settings.iter().enumerate() {
        for (ib, &b) in settings.iter().enumerate() {
            let n = |x: PolarizationLabel, y: PolarizationLabel| counts[combination_index(x, y)];
            let pp = n(a, b);
            let pm = n(a, b.orthogonal());
            let mp = n(a.orthogonal(), b);
            let mm = n(a.orthogonal(), b.orthogonal());
            let total = pp + pm + mp + mm;
            if total <= 0.0 {
                continue;
            }
            corr[ia][ib] = (pp + mm - pm - mp) / total;
            first[ia] += pp + pm - mp - mm;
            first_n[ia] += total;
            second[ib] += pp + mp - pm - mm;
            second_n[ib] += total;
        }
    }
    let mut m = Mat4::identity();
    for i in 0..3 {
        if first_n[i] > 0.0 {
            m = m + Mat4::kron2(&ops[i], &identity).scale(first[i] / first_n[i]);
        }
        if second_n[i] > 0.0 {
            m = m + Mat4::kron2(&identity, &ops[i]).scale(second[i] / second_n[i]);
        }
        for j in 0..3 {
            m = m + Mat4::kron2(&ops[i], &ops[j]).scale(corr[i][j]);
        }
    }
    m.scale(0.25)
}

fn seed_params(counts: &[f64; N_COMBOS]) -> Result<Vec16> {
    let physical = project_to_physical(&linear_inversion(counts)).unwrap_or_else(|_| DensityMatrix::maximally_mixed());
    let mixed = physical.matrix().scale(0.999) + Mat4::identity().scale(0.25e-3);
    Ok(params_from_factor(&factor_of(&mixed)?))
}

struct Minimum {
    x: Vec16,
    f: f64,
    iterations: usize,
}

fn bfgs(problem: &Problem, start: Vec16, options: &MleOptions) -> Option<Minimum> {
    let mut x = start;
    let (mut f, mut g) = problem.objective_and_gradient(&x);
    let mut h = Mat16::identity();
    let mut small_steps = 0;
    for iteration in 1..=options.max_iterations {
        if g.amax() < 1e-12 {
            return Some(Minimum { x, f, iterations: iteration });
        }
        let mut d = -(h * g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            h = Mat16::identity();
            d = -g;
            slope = -g.norm_squared();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x + d * step;
            let ft = problem.objective(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, _)) = accepted else {
            // no descent along d: at the floating-point optimum or a stale metric
            if h != Mat16::identity() {
                h = Mat16::identity();
                continue;
            }
            return Some(Minimum { x, f, iterations: iteration });
        };
        let (f_new, g_new) = problem.objective_and_gradient(&x_new);
        let s = x_new - x;
        let y = g_new - g;
        let sy = s.dot(&y);
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let hy = h * y;
            h +=
                (s * s.transpose()) * ((sy + y.dot(&hy)) * rho * rho) - (hy * s.transpose() + s * hy.transpose()) * rho;
        }
        let improvement = (f - f_new) / f.abs().max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if improvement < options.tolerance {
            small_steps += 1;
            if small_steps >= 3 {
                return Some(Minimum { x, f, iterations: iteration });
            }
        } else {
            small_steps = 0;
        }
    }
    None
}

/// Maximum-likelihood state for one delay window. Counts are ordered as in
/// [`combination`].
pub fn mle_reconstruct(counts: &[f64; N_COMBOS]) -> Result<Reconstruction> {
    mle_reconstruct_with(counts, &MleOptions::default())
}

pub fn mle_reconstruct_with(counts: &[f64; N_COMBOS], options: &MleOptions) -> Result<Reconstruction> {
    let problem = Problem::new(counts)?;
    let seed = seed_params(counts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![seed];
    for _ in 0..options.random_starts {
        let mut x = Vec16::from_fn(|_, _| StandardNormal.sample(&mut rng));
        x *= 0.5;
        starts.push(x);
    }
    finish(&problem, starts, options)
}

/// Single optimization from a previous optimum, as used for bootstrap
/// replicas.
pub fn mle_reconstruct_from(
    counts: &[f64; N_COMBOS],
    start: &Reconstruction,
    options: &MleOptions,
) -> Result<Reconstruction> {
    let problem = Problem::new(counts)?;
    finish(&problem, vec![start.params], options)
}

fn finish(problem: &Problem, starts: Vec<Vec16>, options: &MleOptions) -> Result<Reconstruction> {
    let mut best: Option<Minimum> = None;
    let mut spent = 0;
    for start in starts {
        match bfgs(problem, start, options) {
            Some(m) => {
                spent += m.iterations;
                if best.as_ref().is_none_or(|b| m.f < b.f) {
                    best = Some(m);
                }
            }
            None => spent += options.max_iterations,
        }
    }
    let best = best.ok_or(Error::NonConvergence { iterations: spent })?;
    let total = problem.total();
    Ok(Reconstruction {
        rho: density_from_params(&best.x)?,
        total_counts: total,
        low_statistics: total < LOW_STATISTICS,
        iterations: best.iterations,
        objective: best.f,
        params: best.x,
    })
}

/// Expected counts `N ⟨ψ_ν|ρ|ψ_ν⟩` with `per_setting` pairs in each of the
/// nine settings.
pub fn expected_counts(rho: &DensityMatrix, per_setting: f64) -> [f64; N_COMBOS] {
    std::array::from_fn(|k| {
        let (a, b) = combination(k);
        per_setting * rho.matrix().expectation(&pair_ket(&a.ket(), &b.ket())).max(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{density_from_ket, fidelity_to_pure, negativity2n, TwoPhotonKet};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_state(rng: &mut ChaCha8Rng, rank: usize) -> DensityMatrix {
        let mut m = Mat4::zeros();
        for _ in 0..rank {
            let v: Ket =
                std::array::from_fn(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            m = m + Mat4::outer(&v, &v);
        }
        let tr = m.trace().re;
        DensityMatrix::new(m.scale(1.0 / tr)).unwrap()
    }

    #[test]
    fn combination_bookkeeping() {
        use PolarizationLabel::*;
        assert_eq!(combination_label(0), "H-H");
        assert_eq!(combination_label(combination_index(D, A)), "D-A");
        let mut per_setting = [0; 9];
        for k in 0..N_COMBOS {
            per_setting[setting_of(k)] += 1;
        }
        assert_eq!(per_setting, [4; 9]);
        assert_eq!(setting_of(combination_index(V, L)), setting_of(combination_index(H, R)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let counts: [f64; N_COMBOS] = std::array::from_fn(|_| rng.random_range(0.0..50.0));
        let problem = Problem::new(&counts).unwrap();
        let x = Vec16::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let (_, g) = problem.objective_and_gradient(&x);
        for i in 0..N_PARAMS {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (problem.objective(&xp) - problem.objective(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn cholesky_seed_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_state(&mut rng, 4);
        let t = factor_of(rho.matrix()).unwrap();
        for r in 0..4 {
            for c in r + 1..4 {
                assert_eq!(t.0[r][c], Complex64::new(0.0, 0.0));
            }
        }
        assert!((t.adjoint() * t).max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn linear_inversion_exact_for_born_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random_state(&mut rng, 2);
        let lin = linear_inversion(&expected_counts(&rho, 1000.0));
        assert!(lin.max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn phi_plus_from_born_counts() {
        let phi = TwoPhotonKet::phi_plus();
        let rho = density_from_ket(&phi).unwrap();
        let rec = mle_reconstruct(&expected_counts(&rho, 1e4)).unwrap();
        assert!(fidelity_to_pure(&rec.rho, &phi) >= 0.999);
        assert!(!rec.low_statistics);
    }

    #[test]
    fn uniform_counts_give_mixed_state() {
        let rec = mle_reconstruct(&[50.0; N_COMBOS]).unwrap();
        assert!(rec.rho.matrix().max_abs_diff(&Mat4::identity().scale(0.25)) < 1e-4);
        assert!(negativity2n(&rec.rho) < 0.01);
    }

    #[test]
    fn empty_counts_are_an_error() {
        assert!(matches!(mle_reconstruct(&[0.0; N_COMBOS]), Err(Error::EmptyWindow)));
        let mut few = [0.0; N_COMBOS];
        few[0] = 3.0;
        few[7] = 2.0;
        assert!(mle_reconstruct(&few).unwrap().low_statistics);
    }

    #[test]
    fn random_states_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for rank in [1, 2, 4] {
            for _ in 0..4 {
                let rho = random_state(&mut rng, rank);
                let rec = mle_reconstruct(&expected_counts(&rho, 1e6)).unwrap();
                assert!(rec.rho.trace_distance(&rho) < 1e-4, "rank {rank}: {}", rec.rho.trace_distance(&rho));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn permutation_of_combinations_is_irrelevant(seed in 0u64..10_000) {
            // relabelling the kets together with their counts leaves the problem unchanged
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let counts: [f64; N_COMBOS] = std::array::from_fn(|_| rng.random_range(0..200) as f64);
            let problem = Problem::new(&counts).unwrap();
            let mut order: Vec<usize> = (0..N_COMBOS).collect();
            for i in (1..N_COMBOS).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let shuffled = Problem {
                kets: std::array::from_fn(|k| problem.kets[order[k]]),
                counts: std::array::from_fn(|k| problem.counts[order[k]]),
                exposure: std::array::from_fn(|k| problem.exposure[order[k]]),
                weight: std::array::from_fn(|k| problem.weight[order[k]]),
            };
            let opts = MleOptions::default();
            let seed_x = seed_params(&counts).unwrap();
            let a = bfgs(&problem, seed_x, &opts).unwrap();
            let b = bfgs(&shuffled, seed_x, &opts).unwrap();
            let ra = density_from_params(&a.x).unwrap();
            let rb = density_from_params(&b.x).unwrap();
            prop_assert!(ra.matrix().max_abs_diff(rb.matrix()) < 1e-5);
        }

        #[test]
        fn output_is_physical(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let counts: [f64; N_COMBOS] = std::array::from_fn(|_| rng.random_range(0..30) as f64);
            prop_assume!(counts.iter().sum::<f64>() > 0.0);
            let rec = mle_reconstruct(&counts).unwrap();
            let m = rec.rho.matrix();
            prop_assert!((m.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(m.hermiticity_error() < 1e-12);
            prop_assert!(rec.rho.eigenvalues()[0] > -1e-10);
        }
    }
}
