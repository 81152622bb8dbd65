//! Fixed-size complex 4×4 matrices and a Hermitian eigensolver.
//!
//! The eigensolver runs cyclic Jacobi rotations on the 8×8 real symmetric
//! embedding `[[A, -B], [B, A]]` of `M = A + iB`. Every eigenvalue of `M`
//! appears twice in the embedding.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[Complex64; 4]; 4]);

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[Complex64::new(0.0, 0.0); 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real_diag(d: [f64; 4]) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = d[i].into();
        }
        m
    }

    /// `|a><b|`
    pub fn outer(a: &[Complex64; 4], b: &[Complex64; 4]) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = a[r] * b[c].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = self.0[c][r].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        self.0.iter().flatten().zip(other.0.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn apply(&self, v: &[Complex64; 4]) -> [Complex64; 4] {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for r in 0..4 {
            out[r] = (0..4).map(|c| self.0[r][c] * v[c]).sum();
        }
        out
    }

    /// Real part of `<v|M|v>`.
    pub fn expectation(&self, v: &[Complex64; 4]) -> f64 {
        let mv = self.apply(v);
        (0..4).map(|i| v[i].conj() * mv[i]).sum::<Complex64>().re
    }

    /// `Tr(self * other)`
    pub fn trace_product(&self, other: &Mat4) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                acc += self.0[r][c] * other.0[c][r];
            }
        }
        acc
    }

    /// Kronecker product of two 2×2 matrices, first factor on the XX slot.
    pub fn kron2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Self {
        let mut m = Self::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m.0[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Mat4 {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Mat4 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.0[r][c]
    }
}

impl Add for Mat4 {
    type Output = Mat4;

    fn add(mut self, rhs: Mat4) -> Mat4 {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
        self
    }
}

impl Sub for Mat4 {
    type Output = Mat4;

    fn sub(mut self, rhs: Mat4) -> Mat4 {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] -= rhs.0[r][c];
            }
        }
        self
    }
}

impl Mul for Mat4 {
    type Output = Mat4;

    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut m = Mat4::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = (0..4).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        m
    }
}

/// Eigenvalues (ascending) and matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: [f64; 4],
    pub vectors: [[Complex64; 4]; 4],
}

impl HermitianEigen {
    /// `sum_k f(lambda_k) |v_k><v_k|`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat4 {
        let mut m = Mat4::zeros();
        for k in 0..4 {
            let w = f(self.values[k]);
            if w != 0.0 {
                m = m + Mat4::outer(&self.vectors[k], &self.vectors[k]).scale(w);
            }
        }
        m
    }
}

/// Spectrum of a Hermitian 4×4 matrix, ascending.
pub fn eigenvalues_hermitian4(m: &Mat4) -> Result<[f64; 4]> {
    Ok(eigen_hermitian4(m)?.values)
}

pub fn eigen_hermitian4(m: &Mat4) -> Result<HermitianEigen> {
    let scale = m.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let herm = m.hermiticity_error();
    if herm > 1e-10 * scale {
        return Err(Error::NotHermitian(herm));
    }

    let mut a = [[0.0f64; 8]; 8];
    for r in 0..4 {
        for c in 0..4 {
            // symmetrize to remove sub-tolerance asymmetry
            let z = 0.5 * (m.0[r][c] + m.0[c][r].conj());
            a[r][c] = z.re;
            a[r + 4][c + 4] = z.re;
            a[r + 4][c] = z.im;
            a[r][c + 4] = -z.im;
        }
    }
    let (evals, evecs) = jacobi_symmetric8(a, scale);

    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&i, &j| evals[i].total_cmp(&evals[j]));

    // Each complex eigenvector shows up as a real pair (x; y), (-y; x).
    let mut vectors: Vec<[Complex64; 4]> = Vec::with_capacity(4);
    for &k in &order {
        if vectors.len() == 4 {
            break;
        }
        let mut v = [Complex64::new(0.0, 0.0); 4];
        for i in 0..4 {
            v[i] = Complex64::new(evecs[i][k], evecs[i + 4][k]);
        }
        for u in &vectors {
            let proj: Complex64 = (0..4).map(|i| u[i].conj() * v[i]).sum();
            for i in 0..4 {
                v[i] -= proj * u[i];
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            v.iter_mut().for_each(|z| *z /= norm);
            vectors.push(v);
        }
    }
    if vectors.len() != 4 {
        return Err(Error::Degenerate("eigenvector extraction failed".into()));
    }

    let mut pairs: Vec<(f64, [Complex64; 4])> = vectors.into_iter().map(|v| (m.expectation(&v), v)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    for (lambda, v) in &pairs {
        let mv = m.apply(v);
        let residual = (0..4).map(|i| (mv[i] - v[i] * *lambda).norm_sqr()).sum::<f64>().sqrt();
        if residual > 1e-9 * scale {
            return Err(Error::Degenerate(format!("eigen residual {residual:.3e}")));
        }
    }

    Ok(HermitianEigen {
        values: [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0],
        vectors: [pairs[0].1, pairs[1].1, pairs[2].1, pairs[3].1],
    })
}

/// Cyclic Jacobi; returns eigenvalues and eigenvectors as columns.
fn jacobi_symmetric8(mut a: [[f64; 8]; 8], scale: f64) -> ([f64; 8], [[f64; 8]; 8]) {
    let mut v = [[0.0f64; 8]; 8];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let off = |a: &[[f64; 8]; 8]| {
        let mut s = 0.0;
        for p in 0..8 {
            for q in 0..8 {
                if p != q {
                    s += a[p][q] * a[p][q];
                }
            }
        }
        s.sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) < JACOBI_TOL * scale {
            break;
        }
        for p in 0..7 {
            for q in (p + 1)..8 {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..8 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..8 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut evals = [0.0; 8];
    for i in 0..8 {
        evals[i] = a[i][i];
    }
    (evals, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng) -> Mat4 {
        let mut m = Mat4::zeros();
        for r in 0..4 {
            m.0[r][r] = rng.random_range(-1.0..1.0).into();
            for c in (r + 1)..4 {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m.0[r][c] = z;
                m.0[c][r] = z.conj();
            }
        }
        m
    }

    #[test]
    fn identity_spectrum() {
        let e = eigenvalues_hermitian4(&Mat4::identity()).unwrap();
        for x in e {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_spectrum() {
        let e = eigenvalues_hermitian4(&Mat4::from_real_diag([0.3, 0.1, 0.4, 0.2])).unwrap();
        let expected = [0.1, 0.2, 0.3, 0.4];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = Mat4::identity();
        m.0[0][1] = Complex64::new(0.5, 0.0);
        assert!(matches!(eigenvalues_hermitian4(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn random_matrices_are_reconstructed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = random_hermitian(&mut rng);
            let eig = eigen_hermitian4(&m).unwrap();
            let back = eig.reconstruct_with(|x| x);
            assert!(back.max_abs_diff(&m) < 1e-10);
            let trace: f64 = eig.values.iter().sum();
            assert!((trace - m.trace().re).abs() < 1e-10);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // projector with threefold degenerate zero eigenvalue
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [Complex64::new(s, 0.0), 0.0.into(), 0.0.into(), Complex64::new(0.0, s)];
        let p = Mat4::outer(&v, &v);
        let e = eigenvalues_hermitian4(&p).unwrap();
        assert!(e[0].abs() < 1e-12 && e[2].abs() < 1e-12 && (e[3] - 1.0).abs() < 1e-12);
    }
}
