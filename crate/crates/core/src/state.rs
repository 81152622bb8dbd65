//! Two-photon polarization states of the XX–X cascade.
//!
//! Amplitudes are ordered `HH, HV, VH, VV` with the XX photon in the first
//! slot and the X photon in the second.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen_hermitian4, eigenvalues_hermitian4, Mat4};

/// Planck constant in µeV·ps.
pub const PLANCK_UEV_PS: f64 = 4135.667696;

/// Precession period `h / fss` in ps.
pub fn precession_period(fss_uev: f64) -> f64 {
    PLANCK_UEV_PS / fss_uev
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonKet(pub [Complex64; 4]);

impl TwoPhotonKet {
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn phi_plus() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        TwoPhotonKet([s, 0.0.into(), 0.0.into(), s])
    }

    pub fn phi_minus() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        TwoPhotonKet([s, 0.0.into(), 0.0.into(), -s])
    }

    /// `<other|self>`
    pub fn overlap(&self, other: &[Complex64; 4]) -> Complex64 {
        other.iter().zip(&self.0).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Cascade state `(|HH> + e^{-i 2 pi dt fss / h} |VV>) / sqrt 2`.
pub fn cascade_ket(delta_tau_ps: f64, fss_uev: f64) -> Result<TwoPhotonKet> {
    if !(fss_uev >= 0.0) {
        return Err(Error::InvalidArgument(format!("fine-structure splitting {fss_uev} < 0")));
    }
    if !(delta_tau_ps >= 0.0) {
        return Err(Error::InvalidArgument(format!("delay {delta_tau_ps} < 0")));
    }
    let phase = -2.0 * PI * delta_tau_ps * fss_uev / PLANCK_UEV_PS;
    let s = FRAC_1_SQRT_2;
    Ok(TwoPhotonKet([Complex64::new(s, 0.0), 0.0.into(), 0.0.into(), Complex64::from_polar(s, phase)]))
}

/// Two-qubit density matrix. Construction checks Hermiticity, unit trace and
/// positivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat4);

impl DensityMatrix {
    pub fn new(m: Mat4) -> Result<Self> {
        let herm = m.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::NotNormalized(tr.re));
        }
        let eig = eigenvalues_hermitian4(&m)?;
        if eig[0] < -1e-9 {
            return Err(Error::InvalidArgument(format!("negative eigenvalue {}", eig[0])));
        }
        Ok(Self(m))
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat4::identity().scale(0.25))
    }

    /// `p |Phi+><Phi+| + (1 - p) I/4`
    pub fn werner(p: f64) -> Self {
        let pure = density_from_ket(&TwoPhotonKet::phi_plus()).expect("normalized");
        Self(pure.0.scale(p) + Mat4::identity().scale(0.25 * (1.0 - p)))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        eigenvalues_hermitian4(&self.0).expect("density matrix is Hermitian")
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = self.0 - other.0;
        let e = eigenvalues_hermitian4(&diff).expect("difference of Hermitian matrices");
        0.5 * e.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Conjugate by `U_xx ⊗ U_x`.
    pub fn local_rotate(&self, u_xx: &[[Complex64; 2]; 2], u_x: &[[Complex64; 2]; 2]) -> Self {
        let u = Mat4::kron2(u_xx, u_x);
        Self(u * self.0 * u.adjoint())
    }

    /// Mixture `sum w_k rho_k / sum w_k`.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::EmptyWindow);
        }
        let mut m = Mat4::zeros();
        for (w, rho) in parts {
            m = m + rho.0.scale(*w / total);
        }
        Ok(Self(m))
    }
}

pub fn density_from_ket(psi: &TwoPhotonKet) -> Result<DensityMatrix> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n.sqrt()));
    }
    Ok(DensityMatrix(Mat4::outer(&psi.0, &psi.0)))
}

/// Transpose on the X (second) photon index.
pub fn partial_transpose(rho: &DensityMatrix) -> Mat4 {
    partial_transpose_matrix(&rho.0)
}

pub(crate) fn partial_transpose_matrix(m: &Mat4) -> Mat4 {
    let mut out = Mat4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    // <a b| rho |c d>  ->  <a d| rho^T_B |c b>
                    out.0[2 * a + d][2 * c + b] = m.0[2 * a + b][2 * c + d];
                }
            }
        }
    }
    out
}

/// Entanglement negativity reported as `2n`, with
/// `n = sum |negative eigenvalues of rho^T_B|`.
pub fn negativity2n(rho: &DensityMatrix) -> f64 {
    let pt = partial_transpose(rho);
    let eig = eigenvalues_hermitian4(&pt).expect("partial transpose is Hermitian");
    2.0 * eig.iter().map(|&x| (-x).max(0.0)).sum::<f64>()
}

pub fn fidelity_to_pure(rho: &DensityMatrix, psi: &TwoPhotonKet) -> f64 {
    rho.0.expectation(&psi.0)
}

/// Nearest PSD unit-trace matrix by clipping negative eigenvalues.
pub fn project_to_physical(m: &Mat4) -> Result<DensityMatrix> {
    let herm = (*m + m.adjoint()).scale(0.5);
    let eig = eigen_hermitian4(&herm)?;
    let clipped = eig.reconstruct_with(|x| x.max(0.0));
    let tr = clipped.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Degenerate("no positive spectrum".into()));
    }
    Ok(DensityMatrix(clipped.scale(1.0 / tr)))
}

/// On-disk form: nested `[re, im]` pairs, row-major, basis `HH, HV, VH, VV`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixDocument {
    pub basis: [String; 4],
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub delay_window_ps: [f64; 2],
    pub coincidences: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DensityMatrixDocument {
    pub fn new(rho: &DensityMatrix, delay_window_ps: [f64; 2], coincidences: u64) -> Self {
        let matrix = (rho.0).0.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect();
        Self {
            basis: ["HH", "HV", "VH", "VV"].map(String::from),
            matrix,
            delay_window_ps,
            coincidences,
            two_n: Some(negativity2n(rho)),
            config_hash: None,
        }
    }

    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        if self.matrix.len() != 4 || self.matrix.iter().any(|r| r.len() != 4) {
            return Err(Error::Parse("density matrix must be 4x4".into()));
        }
        let mut m = Mat4::zeros();
        for (r, row) in self.matrix.iter().enumerate() {
            for (c, z) in row.iter().enumerate() {
                m.0[r][c] = Complex64::new(z[0], z[1]);
            }
        }
        DensityMatrix::new(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
