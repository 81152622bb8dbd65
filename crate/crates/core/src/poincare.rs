//! Polarization algebra on the Poincaré sphere.
//!
//! The six canonical projection bases are points `(theta, phi)` on the
//! sphere, mapped to Jones kets `cos(theta/2)|H> + e^{i phi} sin(theta/2)|V>`.
//! Two-photon projectors are ordered (XX photon, X photon).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::Mat4;

/// One of the six canonical polarization projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolarizationLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolarizationLabel {
    /// All labels in canonical order `H, V, D, A, R, L`.
    pub const ALL: [PolarizationLabel; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    /// The three settings a projection unit can be put in (transmitted port).
    pub const SETTINGS: [PolarizationLabel; 3] = [Self::H, Self::D, Self::R];

    pub fn orthogonal(self) -> Self {
        match self {
            Self::H => Self::V,
            Self::V => Self::H,
            Self::D => Self::A,
            Self::A => Self::D,
            Self::R => Self::L,
            Self::L => Self::R,
        }
    }

    /// The transmitted-port label of the basis this label belongs to.
    pub fn setting(self) -> Self {
        match self {
            Self::H | Self::V => Self::H,
            Self::D | Self::A => Self::D,
            Self::R | Self::L => Self::R,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Self::H => 'H',
            Self::V => 'V',
            Self::D => 'D',
            Self::A => 'A',
            Self::R => 'R',
            Self::L => 'L',
        }
    }

    pub fn coords(self) -> PoincareCoord {
        basis_coords(self)
    }

    pub fn ket(self) -> SinglePhotonKet {
        ket(basis_coords(self))
    }
}

impl fmt::Display for PolarizationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for PolarizationLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H" => Ok(Self::H),
            "V" => Ok(Self::V),
            "D" => Ok(Self::D),
            "A" => Ok(Self::A),
            "R" => Ok(Self::R),
            "L" => Ok(Self::L),
            other => Err(Error::Parse(format!("unknown polarization label {other:?}"))),
        }
    }
}

/// Point on the Poincaré sphere, `theta` in `[0, pi]`, `phi` in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareCoord {
    pub theta: f64,
    pub phi: f64,
}

impl PoincareCoord {
    pub fn new(theta: f64, phi: f64) -> Result<Self, Error> {
        if !(0.0..=PI).contains(&theta) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("theta {theta} outside [0, pi]")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument("phi is not finite".into()));
        }
        Ok(Self { theta, phi: phi.rem_euclid(2.0 * PI) })
    }
}

/// Jones vector on the `(H, V)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonKet {
    pub h: Complex64,
    pub v: Complex64,
}

impl SinglePhotonKet {
    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &SinglePhotonKet) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    pub fn as_array(&self) -> [Complex64; 2] {
        [self.h, self.v]
    }
}

/// Canonical sphere coordinates of a label. `phi` is fixed to 0 for H and V.
pub fn basis_coords(label: PolarizationLabel) -> PoincareCoord {
    use PolarizationLabel::*;
    let (theta, phi) = match label {
        H => (0.0, 0.0),
        V => (PI, 0.0),
        D => (FRAC_PI_2, 0.0),
        A => (FRAC_PI_2, PI),
        R => (FRAC_PI_2, 3.0 * FRAC_PI_2),
        L => (FRAC_PI_2, FRAC_PI_2),
    };
    PoincareCoord { theta, phi }
}

pub fn ket(coords: PoincareCoord) -> SinglePhotonKet {
    let half = 0.5 * coords.theta;
    SinglePhotonKet { h: Complex64::new(half.cos(), 0.0), v: Complex64::from_polar(half.sin(), coords.phi) }
}

/// Two-photon amplitude vector `|a> ⊗ |b>` in the order `HH, HV, VH, VV`.
pub fn pair_ket(first: &SinglePhotonKet, second: &SinglePhotonKet) -> [Complex64; 4] {
    [first.h * second.h, first.h * second.v, first.v * second.h, first.v * second.v]
}

/// Rank-one projector `|P_I><P_I| ⊗ |P_J><P_J|`; first slot is the XX photon.
pub fn pair_projector(first: PoincareCoord, second: PoincareCoord) -> Mat4 {
    let psi = pair_ket(&ket(first), &ket(second));
    Mat4::outer(&psi, &psi)
}
