use serde::{Deserialize, Serialize};

use super::linalg::{hermitian_eig, tensor_product, ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

const STATE_HERMITIAN_TOL: f64 = 1e-12;
const STATE_TRACE_TOL: f64 = 1e-12;
const STATE_EIGEN_TOL: f64 = 1e-10;

/// Trace-one positive semidefinite operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "state must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let dev = m.hermiticity_deviation();
        if dev > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidQuantum(format!(
                "state is not Hermitian (deviation {dev:e})"
            )));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > STATE_TRACE_TOL {
            return Err(Error::InvalidQuantum(format!("state has trace {tr}")));
        }
        let min = hermitian_eig(&m)?.values.last().copied().unwrap_or(0.0);
        if min < -STATE_EIGEN_TOL {
            return Err(Error::InvalidQuantum(format!("state has negative eigenvalue {min:e}")));
        }
        Ok(Self { m: m.hermitian_part() })
    }

    /// Renormalizes a positive operator with nonzero trace.
    pub fn from_unnormalized(m: &ComplexMatrix) -> Result<Self> {
        let tr = m.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidQuantum("operator has zero trace".into()));
        }
        Self::new(m.hermitian_part().scale_real(1.0 / tr))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if psi.is_empty() || norm == 0.0 {
            return Err(Error::InvalidQuantum("zero vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&v, &v))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            m: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            m: tensor_product(&self.m, &other.m),
        }
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(deserializer)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// `(1/√d) Σ_i |ii⟩` as a density matrix on `d·d`.
pub fn maximally_entangled_state(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "local dimension must be at least 2, got {d}"
        )));
    }
    let mut psi = vec![ZERO; d * d];
    for i in 0..d {
        psi[i * d + i] = ONE;
    }
    DensityMatrix::pure(&psi)
}

/// `mixing · 2P_anti/(d² - d) + (1 - mixing) · I/d²`.
pub fn werner_state(d: usize, mixing: f64) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "local dimension must be at least 2, got {d}"
        )));
    }
    if !(0.0..=1.0).contains(&mixing) {
        return Err(Error::InvalidArgument(format!(
            "mixing must lie in [0, 1], got {mixing}"
        )));
    }
    let n = d * d;
    let anti_weight = mixing * 2.0 / (n - d) as f64;
    let noise = (1.0 - mixing) / n as f64;
    // P_anti = (I - SWAP)/2 with SWAP|ij⟩ = |ji⟩.
    let m = ComplexMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (c / d, c % d);
        let id = f64::from(u8::from(r == c));
        let swap = f64::from(u8::from(i == l && j == k));
        C64::new(anti_weight * 0.5 * (id - swap) + noise * id, 0.0)
    });
    DensityMatrix::new(m)
}
