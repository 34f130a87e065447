//! Non-unitary strokes: non-selective projective measurement and complete
//! thermalisation.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{hermiticity_defect, max_abs, trace, CMatrix4, CVector4, ZERO};
use crate::spin_model::{eigensystem_at, EigenCheckError, EigenSystem, EngineParams, Hamiltonian};

/// Eigenvalues in `[-NEGATIVITY_TOLERANCE, 0)` are accepted as rounding noise.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("density matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(Complex64),
    #[error("density matrix has eigenvalue {0:e} below -{NEGATIVITY_TOLERANCE:e}")]
    NotPositive(f64),
    #[error("measurement projectors do not resolve the identity (defect {0:e})")]
    IncompleteBasis(f64),
}

/// Hermitian, unit-trace, positive semidefinite 4x4 operator in the
/// computational basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMatrix4);

impl DensityMatrix {
    pub fn new(entries: CMatrix4) -> Result<Self, StateError> {
        let h = hermiticity_defect(&entries);
        if h > 1e-12 {
            return Err(StateError::NotHermitian(h));
        }
        let tr = trace(&entries);
        if (tr - 1.0).norm() > 1e-12 {
            return Err(StateError::BadTrace(tr));
        }
        let min = SymmetricEigen::new(entries).eigenvalues.min();
        if min < -NEGATIVITY_TOLERANCE {
            return Err(StateError::NotPositive(min));
        }
        Ok(Self(entries))
    }

    pub fn pure(psi: &CVector4) -> Result<Self, StateError> {
        Self::new(psi * psi.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self(CMatrix4::identity() * Complex64::new(0.25, 0.0))
    }

    pub fn entries(&self) -> &CMatrix4 {
        &self.0
    }

    /// `U rho U^dagger`; the caller guarantees `u` is unitary.
    pub fn conjugate(&self, u: &CMatrix4) -> Result<Self, StateError> {
        Self::new(u * self.0 * u.adjoint())
    }

    /// `Re Tr(rho H)`
    pub fn energy(&self, h: &Hamiltonian) -> f64 {
        trace(&(self.0 * h.entries)).re
    }
}

/// Rank-one projectors `|M_a><M_a|` of a complete orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBasis {
    vectors: [CVector4; 4],
}

impl MeasurementBasis {
    pub fn new(vectors: [CVector4; 4]) -> Result<Self, StateError> {
        let sum = vectors
            .iter()
            .fold(CMatrix4::zeros(), |acc, v| acc + v * v.adjoint());
        let defect = max_abs(&(sum - CMatrix4::identity()));
        let norm_defect = vectors
            .iter()
            .map(|v| (v.norm_squared() - 1.0).abs())
            .fold(0.0, f64::max);
        let worst = defect.max(norm_defect);
        if worst > 1e-12 {
            return Err(StateError::IncompleteBasis(worst));
        }
        Ok(Self { vectors })
    }

    /// `(|00> +- |11>)/sqrt 2`, `(|01> +- |10>)/sqrt 2`
    pub fn bell() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = |a: [f64; 4]| CVector4::from_fn(|i, _| Complex64::new(a[i] * r, 0.0));
        Self {
            // ordering |11>, |10>, |01>, |00>
            vectors: [
                v([1.0, 0.0, 0.0, 1.0]),
                v([-1.0, 0.0, 0.0, 1.0]),
                v([0.0, 1.0, 1.0, 0.0]),
                v([0.0, -1.0, 1.0, 0.0]),
            ],
        }
    }

    pub fn projectors(&self) -> [CMatrix4; 4] {
        self.vectors.map(|v| v * v.adjoint())
    }
}

impl Default for MeasurementBasis {
    fn default() -> Self {
        Self::bell()
    }
}

/// Boltzmann weights of `energies` at `temperature`, normalised.
pub fn boltzmann_populations(energies: &[f64; 4], temperature: f64) -> [f64; 4] {
    let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w = energies.map(|e| (-(e - ground) / temperature).exp());
    let z: f64 = w.iter().sum();
    w.map(|x| x / z)
}

/// `exp(-H(B)/T) / Tr exp(-H(B)/T)`
pub fn gibbs_state(
    params: &EngineParams,
    field: f64,
    temperature: f64,
) -> Result<DensityMatrix, EigenCheckError> {
    let es = eigensystem_at(params, field)?;
    let pops = boltzmann_populations(&es.energies, temperature);
    let rho = es
        .states
        .iter()
        .zip(pops)
        .fold(CMatrix4::zeros(), |acc, (v, p)| {
            acc + v * v.adjoint() * Complex64::new(p, 0.0)
        });
    // the sum is Hermitian up to rounding in the off-diagonal products
    let rho = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(DensityMatrix(rho))
}

/// `sum_a M_a rho M_a`
pub fn measure_nonselective(rho: &DensityMatrix, basis: &MeasurementBasis) -> DensityMatrix {
    let out = basis
        .projectors()
        .iter()
        .fold(CMatrix4::zeros(), |acc, p| acc + p * rho.0 * p);
    DensityMatrix((out + out.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Sum of `|<psi_i|rho|psi_j>|` over `i != j`.
pub fn coherence_l1(rho: &DensityMatrix, basis: &EigenSystem) -> f64 {
    let m = basis.to_eigenbasis(&rho.0);
    let mut total = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                total += m[(i, j)].norm();
            }
        }
    }
    total
}

/// `rho` in `basis` with the diagonal zeroed.
pub fn off_diagonal_part(rho: &DensityMatrix, basis: &EigenSystem) -> CMatrix4 {
    let mut m = basis.to_eigenbasis(&rho.0);
    for i in 0..4 {
        m[(i, i)] = ZERO;
    }
    m
}
