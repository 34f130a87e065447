//! Two spins with anisotropic XY coupling in a homogeneous transverse field.
//!
//! # Basis ordering
//!
//! Every matrix and vector in this crate is written in the computational
//! basis ordered as
//!
//! | index | state  |
//! |-------|--------|
//! | 0     | `|11>` |
//! | 1     | `|10>` |
//! | 2     | `|01>` |
//! | 3     | `|00>` |
//!
//! with `sz|1> = +|1>` and `sz|0> = -|0>`, so `B (sz1 + sz2)` is `+2B` on
//! `|11>` and `-2B` on `|00>`. The Hamiltonian never couples the sectors
//! `{|11>, |00>}` and `{|10>, |01>}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{max_abs, CMatrix4, CVector4, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} = {value} is out of range (expected {expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("hot bath temperature {hot} must exceed cold bath temperature {cold}")]
    HotBathNotHotter { hot: f64, cold: f64 },
}

/// How the heating stroke B -> C is realised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EngineMode {
    /// Non-selective Bell-basis measurement.
    MeasurementBased,
    /// Complete thermalisation with a hot bath.
    TwoBath { hot_temperature: f64 },
}

/// Physical and protocol parameters of one engine configuration.
///
/// Units: `hbar = k_B = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    coupling: f64,
    anisotropy: f64,
    field_initial: f64,
    field_final: f64,
    temperature: f64,
    tau: f64,
    mode: EngineMode,
}

fn check(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<(), ParamError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            value,
            expected,
        })
    }
}

impl EngineParams {
    pub fn new(
        coupling: f64,
        anisotropy: f64,
        field_initial: f64,
        field_final: f64,
        temperature: f64,
        tau: f64,
        mode: EngineMode,
    ) -> Result<Self, ParamError> {
        check("J", coupling, coupling > 0.0, "J > 0")?;
        check(
            "gamma",
            anisotropy,
            (-1.0..=1.0).contains(&anisotropy),
            "-1 <= gamma <= 1",
        )?;
        check("B1", field_initial, field_initial >= 0.0, "B1 >= 0")?;
        check("B2", field_final, field_final >= 0.0, "B2 >= 0")?;
        check("T", temperature, temperature > 0.0, "T > 0")?;
        check("tau", tau, tau > 0.0, "tau > 0")?;
        if let EngineMode::TwoBath { hot_temperature } = mode {
            check("T_hot", hot_temperature, hot_temperature > 0.0, "T_hot > 0")?;
            if hot_temperature <= temperature {
                return Err(ParamError::HotBathNotHotter {
                    hot: hot_temperature,
                    cold: temperature,
                });
            }
        }
        Ok(Self {
            coupling,
            anisotropy,
            field_initial,
            field_final,
            temperature,
            tau,
            mode,
        })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, ParamError> {
        Self::new(
            self.coupling,
            self.anisotropy,
            self.field_initial,
            self.field_final,
            self.temperature,
            tau,
            self.mode,
        )
    }

    pub fn with_mode(&self, mode: EngineMode) -> Result<Self, ParamError> {
        Self::new(
            self.coupling,
            self.anisotropy,
            self.field_initial,
            self.field_final,
            self.temperature,
            self.tau,
            mode,
        )
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    pub fn anisotropy(&self) -> f64 {
        self.anisotropy
    }
    pub fn field_initial(&self) -> f64 {
        self.field_initial
    }
    pub fn field_final(&self) -> f64 {
        self.field_final
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    /// `K = sqrt(B^2 + gamma^2 J^2)`
    pub fn k_at(&self, field: f64) -> f64 {
        field.hypot(self.anisotropy * self.coupling)
    }
}

/// `H(B)` in the computational ordering described in the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub entries: CMatrix4,
    pub field: f64,
}

/// `B (sz1 + sz2) + J[(1 + gamma) sx1 sx2 + (1 - gamma) sy1 sy2]`
pub fn build_hamiltonian(params: &EngineParams, field: f64) -> Hamiltonian {
    let j = params.coupling;
    let g = params.anisotropy;
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut h = CMatrix4::zeros();
    h[(0, 0)] = c(2.0 * field);
    h[(3, 3)] = c(-2.0 * field);
    // sx sx flips both spins with +1 everywhere; sy sy contributes -1 on
    // |11><00| and +1 on |10><01|.
    h[(0, 3)] = c(2.0 * g * j);
    h[(3, 0)] = c(2.0 * g * j);
    h[(1, 2)] = c(2.0 * j);
    h[(2, 1)] = c(2.0 * j);
    Hamiltonian { entries: h, field }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("eigenpair {label} fails H psi = E psi with residual {residual:e}")]
pub struct EigenCheckError {
    pub label: usize,
    pub residual: f64,
}

/// Labelled eigenpairs of `H(B)`.
///
/// Labels follow the closed-form solution, not sorted order:
/// `E0 = -2K`, `E1 = -2J`, `E2 = 2J`, `E3 = 2K`. States 0 and 3 live in the
/// `{|11>, |00>}` sector, states 1 and 2 in `{|10>, |01>}` and do not depend
/// on the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSystem {
    pub energies: [f64; 4],
    pub states: [CVector4; 4],
    pub k: f64,
    pub field: f64,
}

impl EigenSystem {
    /// `<psi_i| m |psi_j>`
    pub fn matrix_element(&self, m: &CMatrix4, i: usize, j: usize) -> Complex64 {
        (self.states[i].adjoint() * m * self.states[j])[(0, 0)]
    }

    /// `m` expressed in this eigenbasis.
    pub fn to_eigenbasis(&self, m: &CMatrix4) -> CMatrix4 {
        let p = self.unitary();
        p.adjoint() * m * p
    }

    /// Columns are the eigenstates.
    pub fn unitary(&self) -> CMatrix4 {
        CMatrix4::from_columns(&self.states)
    }

    /// `sum_k E_k |psi_k><psi_k|`
    pub fn reconstruct(&self) -> CMatrix4 {
        self.states
            .iter()
            .zip(self.energies)
            .fold(CMatrix4::zeros(), |acc, (v, e)| {
                acc + v * v.adjoint() * Complex64::new(e, 0.0)
            })
    }
}

/// Make the largest-magnitude component real positive; ties go to the
/// lowest index.
fn fix_phase(v: CVector4) -> CVector4 {
    let mut pivot = 0;
    for i in 1..4 {
        if v[i].norm() > v[pivot].norm() + 1e-12 {
            pivot = i;
        }
    }
    let z = v[pivot];
    if z.norm() == 0.0 {
        return v;
    }
    v * (z.conj() / z.norm())
}

fn basis_vector(pairs: &[(usize, f64)]) -> CVector4 {
    let mut v = CVector4::from_element(ZERO);
    for &(i, x) in pairs {
        v[i] = Complex64::new(x, 0.0);
    }
    v
}

pub fn eigensystem(h: &Hamiltonian, params: &EngineParams) -> Result<EigenSystem, EigenCheckError> {
    let b = h.field;
    let gj = params.anisotropy * params.coupling;
    let k = params.k_at(b);
    let j = params.coupling;
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let (psi0, psi3) = if gj.abs() <= 1e-8 * b {
        // gamma J -> 0: the pair becomes |00>, |11>
        (basis_vector(&[(3, 1.0)]), basis_vector(&[(0, 1.0)]))
    } else {
        // K - B = (gamma J)^2 / (K + B) avoids the cancellation in the
        // textbook normalisation sqrt(K^2 - B K).
        let k_minus_b = gj * gj / (k + b);
        let small = (k_minus_b / (2.0 * k)).sqrt();
        let large = ((k + b) / (2.0 * k)).sqrt();
        let s = gj.signum();
        (
            basis_vector(&[(0, -small), (3, s * large)]),
            basis_vector(&[(0, large), (3, s * small)]),
        )
    };
    let psi1 = basis_vector(&[(1, -half), (2, half)]);
    let psi2 = basis_vector(&[(1, half), (2, half)]);

    let es = EigenSystem {
        energies: [-2.0 * k, -2.0 * j, 2.0 * j, 2.0 * k],
        states: [psi0, psi1, psi2, psi3].map(fix_phase),
        k,
        field: b,
    };

    let scale = max_abs(&h.entries).max(1.0);
    for (label, (v, e)) in es.states.iter().zip(es.energies).enumerate() {
        let r = h.entries * v - v * Complex64::new(e, 0.0);
        let residual = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if residual > 1e-10 * scale {
            return Err(EigenCheckError { label, residual });
        }
    }
    Ok(es)
}

/// `eigensystem(build_hamiltonian(params, field))`
pub fn eigensystem_at(params: &EngineParams, field: f64) -> Result<EigenSystem, EigenCheckError> {
    eigensystem(&build_hamiltonian(params, field), params)
}
