//! Time-ordered stroke propagators for linear field ramps.
//!
//! Each step applies the exact exponential of a Hermitian generator, so the
//! result is unitary up to rounding for any step size. The step count is
//! doubled until a Richardson estimate of the discretisation error drops
//! below the requested tolerance.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{commutator, expm_neg_i_hermitian, max_abs, unitarity_defect, CMatrix4, I};
use crate::spin_model::{build_hamiltonian, EigenSystem, EngineParams};

/// Richardson estimates under this are treated as rounding noise.
const ROUNDING_FLOOR: f64 = 1e-12;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Upper bound on the number of steps tried before giving up.
pub const MAX_STEPS: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("integration tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error(
        "cannot reach tolerance {tol:e} within {steps} steps \
         (error estimate {achieved:e}, unitarity defect {unitarity_defect:e})"
    )]
    StepUnderflow {
        tol: f64,
        steps: usize,
        achieved: f64,
        unitarity_defect: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampDirection {
    /// `B(t) = B_start + (B_end - B_start) t / tau`
    Forward,
    /// The forward ramp traversed backwards in time, `B(tau - t)`.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    pub field_start: f64,
    pub field_end: f64,
    pub tau: f64,
    pub direction: RampDirection,
}

impl RampProtocol {
    pub fn forward(field_start: f64, field_end: f64, tau: f64) -> Self {
        Self {
            field_start,
            field_end,
            tau,
            direction: RampDirection::Forward,
        }
    }

    pub fn reversed(field_start: f64, field_end: f64, tau: f64) -> Self {
        Self {
            direction: RampDirection::Reversed,
            ..Self::forward(field_start, field_end, tau)
        }
    }

    /// Expansion stroke A -> B.
    pub fn expansion(params: &EngineParams) -> Self {
        Self::forward(params.field_initial(), params.field_final(), params.tau())
    }

    /// Compression stroke C -> D: the expansion ramp run as `B(tau - t)`.
    pub fn compression(params: &EngineParams) -> Self {
        Self::reversed(params.field_initial(), params.field_final(), params.tau())
    }

    pub fn field_at(&self, t: f64) -> f64 {
        let s = match self.direction {
            RampDirection::Forward => t,
            RampDirection::Reversed => self.tau - t,
        };
        self.field_start + (self.field_end - self.field_start) * (s / self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `exp(-i H(t + h/2) h)` per step; second order.
    ExponentialMidpoint,
    /// Two-node Gauss-Legendre Magnus expansion with the commutator term;
    /// fourth order.
    #[default]
    Magnus4,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::ExponentialMidpoint => 2,
            Scheme::Magnus4 => 4,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ExponentialMidpoint => "exponential-midpoint",
            Scheme::Magnus4 => "magnus4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub matrix: CMatrix4,
    pub protocol: RampProtocol,
    pub scheme: Scheme,
    pub steps: usize,
    /// Richardson estimate of the remaining discretisation error (max norm).
    pub tolerance_achieved: f64,
}

impl Propagator {
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }
}

fn step_generator(
    params: &EngineParams,
    protocol: &RampProtocol,
    scheme: Scheme,
    t: f64,
    h: f64,
) -> CMatrix4 {
    let ham = |t: f64| build_hamiltonian(params, protocol.field_at(t)).entries;
    match scheme {
        Scheme::ExponentialMidpoint => ham(t + 0.5 * h) * Complex64::new(h, 0.0),
        Scheme::Magnus4 => {
            let offset = 3.0_f64.sqrt() / 6.0;
            let h1 = ham(t + h * (0.5 - offset));
            let h2 = ham(t + h * (0.5 + offset));
            let c = 3.0_f64.sqrt() / 12.0 * h * h;
            (h1 + h2) * Complex64::new(0.5 * h, 0.0) - commutator(&h2, &h1) * (I * c)
        }
    }
}

/// Propagator over the whole ramp with a fixed number of equal steps.
pub fn propagate_fixed(
    params: &EngineParams,
    protocol: &RampProtocol,
    scheme: Scheme,
    steps: usize,
) -> CMatrix4 {
    let steps = steps.max(1);
    let h = protocol.tau / steps as f64;
    (0..steps).fold(CMatrix4::identity(), |u, k| {
        let g = step_generator(params, protocol, scheme, k as f64 * h, h);
        expm_neg_i_hermitian(&g) * u
    })
}

/// `T exp(-i int_0^tau H(B(t)) dt)` with the default scheme.
pub fn evolve(
    params: &EngineParams,
    protocol: &RampProtocol,
    tol: f64,
) -> Result<Propagator, IntegrationError> {
    evolve_with(params, protocol, Scheme::default(), tol)
}

pub fn evolve_with(
    params: &EngineParams,
    protocol: &RampProtocol,
    scheme: Scheme,
    tol: f64,
) -> Result<Propagator, IntegrationError> {
    evolve_bounded(params, protocol, scheme, tol, MAX_STEPS)
}

fn evolve_bounded(
    params: &EngineParams,
    protocol: &RampProtocol,
    scheme: Scheme,
    tol: f64,
    max_steps: usize,
) -> Result<Propagator, IntegrationError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(IntegrationError::InvalidTolerance(tol));
    }
    let omega = 2.0
        * params
            .coupling()
            .max(params.k_at(protocol.field_start))
            .max(params.k_at(protocol.field_end));
    let mut steps = ((protocol.tau * omega).ceil() as usize).clamp(1, max_steps);
    let mut prev = propagate_fixed(params, protocol, scheme, steps);
    let denom = f64::from((1u32 << scheme.order()) - 1);
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    loop {
        let next_steps = steps * 2;
        let cur = propagate_fixed(params, protocol, scheme, next_steps);
        let estimate = max_abs(&(cur - prev)) / denom;
        let defect = unitarity_defect(&cur);
        if estimate <= tol && defect <= tol {
            return Ok(Propagator {
                matrix: cur,
                protocol: *protocol,
                scheme,
                steps: next_steps,
                tolerance_achieved: estimate,
            });
        }
        // below the rounding floor further doubling only accumulates error
        if estimate < ROUNDING_FLOOR && estimate >= 0.5 * best {
            stalled += 1;
        } else {
            stalled = 0;
        }
        best = best.min(estimate);
        if next_steps >= max_steps || stalled >= 3 {
            return Err(IntegrationError::StepUnderflow {
                tol,
                steps: next_steps,
                achieved: estimate,
                unitarity_defect: defect,
            });
        }
        steps = next_steps;
        prev = cur;
    }
}

/// `A_lm = <to_l| U |from_m>`
pub fn amplitude_matrix(
    u: &Propagator,
    from_basis: &EigenSystem,
    to_basis: &EigenSystem,
) -> CMatrix4 {
    to_basis.unitary().adjoint() * u.matrix * from_basis.unitary()
}
