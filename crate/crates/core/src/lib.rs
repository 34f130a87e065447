//! Measurement-fuelled quantum Otto engine on two coupled spins, with
//! full-counting-statistics work distributions.
//!
//! The working system is a pair of spins with anisotropic XY coupling in a
//! homogeneous field (see [`spin_model`] for the basis ordering shared by
//! every module). A cycle is two field ramps separated by a Bell-basis
//! measurement (heating) and a cold bath (cooling); [`fcs`] turns the
//! resulting states and propagators into exact quasi-probability work
//! distributions, whose negative weights trace back to the coherence the
//! measurement leaves behind.

pub mod cli;
pub mod cycle;
pub mod error;
pub mod fcs;
pub mod linalg;
pub mod propagator;
pub mod spin_model;
pub mod thermo;

pub use cycle::{run_cycle, run_cycle_with, sweep_tau, CycleRecord};
pub use error::{Error, Result};
pub use fcs::{
    average_split, cycle_distribution, moments, stage_cd_expansion, stage_characteristic,
    stage_distribution, variance, work_statistics, CharacteristicFunction, CycleStatistics, Origin,
    Stage, SupportPoint, WorkDistribution,
};
pub use propagator::{
    amplitude_matrix, evolve, evolve_with, Propagator, RampProtocol, Scheme, DEFAULT_TOLERANCE,
};
pub use spin_model::{
    build_hamiltonian, eigensystem, eigensystem_at, EigenSystem, EngineMode, EngineParams,
};
pub use thermo::{
    coherence_l1, gibbs_state, measure_nonselective, DensityMatrix, MeasurementBasis,
};
