use thiserror::Error;

use crate::fcs::FcsError;
use crate::propagator::IntegrationError;
use crate::spin_model::{EigenCheckError, ParamError};
use crate::thermo::StateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Eigen(#[from] EigenCheckError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Fcs(#[from] FcsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
