use std::io;

use thiserror::Error;

use crate::spec::ResourceSpec;

pub type Result<T, E = UrsaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum UrsaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("specification {0} lies outside the configuration region")]
    OutOfRegion(ResourceSpec),

    /// No grid specification satisfies the planning constraint.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no node has enough free capacity for {0}")]
    CapacityExhausted(ResourceSpec),

    #[error("probe failure: {0}")]
    Probe(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl UrsaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        UrsaError::InvalidArgument(msg.into())
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, UrsaError::Infeasible(_))
    }
}
