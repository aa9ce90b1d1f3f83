use crate::AgentId;
use crate::geom::Cell;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("unknown agent id {0}")]
    UnknownAgent(AgentId),
    #[error("unknown recipient id {0}")]
    UnknownRecipient(AgentId),
    #[error("duplicate id {0}")]
    DuplicateId(u32),
    #[error("cell ({}, {}) is outside the grid or an obstacle", .0.x, .0.y)]
    InvalidCell(Cell),
    #[error("cell ({x}, {y}) is already occupied by agent {a}", x = .0.x, y = .0.y, a = .1)]
    Occupied(Cell, AgentId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("configuration value `{name}` must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("configuration value `{name}` must lie in [0, 1] (got {value})")]
    OutOfUnitRange { name: &'static str, value: f64 },
}
