use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(#[from] Violation),

    #[error("client {client} out of range for an instance with {num_clients} clients")]
    InvalidClient { client: usize, num_clients: usize },

    #[error("coalition must contain at least one client")]
    EmptyCoalition,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("local recovery needs at least 2 clients, got {size}")]
    CoalitionTooSmall { size: usize },

    #[error("allocation for block {block} would be negative ({value}); pick another block")]
    NegativeAllocation { block: String, value: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "no block of {blocks} can absorb delta_alpha={delta_alpha} \
         (targets {targets:?}, accumulated {accumulated:?})"
    )]
    NoExcessBlock {
        blocks: String,
        delta_alpha: i64,
        targets: Vec<i64>,
        accumulated: Vec<i64>,
    },

    #[error("final reduction of {excess} transmissions failed: {reason}")]
    FinalReductionFailed { excess: u64, reason: String },

    #[error("{what} limited to K <= {limit}, instance has K = {num_clients}")]
    OverLimit {
        what: &'static str,
        limit: usize,
        num_clients: usize,
    },

    #[error("internal invariant breached: {0}")]
    InvariantBreach(String),

    #[error("field modulus {0} is not a prime below 2^32")]
    NotPrime(u64),

    #[error("rate vector has length {got}, instance has {expected} clients")]
    RateLength { expected: usize, got: usize },
}
