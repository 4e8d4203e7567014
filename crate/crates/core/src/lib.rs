//! Minimum sum-rate solvers for cooperative data exchange when packets may
//! not be split.
//!
//! `K` clients each hold a subset (has-set) of `L` packets and broadcast
//! linear combinations of what they hold until everyone knows every packet.
//! The crate finds the minimum total number of transmissions and a rate
//! vector achieving it:
//!
//! * [`im`] is the iterative merging solver, with a full decision trace.
//! * [`sumrate`] holds the closed-form quantities (coalition budgets, merge
//!   values, exhaustive local-recovery optimum, lower bounds).
//! * [`dv`] is the divide-and-conquer comparator with exact rational rates.
//! * [`oracle`] is brute-force ground truth: cut-condition feasibility,
//!   optimality, greedy closure and partition-minimality checks.
//! * [`partitions`] enumerates set partitions in a fixed canonical order.
//! * [`rlnc`] simulates random linear coding over a prime field to check
//!   that a rate vector really lets every client decode.

pub mod dv;
pub mod error;
pub mod im;
pub mod model;
pub mod oracle;
pub mod partitions;
pub mod rlnc;
pub mod sumrate;

pub use dv::{dv_solve, DvResult};
pub use error::{Error, Result};
pub use im::{solve, Solution, TieBreakConfig};
pub use model::{
    fixtures, random_instance, validate, Coalition, EvalContext, Instance, PacketSet, Partition,
    RateVector, Rational, RawInstance, Violation,
};
pub use oracle::FeasibilityReport;
pub use rlnc::{simulate, SimReport};
