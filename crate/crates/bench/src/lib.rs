//! Inputs shared by the criterion benchmarks.

use cde_core::{random_instance, Instance};

pub const PACKETS: usize = 50;
pub const DENSITY: f64 = 0.5;

/// The benchmark instance for `num_clients` clients; fixed per size.
pub fn instance(num_clients: usize) -> Instance {
    random_instance(num_clients, PACKETS, DENSITY, num_clients as u64).expect("valid parameters")
}
