//! Stuck-at test generation by running the SAT attack against fault-locked circuits.

pub mod attack;
pub mod bench;
pub mod circuit;
pub mod driver;
pub mod fault;
pub mod fault_sim;
pub mod encode;
pub mod lock;
pub mod report;
