//! Simulation and numerics for quantum secure direct communication.

pub mod quantum;
pub mod channel;
pub mod security;
pub mod bits;
pub mod protocols;
pub mod qmf;
