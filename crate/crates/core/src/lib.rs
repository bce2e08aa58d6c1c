//! Wasserstein barycenters of discrete measures.
//!
//! The crate covers exact and entropic optimal transport, stochastic
//! approximation solvers, mirror prox on the saddle-point formulation, an
//! accelerated dual stochastic method, and decentralized variants of the
//! latter two that run on a simulated gossip network.

pub mod decentralized;
pub mod dual_accel;
pub mod error;
pub mod harness;
pub mod measures;
pub mod network;
pub mod numerics;
pub mod ot;
pub mod sa;
pub mod saddle;
pub mod trace;

pub use error::{Error, Result};
