//! Perfect state transfer and GHZ generation on engineered ZZ+X qubit chains.
//!
//! The crate is organised bottom-up:
//!
//! - [`qstate`]: dense states, operators, partial traces, Pauli algebra and
//!   eigenbasis time evolution;
//! - [`hamiltonian`]: the chain Hamiltonians and the engineered coupling
//!   pattern;
//! - [`infoflux`]: Heisenberg-picture operator evolution and information-flux
//!   coefficients;
//! - [`noise`]: static disorder, Kraus channels and the open-system engines
//!   (deterministic channel composition and Monte Carlo trajectories);
//! - [`transfer`]: the two-step transfer protocol and GHZ generation;
//! - [`qpt`]: single-qubit process tomography of the transfer channel.
//!
//! Energies are in units of the base coupling `J`, times in units of `1/J`.

pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod infoflux;
pub mod linalg;
pub mod noise;
pub mod qpt;
pub mod qstate;
pub mod seeds;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
