//! Quantum-kernel, variational-circuit and quantum-hypernetwork classifiers
//! for binary intrusion detection on UAV-swarm network flows, with the flow
//! feature pipeline, a dense statevector simulator and a benchmark harness.

pub mod bench;
pub mod dataio;
pub mod encode;
pub mod error;
pub mod evalkit;
pub mod flowfeat;
pub mod kernelml;
pub mod qkernel;
pub mod qtnn;
pub mod simcore;
mod util;
pub mod vqc;

pub use error::{Error, Result};
pub use util::{derive_seed, sha256_hex, write_atomic};
