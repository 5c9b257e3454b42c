//! Distributionally robust adaptive beamforming toolkit.
//!
//! The crate simulates narrowband array scenarios, solves the family of
//! cone-constrained beamformer designs built around the real-valued MVDR
//! formulation, and verifies every duality and bound claim behind those
//! designs with brute-force oracles (explicit worst-case distributions,
//! exact discrete optimal transport, and Monte Carlo probability checks).
//!
//! Monte Carlo heavy paths run on rayon when the default `parallel` feature
//! is enabled and fall back to sequential execution without it; results are
//! identical either way.

pub mod chi2;
pub mod designs;
pub mod cone;
pub mod exec;
pub mod harness;
pub mod lift;
pub mod oracle;
pub mod ot;
pub mod scenario;
