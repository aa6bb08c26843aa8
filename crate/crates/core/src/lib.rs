//! Heisenberg-limited estimation of several eigenvalue phases from a simulated
//! phase-function oracle.
//!
//! The crate is `no_std` with `alloc`; the `std` feature (default) only swaps
//! the math backend. IO, sweeps and the command line live in `qpe-sim`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adaptive;
pub mod analysis;
pub mod circle;
pub mod extract;
pub mod oracle;
pub mod pencil;
pub mod qeep;

pub use circle::{alias_set, in_scaling_window, wrap_dist, BinIndex, Phase};
pub use num_complex::Complex64;
pub use oracle::{exact_g, sample_g, shift_spectrum, CostLedger, GEstimate, PhaseOracle, SimulatedOracle, Spectrum};
