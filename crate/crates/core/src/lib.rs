//! Core numerics for learning phase and entanglement labels from imperfect
//! quantum data: spin-chain simulation, Pauli classical shadows, a small
//! convolutional network with domain-specific batch normalization, conditional
//! domain-adversarial training, label-free model selection, clustering
//! baselines and the benchmark protocol.
//!
//! The crate is `no_std` (with `alloc`). File formats, the CLI and thread
//! pools live in the `shadowda` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod bench;
pub mod cdan;
pub mod entdata;
pub mod exec;
pub mod linalg;
pub mod qsim;
pub mod rng;
pub mod select;
pub mod shadows;
pub mod tensornn;

pub use num_complex::Complex64 as C64;
