//! Vector magnetometry with a single NV center and its ¹⁵N nuclear spin.
//!
//! The crate covers the full chain from field to field:
//!
//! - [`spin_model`]: the ground-state Hamiltonian, its exact spectrum and the
//!   weak-field closed forms for the electron Zeeman shifts and the nuclear
//!   Larmor frequency.
//! - [`signal_synth`]: synthetic ODMR spectra, nuclear free-precession traces
//!   and spin-echo traces, with optional photon counting noise.
//! - [`estimators`]: damped Gauss–Newton fitting and the three signal fits.
//! - [`inversion`]: fitted frequencies to (|B_z|, B_⊥), and the calibrated
//!   field construction that pins down the full vector.
//! - [`sensitivity`]: the analytic error budget.
//! - [`scan`]: a dipole-magnet field generator and grid scans through the
//!   whole pipeline.
//! - [`cli`]: the `nvmag` command line.
//!
//! Units are MHz, mT and μs throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tensor code reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod estimators;
pub mod format;
pub mod inversion;
pub mod scan;
pub mod sensitivity;
pub mod signal_synth;
pub mod spin_model;

pub use spin_model::{FieldVector, NvParameters};
