//! Spin Hamiltonian of the NV ground state with its ¹⁵N nucleus.
//!
//! Two routes to the measurable frequencies live here: exact diagonalization
//! of the 6×6 electron⊗nuclear Hamiltonian, and the closed-form weak-field
//! expressions for the electron Zeeman shifts and the m_s = 0 nuclear Larmor
//! frequency. The exact route serves as the reference for the closed forms.

mod hamiltonian;
mod params;
mod perturbative;

use thiserror::Error;

pub use hamiltonian::{
    build_hamiltonian, exact_transitions, spin1_ops, spin_half_ops, BasisState, Branch, Eigensystem, NuclearLabel,
    SpinHamiltonian, TransitionLine, TransitionSet, BASIS, C64, LABEL_THRESHOLD,
};
pub use params::{FieldVector, NvParameters, Tensor3};
pub use perturbative::{
    alpha_coefficients, g0_tensor, larmor_frequency, larmor_frequency_tensor, larmor_from_axial_transverse,
    second_order_shift, zeeman_shifts_perturbative, ZeemanShifts,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinModelError {
    #[error("invalid NV parameters: {0}")]
    InvalidParameters(String),
    #[error("eigenstate labeling unreliable: electron character {overlap:.3} below threshold")]
    DegenerateLabeling { overlap: f64 },
    #[error("outside weak-field regime: Zeeman energy {zeeman} MHz vs D = {zfs} MHz")]
    Regime { zeeman: f64, zfs: f64 },
    #[error("hyperfine tensor is not axial; the closed-form Larmor expression does not apply")]
    NonAxialTensor,
}
