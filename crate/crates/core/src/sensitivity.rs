//! Analytic error budget for the two reconstruction routes.
//!
//! The precession route reads B_⊥ from the ¹⁵N Larmor frequency, which is
//! amplified by |α_x| and nearly independent of D. The ODMR-only route reads
//! B_⊥ from the sum of the two branch shifts, a second-order effect, and so
//! suffers both from frequency noise and from any drift of D with temperature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin_model::{alpha_coefficients, larmor_from_axial_transverse, NvParameters, SpinModelError};

/// Transverse fields below this (mT) are rejected by the ODMR-only formulas.
pub const MIN_TRANSVERSE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("ODMR-only transverse error diverges at B_⊥ = {b_perp} mT")]
    DivergesAtZeroTransverse { b_perp: f64 },
    #[error("invalid noise budget: {0}")]
    InvalidBudget(String),
    #[error(transparent)]
    Spin(#[from] SpinModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBudget {
    /// ODMR resonance-frequency noise, MHz.
    pub delta_omega_odmr: f64,
    /// Relative precession-signal noise δI/I_c.
    pub noise_ratio: f64,
    /// Free-precession time at which the signal is read, μs.
    pub t_probe: f64,
    /// Nuclear coherence time, μs.
    pub t0: f64,
    /// Temperature coefficient of D, MHz/K.
    pub dd_dt: f64,
    /// Temperature excursion, K.
    pub delta_t: f64,
}

impl Default for NoiseBudget {
    fn default() -> Self {
        Self { delta_omega_odmr: 0.060, noise_ratio: 0.045, t_probe: 156.0, t0: 156.0, dd_dt: 0.084, delta_t: 1.0 }
    }
}

impl NoiseBudget {
    pub fn validate(&self) -> Result<(), SensitivityError> {
        let fields = [
            ("delta_omega_odmr", self.delta_omega_odmr),
            ("noise_ratio", self.noise_ratio),
            ("t_probe", self.t_probe),
            ("t0", self.t0),
            ("dd_dt", self.dd_dt),
            ("delta_t", self.delta_t),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SensitivityError::InvalidBudget(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    fn check_precession(&self) -> Result<(), SensitivityError> {
        self.validate()?;
        if self.t_probe <= 0.0 || self.t0 <= 0.0 {
            return Err(SensitivityError::InvalidBudget("t_probe and t0 must be positive".into()));
        }
        Ok(())
    }
}

/// δB_z = δω / g_eβ_e.
pub fn delta_bz_odmr(budget: &NoiseBudget, p: &NvParameters) -> f64 {
    budget.delta_omega_odmr / p.ge_be
}

/// Larmor-frequency noise implied by a precession readout at `t_probe`:
/// δω_L = (δI/I_c)·e^{t/T0}/(2π t).
pub fn delta_larmor_precession(budget: &NoiseBudget) -> Result<f64, SensitivityError> {
    budget.check_precession()?;
    let t = budget.t_probe;
    Ok(budget.noise_ratio * (t / budget.t0).exp() / (2.0 * PI * t))
}

/// δB_⊥ ≈ (δI/I_c)·e^{t/T0}/(2π|α_x||g_nβ_n| t).
pub fn delta_bperp_precession(budget: &NoiseBudget, p: &NvParameters) -> Result<f64, SensitivityError> {
    let alpha = alpha_coefficients(p)[0].abs();
    Ok(delta_larmor_precession(budget)? / (alpha * p.gn_bn().abs()))
}

/// Full propagation through B_⊥ = sqrt(ω_L²/(g_nβ_n)² − B_z²)/|α_x| at a
/// given field, including the ODMR noise on |B_z|.
pub fn delta_bperp_precession_full(
    budget: &NoiseBudget,
    bz_abs: f64,
    b_perp: f64,
    p: &NvParameters,
) -> Result<f64, SensitivityError> {
    if b_perp < MIN_TRANSVERSE {
        return Err(SensitivityError::DivergesAtZeroTransverse { b_perp });
    }
    let alpha2 = alpha_coefficients(p)[0].powi(2);
    let gn2 = p.gn_bn().powi(2);
    let omega = larmor_from_axial_transverse(bz_abs, b_perp, p)?;
    let d_omega = omega / (gn2 * alpha2 * b_perp);
    let d_bz = bz_abs / (alpha2 * b_perp);
    let from_omega = d_omega * delta_larmor_precession(budget)?;
    let from_bz = d_bz * delta_bz_odmr(budget, p);
    Ok(from_omega.hypot(from_bz))
}

/// δB_⊥ ≈ D(δω₊ + δω₋)/(6 g_e²β_e² B_⊥) for the ODMR-only route.
pub fn delta_bperp_odmr_only(dw_sigmas: (f64, f64), b_perp: f64, p: &NvParameters) -> Result<f64, SensitivityError> {
    if !(b_perp >= MIN_TRANSVERSE) {
        return Err(SensitivityError::DivergesAtZeroTransverse { b_perp });
    }
    let (s_plus, s_minus) = dw_sigmas;
    if !(s_plus >= 0.0 && s_minus >= 0.0) {
        return Err(SensitivityError::InvalidBudget("frequency sigmas must be ≥ 0".into()));
    }
    Ok(p.zfs * (s_plus + s_minus) / (6.0 * p.ge_be * p.ge_be * b_perp))
}

/// Spurious change of ω₊ + ω₋ when D drifts by dD/dT·ΔT on each branch.
pub fn temperature_sum_shift(delta_t: f64, budget: &NoiseBudget) -> f64 {
    2.0 * budget.dd_dt * delta_t
}

/// B_⊥ error of the ODMR-only route caused by a temperature excursion.
pub fn temperature_error_odmr_only(
    delta_t: f64,
    b_perp: f64,
    budget: &NoiseBudget,
    p: &NvParameters,
) -> Result<f64, SensitivityError> {
    let half = 0.5 * temperature_sum_shift(delta_t.abs(), budget);
    delta_bperp_odmr_only((half, half), b_perp, p)
}

/// ∂ω_L/∂D at a given field. Only the α coefficients depend on D:
/// ∂α/∂D = −(α − 1)/D.
pub fn larmor_zfs_derivative(bz_abs: f64, b_perp: f64, p: &NvParameters) -> Result<f64, SensitivityError> {
    let omega = larmor_from_axial_transverse(bz_abs, b_perp, p)?;
    if omega == 0.0 {
        return Ok(0.0);
    }
    let alpha = alpha_coefficients(p)[0];
    let d_alpha = -(alpha - 1.0) / p.zfs;
    Ok(p.gn_bn().powi(2) * alpha * d_alpha * b_perp * b_perp / omega)
}

/// Everything the CLI reports for one budget and operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub budget: NoiseBudget,
    pub bz_abs: f64,
    pub b_perp: f64,
    pub delta_bz_odmr: f64,
    pub delta_omega_l: f64,
    pub delta_bperp_precession: f64,
    pub delta_bperp_precession_full: f64,
    pub delta_bperp_odmr_only: f64,
    pub temperature_sum_shift: f64,
    pub temperature_error_odmr_only: f64,
    pub larmor_temperature_shift: f64,
}

pub fn report(
    budget: &NoiseBudget,
    bz_abs: f64,
    b_perp: f64,
    p: &NvParameters,
) -> Result<SensitivityReport, SensitivityError> {
    budget.validate()?;
    let s = budget.delta_omega_odmr;
    Ok(SensitivityReport {
        budget: *budget,
        bz_abs,
        b_perp,
        delta_bz_odmr: delta_bz_odmr(budget, p),
        delta_omega_l: delta_larmor_precession(budget)?,
        delta_bperp_precession: delta_bperp_precession(budget, p)?,
        delta_bperp_precession_full: delta_bperp_precession_full(budget, bz_abs, b_perp, p)?,
        delta_bperp_odmr_only: delta_bperp_odmr_only((s, s), b_perp, p)?,
        temperature_sum_shift: temperature_sum_shift(budget.delta_t, budget),
        temperature_error_odmr_only: temperature_error_odmr_only(budget.delta_t, b_perp, budget, p)?,
        larmor_temperature_shift: (larmor_zfs_derivative(bz_abs, b_perp, p)? * budget.dd_dt * budget.delta_t).abs(),
    })
}
