//! From fitted frequencies to field magnitudes, and from magnitudes to the
//! full field vector.
//!
//! A Zeeman shift together with the m_s = 0 Larmor frequency fixes |B_z| and
//! B_⊥ but leaves the sign of B_z and the transverse azimuth open: the field
//! lies on one of two rings about the NV axis. Measuring again with known
//! calibrated fields added cuts the rings down, see [`disambiguate`].

mod disambiguate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin_model::{alpha_coefficients, second_order_shift, Branch, NvParameters, SpinModelError};

pub use disambiguate::{
    candidate_rings, default_tolerance, disambiguate, CalibratedField, CalibratedMeasurement, CandidateSet, Ring,
    Stage, ARCCOS_SLACK,
};

#[derive(Debug, Error)]
pub enum InversionError {
    #[error(transparent)]
    Spin(#[from] SpinModelError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fixed-point iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("Larmor frequency too small for the axial field: deficit {deficit_mhz} MHz")]
    TransverseDeficit { deficit_mhz: f64 },
    #[error("ODMR branch sum {sum_mhz} MHz is negative beyond noise")]
    NegativeSumInconsistent { sum_mhz: f64 },
    #[error("calibrated measurements do not intersect the base rings")]
    NoIntersection,
    #[error("azimuth equation has no solution (cosine argument {argument})")]
    Degenerate { argument: f64 },
    #[error("calibrated fields leave {} candidates", .0.vectors.len().max(.0.rings.len()))]
    AmbiguityRemains(Box<CandidateSet>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionWarning {
    /// Transverse deficit within noise; B_⊥ set to zero.
    TransverseClamped,
    /// Second-order term alone exceeds the measured shift; |B_z| set to zero.
    AxialClamped,
}

/// Axial and transverse field magnitudes, mT, with polar angle in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxialTransverse {
    pub bz_abs: f64,
    pub b_perp: f64,
    pub theta: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<InversionWarning>,
}

impl AxialTransverse {
    pub fn new(bz_abs: f64, b_perp: f64) -> Self {
        Self { bz_abs, b_perp, theta: b_perp.atan2(bz_abs).to_degrees(), iterations: 0, warnings: Vec::new() }
    }

    pub fn magnitude(&self) -> f64 {
        self.bz_abs.hypot(self.b_perp)
    }
}

pub const FIXED_POINT_TOL: f64 = 1e-9;
pub const MAX_FIXED_POINT_ITERATIONS: usize = 100;

/// Solves one branch of the Zeeman-shift expression for |B_z| at fixed B_⊥.
///
/// The map |B_z| ↦ Δω is monotone in the weak-field regime; Newton steps are
/// kept inside a shrinking bracket and fall back to bisection.
fn solve_axial(shift: f64, branch: Branch, b_perp: f64, p: &NvParameters) -> Result<(f64, bool), InversionError> {
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let g = |z: f64| sign * p.ge_be * z + second_order_shift(z, b_perp, sign, p) - shift;
    let limit = (p.zfs / p.ge_be).powi(2) - b_perp * b_perp;
    if limit <= 0.0 {
        return Err(SpinModelError::Regime { zeeman: p.ge_be * b_perp, zfs: p.zfs }.into());
    }
    let mut lo = 0.0;
    let mut hi = limit.sqrt() * (1.0 - 1e-9);
    let g_lo = g(lo);
    if g_lo * sign >= 0.0 {
        return Ok((0.0, g_lo * sign > 1e-12 * shift.abs().max(1e-12)));
    }
    // The second-order term diverges at the pole, so the minus branch turns
    // back up close to it; pull the upper end in until it brackets the root.
    let mut g_hi = g(hi);
    for _ in 0..64 {
        if g_hi * sign > 0.0 {
            break;
        }
        hi *= 0.5;
        g_hi = g(hi);
    }
    if g_hi * sign <= 0.0 {
        return Err(InversionError::InvalidInput(format!("shift {shift} MHz lies outside the weak-field range")));
    }
    let mut z = (-sign * g_lo / p.ge_be).clamp(lo, hi);
    for _ in 0..200 {
        let value = g(z);
        if value == 0.0 {
            return Ok((z, false));
        }
        if value * sign < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let h = 1e-7 * z.max(1e-6);
        let slope = (g(z + h) - g(z - h)) / (2.0 * h);
        let newton = z - value / slope;
        let next = if newton > lo && newton < hi && slope.is_finite() { newton } else { 0.5 * (lo + hi) };
        if (next - z).abs() <= 1e-15 * z.max(1e-12) || hi - lo <= 1e-15 * hi {
            return Ok((next, false));
        }
        z = next;
    }
    Ok((z, false))
}

/// B_⊥ ≈ (1/|α_x|)·sqrt(ω_L²/(g_nβ_n)² − B_z²). Returns (B_⊥, clamped).
fn transverse_from_larmor(
    omega_l: f64,
    bz_abs: f64,
    sigma_omega: f64,
    p: &NvParameters,
) -> Result<(f64, bool), InversionError> {
    let gn = p.gn_bn().abs();
    let alpha = alpha_coefficients(p)[0].abs();
    let q = (omega_l / gn).powi(2) - bz_abs * bz_abs;
    if q >= 0.0 {
        return Ok((q.sqrt() / alpha, false));
    }
    let deficit = gn * bz_abs - omega_l;
    let slack = 3.0 * sigma_omega + 1e-12 * (gn * bz_abs).max(f64::MIN_POSITIVE);
    if deficit > slack {
        return Err(InversionError::TransverseDeficit { deficit_mhz: deficit });
    }
    Ok((0.0, true))
}

/// Inverts a Zeeman shift of the lower ODMR branch and the m_s = 0 Larmor
/// frequency to (|B_z|, B_⊥).
pub fn invert_axial_transverse(
    dw_minus: f64,
    omega_l: f64,
    p: &NvParameters,
) -> Result<AxialTransverse, InversionError> {
    invert_branch(dw_minus, Branch::Minus, omega_l, 0.0, p)
}

/// General form of [`invert_axial_transverse`]: the measured branch is tagged
/// explicitly and `sigma_omega` (1σ of ω_L) sets how large a transverse
/// deficit is absorbed as noise rather than rejected.
///
/// Fixed-point iteration starting at B_⊥ = 0: solve the Zeeman branch for
/// |B_z| at the current B_⊥, then update B_⊥ from the Larmor frequency, until
/// both change by less than 1e-9 mT.
pub fn invert_branch(
    shift: f64,
    branch: Branch,
    omega_l: f64,
    sigma_omega: f64,
    p: &NvParameters,
) -> Result<AxialTransverse, InversionError> {
    if !p.hyperfine_is_axial() {
        return Err(SpinModelError::NonAxialTensor.into());
    }
    if !shift.is_finite() || shift.abs() >= p.zfs {
        return Err(InversionError::InvalidInput(format!("|shift| must be below D, got {shift}")));
    }
    if !(omega_l >= 0.0) || !omega_l.is_finite() {
        return Err(InversionError::InvalidInput(format!("ω_L must be ≥ 0, got {omega_l}")));
    }
    let mut b_perp = 0.0;
    let mut bz = f64::NAN;
    let mut warnings = Vec::new();
    for k in 1..=MAX_FIXED_POINT_ITERATIONS {
        let (next_bz, axial_clamped) = solve_axial(shift, branch, b_perp, p)?;
        let (next_bp, clamped) = transverse_from_larmor(omega_l, next_bz, sigma_omega, p)?;
        let change = (next_bz - bz).abs() + (next_bp - b_perp).abs();
        bz = next_bz;
        b_perp = next_bp;
        if change < FIXED_POINT_TOL {
            if clamped {
                warnings.push(InversionWarning::TransverseClamped);
            }
            if axial_clamped {
                warnings.push(InversionWarning::AxialClamped);
            }
            let mut out = AxialTransverse::new(bz, b_perp);
            out.iterations = k;
            out.warnings = warnings;
            return Ok(out);
        }
    }
    Err(InversionError::NoConvergence(MAX_FIXED_POINT_ITERATIONS))
}

/// ODMR-only route: both branch shifts give |B_z| from their difference and
/// B_⊥ from their sum, Δω₊ + Δω₋ = 3D·g_e²β_e²B_⊥²/(D² − g_e²β_e²B_z²).
pub fn invert_odmr_only(dw_plus: f64, dw_minus: f64, p: &NvParameters) -> Result<AxialTransverse, InversionError> {
    invert_odmr_only_with_noise(dw_plus, dw_minus, 0.0, p)
}

/// [`invert_odmr_only`] with `sigma_sum` the 1σ of Δω₊ + Δω₋; negative sums
/// within 3σ are clamped to B_⊥ = 0.
pub fn invert_odmr_only_with_noise(
    dw_plus: f64,
    dw_minus: f64,
    sigma_sum: f64,
    p: &NvParameters,
) -> Result<AxialTransverse, InversionError> {
    if !(dw_plus >= dw_minus) || !dw_plus.is_finite() || !dw_minus.is_finite() {
        return Err(InversionError::InvalidInput("need dw_plus ≥ dw_minus".into()));
    }
    let (g, d) = (p.ge_be, p.zfs);
    let diff = dw_plus - dw_minus;
    let mut sum = dw_plus + dw_minus;
    let mut warnings = Vec::new();
    if sum < 0.0 {
        if -sum > 3.0 * sigma_sum + 1e-12 * diff.max(f64::MIN_POSITIVE) {
            return Err(InversionError::NegativeSumInconsistent { sum_mhz: sum });
        }
        sum = 0.0;
        warnings.push(InversionWarning::TransverseClamped);
    }
    let mut bz = diff / (2.0 * g);
    let mut b_perp = f64::NAN;
    for k in 1..=MAX_FIXED_POINT_ITERATIONS {
        let denom = d * d - g * g * bz * bz;
        if denom <= 0.0 {
            return Err(SpinModelError::Regime { zeeman: g * bz, zfs: d }.into());
        }
        let next_bp = (sum * denom / (3.0 * d * g * g)).sqrt();
        let scale = 2.0 * g - g.powi(3) * next_bp * next_bp / denom;
        let next_bz = diff / scale;
        let change = (next_bz - bz).abs() + (next_bp - b_perp).abs();
        bz = next_bz;
        b_perp = next_bp;
        if change < FIXED_POINT_TOL {
            let mut out = AxialTransverse::new(bz, b_perp);
            out.iterations = k;
            out.warnings = warnings;
            return Ok(out);
        }
    }
    Err(InversionError::NoConvergence(MAX_FIXED_POINT_ITERATIONS))
}

/// |B| from the first echo revival, which occurs at the ¹³C Larmor period:
/// |B| = (1/τ_re)/(g_C β_C).
pub fn field_magnitude_from_revival(tau_re: f64, p: &NvParameters) -> Result<f64, InversionError> {
    if !(tau_re > 0.0) || !tau_re.is_finite() {
        return Err(InversionError::InvalidInput(format!("τ_re must be positive, got {tau_re}")));
    }
    Ok(1.0 / tau_re / p.g13c_b13c)
}

/// Inverse of [`field_magnitude_from_revival`].
pub fn revival_time(field_magnitude: f64, p: &NvParameters) -> f64 {
    1.0 / (field_magnitude * p.g13c_b13c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_model::{larmor_from_axial_transverse, zeeman_shifts_perturbative};

    #[test]
    fn zero_input() {
        let p = NvParameters::default();
        let at = invert_axial_transverse(0.0, 0.0, &p).unwrap();
        assert_eq!((at.bz_abs, at.b_perp), (0.0, 0.0));
        let at = invert_odmr_only(0.0, 0.0, &p).unwrap();
        assert_eq!((at.bz_abs, at.b_perp), (0.0, 0.0));
    }

    #[test]
    fn on_axis_field() {
        let p = NvParameters::default();
        let at = invert_axial_transverse(-28.0249, 4.3144e-3, &p).unwrap();
        assert!((at.bz_abs - 1.0).abs() < 1e-3);
        assert!(at.b_perp < 1e-3);
        assert!(at.theta < 0.1);
    }

    #[test]
    fn symmetric_shifts_mean_no_transverse_field() {
        let p = NvParameters::default();
        let at = invert_odmr_only(50.0, -50.0, &p).unwrap();
        assert_eq!(at.b_perp, 0.0);
        assert!((at.bz_abs - 50.0 / p.ge_be).abs() < 1e-12);
    }

    #[test]
    fn forward_then_invert() {
        let p = NvParameters::default();
        let (bz, bp) = (3.129, 2.426);
        let s = zeeman_shifts_perturbative(bz, bp, &p).unwrap();
        let w = larmor_from_axial_transverse(bz, bp, &p).unwrap();
        let at = invert_axial_transverse(s.minus, w, &p).unwrap();
        assert!((at.bz_abs - bz).abs() < 1e-9 && (at.b_perp - bp).abs() < 1e-9);
        let plus = invert_branch(s.plus, Branch::Plus, w, 0.0, &p).unwrap();
        assert!((plus.bz_abs - bz).abs() < 1e-9 && (plus.b_perp - bp).abs() < 1e-9);
        let odmr = invert_odmr_only(s.plus, s.minus, &p).unwrap();
        assert!((odmr.bz_abs - bz).abs() < 1e-9 && (odmr.b_perp - bp).abs() < 1e-9);
    }

    #[test]
    fn inconsistent_inputs() {
        let p = NvParameters::default();
        // 1 mT axial but a Larmor frequency of only half the bare nuclear value.
        let err = invert_axial_transverse(-28.0249, 2.0e-3, &p).unwrap_err();
        assert!(matches!(err, InversionError::TransverseDeficit { .. }));
        // Within noise the transverse field is clamped instead.
        let at = invert_branch(-28.0249, Branch::Minus, 4.30e-3, 1e-4, &p).unwrap();
        assert_eq!(at.b_perp, 0.0);
        assert_eq!(at.warnings, vec![InversionWarning::TransverseClamped]);

        let err = invert_odmr_only(80.0, -90.0, &p).unwrap_err();
        assert!(matches!(err, InversionError::NegativeSumInconsistent { .. }));
        assert!(invert_odmr_only(-1.0, 1.0, &p).is_err());
        assert!(invert_axial_transverse(-3000.0, 0.1, &p).is_err());
        assert!(invert_axial_transverse(-10.0, -0.1, &p).is_err());
    }

    #[test]
    fn non_axial_tensor_rejected() {
        let mut a = NvParameters::default().hyperfine;
        a[0][0] = 3.7;
        let p = NvParameters::default().with_hyperfine(a);
        assert!(matches!(
            invert_axial_transverse(-85.26, 0.1632, &p),
            Err(InversionError::Spin(SpinModelError::NonAxialTensor))
        ));
    }

    #[test]
    fn revival_round_trip() {
        let p = NvParameters::default();
        let tau = revival_time(1.0, &p);
        assert!((tau - 93.38).abs() < 0.01);
        assert!((field_magnitude_from_revival(tau, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!(field_magnitude_from_revival(0.0, &p).is_err());
    }
}
