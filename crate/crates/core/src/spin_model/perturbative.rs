use serde::{Deserialize, Serialize};

use super::{FieldVector, NvParameters, SpinModelError, Tensor3};

/// Zeeman shifts of the two electron branches relative to D, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeemanShifts {
    pub plus: f64,
    pub minus: f64,
}

fn check_regime(bz_abs: f64, b_perp: f64, p: &NvParameters) -> Result<(), SpinModelError> {
    let zeeman = p.ge_be * bz_abs.hypot(b_perp);
    if !(zeeman < p.zfs) {
        return Err(SpinModelError::Regime { zeeman, zfs: p.zfs });
    }
    Ok(())
}

/// Second-order (transverse) part of the shift of one branch.
///
/// `sign` is +1 for the plus branch and −1 for the minus branch.
pub fn second_order_shift(bz_abs: f64, b_perp: f64, sign: f64, p: &NvParameters) -> f64 {
    let gz = p.ge_be * bz_abs.abs();
    let d = p.zfs;
    0.5 * p.ge_be * p.ge_be * b_perp * b_perp * (3.0 * d - sign * gz) / (d * d - gz * gz)
}

/// Δω± = ±g_eβ_e|B_z| + ½g_e²β_e²B_⊥²(3D ∓ g_eβ_e|B_z|)/(D² − g_e²β_e²B_z²).
pub fn zeeman_shifts_perturbative(bz_abs: f64, b_perp: f64, p: &NvParameters) -> Result<ZeemanShifts, SpinModelError> {
    let bz_abs = bz_abs.abs();
    check_regime(bz_abs, b_perp, p)?;
    let first = p.ge_be * bz_abs;
    Ok(ZeemanShifts {
        plus: first + second_order_shift(bz_abs, b_perp, 1.0, p),
        minus: -first + second_order_shift(bz_abs, b_perp, -1.0, p),
    })
}

/// Effective nuclear g tensor in the m_s = 0 manifold: the identity plus
/// 2g_eβ_e/(g_nβ_n D)·A with the z row of the correction removed.
pub fn g0_tensor(p: &NvParameters) -> Tensor3 {
    let scale = 2.0 * p.ge_be / (p.gn_bn() * p.zfs);
    let mut g = [[0.0; 3]; 3];
    for (i, row) in g.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let identity = if i == j { 1.0 } else { 0.0 };
            let correction = if i < 2 { scale * p.hyperfine[i][j] } else { 0.0 };
            *entry = identity + correction;
        }
    }
    g
}

/// Transverse amplification factors α_i = 1 + 2g_eβ_e A_ii/(g_nβ_n D); α_z = 1.
pub fn alpha_coefficients(p: &NvParameters) -> [f64; 3] {
    let g = g0_tensor(p);
    [g[0][0], g[1][1], g[2][2]]
}

/// ω_L = |g_nβ_n (B·g₀)| for an arbitrary hyperfine tensor.
pub fn larmor_frequency_tensor(b: &FieldVector, p: &NvParameters) -> f64 {
    let g = g0_tensor(p);
    let field = b.as_array();
    let mut eff = [0.0; 3];
    for (j, e) in eff.iter_mut().enumerate() {
        *e = (0..3).map(|i| field[i] * g[i][j]).sum();
    }
    p.gn_bn().abs() * (eff[0] * eff[0] + eff[1] * eff[1] + eff[2] * eff[2]).sqrt()
}

/// ω_L = |g_nβ_n|·sqrt(α_x²B_x² + α_y²B_y² + B_z²). Requires a diagonal hyperfine tensor.
pub fn larmor_frequency(b: &FieldVector, p: &NvParameters) -> Result<f64, SpinModelError> {
    if !p.hyperfine_is_diagonal() {
        return Err(SpinModelError::NonAxialTensor);
    }
    let [ax, ay, _] = alpha_coefficients(p);
    let sum = (ax * b.bx).powi(2) + (ay * b.by).powi(2) + b.bz * b.bz;
    Ok(p.gn_bn().abs() * sum.sqrt())
}

/// Larmor frequency for an axially symmetric tensor, from (|B_z|, B_⊥) alone.
pub fn larmor_from_axial_transverse(bz_abs: f64, b_perp: f64, p: &NvParameters) -> Result<f64, SpinModelError> {
    if !p.hyperfine_is_axial() {
        return Err(SpinModelError::NonAxialTensor);
    }
    larmor_frequency(&FieldVector::new(b_perp, 0.0, bz_abs), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_has_no_shift() {
        let s = zeeman_shifts_perturbative(0.0, 0.0, &NvParameters::default()).unwrap();
        assert_eq!(s.plus, 0.0);
        assert_eq!(s.minus, 0.0);
    }

    #[test]
    fn regime_guard() {
        let p = NvParameters::default();
        let err = zeeman_shifts_perturbative(p.zfs / p.ge_be, 0.0, &p).unwrap_err();
        assert!(matches!(err, SpinModelError::Regime { .. }));
    }

    #[test]
    fn g0_without_hyperfine_is_identity() {
        let p = NvParameters::default().with_hyperfine([[0.0; 3]; 3]);
        let g = g0_tensor(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn off_diagonal_hyperfine_enters_g0() {
        let mut a = NvParameters::default().hyperfine;
        a[0][1] = 1.0;
        a[1][0] = 1.0;
        let p = NvParameters::default().with_hyperfine(a);
        let g = g0_tensor(&p);
        let scale = 2.0 * p.ge_be / (p.gn_bn() * p.zfs);
        assert_eq!(g[0][1], scale);
        assert_eq!(g[2][0], 0.0);
        assert!(matches!(larmor_frequency(&FieldVector::new(1.0, 0.0, 0.0), &p), Err(SpinModelError::NonAxialTensor)));
    }

    #[test]
    fn on_axis_larmor_is_bare_nuclear_zeeman() {
        let p = NvParameters::default();
        let w = larmor_frequency(&FieldVector::new(0.0, 0.0, 1.0), &p).unwrap();
        assert!((w - 4.3144e-3).abs() < 1e-7);
        let t = larmor_frequency_tensor(&FieldVector::new(0.3, -0.4, 1.0), &p);
        let d = larmor_frequency(&FieldVector::new(0.3, -0.4, 1.0), &p).unwrap();
        assert!((t - d).abs() < 1e-15);
    }
}
