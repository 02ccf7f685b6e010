use serde::{Deserialize, Serialize};

use super::SpinModelError;

/// 3×3 real tensor, row-major, MHz.
pub type Tensor3 = [[f64; 3]; 3];

/// Physical constants and NV/¹⁵N coupling tensors.
///
/// Frequencies are in MHz and fields in mT. Gyromagnetic products such as
/// `ge_be` are therefore in MHz/mT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvParameters {
    /// Zero-field splitting D.
    pub zfs: f64,
    /// Electron g factor times Bohr magneton.
    pub ge_be: f64,
    /// Nuclear g factor (dimensionless, negative for ¹⁵N).
    pub gn: f64,
    /// Nuclear magneton.
    pub beta_n: f64,
    /// Hyperfine tensor A.
    pub hyperfine: Tensor3,
    /// Nuclear quadrupole tensor P. Must vanish for I = 1/2.
    pub quadrupole: Tensor3,
    /// ¹³C gyromagnetic product, used for echo revivals.
    pub g13c_b13c: f64,
}

impl Default for NvParameters {
    fn default() -> Self {
        Self {
            zfs: 2870.0,
            ge_be: 28.0249,
            gn: -0.566,
            beta_n: 7.6226e-3,
            hyperfine: [[3.65, 0.0, 0.0], [0.0, 3.65, 0.0], [0.0, 0.0, 3.03]],
            quadrupole: [[0.0; 3]; 3],
            g13c_b13c: 10.7084e-3,
        }
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

impl NvParameters {
    /// Signed nuclear gyromagnetic product g_n·β_n (MHz/mT).
    pub fn gn_bn(&self) -> f64 {
        self.gn * self.beta_n
    }

    pub fn with_zfs(mut self, zfs: f64) -> Self {
        self.zfs = zfs;
        self
    }

    pub fn with_hyperfine(mut self, hyperfine: Tensor3) -> Self {
        self.hyperfine = hyperfine;
        self
    }

    pub fn validate(&self) -> Result<(), SpinModelError> {
        let finite = [self.zfs, self.ge_be, self.gn, self.beta_n, self.g13c_b13c]
            .iter()
            .chain(self.hyperfine.iter().flatten())
            .chain(self.quadrupole.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(SpinModelError::InvalidParameters("non-finite entry".into()));
        }
        if self.zfs <= 0.0 {
            return Err(SpinModelError::InvalidParameters("zfs must be positive".into()));
        }
        if self.ge_be <= 0.0 {
            return Err(SpinModelError::InvalidParameters("ge_be must be positive".into()));
        }
        if self.gn_bn() == 0.0 {
            return Err(SpinModelError::InvalidParameters("gn*beta_n must be nonzero".into()));
        }
        let scale = self.hyperfine.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in (i + 1)..3 {
                if (self.hyperfine[i][j] - self.hyperfine[j][i]).abs() > SYMMETRY_TOL * scale {
                    return Err(SpinModelError::InvalidParameters("hyperfine tensor must be symmetric".into()));
                }
            }
        }
        // I·P·I is a scalar for I = 1/2; a nonzero P signals a 14N parameter set.
        if self.quadrupole.iter().flatten().any(|v| *v != 0.0) {
            return Err(SpinModelError::InvalidParameters(
                "quadrupole tensor must be zero for a spin-1/2 nucleus".into(),
            ));
        }
        Ok(())
    }

    /// True when the hyperfine tensor is diagonal (off-diagonals ≤ 1e-9 MHz).
    pub fn hyperfine_is_diagonal(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| i == j || self.hyperfine[i][j].abs() <= AXIAL_TOL))
    }

    /// True when the hyperfine tensor is diagonal with A_xx = A_yy.
    pub fn hyperfine_is_axial(&self) -> bool {
        self.hyperfine_is_diagonal() && (self.hyperfine[0][0] - self.hyperfine[1][1]).abs() <= AXIAL_TOL
    }
}

pub(crate) const AXIAL_TOL: f64 = 1e-9;

/// Magnetic field in the NV frame (mT); z is the NV symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub const ZERO: FieldVector = FieldVector { bx: 0.0, by: 0.0, bz: 0.0 };

    pub fn new(bx: f64, by: f64, bz: f64) -> Self {
        Self { bx, by, bz }
    }

    /// Field with the given axial component, transverse magnitude and azimuth (degrees).
    pub fn from_axial_transverse(bz: f64, b_perp: f64, azimuth_deg: f64) -> Self {
        let phi = azimuth_deg.to_radians();
        Self::new(b_perp * phi.cos(), b_perp * phi.sin(), bz)
    }

    pub fn b_perp(&self) -> f64 {
        self.bx.hypot(self.by)
    }

    pub fn magnitude(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }

    /// Transverse azimuth in degrees, in [0, 360).
    pub fn azimuth_deg(&self) -> f64 {
        self.by.atan2(self.bx).to_degrees().rem_euclid(360.0)
    }

    /// Weak-field regime flag: |B|·g_eβ_e < D/4.
    pub fn is_weak(&self, p: &NvParameters) -> bool {
        self.magnitude() * p.ge_be < p.zfs / 4.0
    }

    /// Rotates the field about the NV axis by `angle_deg`.
    pub fn rotated_about_z(&self, angle_deg: f64) -> Self {
        let (s, c) = angle_deg.to_radians().sin_cos();
        Self::new(c * self.bx - s * self.by, s * self.bx + c * self.by, self.bz)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.bx, self.by, self.bz]
    }

    pub fn add(&self, other: &FieldVector) -> Self {
        Self::new(self.bx + other.bx, self.by + other.by, self.bz + other.bz)
    }

    pub fn sub(&self, other: &FieldVector) -> Self {
        Self::new(self.bx - other.bx, self.by - other.by, self.bz - other.bz)
    }
}

impl From<[f64; 3]> for FieldVector {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}
