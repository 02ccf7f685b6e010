use serde::{Deserialize, Serialize};

use super::ScanError;
use crate::spin_model::FieldVector;

/// Closest approach (mm) at which the point-dipole field is evaluated.
pub const NEAR_FIELD_CUTOFF: f64 = 0.1;

pub type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Point magnet in the lab frame.
///
/// `moment` is in mT·mm³ with μ₀/4π absorbed, so the field at distance r mm
/// along the moment is 2|m|/r³ mT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleMagnet {
    /// mm.
    pub position: Vec3,
    pub moment: Vec3,
    /// Unit vector along the NV symmetry axis, lab frame.
    pub nv_orientation: Vec3,
}

impl DipoleMagnet {
    pub fn validate(&self) -> Result<(), ScanError> {
        let finite = self.position.iter().chain(&self.moment).chain(&self.nv_orientation).all(|v| v.is_finite());
        if !finite {
            return Err(ScanError::InvalidConfig("magnet position, moment and NV axis must be finite".into()));
        }
        let n = norm(self.nv_orientation);
        if (n - 1.0).abs() > 1e-12 {
            return Err(ScanError::InvalidConfig(format!("nv_orientation must be a unit vector, |n| = {n}")));
        }
        Ok(())
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        let mut out = *self;
        out.position[0] += dx;
        out.position[1] += dy;
        out
    }
}

/// Right-handed NV frame in lab coordinates: z along the NV axis, x the lab X
/// axis projected perpendicular to it (lab Y when X is parallel to the axis),
/// y = z × x. Azimuths in the NV frame are measured from this x.
pub fn nv_frame(axis: Vec3) -> [Vec3; 3] {
    let z = scale(axis, 1.0 / norm(axis));
    let project = |v: Vec3| {
        let along = dot(v, z);
        [v[0] - along * z[0], v[1] - along * z[1], v[2] - along * z[2]]
    };
    let mut x = project([1.0, 0.0, 0.0]);
    if norm(x) < 1e-6 {
        x = project([0.0, 1.0, 0.0]);
    }
    let x = scale(x, 1.0 / norm(x));
    let y = cross(z, x);
    [x, y, z]
}

/// Field of the dipole at `sensor_lab` (mm), lab frame, mT.
pub fn dipole_field_lab(m: &DipoleMagnet, sensor_lab: Vec3) -> Result<Vec3, ScanError> {
    let r = [sensor_lab[0] - m.position[0], sensor_lab[1] - m.position[1], sensor_lab[2] - m.position[2]];
    let d = norm(r);
    if !(d > NEAR_FIELD_CUTOFF) {
        return Err(ScanError::TooClose { distance: d });
    }
    let u = scale(r, 1.0 / d);
    let um = dot(u, m.moment);
    let inv = 1.0 / (d * d * d);
    Ok([
        (3.0 * u[0] * um - m.moment[0]) * inv,
        (3.0 * u[1] * um - m.moment[1]) * inv,
        (3.0 * u[2] * um - m.moment[2]) * inv,
    ])
}

/// Field of the dipole at `sensor_lab`, expressed in the NV frame.
pub fn dipole_field(m: &DipoleMagnet, sensor_lab: Vec3) -> Result<FieldVector, ScanError> {
    let b = dipole_field_lab(m, sensor_lab)?;
    let [x, y, z] = nv_frame(m.nv_orientation);
    Ok(FieldVector::new(dot(b, x), dot(b, y), dot(b, z)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn magnet(moment: Vec3) -> DipoleMagnet {
        DipoleMagnet { position: [0.0; 3], moment, nv_orientation: [0.0, 0.0, 1.0] }
    }

    #[test]
    fn on_axis_and_equatorial() {
        let m = magnet([0.0, 0.0, 10.0]);
        let b = dipole_field_lab(&m, [0.0, 0.0, 2.0]).unwrap();
        assert!((b[2] - 2.0 * 10.0 / 8.0).abs() < 1e-12 && b[0].abs() < 1e-15 && b[1].abs() < 1e-15);
        let b = dipole_field_lab(&m, [2.0, 0.0, 0.0]).unwrap();
        assert!((b[2] + 10.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn linear_in_moment() {
        let s = [0.7, -1.3, 2.1];
        let a = dipole_field_lab(&magnet([1.0, 2.0, 3.0]), s).unwrap();
        let b = dipole_field_lab(&magnet([-1.0, -2.0, -3.0]), s).unwrap();
        for k in 0..3 {
            assert_eq!(a[k], -b[k]);
        }
    }

    #[test]
    fn cutoff() {
        let m = magnet([0.0, 0.0, 1.0]);
        assert!(matches!(dipole_field(&m, [0.05, 0.0, 0.0]), Err(ScanError::TooClose { .. })));
    }

    #[test]
    fn frame_is_orthonormal_and_preserves_magnitude() {
        for axis in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]] {
            let n = norm(axis);
            let axis = scale(axis, 1.0 / n);
            let [x, y, z] = nv_frame(axis);
            assert!((dot(x, y)).abs() < 1e-15 && (dot(y, z)).abs() < 1e-15 && (dot(x, z)).abs() < 1e-15);
            assert!((dot(cross(x, y), z) - 1.0).abs() < 1e-15);
            let m = DipoleMagnet { position: [0.0, 0.0, -3.0], moment: [10.0, 5.0, 40.0], nv_orientation: axis };
            let lab = dipole_field_lab(&m, [0.3, 0.2, 0.0]).unwrap();
            let nv = dipole_field(&m, [0.3, 0.2, 0.0]).unwrap();
            assert!((norm(lab) - nv.magnitude()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_axis_required() {
        let m = DipoleMagnet { nv_orientation: [0.0, 0.0, 1.001], ..magnet([0.0, 0.0, 1.0]) };
        assert!(m.validate().is_err());
    }
}
