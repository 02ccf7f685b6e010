use serde::{Deserialize, Serialize};

use super::{AxialTransverse, InversionError};
use crate::spin_model::FieldVector;

/// Slack on the arccos domain that absorbs rounding.
pub const ARCCOS_SLACK: f64 = 1e-9;

/// Default matching tolerance: three times the 1σ uncertainty of the
/// reconstructed magnitudes.
pub fn default_tolerance(sigma_bz: f64, sigma_bperp: f64) -> f64 {
    3.0 * sigma_bz.hypot(sigma_bperp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Rings,
    Pair,
    Unique,
}

/// Circle of candidate field endpoints: height `z` on the NV axis, radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub z: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub stage: Stage,
    pub rings: Vec<Ring>,
    #[serde(with = "vectors_as_arrays")]
    pub vectors: Vec<FieldVector>,
    pub tolerance: f64,
}

mod vectors_as_arrays {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::spin_model::FieldVector;

    pub fn serialize<S: Serializer>(v: &[FieldVector], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(FieldVector::as_array).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<FieldVector>, D::Error> {
        Ok(Vec::<[f64; 3]>::deserialize(d)?.into_iter().map(FieldVector::from).collect())
    }
}

/// A known auxiliary field, NV frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedField {
    pub vector: FieldVector,
}

impl CalibratedField {
    pub fn new(vector: FieldVector) -> Self {
        Self { vector }
    }

    /// Purely axial or purely transverse fields cannot break both ambiguities.
    pub fn is_degenerate(&self, tol: f64) -> bool {
        self.vector.b_perp() <= tol || self.vector.bz.abs() <= tol
    }
}

/// Reconstruction of B + C for one calibrated field C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedMeasurement {
    pub field: CalibratedField,
    pub measured: AxialTransverse,
}

/// The two rings z = ±|B_z|, radius B_⊥ on which the field endpoint lies.
pub fn candidate_rings(at: &AxialTransverse) -> CandidateSet {
    let (z, r) = (at.bz_abs, at.b_perp);
    if r == 0.0 {
        let mut vectors = vec![FieldVector::new(0.0, 0.0, z)];
        if z != 0.0 {
            vectors.push(FieldVector::new(0.0, 0.0, -z));
        }
        let stage = if vectors.len() == 1 { Stage::Unique } else { Stage::Pair };
        return CandidateSet { stage, rings: Vec::new(), vectors, tolerance: 0.0 };
    }
    let rings = if z == 0.0 { vec![Ring { z: 0.0, r }] } else { vec![Ring { z, r }, Ring { z: -z, r }] };
    CandidateSet { stage: Stage::Rings, rings, vectors: Vec::new(), tolerance: 0.0 }
}

#[derive(Debug, Clone)]
enum Azimuths {
    Free,
    Points(Vec<f64>),
}

struct Branch {
    z: f64,
    azimuths: Azimuths,
}

fn wrap_degrees(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

fn push_unique(list: &mut Vec<f64>, azimuth: f64, b_perp: f64, tol: f64) {
    let exists = list.iter().any(|&a| {
        let d = (a - azimuth).to_radians();
        // Chord length between the two endpoints on the ring.
        2.0 * b_perp * (0.5 * d).sin().abs() <= tol
    });
    if !exists {
        list.push(azimuth);
    }
}

/// Intersects the base rings with the rings of each calibrated measurement.
///
/// For each sign of B_z the axial constraint |B_z + C_z| = measured |B_z|
/// is checked, then the azimuth φ follows from
/// cos(φ − ψ_C) = (B'_⊥² − B_⊥² − C_⊥²)/(2 B_⊥ C_⊥),
/// which has at most two solutions. Later calibrated fields filter the
/// points left by earlier ones.
///
/// One generic calibrated field leaves a mirror pair ([`Stage::Pair`]); a
/// second one whose transverse part is not collinear with the first leaves a
/// single vector ([`Stage::Unique`]). Anything still ambiguous is reported
/// as [`InversionError::AmbiguityRemains`] carrying the partial candidate set.
pub fn disambiguate(
    base: &AxialTransverse,
    cal_measurements: &[CalibratedMeasurement],
    tol: f64,
) -> Result<CandidateSet, InversionError> {
    if !(tol >= 0.0) {
        return Err(InversionError::InvalidInput("tolerance must be non-negative".into()));
    }
    let (bz_abs, b_perp) = (base.bz_abs, base.b_perp);
    let transverse_free = b_perp > tol;
    let start = || if transverse_free { Azimuths::Free } else { Azimuths::Points(vec![0.0]) };
    let mut branches: Vec<Branch> = if bz_abs > tol {
        vec![Branch { z: bz_abs, azimuths: start() }, Branch { z: -bz_abs, azimuths: start() }]
    } else {
        vec![Branch { z: bz_abs, azimuths: start() }]
    };
    let radius = if transverse_free { b_perp } else { 0.0 };

    let mut worst_cos: Option<f64> = None;
    for cal in cal_measurements {
        let c = cal.field.vector;
        let (c_perp, psi) = (c.b_perp(), c.azimuth_deg());
        let (target_z, target_perp) = (cal.measured.bz_abs, cal.measured.b_perp);
        let mut survivors = Vec::new();
        for branch in branches.drain(..) {
            if ((branch.z + c.bz).abs() - target_z).abs() > tol {
                continue;
            }
            let azimuths = match branch.azimuths {
                Azimuths::Free if c_perp <= tol => {
                    if (b_perp.hypot(c_perp) - target_perp).abs() > tol && (b_perp - target_perp).abs() > tol {
                        continue;
                    }
                    Azimuths::Free
                }
                Azimuths::Free => {
                    let arg = (target_perp.powi(2) - b_perp.powi(2) - c_perp.powi(2)) / (2.0 * b_perp * c_perp);
                    if arg.abs() > 1.0 + ARCCOS_SLACK {
                        worst_cos = Some(arg);
                        continue;
                    }
                    let delta = arg.clamp(-1.0, 1.0).acos().to_degrees();
                    let mut points = Vec::with_capacity(2);
                    push_unique(&mut points, wrap_degrees(psi + delta), b_perp, tol);
                    push_unique(&mut points, wrap_degrees(psi - delta), b_perp, tol);
                    Azimuths::Points(points)
                }
                Azimuths::Points(points) => {
                    let kept: Vec<f64> = points
                        .into_iter()
                        .filter(|&phi| {
                            let (s, co) = phi.to_radians().sin_cos();
                            let bx = radius * co + c.bx;
                            let by = radius * s + c.by;
                            (bx.hypot(by) - target_perp).abs() <= tol
                        })
                        .collect();
                    if kept.is_empty() {
                        continue;
                    }
                    Azimuths::Points(kept)
                }
            };
            survivors.push(Branch { z: branch.z, azimuths });
        }
        if survivors.is_empty() {
            return Err(match worst_cos {
                Some(argument) => InversionError::Degenerate { argument },
                None => InversionError::NoIntersection,
            });
        }
        branches = survivors;
    }

    let rings: Vec<Ring> =
        branches.iter().filter(|b| matches!(b.azimuths, Azimuths::Free)).map(|b| Ring { z: b.z, r: b_perp }).collect();
    if !rings.is_empty() {
        let set = CandidateSet { stage: Stage::Rings, rings, vectors: Vec::new(), tolerance: tol };
        return Err(InversionError::AmbiguityRemains(Box::new(set)));
    }
    let vectors: Vec<FieldVector> = branches
        .iter()
        .flat_map(|b| match &b.azimuths {
            Azimuths::Points(points) => {
                points.iter().map(|&phi| FieldVector::from_axial_transverse(b.z, radius, phi)).collect::<Vec<_>>()
            }
            Azimuths::Free => Vec::new(),
        })
        .collect();
    match vectors.len() {
        1 => Ok(CandidateSet { stage: Stage::Unique, rings: Vec::new(), vectors, tolerance: tol }),
        2 if cal_measurements.len() == 1 => {
            Ok(CandidateSet { stage: Stage::Pair, rings: Vec::new(), vectors, tolerance: tol })
        }
        _ => Err(InversionError::AmbiguityRemains(Box::new(CandidateSet {
            stage: Stage::Pair,
            rings: Vec::new(),
            vectors,
            tolerance: tol,
        }))),
    }
}
