use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dipole::{DipoleMagnet, Vec3};
use super::ScanError;
use crate::spin_model::NvParameters;

/// Configuration documents carry this `version`.
pub const CONFIG_VERSION: u32 = 1;

/// Magnet offsets (mm) visited by the scan, along lab X and Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    fn axis(range: [f64; 2], n: usize, k: usize) -> f64 {
        if n <= 1 {
            range[0]
        } else {
            range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64
        }
    }

    pub fn x(&self, ix: usize) -> f64 {
        Self::axis(self.x_range, self.nx, ix)
    }

    pub fn y(&self, iy: usize) -> f64 {
        Self::axis(self.y_range, self.ny, iy)
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if self.nx == 0 || self.ny == 0 {
            return Err(ScanError::InvalidConfig("grid needs nx, ny ≥ 1".into()));
        }
        if self.nx > u32::MAX as usize || self.ny > u32::MAX as usize {
            return Err(ScanError::InvalidConfig("grid dimensions must fit in 32 bits".into()));
        }
        if !self.x_range.iter().chain(&self.y_range).all(|v| v.is_finite()) {
            return Err(ScanError::InvalidConfig("grid ranges must be finite".into()));
        }
        Ok(())
    }
}

/// ODMR acquisition on the lower branch. Placeholder linewidth and contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdmrSettings {
    /// FWHM, MHz.
    pub linewidth: f64,
    pub contrast: f64,
    /// Sweep width around the lower branch, MHz.
    pub span: f64,
    pub points: usize,
}

impl Default for OdmrSettings {
    fn default() -> Self {
        Self { linewidth: 0.8, contrast: 0.15, span: 16.0, points: 321 }
    }
}

/// Nuclear free-precession acquisition in the m_s = 0 manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecessionSettings {
    pub i0: f64,
    pub ic: f64,
    /// μs.
    pub t0: f64,
    /// Trace length, μs.
    pub duration: f64,
    pub points: usize,
    /// Periodogram search range, MHz. The lower end defaults to 2.5 periods
    /// over the trace.
    pub grid_min: Option<f64>,
    pub grid_max: f64,
}

impl Default for PrecessionSettings {
    fn default() -> Self {
        Self { i0: 1.0, ic: 0.3, t0: 156.0, duration: 312.0, points: 600, grid_min: None, grid_max: 0.5 }
    }
}

impl PrecessionSettings {
    pub fn grid_min(&self) -> f64 {
        self.grid_min.unwrap_or(2.5 / self.duration)
    }
}

/// Photon counting noise. Dwell is seconds per sample point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSettings {
    pub photon_rate: f64,
    pub odmr_dwell: f64,
    pub precession_dwell: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self { photon_rate: 3.0e4, odmr_dwell: 1.0, precession_dwell: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Bz,
    Bperp,
    Error,
}

impl MapKind {
    pub const ALL: [MapKind; 3] = [MapKind::Bz, MapKind::Bperp, MapKind::Error];

    pub fn file_name(self) -> &'static str {
        match self {
            MapKind::Bz => "map_bz.csv",
            MapKind::Bperp => "map_bperp.csv",
            MapKind::Error => "map_error.csv",
        }
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_outputs() -> Vec<MapKind> {
    MapKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub grid: GridSpec,
    pub magnet: DipoleMagnet,
    /// NV position, lab frame, mm.
    #[serde(default)]
    pub sensor: Vec3,
    #[serde(default)]
    pub nv: NvParameters,
    #[serde(default)]
    pub odmr: OdmrSettings,
    #[serde(default)]
    pub precession: PrecessionSettings,
    /// Absent means noiseless records.
    #[serde(default)]
    pub noise: Option<NoiseSettings>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<MapKind>,
}

impl Default for ScanConfig {
    /// A 20 × 20 scan of a magnet 4 mm below the NV over ±3 mm, fields
    /// between about 0.8 and 4 mT.
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            grid: GridSpec { x_range: [-3.0, 3.0], y_range: [-3.0, 3.0], nx: 20, ny: 20 },
            magnet: DipoleMagnet {
                position: [0.0, 0.0, -4.0],
                moment: [30.0, 0.0, 120.0],
                nv_orientation: [0.816496580927726, 0.0, 0.5773502691896258],
            },
            sensor: [0.0; 3],
            nv: NvParameters::default(),
            odmr: OdmrSettings::default(),
            precession: PrecessionSettings::default(),
            noise: None,
            seed: 0,
            outputs: default_outputs(),
        }
    }
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self, ScanError> {
        let cfg: ScanConfig = serde_json::from_str(text).map_err(|e| ScanError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if self.version != CONFIG_VERSION {
            return Err(ScanError::InvalidConfig(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.grid.validate()?;
        self.magnet.validate()?;
        self.nv.validate().map_err(|e| ScanError::InvalidConfig(e.to_string()))?;
        if !self.sensor.iter().all(|v| v.is_finite()) {
            return Err(ScanError::InvalidConfig("sensor position must be finite".into()));
        }
        let o = &self.odmr;
        if !(o.linewidth > 0.0)
            || !(0.0..1.0).contains(&o.contrast)
            || o.contrast == 0.0
            || !(o.span > 0.0)
            || o.points < 8
        {
            return Err(ScanError::InvalidConfig(
                "odmr needs linewidth > 0, 0 < contrast < 1, span > 0, points ≥ 8".into(),
            ));
        }
        let t = &self.precession;
        if !(t.ic > 0.0) || !(t.t0 > 0.0) || !(t.duration > 0.0) || t.points < 8 || !(t.grid_max > t.grid_min()) {
            return Err(ScanError::InvalidConfig(
                "precession needs ic, t0, duration > 0, points ≥ 8 and grid_max above grid_min".into(),
            ));
        }
        if let Some(n) = &self.noise {
            if !(n.photon_rate > 0.0 && n.odmr_dwell > 0.0 && n.precession_dwell > 0.0) {
                return Err(ScanError::InvalidConfig("noise rate and dwell times must be positive".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = ScanConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ScanConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let mut v = serde_json::to_value(ScanConfig::default()).unwrap();
        v["colour"] = "blue".into();
        assert!(ScanConfig::from_json(&v.to_string()).is_err());
        let mut v = serde_json::to_value(ScanConfig::default()).unwrap();
        v["version"] = 2.into();
        assert!(ScanConfig::from_json(&v.to_string()).is_err());
        let mut v = serde_json::to_value(ScanConfig::default()).unwrap();
        v["odmr"]["width"] = 1.0.into();
        assert!(ScanConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn grid_coordinates() {
        let g = GridSpec { x_range: [-1.0, 1.0], y_range: [0.0, 2.0], nx: 3, ny: 1 };
        assert_eq!((g.x(0), g.x(1), g.x(2)), (-1.0, 0.0, 1.0));
        assert_eq!(g.y(0), 0.0);
    }

    #[test]
    fn hash_tracks_seed() {
        let a = ScanConfig::default();
        let b = ScanConfig { seed: 7, ..ScanConfig::default() };
        assert_ne!(a.hash(), b.hash());
    }
}
