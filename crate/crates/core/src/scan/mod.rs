//! Grid scans of a dipole magnet through the full measurement chain.
//!
//! At each grid point the magnet is offset by (x, y) in the lab frame, its
//! field at the NV is computed, ODMR and free-precession records are
//! synthesized (optionally with counting noise), fitted, and inverted back to
//! (|B_z|, B_⊥). Point failures are recorded as flags and never stop the scan.
//!
//! Noise for point (ix, iy) is drawn from a ChaCha8 generator keyed by the
//! scan seed on stream `(ix << 32) | iy`; ODMR noise is drawn first, then
//! precession noise. Results therefore do not depend on thread scheduling.

mod config;
mod dipole;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{fit_odmr_doublet, fit_precession, FrequencyGrid};
use crate::format::{fmt_sig9, to_json_sig9};
use crate::inversion::{invert_branch, AxialTransverse, InversionWarning};
use crate::signal_synth::{
    add_shot_noise_with, linspace, synth_odmr_lines, synth_precession, PrecessionModel, Sweep, RNG_ALGORITHM,
};
use crate::spin_model::{larmor_from_axial_transverse, zeeman_shifts_perturbative, Branch, FieldVector};

pub use config::{GridSpec, MapKind, NoiseSettings, OdmrSettings, PrecessionSettings, ScanConfig, CONFIG_VERSION};
pub use dipole::{dipole_field, dipole_field_lab, nv_frame, DipoleMagnet, Vec3, NEAR_FIELD_CUTOFF};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid scan config: {0}")]
    InvalidConfig(String),
    #[error("sensor {distance} mm from the dipole, inside the {NEAR_FIELD_CUTOFF} mm cutoff")]
    TooClose { distance: f64 },
    #[error("writing scan output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    TooClose,
    StrongField,
    OdmrFitFailed,
    PrecessionFitFailed,
    NotConverged,
    InversionFailed,
    TransverseClamped,
    AxialClamped,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::TooClose => "too_close",
            PointFlag::StrongField => "strong_field",
            PointFlag::OdmrFitFailed => "odmr_fit_failed",
            PointFlag::PrecessionFitFailed => "precession_fit_failed",
            PointFlag::NotConverged => "not_converged",
            PointFlag::InversionFailed => "inversion_failed",
            PointFlag::TransverseClamped => "transverse_clamped",
            PointFlag::AxialClamped => "axial_clamped",
        }
    }

    /// Flags that leave no estimate behind.
    pub fn is_fatal(self) -> bool {
        !matches!(self, PointFlag::NotConverged | PointFlag::TransverseClamped | PointFlag::AxialClamped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub ix: usize,
    pub iy: usize,
    pub x_mm: f64,
    pub y_mm: f64,
    pub bz_true: f64,
    pub bperp_true: f64,
    /// NaN when a fatal flag is set.
    pub bz_est: f64,
    pub bperp_est: f64,
    pub flags: Vec<PointFlag>,
}

impl ScanPoint {
    pub fn flag_label(&self) -> String {
        if self.flags.is_empty() {
            "ok".into()
        } else {
            self.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
        }
    }

    pub fn is_ok(&self) -> bool {
        self.flags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub nx: usize,
    pub ny: usize,
    pub seed: u64,
    pub config_hash: String,
    /// Row-major in y: index iy·nx + ix.
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    pub fn at(&self, ix: usize, iy: usize) -> &ScanPoint {
        &self.points[iy * self.nx + ix]
    }

    pub fn max_abs_error(&self) -> Option<(f64, f64)> {
        let ok: Vec<&ScanPoint> = self.points.iter().filter(|p| p.bz_est.is_finite()).collect();
        if ok.is_empty() {
            return None;
        }
        let fold = |f: fn(&ScanPoint) -> f64| ok.iter().map(|p| f(p)).fold(0.0_f64, f64::max);
        Some((fold(|p| (p.bz_est - p.bz_true).abs()), fold(|p| (p.bperp_est - p.bperp_true).abs())))
    }
}

/// Generator for point (ix, iy) of a scan seeded with `seed`.
pub fn point_rng(seed: u64, ix: usize, iy: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((ix as u64) << 32) | iy as u64);
    rng
}

/// Runs the synthetic measurement chain for one field: ODMR of the lower
/// branch plus a free-precession trace, both fitted, then inverted.
/// Returns the estimate (if any) and the flags raised on the way.
pub fn measure_point(
    b: &FieldVector,
    cfg: &ScanConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> (Option<AxialTransverse>, Vec<PointFlag>) {
    let p = &cfg.nv;
    let mut flags = Vec::new();
    let (bz, bperp) = (b.bz.abs(), b.b_perp());
    let (shifts, omega_l) = match (zeeman_shifts_perturbative(bz, bperp, p), larmor_from_axial_transverse(bz, bperp, p))
    {
        (Ok(s), Ok(w)) if b.is_weak(p) => (s, w),
        _ => return (None, vec![PointFlag::StrongField]),
    };

    let center = p.zfs + shifts.minus;
    let half = 0.5 * p.hyperfine[2][2];
    let window_mid = center.round();
    let o = &cfg.odmr;
    let sweep = Sweep::new(window_mid - 0.5 * o.span, window_mid + 0.5 * o.span, o.points);
    let t = &cfg.precession;
    let model = PrecessionModel { i0: t.i0, ic: t.ic, omega_l, t0: t.t0 };
    let times = linspace(0.0, t.duration, t.points);

    let records = synth_odmr_lines(&[center - half, center + half], sweep, o.linewidth, o.contrast)
        .and_then(|odmr| Ok((odmr, synth_precession(&model, &times)?)));
    let (mut odmr, mut trace) = match records {
        Ok(r) => r,
        Err(_) => return (None, vec![PointFlag::OdmrFitFailed]),
    };
    if let (Some(noise), Some(rng)) = (&cfg.noise, rng) {
        match add_shot_noise_with(&odmr, noise.photon_rate, noise.odmr_dwell, &mut *rng)
            .and_then(|r| Ok((r, add_shot_noise_with(&trace, noise.photon_rate, noise.precession_dwell, &mut *rng)?)))
        {
            Ok((a, b)) => {
                odmr = a;
                trace = b;
            }
            Err(_) => return (None, vec![PointFlag::OdmrFitFailed]),
        }
    }

    let dw_minus = match fit_odmr_doublet(&odmr) {
        Ok(fit) => {
            if !fit.converged {
                flags.push(PointFlag::NotConverged);
            }
            0.5 * (fit.param("c1") + fit.param("c2")) - p.zfs
        }
        Err(_) => {
            flags.push(PointFlag::OdmrFitFailed);
            return (None, flags);
        }
    };
    let (omega_est, sigma_omega) = match fit_precession(&trace, FrequencyGrid::new(t.grid_min(), t.grid_max)) {
        Ok(fit) => {
            if !fit.converged && !flags.contains(&PointFlag::NotConverged) {
                flags.push(PointFlag::NotConverged);
            }
            let s = fit.sigma("omega_l");
            (fit.param("omega_l"), if s.is_finite() { s } else { 0.0 })
        }
        Err(_) => {
            flags.push(PointFlag::PrecessionFitFailed);
            return (None, flags);
        }
    };
    match invert_branch(dw_minus, Branch::Minus, omega_est, sigma_omega, p) {
        Ok(at) => {
            for w in &at.warnings {
                flags.push(match w {
                    InversionWarning::TransverseClamped => PointFlag::TransverseClamped,
                    InversionWarning::AxialClamped => PointFlag::AxialClamped,
                });
            }
            (Some(at), flags)
        }
        Err(_) => {
            flags.push(PointFlag::InversionFailed);
            (None, flags)
        }
    }
}

/// Scans the grid in parallel. Only configuration errors abort.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanResult, ScanError> {
    cfg.validate()?;
    let (nx, ny) = (cfg.grid.nx, cfg.grid.ny);
    let points = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k % nx, k / nx);
            let (x_mm, y_mm) = (cfg.grid.x(ix), cfg.grid.y(iy));
            let magnet = cfg.magnet.shifted(x_mm, y_mm);
            let mut point = ScanPoint {
                ix,
                iy,
                x_mm,
                y_mm,
                bz_true: f64::NAN,
                bperp_true: f64::NAN,
                bz_est: f64::NAN,
                bperp_est: f64::NAN,
                flags: Vec::new(),
            };
            let b = match dipole_field(&magnet, cfg.sensor) {
                Ok(b) => b,
                Err(_) => {
                    point.flags.push(PointFlag::TooClose);
                    return point;
                }
            };
            point.bz_true = b.bz.abs();
            point.bperp_true = b.b_perp();
            let mut rng = cfg.noise.map(|_| point_rng(cfg.seed, ix, iy));
            let (est, flags) = measure_point(&b, cfg, rng.as_mut());
            if let Some(at) = est {
                point.bz_est = at.bz_abs;
                point.bperp_est = at.b_perp;
            }
            point.flags = flags;
            point
        })
        .collect();
    Ok(ScanResult { nx, ny, seed: cfg.seed, config_hash: cfg.hash(), points })
}

/// Column layout of the full map file.
pub const MAP_COLUMNS: &str = "x_mm,y_mm,bz_true_mt,bperp_true_mt,bz_est_mt,bperp_est_mt,flag";

pub const FULL_MAP_FILE: &str = "map_full.csv";
pub const META_FILE: &str = "scan_meta.json";

fn header_comment(result: &ScanResult) -> String {
    format!("# config_sha256={} seed={}\n", result.config_hash, result.seed)
}

fn write_csv(path: &Path, header: &str, comment: &str, rows: impl Iterator<Item = String>) -> Result<(), ScanError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    out.write_all(comment.as_bytes())?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Everything needed to interpret the map files.
#[derive(Debug, Clone, Serialize)]
struct ScanMeta<'a> {
    config_sha256: &'a str,
    seed: u64,
    nx: usize,
    ny: usize,
    rng: &'static str,
    rng_streams: &'static str,
    grid_coordinates: &'static str,
    nv_frame: &'static str,
    units: &'static str,
    files: Vec<String>,
    points_ok: usize,
    points_flagged: usize,
    max_abs_error_bz_mt: Option<f64>,
    max_abs_error_bperp_mt: Option<f64>,
    config: &'a ScanConfig,
}

/// Picks the (truth, estimate) pair or the error pair a map file shows.
type MapRow = fn(&ScanPoint) -> (f64, f64);

/// Writes `map_full.csv`, one file per requested map kind and
/// `scan_meta.json` into `dir`. Returns the paths written.
pub fn write_maps(result: &ScanResult, cfg: &ScanConfig, dir: &Path) -> Result<Vec<PathBuf>, ScanError> {
    fs::create_dir_all(dir)?;
    let comment = header_comment(result);
    let f = fmt_sig9;
    let mut written = Vec::new();

    let path = dir.join(FULL_MAP_FILE);
    write_csv(
        &path,
        MAP_COLUMNS,
        &comment,
        result.points.iter().map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                f(p.x_mm),
                f(p.y_mm),
                f(p.bz_true),
                f(p.bperp_true),
                f(p.bz_est),
                f(p.bperp_est),
                p.flag_label()
            )
        }),
    )?;
    written.push(path);

    for kind in &cfg.outputs {
        let path = dir.join(kind.file_name());
        let (header, row): (&str, MapRow) = match kind {
            MapKind::Bz => ("x_mm,y_mm,bz_true_mt,bz_est_mt,flag", |p| (p.bz_true, p.bz_est)),
            MapKind::Bperp => ("x_mm,y_mm,bperp_true_mt,bperp_est_mt,flag", |p| (p.bperp_true, p.bperp_est)),
            MapKind::Error => {
                ("x_mm,y_mm,bz_error_mt,bperp_error_mt,flag", |p| (p.bz_est - p.bz_true, p.bperp_est - p.bperp_true))
            }
        };
        write_csv(
            &path,
            header,
            &comment,
            result.points.iter().map(|p| {
                let (a, b) = row(p);
                format!("{},{},{},{},{}", f(p.x_mm), f(p.y_mm), f(a), f(b), p.flag_label())
            }),
        )?;
        written.push(path);
    }

    let errors = result.max_abs_error();
    let ok = result.points.iter().filter(|p| p.is_ok()).count();
    let meta = ScanMeta {
        config_sha256: &result.config_hash,
        seed: result.seed,
        nx: result.nx,
        ny: result.ny,
        rng: RNG_ALGORITHM,
        rng_streams: "key = seed, stream = (ix << 32) | iy; ODMR noise drawn before precession noise",
        grid_coordinates: "x_mm, y_mm are magnet offsets along lab X and Y from magnet.position",
        nv_frame:
            "z along nv_orientation; x = lab X projected perpendicular to z (lab Y if X is parallel); y = z cross x",
        units: "mm, mT, MHz, us",
        files: written
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        points_ok: ok,
        points_flagged: result.points.len() - ok,
        max_abs_error_bz_mt: errors.map(|e| e.0),
        max_abs_error_bperp_mt: errors.map(|e| e.1),
        config: cfg,
    };
    let path = dir.join(META_FILE);
    fs::write(&path, to_json_sig9(&meta).map_err(|e| ScanError::Io(e.into()))?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(noise: bool) -> ScanConfig {
        let mut cfg = ScanConfig::default();
        cfg.grid.nx = 4;
        cfg.grid.ny = 3;
        if noise {
            cfg.noise = Some(NoiseSettings::default());
            cfg.seed = 11;
        }
        cfg
    }

    #[test]
    fn noiseless_points_round_trip() {
        let r = run_scan(&small(false)).unwrap();
        assert_eq!(r.points.len(), 12);
        for p in &r.points {
            assert!(p.is_ok(), "{p:?}");
            assert!((p.bz_est - p.bz_true).abs() < 1e-6, "{p:?}");
            assert!((p.bperp_est - p.bperp_true).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn noisy_points_are_deterministic_and_order_independent() {
        let cfg = small(true);
        let a = run_scan(&cfg).unwrap();
        let b = run_scan(&cfg).unwrap();
        assert_eq!(a, b);
        let p = a.at(2, 1);
        let b_true = dipole_field(&cfg.magnet.shifted(p.x_mm, p.y_mm), cfg.sensor).unwrap();
        let mut rng = point_rng(cfg.seed, 2, 1);
        let (est, _) = measure_point(&b_true, &cfg, Some(&mut rng));
        let est = est.unwrap();
        assert_eq!((est.bz_abs, est.b_perp), (p.bz_est, p.bperp_est));
    }

    #[test]
    fn too_close_is_flagged_not_fatal() {
        let mut cfg = small(false);
        cfg.magnet.position = [0.0, 0.0, 0.0];
        cfg.grid = GridSpec { x_range: [0.0, 1.0], y_range: [0.0, 0.0], nx: 2, ny: 1 };
        let r = run_scan(&cfg).unwrap();
        assert_eq!(r.points[0].flags, vec![PointFlag::TooClose]);
        assert_eq!(r.points[0].flag_label(), "too_close");
        assert!(r.points[0].bz_est.is_nan());
        assert!(r.points[1].flags.iter().all(|f| *f != PointFlag::TooClose));
    }

    #[test]
    fn streams_differ_per_point() {
        use rand::Rng;
        let a: u64 = point_rng(1, 0, 1).random();
        let b: u64 = point_rng(1, 1, 0).random();
        assert_ne!(a, b);
    }
}
