//! Noiseless and noisy 20 × 20 scans of the default dipole magnet, written to
//! a directory (first argument, default `scan_out`).

use std::path::PathBuf;
use std::time::Instant;

use nvmag::scan::{run_scan, write_maps, NoiseSettings, ScanConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scan_out".into()));
    let cfg = ScanConfig::default();

    let start = Instant::now();
    let clean = run_scan(&cfg)?;
    let flagged = clean.points.iter().filter(|p| !p.is_ok()).count();
    let (ez, ep) = clean.max_abs_error().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "noiseless {}x{}: {flagged} flagged, max |error| bz {ez:.3e} mT, bperp {ep:.3e} mT ({:.2?})",
        clean.nx,
        clean.ny,
        start.elapsed()
    );
    let range = |f: fn(&nvmag::scan::ScanPoint) -> f64| {
        clean.points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    println!("|B_z| range {:?} mT, B_perp range {:?} mT", range(|p| p.bz_true), range(|p| p.bperp_true));

    // Along each row, count steps where |B_z| grows while B_perp shrinks.
    let mut contrary = 0;
    for iy in 0..clean.ny {
        for ix in 1..clean.nx {
            let (a, b) = (clean.at(ix - 1, iy), clean.at(ix, iy));
            if b.bz_true > a.bz_true && b.bperp_true < a.bperp_true {
                contrary += 1;
            }
        }
    }
    println!("steps along X with B_z up and B_perp down: {contrary}");

    let noisy_cfg = ScanConfig { noise: Some(NoiseSettings::default()), seed: 7, ..cfg };
    let start = Instant::now();
    let noisy = run_scan(&noisy_cfg)?;
    let (ez, ep) = noisy.max_abs_error().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "noisy seed 7: {} flagged, max |error| bz {ez:.3e} mT, bperp {ep:.3e} mT ({:.2?})",
        noisy.points.iter().filter(|p| !p.is_ok()).count(),
        start.elapsed()
    );
    for path in write_maps(&noisy, &noisy_cfg, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
