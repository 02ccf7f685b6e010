//! Field magnitudes from measured frequencies by both routes: lower-branch
//! shift plus Larmor frequency, and the two ODMR branches alone.

use nvmag::inversion::{field_magnitude_from_revival, invert_axial_transverse, invert_odmr_only};
use nvmag::spin_model::{zeeman_shifts_perturbative, NvParameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = NvParameters::default();

    let at = invert_axial_transverse(-85.26, 0.1632, &p)?;
    println!(
        "shift -85.26 MHz, omega_L 163.2 kHz: |B_z| = {:.4} mT, B_perp = {:.4} mT, theta = {:.2} deg, |B| = {:.4} mT ({} iterations)",
        at.bz_abs,
        at.b_perp,
        at.theta,
        at.magnitude(),
        at.iterations
    );
    let revival = field_magnitude_from_revival(24.27, &p)?;
    println!("echo revival at 24.27 us: |B| = {revival:.4} mT ({:+.1}%)", 100.0 * (revival / at.magnitude() - 1.0));

    let s = zeeman_shifts_perturbative(at.bz_abs, at.b_perp, &p)?;
    let odmr = invert_odmr_only(s.plus, s.minus, &p)?;
    println!(
        "ODMR-only with shifts {:+.4}/{:+.4} MHz: |B_z| = {:.4} mT, B_perp = {:.4} mT",
        s.plus, s.minus, odmr.bz_abs, odmr.b_perp
    );
    Ok(())
}
