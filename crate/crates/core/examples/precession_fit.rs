//! Free precession of the ¹⁵N spin in m_s = 0: synthesize a noisy trace,
//! locate the frequency with a periodogram, refine, and convert to B_perp.

use nvmag::estimators::{fit_precession, FrequencyGrid};
use nvmag::inversion::invert_axial_transverse;
use nvmag::signal_synth::{add_shot_noise, linspace, synth_precession, PrecessionModel};
use nvmag::spin_model::{larmor_frequency, zeeman_shifts_perturbative, FieldVector, NvParameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = NvParameters::default();
    let (bz, bp) = (3.129, 2.426);
    let omega = larmor_frequency(&FieldVector::from_axial_transverse(bz, bp, 0.0), &p)?;
    let model = PrecessionModel { i0: 1.0, ic: 0.3, omega_l: omega, t0: 156.0 };
    let trace = add_shot_noise(&synth_precession(&model, &linspace(0.0, 312.0, 600))?, 3.0e4, 0.1, 5)?;

    let fit = fit_precession(&trace, FrequencyGrid::new(0.01, 0.5))?;
    println!("true omega_L {:.3} kHz", omega * 1e3);
    for (name, value) in &fit.params {
        println!("{name:>8} = {value:.6} ± {:.6}", fit.sigma(name));
    }

    let dw_minus = zeeman_shifts_perturbative(bz, bp, &p)?.minus;
    let at = invert_axial_transverse(dw_minus, fit.param("omega_l"), &p)?;
    println!("B_perp = {:.4} mT (true {bp}), |B_z| = {:.4} mT", at.b_perp, at.bz_abs);
    Ok(())
}
