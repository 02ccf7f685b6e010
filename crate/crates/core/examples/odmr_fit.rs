//! Noisy ODMR spectrum of the lower branch, fitted with a Lorentzian doublet.

use nvmag::estimators::fit_odmr_doublet;
use nvmag::signal_synth::{add_shot_noise, synth_odmr, Sweep};
use nvmag::spin_model::{exact_transitions, Branch, FieldVector, NvParameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = NvParameters::default();
    let b = FieldVector::from_axial_transverse(3.129, 2.426, 0.0);
    let clean = synth_odmr(&b, &p, Sweep::new(2778.0, 2792.0, 281), 0.8, 0.15)?;
    let noisy = add_shot_noise(&clean, 3.0e4, 0.05, 1)?;
    let fit = fit_odmr_doublet(&noisy)?;

    let truth: Vec<f64> = exact_transitions(&b, &p)?.branch(Branch::Minus).map(|l| l.frequency).collect();
    println!("true lines: {:.4} {:.4} MHz", truth[0], truth[1]);
    for (name, value) in &fit.params {
        println!("{name:>10} = {value:.5} ± {:.5}", fit.sigma(name));
    }
    let center = 0.5 * (fit.param("c1") + fit.param("c2"));
    println!(
        "lower-branch shift {:.4} MHz, hyperfine splitting {:.4} MHz",
        center - p.zfs,
        fit.param("c2") - fit.param("c1")
    );
    println!("converged in {} iterations, flags {:?}", fit.iterations, fit.flags);
    Ok(())
}
