//! Spin echo with ¹³C collapse and revival. The revival time gives |B|
//! independently of the ODMR and precession readouts.

use nvmag::estimators::{fit_echo, ParamTable};
use nvmag::inversion::{field_magnitude_from_revival, revival_time};
use nvmag::signal_synth::{add_shot_noise, linspace, synth_echo, EchoModel};
use nvmag::spin_model::{larmor_frequency, FieldVector, NvParameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = NvParameters::default();
    let b = FieldVector::from_axial_transverse(3.129, 2.426, 0.0);
    let model = EchoModel {
        tau_c: 8.0,
        tau_re: revival_time(b.magnitude(), &p),
        a: 0.6,
        b: 0.7,
        omega1: larmor_frequency(&b, &p)?,
        omega2: 3.03,
    };
    let rec = add_shot_noise(&synth_echo(&model, &linspace(0.0, 40.0, 801))?, 3.0e4, 0.2, 3)?;

    // Rough starting values, as read off a plot.
    let init: ParamTable =
        [("tau_c", 7.0), ("tau_re", 22.0), ("a", 0.5), ("b", 0.6), ("omega1", 0.17), ("omega2", 3.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
    let fit = fit_echo(&rec, &init)?;
    for (name, value) in &fit.params {
        println!("{name:>7} = {value:.5} ± {:.5}", fit.sigma(name));
    }
    let from_revival = field_magnitude_from_revival(fit.param("tau_re"), &p)?;
    println!("|B| from revival {from_revival:.4} mT, true {:.4} mT", b.magnitude());
    Ok(())
}
