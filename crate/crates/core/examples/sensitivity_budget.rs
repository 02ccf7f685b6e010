//! Error budget at the reference operating point, and how the precession
//! readout depends on the probe delay.

use nvmag::sensitivity::{delta_bperp_precession, report, NoiseBudget};
use nvmag::spin_model::NvParameters;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = NvParameters::default();
    let budget = NoiseBudget::default();
    let r = report(&budget, 3.129, 2.426, &p)?;
    println!("{}", serde_json::to_string_pretty(&r)?);

    println!("\nprobe delay (us)  dB_perp (uT)");
    for t in [20.0, 50.0, 100.0, 156.0, 250.0, 400.0] {
        let b = NoiseBudget { t_probe: t, ..budget };
        println!("{t:>16.0}  {:>12.3}", delta_bperp_precession(&b, &p)? * 1e3);
    }
    Ok(())
}
