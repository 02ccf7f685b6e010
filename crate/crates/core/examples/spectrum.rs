//! Exact transition frequencies from the 6 × 6 Hamiltonian next to the
//! closed-form Zeeman shifts and Larmor frequency, for a few fields.

use nvmag::spin_model::{
    exact_transitions, larmor_frequency, zeeman_shifts_perturbative, Branch, FieldVector, NvParameters,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = NvParameters::default();
    println!(
        "{:>6} {:>6} | {:>10} {:>10} | {:>10} {:>10} | {:>9} {:>9}",
        "B_z", "B_perp", "exact -", "closed -", "exact +", "closed +", "w_L kHz", "closed"
    );
    for (bz, bp) in [(0.0, 1.0), (1.0, 0.0), (3.129, 2.426), (0.2, 4.0), (4.0, 1.0), (-2.0, 2.0)] {
        let b = FieldVector::from_axial_transverse(bz, bp, 30.0);
        let t = exact_transitions(&b, &p)?;
        let s = zeeman_shifts_perturbative(bz.abs(), bp, &p)?;
        println!(
            "{bz:>6.3} {bp:>6.3} | {:>10.4} {:>10.4} | {:>10.4} {:>10.4} | {:>9.3} {:>9.3}",
            t.branch_mean(Branch::Minus) - p.zfs,
            s.minus,
            t.branch_mean(Branch::Plus) - p.zfs,
            s.plus,
            t.nuclear_precession_ms0 * 1e3,
            larmor_frequency(&b, &p)? * 1e3,
        );
    }

    let b = FieldVector::from_axial_transverse(3.129, 2.426, 0.0);
    println!("\nlines at B_z = 3.129 mT, B_perp = 2.426 mT:");
    for line in &exact_transitions(&b, &p)?.lines {
        println!("  {:>10.4} MHz  {:?} branch, nucleus {:?}", line.frequency, line.branch, line.nuclear);
    }
    Ok(())
}
