//! Recovering the full field vector. Magnitudes alone leave two rings; one
//! calibrated field cuts them to a pair, a second one to a single vector.

use nvmag::inversion::{candidate_rings, disambiguate, AxialTransverse, CalibratedField, CalibratedMeasurement};
use nvmag::spin_model::FieldVector;

fn magnitudes(b: &FieldVector) -> AxialTransverse {
    AxialTransverse::new(b.bz.abs(), b.b_perp())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = FieldVector::new(1.2, -2.0, 2.5);
    let base = magnitudes(&truth);
    let rings = candidate_rings(&base);
    println!("magnitudes only: {:?}", rings.rings);

    let cal =
        |c: FieldVector| CalibratedMeasurement { field: CalibratedField::new(c), measured: magnitudes(&truth.add(&c)) };
    let c1 = FieldVector::new(0.8, 0.0, 0.6);
    let c2 = FieldVector::new(0.0, 0.7, 0.5);

    let pair = disambiguate(&base, &[cal(c1)], 1e-7)?;
    println!("one calibrated field ({:?}):", pair.stage);
    for v in &pair.vectors {
        println!("  ({:+.5}, {:+.5}, {:+.5}) mT", v.bx, v.by, v.bz);
    }
    let unique = disambiguate(&base, &[cal(c1), cal(c2)], 1e-7)?;
    let v = unique.vectors[0];
    println!("two calibrated fields ({:?}): ({:+.5}, {:+.5}, {:+.5}) mT", unique.stage, v.bx, v.by, v.bz);
    println!("truth: ({:+.5}, {:+.5}, {:+.5}) mT", truth.bx, truth.by, truth.bz);
    Ok(())
}
