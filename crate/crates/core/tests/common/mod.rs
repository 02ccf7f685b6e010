//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use nvmag::inversion::AxialTransverse;
use nvmag::spin_model::{FieldVector, NvParameters};
use rand::Rng;

/// ⟨m'|J_i|m⟩ for spin `j` built from the ladder-operator formulas; `i` is
/// 0, 1, 2 for x, y, z. Returns (re, im).
pub fn spin_element(j: f64, i: usize, m_out: f64, m_in: f64) -> (f64, f64) {
    let ladder = |m: f64, up: bool| {
        if up {
            (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
        } else {
            (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
        }
    };
    let raise = if (m_out - m_in - 1.0).abs() < 1e-9 { ladder(m_in, true) } else { 0.0 };
    let lower = if (m_out - m_in + 1.0).abs() < 1e-9 { ladder(m_in, false) } else { 0.0 };
    match i {
        0 => (0.5 * (raise + lower), 0.0),
        1 => (0.0, -0.5 * (raise - lower)),
        _ => (if (m_out - m_in).abs() < 1e-9 { m_in } else { 0.0 }, 0.0),
    }
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

pub const MS: [f64; 3] = [1.0, 0.0, -1.0];
pub const MI: [f64; 2] = [0.5, -0.5];

/// Element-by-element construction of the electron ⊗ nuclear Hamiltonian in
/// the |m_s, m_I⟩ basis (m_s outer, m_I inner), MHz.
pub fn hamiltonian_oracle(b: &FieldVector, p: &NvParameters) -> [[(f64, f64); 6]; 6] {
    let field = [b.bx, b.by, b.bz];
    let gn = p.gn * p.beta_n;
    let mut h = [[(0.0, 0.0); 6]; 6];
    for (r, row) in h.iter_mut().enumerate() {
        let (ms_o, mi_o) = (MS[r / 2], MI[r % 2]);
        for (c, entry) in row.iter_mut().enumerate() {
            let (ms_i, mi_i) = (MS[c / 2], MI[c % 2]);
            let same_s = ms_o == ms_i;
            let same_i = mi_o == mi_i;
            let mut re = 0.0;
            let mut im = 0.0;
            if same_s && same_i {
                re += p.zfs * ms_i * ms_i;
            }
            for k in 0..3 {
                if same_i {
                    let s = spin_element(1.0, k, ms_o, ms_i);
                    re += p.ge_be * field[k] * s.0;
                    im += p.ge_be * field[k] * s.1;
                }
                if same_s {
                    let n = spin_element(0.5, k, mi_o, mi_i);
                    re -= gn * field[k] * n.0;
                    im -= gn * field[k] * n.1;
                }
            }
            for a in 0..3 {
                for bidx in 0..3 {
                    let s = spin_element(1.0, a, ms_o, ms_i);
                    let n = spin_element(0.5, bidx, mi_o, mi_i);
                    let prod = cmul(s, n);
                    re += p.hyperfine[a][bidx] * prod.0;
                    im += p.hyperfine[a][bidx] * prod.1;
                }
            }
            *entry = (re, im);
        }
    }
    h
}

/// Uniform sample from the ball |B| ≤ radius.
pub fn random_field_in_ball<R: Rng>(rng: &mut R, radius: f64) -> FieldVector {
    loop {
        let v = [
            rng.random_range(-radius..=radius),
            rng.random_range(-radius..=radius),
            rng.random_range(-radius..=radius),
        ];
        if v.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
            return FieldVector::from(v);
        }
    }
}

/// Reconstruction a noiseless measurement would give for field `b`.
pub fn magnitudes(b: &FieldVector) -> AxialTransverse {
    AxialTransverse::new(b.bz.abs(), b.b_perp())
}

/// Brute-force intersection: walk both base rings in steps of `step` rad and
/// keep the local minima of the summed constraint residuals that lie below
/// `accept`. Returns the candidate vectors.
pub fn ring_grid_minima(
    base: &AxialTransverse,
    cals: &[(FieldVector, AxialTransverse)],
    step: f64,
    accept: f64,
) -> Vec<FieldVector> {
    let n = (std::f64::consts::TAU / step).round() as usize;
    let mut out = Vec::new();
    let signs: &[f64] = if base.bz_abs > 0.0 { &[1.0, -1.0] } else { &[1.0] };
    for &s in signs {
        let residual = |k: usize| {
            let phi = k as f64 * std::f64::consts::TAU / n as f64;
            let v = FieldVector::new(base.b_perp * phi.cos(), base.b_perp * phi.sin(), s * base.bz_abs);
            let r: f64 = cals
                .iter()
                .map(|(c, m)| {
                    let t = v.add(c);
                    (t.bz.abs() - m.bz_abs).abs() + (t.b_perp() - m.b_perp).abs()
                })
                .sum();
            (r, v)
        };
        let values: Vec<(f64, FieldVector)> = (0..n).map(residual).collect();
        for k in 0..n {
            let (r, v) = values[k];
            let prev = values[(k + n - 1) % n].0;
            let next = values[(k + 1) % n].0;
            if r <= prev && r < next && r < accept {
                out.push(v);
            }
        }
    }
    out
}
