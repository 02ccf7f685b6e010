use nalgebra::{Complex, Matrix2, Matrix3, Matrix6, SymmetricEigen, Vector6};
use serde::{Deserialize, Serialize};

use super::{FieldVector, NvParameters, SpinModelError};

pub type C64 = Complex<f64>;

/// Eigenstates are labelled only when their electron-manifold character
/// reaches this weight.
pub const LABEL_THRESHOLD: f64 = 0.6;

/// One product-basis state |m_s, m_I⟩, stored as (m_s, 2·m_I).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisState {
    pub ms: i8,
    pub two_mi: i8,
}

/// Basis ordering: m_s ∈ {+1, 0, −1} outer, m_I ∈ {+½, −½} inner.
pub const BASIS: [BasisState; 6] = [
    BasisState { ms: 1, two_mi: 1 },
    BasisState { ms: 1, two_mi: -1 },
    BasisState { ms: 0, two_mi: 1 },
    BasisState { ms: 0, two_mi: -1 },
    BasisState { ms: -1, two_mi: 1 },
    BasisState { ms: -1, two_mi: -1 },
];

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Spin-1 operators (S_x, S_y, S_z) in the {+1, 0, −1} basis.
pub fn spin1_ops() -> [Matrix3<C64>; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let sx = Matrix3::new(z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z);
    let sy = Matrix3::new(z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z);
    let sz = Matrix3::new(c(1.0, 0.0), z, z, z, z, z, z, z, c(-1.0, 0.0));
    [sx, sy, sz]
}

/// Spin-½ operators (I_x, I_y, I_z) in the {+½, −½} basis.
pub fn spin_half_ops() -> [Matrix2<C64>; 3] {
    let z = c(0.0, 0.0);
    [
        Matrix2::new(z, c(0.5, 0.0), c(0.5, 0.0), z),
        Matrix2::new(z, c(0.0, -0.5), c(0.0, 0.5), z),
        Matrix2::new(c(0.5, 0.0), z, z, c(-0.5, 0.0)),
    ]
}

/// Ground-state Hamiltonian of the electron spin-1 coupled to a spin-½ nucleus, in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinHamiltonian {
    pub matrix: Matrix6<C64>,
    pub basis: [BasisState; 6],
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vector6<f64>,
    pub vectors: Matrix6<C64>,
}

impl SpinHamiltonian {
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let scale = self.matrix.iter().fold(1.0_f64, |m, v| m.max(v.norm()));
        let diff = self.matrix - self.matrix.adjoint();
        diff.iter().all(|v| v.norm() <= rel_tol * scale)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigensystem(&self) -> Eigensystem {
        let eig = SymmetricEigen::new(self.matrix);
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = Vector6::from_fn(|i, _| eig.eigenvalues[order[i]]);
        let mut vectors = Matrix6::zeros();
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Eigensystem { values, vectors }
    }
}

/// Builds H_e ⊗ 1 + 1 ⊗ H_n + S·A·I on the spin-1 ⊗ spin-½ product space.
pub fn build_hamiltonian(b: &FieldVector, p: &NvParameters) -> SpinHamiltonian {
    let s = spin1_ops();
    let i = spin_half_ops();
    let id3 = Matrix3::<C64>::identity();
    let id2 = Matrix2::<C64>::identity();
    let field = b.as_array();

    let mut h_e = s[2] * s[2] * c(p.zfs, 0.0);
    for k in 0..3 {
        h_e += s[k] * c(p.ge_be * field[k], 0.0);
    }

    let mut h_n = Matrix2::<C64>::zeros();
    for k in 0..3 {
        h_n -= i[k] * c(p.gn_bn() * field[k], 0.0);
    }
    for a in 0..3 {
        for bb in 0..3 {
            if p.quadrupole[a][bb] != 0.0 {
                h_n += i[a] * i[bb] * c(p.quadrupole[a][bb], 0.0);
            }
        }
    }

    let mut matrix: Matrix6<C64> = h_e.kronecker(&id2) + id3.kronecker(&h_n);
    for a in 0..3 {
        for bb in 0..3 {
            let coupling = p.hyperfine[a][bb];
            if coupling != 0.0 {
                matrix += s[a].kronecker(&i[bb]) * c(coupling, 0.0);
            }
        }
    }
    SpinHamiltonian { matrix, basis: BASIS }
}

/// Which electron branch a line belongs to, by frequency order (ω₊ > ω₋).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

/// Dominant nuclear projection of the m_s = ±1 level a line ends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuclearLabel {
    Up,
    Down,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    /// MHz.
    pub frequency: f64,
    pub branch: Branch,
    pub nuclear: NuclearLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    /// Minus-branch lines first, each branch in ascending frequency.
    pub lines: Vec<TransitionLine>,
    pub nuclear_precession_ms0: f64,
    pub nuclear_precession_ms_minus1: f64,
}

impl TransitionSet {
    pub fn branch(&self, branch: Branch) -> impl Iterator<Item = &TransitionLine> {
        self.lines.iter().filter(move |l| l.branch == branch)
    }

    /// Mean frequency of the hyperfine doublet of one branch.
    pub fn branch_mean(&self, branch: Branch) -> f64 {
        let (sum, n) = self.branch(branch).fold((0.0, 0usize), |(s, n), l| (s + l.frequency, n + 1));
        sum / n as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.frequency).collect()
    }
}

/// Weight of each electron projection (+1, 0, −1) in an eigenvector.
fn electron_character(v: &Matrix6<C64>, col: usize) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (row, state) in BASIS.iter().enumerate() {
        w[(1 - state.ms) as usize] += v[(row, col)].norm_sqr();
    }
    w
}

fn nuclear_label(v: &Matrix6<C64>, col: usize) -> NuclearLabel {
    let up: f64 = BASIS.iter().enumerate().filter(|(_, s)| s.two_mi > 0).map(|(row, _)| v[(row, col)].norm_sqr()).sum();
    if up >= LABEL_THRESHOLD {
        NuclearLabel::Up
    } else if 1.0 - up >= LABEL_THRESHOLD {
        NuclearLabel::Down
    } else {
        NuclearLabel::Mixed
    }
}

/// Diagonalizes the Hamiltonian and extracts the electron lines and
/// intra-manifold nuclear precession frequencies.
///
/// The two m_s = 0 eigenstates are the ones with the largest m_s = 0 weight.
/// The remaining four are split by energy into the minus (lower) and plus
/// (upper) branch. Each line frequency is the microwave-strength-weighted
/// mean of the transitions from both m_s = 0 states, which is what an ODMR
/// dip wider than the m_s = 0 nuclear splitting shows.
pub fn exact_transitions(b: &FieldVector, p: &NvParameters) -> Result<TransitionSet, SpinModelError> {
    let h = build_hamiltonian(b, p);
    let eig = h.eigensystem();
    let chars: Vec<[f64; 3]> = (0..6).map(|k| electron_character(&eig.vectors, k)).collect();

    let mut by_zero: Vec<usize> = (0..6).collect();
    by_zero.sort_by(|&a, &b| chars[b][1].total_cmp(&chars[a][1]));
    let mut zero = [by_zero[0], by_zero[1]];
    zero.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
    for &k in &zero {
        if chars[k][1] < LABEL_THRESHOLD {
            return Err(SpinModelError::DegenerateLabeling { overlap: chars[k][1] });
        }
    }
    let mut others: Vec<usize> = (0..6).filter(|k| !zero.contains(k)).collect();
    others.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));

    // Microwave drive couples through S_x and S_y on the electron.
    let s = spin1_ops();
    let id2 = Matrix2::<C64>::identity();
    let drive = [s[0].kronecker(&id2), s[1].kronecker(&id2)];
    let strength = |from: usize, to: usize| -> f64 {
        drive
            .iter()
            .map(|op| {
                let v_to = eig.vectors.column(to);
                let v_from = eig.vectors.column(from);
                (v_to.adjoint() * op * v_from)[(0, 0)].norm_sqr()
            })
            .sum()
    };

    let e0_mean = 0.5 * (eig.values[zero[0]] + eig.values[zero[1]]);
    let mut lines = Vec::with_capacity(4);
    for (rank, &k) in others.iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for &j in &zero {
            let w = strength(j, k);
            num += w * (eig.values[k] - eig.values[j]);
            den += w;
        }
        let frequency = if den > 1e-12 { num / den } else { eig.values[k] - e0_mean };
        lines.push(TransitionLine {
            frequency: frequency.abs(),
            branch: if rank < 2 { Branch::Minus } else { Branch::Plus },
            nuclear: nuclear_label(&eig.vectors, k),
        });
    }

    let mut minus_one: Vec<usize> = others.clone();
    minus_one.sort_by(|&a, &b| chars[b][2].total_cmp(&chars[a][2]));
    let gap_minus1 = (eig.values[minus_one[0]] - eig.values[minus_one[1]]).abs();

    Ok(TransitionSet {
        lines,
        nuclear_precession_ms0: eig.values[zero[1]] - eig.values[zero[0]],
        nuclear_precession_ms_minus1: gap_minus1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_hyperfine() -> NvParameters {
        NvParameters::default().with_hyperfine([[0.0; 3]; 3])
    }

    #[test]
    fn zero_field_spectrum() {
        let p = no_hyperfine();
        let eig = build_hamiltonian(&FieldVector::ZERO, &p).eigensystem();
        let expected = [0.0, 0.0, p.zfs, p.zfs, p.zfs, p.zfs];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-9, "{v} vs {e}");
        }
        let t = exact_transitions(&FieldVector::ZERO, &p);
        // Fully degenerate manifolds still label cleanly by electron character.
        let t = t.unwrap();
        assert_eq!(t.nuclear_precession_ms0, 0.0);
        assert!(t.nuclear_precession_ms_minus1.abs() < 1e-9);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let p = NvParameters::default();
        let eig = build_hamiltonian(&FieldVector::new(1.2, -0.7, 2.5), &p).eigensystem();
        let gram = eig.vectors.adjoint() * eig.vectors;
        for r in 0..6 {
            for col in 0..6 {
                let expect = if r == col { 1.0 } else { 0.0 };
                assert!((gram[(r, col)] - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn on_axis_electron_splitting() {
        let p = NvParameters::default();
        let t = exact_transitions(&FieldVector::new(0.0, 0.0, 1.0), &p).unwrap();
        let split = t.branch_mean(Branch::Plus) - t.branch_mean(Branch::Minus);
        assert!((split - 2.0 * p.ge_be).abs() < 0.01, "{split}");
        // Within a branch the doublet is split by the axial hyperfine coupling.
        let minus: Vec<f64> = t.branch(Branch::Minus).map(|l| l.frequency).collect();
        assert!(((minus[1] - minus[0]) - 3.03).abs() < 0.03);
        assert!(t.branch(Branch::Minus).all(|l| l.nuclear != NuclearLabel::Mixed));
    }

    #[test]
    fn strong_transverse_field_breaks_labeling() {
        let p = NvParameters::default();
        // g_eβ_e·B ≈ 2.8 D: m_s = 0 is no longer a good quantum number.
        let err = exact_transitions(&FieldVector::new(300.0, 0.0, 0.0), &p).unwrap_err();
        assert!(matches!(err, SpinModelError::DegenerateLabeling { .. }));
    }
}
