//! Chain Hamiltonians and the engineered coupling pattern.
//!
//! Three models share one [`CouplingPattern`]:
//!
//! - ZZ+X (the simulated chain): `H = Σ J_i Z_i Z_{i+1} + Σ B_i X_i`
//! - XX+Z (its Hadamard-rotated twin): `H_C = Σ J_i X_i X_{i+1} + Σ B_i Z_i`
//! - the XY chain of length `2N` whose bonds interleave the fields and
//!   couplings, `J^eq = (B_1, J_1, B_2, J_2, …, B_N)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::qstate::{dim_of, site_bit, HermitianOperator, MAX_DENSE_QUBITS};

/// Uniform sign applied to every bond coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_qubits: usize,
    pub base_coupling: f64,
    #[serde(default)]
    pub sign: Sign,
}

impl ChainSpec {
    /// `J = 1`, positive sign.
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            base_coupling: 1.0,
            sign: Sign::Plus,
        }
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::EmptyChain);
        }
        if !(self.base_coupling > 0.0 && self.base_coupling.is_finite()) {
            return Err(invalid("base_coupling", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Bond couplings `j` (length `N-1`) and local fields `b` (length `N`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPattern {
    pub j: Vec<f64>,
    pub b: Vec<f64>,
}

impl CouplingPattern {
    pub fn new(j: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let p = Self { j, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.is_empty() {
            return Err(Error::EmptyChain);
        }
        if self.j.len() + 1 != self.b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.b.len() - 1,
                actual: self.j.len(),
            });
        }
        if self.j.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(invalid("pattern", "non-finite coupling"));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.b.len()
    }
}

/// `J_i = ±J√(4i(N−i))`, `B_i = J√((2i−1)(2N−2i+1))`.
pub fn perfect_transfer_pattern(spec: &ChainSpec) -> Result<CouplingPattern> {
    spec.validate()?;
    let n = spec.n_qubits as f64;
    let jj = spec.base_coupling;
    let j = (1..spec.n_qubits)
        .map(|i| {
            let i = i as f64;
            spec.sign.value() * jj * (4.0 * i * (n - i)).sqrt()
        })
        .collect();
    let b = (1..=spec.n_qubits)
        .map(|i| {
            let i = i as f64;
            jj * ((2.0 * i - 1.0) * (2.0 * n - 2.0 * i + 1.0)).sqrt()
        })
        .collect();
    Ok(CouplingPattern { j, b })
}

/// XY chain of length `2N` built from a pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalentChainSpec {
    pub n_qubits: usize,
    pub j_eq: Vec<f64>,
}

impl EquivalentChainSpec {
    /// Odd bonds (1-based) take the fields, even bonds the couplings.
    pub fn from_pattern(pattern: &CouplingPattern) -> Result<Self> {
        pattern.validate()?;
        let n = pattern.n_qubits();
        let j_eq = (1..2 * n)
            .map(|j| {
                if j % 2 == 1 {
                    pattern.b[j / 2]
                } else {
                    pattern.j[j / 2 - 1]
                }
            })
            .collect();
        Ok(Self {
            n_qubits: 2 * n,
            j_eq,
        })
    }
}

fn check_dense(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyChain);
    }
    if n > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge {
            n_qubits: n,
            limit: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

fn bit(idx: usize, site: usize, n: usize) -> bool {
    idx >> site_bit(site, n) & 1 == 1
}

fn zz_sign(idx: usize, a: usize, b: usize, n: usize) -> f64 {
    if bit(idx, a, n) == bit(idx, b, n) {
        1.0
    } else {
        -1.0
    }
}

fn z_sign(idx: usize, a: usize, n: usize) -> f64 {
    if bit(idx, a, n) {
        -1.0
    } else {
        1.0
    }
}

/// `Σ J_i Z_i Z_{i+1} + Σ B_i X_i`.
pub fn build_zz_x(pattern: &CouplingPattern) -> Result<HermitianOperator> {
    pattern.validate()?;
    let n = pattern.n_qubits();
    check_dense(n)?;
    let d = dim_of(n);
    let mut h = CMatrix::zeros(d, d);
    for idx in 0..d {
        let diag: f64 = pattern
            .j
            .iter()
            .enumerate()
            .map(|(i, &jv)| jv * zz_sign(idx, i + 1, i + 2, n))
            .sum();
        h[(idx, idx)] = Complex64::from(diag);
        for (i, &bv) in pattern.b.iter().enumerate() {
            h[(idx ^ (1 << site_bit(i + 1, n)), idx)] += Complex64::from(bv);
        }
    }
    HermitianOperator::new(n, h)
}

/// `Σ J_i X_i X_{i+1} + Σ B_i Z_i`.
pub fn build_xx_z(pattern: &CouplingPattern) -> Result<HermitianOperator> {
    pattern.validate()?;
    let n = pattern.n_qubits();
    check_dense(n)?;
    let d = dim_of(n);
    let mut h = CMatrix::zeros(d, d);
    for idx in 0..d {
        let diag: f64 = pattern
            .b
            .iter()
            .enumerate()
            .map(|(i, &bv)| bv * z_sign(idx, i + 1, n))
            .sum();
        h[(idx, idx)] = Complex64::from(diag);
        for (i, &jv) in pattern.j.iter().enumerate() {
            let flip = (1 << site_bit(i + 1, n)) | (1 << site_bit(i + 2, n));
            h[(idx ^ flip, idx)] += Complex64::from(jv);
        }
    }
    HermitianOperator::new(n, h)
}

/// `Σ J^eq_j (X_j X_{j+1} + Y_j Y_{j+1})`.
///
/// `XX + YY` only connects `|01⟩ ↔ |10⟩` on the bond, with amplitude 2.
pub fn build_xy_equivalent(eq: &EquivalentChainSpec) -> Result<HermitianOperator> {
    let n = eq.n_qubits;
    check_dense(n)?;
    if eq.j_eq.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            actual: eq.j_eq.len(),
        });
    }
    xy_chain(n, &eq.j_eq)
}

fn xy_chain(n: usize, bonds: &[f64]) -> Result<HermitianOperator> {
    let d = dim_of(n);
    let mut h = CMatrix::zeros(d, d);
    for idx in 0..d {
        for (i, &jv) in bonds.iter().enumerate() {
            if bit(idx, i + 1, n) != bit(idx, i + 2, n) {
                let flip = (1 << site_bit(i + 1, n)) | (1 << site_bit(i + 2, n));
                h[(idx ^ flip, idx)] += Complex64::from(2.0 * jv);
            }
        }
    }
    HermitianOperator::new(n, h)
}

/// `J (X₁X₂ + Y₁Y₂ + X₂X₃ + Y₂Y₃)`.
pub fn build_three_qubit_example(coupling: f64) -> Result<HermitianOperator> {
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(invalid("coupling", "must be positive and finite"));
    }
    xy_chain(3, &[coupling, coupling])
}

/// `Σ_i Z_i`, diagonal.
pub fn total_z(n: usize) -> CMatrix {
    let d = dim_of(n);
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |idx, _| {
        Complex64::from((1..=n).map(|s| z_sign(idx, s, n)).sum::<f64>())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, kron};
    use crate::qstate::{evolve_unitary, tensor_embed, Pauli, StateVector};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    fn reference_zz_x(p: &CouplingPattern) -> CMatrix {
        let n = p.n_qubits();
        let zz = kron(&Pauli::Z.matrix(), &Pauli::Z.matrix());
        let mut h = CMatrix::zeros(dim_of(n), dim_of(n));
        for (i, &jv) in p.j.iter().enumerate() {
            h += tensor_embed(&zz, &[i + 1, i + 2], n).unwrap() * Complex64::from(jv);
        }
        for (i, &bv) in p.b.iter().enumerate() {
            h += tensor_embed(&Pauli::X.matrix(), &[i + 1], n).unwrap() * Complex64::from(bv);
        }
        h
    }

    fn reference_xy(n: usize, bonds: &[f64]) -> CMatrix {
        let xx = kron(&Pauli::X.matrix(), &Pauli::X.matrix());
        let yy = kron(&Pauli::Y.matrix(), &Pauli::Y.matrix());
        let mut h = CMatrix::zeros(dim_of(n), dim_of(n));
        for (i, &jv) in bonds.iter().enumerate() {
            h += tensor_embed(&(&xx + &yy), &[i + 1, i + 2], n).unwrap() * Complex64::from(jv);
        }
        h
    }

    fn hadamard_all(n: usize) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let had = CMatrix::from_row_slice(
            2,
            2,
            &[s.into(), s.into(), s.into(), Complex64::from(-s)],
        );
        (1..n).fold(had.clone(), |acc, _| kron(&acc, &had))
    }

    fn sorted_eigs(h: &HermitianOperator) -> Vec<f64> {
        let mut e = h.spectral().unwrap().eigenvalues.clone();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn pattern_three_sites() {
        let p = perfect_transfer_pattern(&ChainSpec::new(3)).unwrap();
        assert!(close(&p.j, &[8f64.sqrt(), 8f64.sqrt()]));
        assert!(close(&p.b, &[5f64.sqrt(), 3.0, 5f64.sqrt()]));
    }

    #[test]
    fn pattern_single_site() {
        let p = perfect_transfer_pattern(&ChainSpec::new(1)).unwrap();
        assert!(p.j.is_empty());
        assert!(close(&p.b, &[1.0]));
    }

    #[test]
    fn pattern_seven_sites() {
        let p = perfect_transfer_pattern(&ChainSpec::new(7)).unwrap();
        let j: Vec<f64> = [24.0, 40.0, 48.0, 48.0, 40.0, 24.0].iter().map(|v: &f64| v.sqrt()).collect();
        let b: Vec<f64> = [13.0, 33.0, 45.0, 49.0, 45.0, 33.0, 13.0].iter().map(|v: &f64| v.sqrt()).collect();
        assert!(close(&p.j, &j));
        assert!(close(&p.b, &b));
    }

    #[test]
    fn pattern_rejects_empty_and_bad_coupling() {
        assert_eq!(perfect_transfer_pattern(&ChainSpec::new(0)), Err(Error::EmptyChain));
        let mut spec = ChainSpec::new(3);
        spec.base_coupling = -1.0;
        assert!(perfect_transfer_pattern(&spec).is_err());
    }

    #[test]
    fn pattern_sign_and_palindrome() {
        for n in 1..=9 {
            let plus = perfect_transfer_pattern(&ChainSpec::new(n)).unwrap();
            let minus = perfect_transfer_pattern(&ChainSpec::new(n).with_sign(Sign::Minus)).unwrap();
            for (a, b) in plus.j.iter().zip(&minus.j) {
                assert_eq!(*a, -b);
            }
            let rj: Vec<f64> = plus.j.iter().rev().copied().collect();
            let rb: Vec<f64> = plus.b.iter().rev().copied().collect();
            assert!(close(&plus.j, &rj));
            assert!(close(&plus.b, &rb));
        }
    }

    #[test]
    fn pattern_json_shape() {
        let p = perfect_transfer_pattern(&ChainSpec::new(2)).unwrap();
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["j"].as_array().unwrap().len(), 1);
        assert_eq!(json["b"].as_array().unwrap().len(), 2);
        let back: CouplingPattern = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);
        assert!(CouplingPattern::new(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn zz_x_small_cases() {
        let h = build_zz_x(&CouplingPattern::new(vec![], vec![0.7]).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(h.matrix(), &(Pauli::X.matrix() * Complex64::from(0.7))) < 1e-15);

        let h = build_zz_x(&CouplingPattern::new(vec![1.3], vec![0.0, 0.0]).unwrap()).unwrap();
        let zz = kron(&Pauli::Z.matrix(), &Pauli::Z.matrix()) * Complex64::from(1.3);
        assert!(linalg::max_abs_diff(h.matrix(), &zz) < 1e-15);
    }

    #[test]
    fn zz_x_matches_kronecker_reference() {
        let p = perfect_transfer_pattern(&ChainSpec::new(4)).unwrap();
        let h = build_zz_x(&p).unwrap();
        assert!(linalg::max_abs_diff(h.matrix(), &reference_zz_x(&p)) < 1e-12);
        assert!(linalg::hermiticity_error(h.matrix()) < 1e-12);
    }

    #[test]
    fn xx_z_small_cases() {
        let h = build_xx_z(&CouplingPattern::new(vec![], vec![0.4]).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(h.matrix(), &(Pauli::Z.matrix() * Complex64::from(0.4))) < 1e-15);

        let h = build_xx_z(&CouplingPattern::new(vec![1.0], vec![0.0, 0.0]).unwrap()).unwrap();
        let e = sorted_eigs(&h);
        assert!(close(&e, &[-1.0, -1.0, 1.0, 1.0]));

        let h = build_xx_z(&CouplingPattern::new(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        let comm = h.commutator(&total_z(2));
        assert!(comm.iter().map(|z| z.norm()).fold(0.0, f64::max) > 0.1);
    }

    #[test]
    fn xy_equivalent_cases() {
        let eq = EquivalentChainSpec { n_qubits: 2, j_eq: vec![1.0] };
        let h = build_xy_equivalent(&eq).unwrap();
        assert!(linalg::max_abs_diff(h.matrix(), &reference_xy(2, &[1.0])) < 1e-15);
        assert!(close(&sorted_eigs(&h), &[-2.0, 0.0, 0.0, 2.0]));

        let p = perfect_transfer_pattern(&ChainSpec::new(3)).unwrap();
        let eq = EquivalentChainSpec::from_pattern(&p).unwrap();
        let expect: Vec<f64> = [5.0, 8.0, 9.0, 8.0, 5.0].iter().map(|v: &f64| v.sqrt()).collect();
        assert!(close(&eq.j_eq, &expect));
        let h = build_xy_equivalent(&eq).unwrap();
        assert!(linalg::max_abs_diff(h.matrix(), &reference_xy(6, &eq.j_eq)) < 1e-12);
        let comm = h.commutator(&total_z(6));
        assert!(comm.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);

        let big = EquivalentChainSpec { n_qubits: 14, j_eq: vec![1.0; 13] };
        assert!(matches!(build_xy_equivalent(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn three_qubit_example() {
        let h = build_three_qubit_example(1.0).unwrap();
        // brute-force reference diagonalization of the Kronecker-built matrix
        let reference = HermitianOperator::new(3, reference_xy(3, &[1.0, 1.0])).unwrap();
        let e = sorted_eigs(&reference);
        let ours = sorted_eigs(&h);
        assert!(close(&e, &ours));
        assert!((e[0] + 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((e[7] - 2.0 * 2f64.sqrt()).abs() < 1e-12);

        let comm = h.commutator(&total_z(3));
        assert!(comm.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);

        let t = PI / (2.0 * 2f64.sqrt());
        let out = evolve_unitary(&h, t, &StateVector::basis(3, 0b100).unwrap()).unwrap();
        assert!((out.amplitudes()[0b001].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_maps_zz_x_to_xx_z() {
        let p = perfect_transfer_pattern(&ChainSpec::new(5)).unwrap();
        let had = hadamard_all(5);
        let rotated = &had * build_zz_x(&p).unwrap().matrix() * &had;
        assert!(linalg::max_abs_diff(&rotated, build_xx_z(&p).unwrap().matrix()) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hadamard_equivalence_random_patterns(
            n in 1usize..=5,
            raw in proptest::collection::vec(-3.0f64..3.0, 9),
        ) {
            let p = CouplingPattern::new(raw[..n - 1].to_vec(), raw[4..4 + n].to_vec()).unwrap();
            let had = hadamard_all(n);
            let zz = build_zz_x(&p).unwrap();
            let xx = build_xx_z(&p).unwrap();
            prop_assert!(linalg::hermiticity_error(zz.matrix()) < 1e-12);
            prop_assert!(linalg::hermiticity_error(xx.matrix()) < 1e-12);
            let rotated = &had * zz.matrix() * &had;
            prop_assert!(linalg::max_abs_diff(&rotated, xx.matrix()) < 1e-10);
        }
    }
}
