use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, ZERO};
use crate::qstate::{DensityMatrix, LocalIndexer};

const COMPLETENESS_TOL: f64 = 1e-10;

/// Operators of a CPTP map on one or two sites, `Σ K†K = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    operators: Vec<CMatrix>,
    arity: usize,
}

impl KrausSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerance(operators, COMPLETENESS_TOL)
    }

    /// As [`KrausSet::new`] with a caller-chosen completeness tolerance, for
    /// operators reconstructed from data.
    pub fn with_tolerance(operators: Vec<CMatrix>, tol: f64) -> Result<Self> {
        let first = operators.first().ok_or(Error::Empty("Kraus operators"))?;
        let dim = first.nrows();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(invalid("kraus", format!("dimension {dim} is not 2^k")));
        }
        for k in &operators {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: k.nrows(),
                });
            }
        }
        let set = Self {
            arity: dim.trailing_zeros() as usize,
            operators,
        };
        let err = set.completeness_error();
        if err > tol {
            return Err(invalid("kraus", format!("Σ K†K deviates from identity by {err:.3e}")));
        }
        Ok(set)
    }

    pub fn identity(arity: usize) -> Self {
        Self {
            operators: vec![linalg::identity(1 << arity)],
            arity,
        }
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    /// Max-norm distance of `Σ K†K` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim(), self.dim());
        for k in &self.operators {
            sum += k.adjoint() * k;
        }
        linalg::max_abs_diff(&sum, &linalg::identity(self.dim()))
    }

    pub fn is_diagonal(&self) -> bool {
        self.operators.iter().all(|k| {
            (0..k.ncols()).all(|c| (0..k.nrows()).all(|r| r == c || k[(r, c)] == ZERO))
        })
    }

    /// `Σ K ρ K†` on a state of the set's own dimension.
    pub fn act(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for k in &self.operators {
            out += k * rho * k.adjoint();
        }
        out
    }
}

fn check_rate_time(rate: f64, t: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(invalid("rate", format!("must be finite and >= 0, got {rate}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("time", format!("must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `p = (n̄+1)/(2n̄+1)`, the ground-state weight of the thermal fixed point.
pub fn thermal_p(nbar: f64) -> f64 {
    (nbar + 1.0) / (2.0 * nbar + 1.0)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn m2(a: f64, b: f64, cc: f64, d: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(a), c(b), c(cc), c(d)])
}

/// Finite-temperature amplitude damping over a time `t`.
pub fn amplitude_damping_kraus(rate: f64, t: f64, nbar: f64) -> Result<KrausSet> {
    check_rate_time(rate, t)?;
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(invalid("nbar", format!("must be finite and >= 0, got {nbar}")));
    }
    let p = thermal_p(nbar);
    let decay = (-rate * t).exp();
    let keep = decay.sqrt();
    let jump = (1.0 - decay).sqrt();
    let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
    KrausSet::new(vec![
        m2(sp, 0.0, 0.0, sp * keep),
        m2(0.0, sp * jump, 0.0, 0.0),
        m2(sq * keep, 0.0, 0.0, sq),
        m2(0.0, 0.0, sq * jump, 0.0),
    ])
}

/// Single-qubit dephasing: off-diagonals decay by `e^{-γt}`.
pub fn phase_damping_kraus(rate: f64, t: f64) -> Result<KrausSet> {
    check_rate_time(rate, t)?;
    let e = (-rate * t).exp();
    let a = ((1.0 + e) / 2.0).sqrt();
    let b = ((1.0 - e) / 2.0).sqrt();
    KrausSet::new(vec![m2(a, 0.0, 0.0, a), m2(b, 0.0, 0.0, -b)])
}

/// Two-qubit dephasing from a shared bath; `|01⟩, |10⟩` are untouched.
pub fn collective_dephasing_kraus(rate: f64, t: f64) -> Result<KrausSet> {
    check_rate_time(rate, t)?;
    let e = (-rate * t).exp();
    let diag = |v: [f64; 4]| CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, v.map(c)));
    let s = (1.0 - e).sqrt();
    KrausSet::new(vec![
        diag([e.sqrt(), 1.0, 1.0, e.sqrt()]),
        diag([s, 0.0, 0.0, -s * e]),
        diag([0.0, 0.0, 0.0, (1.0 - e) * (1.0 + e).sqrt()]),
    ])
}

/// Apply `k` to the listed sites of `rho`.
pub fn apply_channel(rho: &DensityMatrix, k: &KrausSet, sites: &[usize]) -> Result<DensityMatrix> {
    if sites.len() != k.arity() {
        return Err(Error::ArityMismatch {
            arity: k.arity(),
            sites: sites.len(),
        });
    }
    let n = rho.n_qubits();
    let ch = LocalChannel::new(k, LocalIndexer::new(sites, n)?);
    let mut m = rho.matrix().clone();
    ch.apply_in_place(&mut m);
    linalg::hermitize(&mut m);
    Ok(DensityMatrix::from_raw(n, m))
}

/// A Kraus set bound to concrete sites, with the precomputed pieces the
/// engines need: the local superoperator for density matrices and `K†K`
/// for jump probabilities on pure states.
#[derive(Clone, Debug)]
pub(crate) struct LocalChannel {
    pub idx: LocalIndexer,
    pub kraus: Vec<CMatrix>,
    /// `K†K`, so that `p_k = Tr(K†K ρ_local)`.
    pub kdk: Vec<CMatrix>,
    /// `Φ(ρ)_ab` gets `diag[ab]·ρ_ab` from its own entry …
    pub diag: Vec<Complex64>,
    /// … plus `c·ρ_{a'b'}` for every `(ab, a'b', c)` listed here.
    pub cross: Vec<(usize, usize, Complex64)>,
}

impl LocalChannel {
    pub fn new(k: &KrausSet, idx: LocalIndexer) -> Self {
        let l = k.dim();
        let ll = l * l;
        let mut superop = vec![ZERO; ll * ll];
        for op in k.operators() {
            for a in 0..l {
                for b in 0..l {
                    for ap in 0..l {
                        for bp in 0..l {
                            superop[(a * l + b) * ll + ap * l + bp] += op[(a, ap)] * op[(b, bp)].conj();
                        }
                    }
                }
            }
        }
        let diag = (0..ll).map(|ab| superop[ab * ll + ab]).collect();
        let cross = (0..ll)
            .flat_map(|o| (0..ll).map(move |i| (o, i)))
            .filter(|&(o, i)| o != i && superop[o * ll + i] != ZERO)
            .map(|(o, i)| (o, i, superop[o * ll + i]))
            .collect();
        Self {
            idx,
            kraus: k.operators().to_vec(),
            kdk: k.operators().iter().map(|op| op.adjoint() * op).collect(),
            diag,
            cross,
        }
    }

    fn local_dim(&self) -> usize {
        self.idx.local_dim()
    }

    /// Visit every block: `(global flat index of local entry ab)` for the
    /// column-major `d×d` matrix.
    fn blocks(&self, d: usize, mut f: impl FnMut(&[usize])) {
        let l = self.local_dim();
        let off = &self.idx.offsets;
        let mut flat = [0usize; 16];
        for &cb in &self.idx.bases {
            for &rb in &self.idx.bases {
                for a in 0..l {
                    for b in 0..l {
                        flat[a * l + b] = rb + off[a] + (cb + off[b]) * d;
                    }
                }
                f(&flat[..l * l]);
            }
        }
    }

    /// `mask += weight · diag`, spread over a column-major `d×d` mask.
    pub fn add_diagonal_to(&self, weight: f64, d: usize, mask: &mut [Complex64]) {
        self.blocks(d, |flat| {
            for (ab, &k) in flat.iter().enumerate() {
                mask[k] += self.diag[ab] * weight;
            }
        });
    }

    /// `out += weight · (cross terms of Φ)(rho)`.
    pub fn add_cross(&self, rho: &[Complex64], weight: f64, d: usize, out: &mut [Complex64]) {
        let l = self.local_dim();
        let (off, bases) = (&self.idx.offsets, &self.idx.bases);
        for &(o, i, c) in &self.cross {
            let c = c * weight;
            let (ro, co, ri, ci) = (off[o / l], off[o % l], off[i / l], off[i % l]);
            for &cb in bases {
                let (col_o, col_i) = ((cb + co) * d + ro, (cb + ci) * d + ri);
                for &rb in bases {
                    out[col_o + rb] += c * rho[col_i + rb];
                }
            }
        }
    }

    pub fn apply_in_place(&self, rho: &mut CMatrix) {
        let d = rho.nrows();
        let m = rho.as_mut_slice();
        let mut block = [ZERO; 16];
        self.blocks(d, |flat| {
            for (ab, &k) in flat.iter().enumerate() {
                block[ab] = m[k];
            }
            for (ab, &k) in flat.iter().enumerate() {
                m[k] = self.diag[ab] * block[ab];
            }
            for &(o, i, c) in &self.cross {
                m[flat[o]] += c * block[i];
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{tensor_embed, StateVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sets(rng: &mut ChaCha8Rng) -> Vec<KrausSet> {
        let rate = rng.random_range(0.0..2.0);
        let t = rng.random_range(0.0..5.0);
        let nbar = rng.random_range(0.0..1.0);
        vec![
            amplitude_damping_kraus(rate, t, nbar).unwrap(),
            phase_damping_kraus(rate, t).unwrap(),
            collective_dephasing_kraus(rate, t).unwrap(),
        ]
    }

    #[test]
    fn completeness_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            for k in random_sets(&mut rng) {
                assert!(k.completeness_error() < 1e-12);
            }
        }
        for gt in [0.1, 1.0, 10.0] {
            assert!(collective_dephasing_kraus(1.0, gt).unwrap().completeness_error() < 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = DensityMatrix::random(1, 2, &mut rng);
        for k in [amplitude_damping_kraus(0.7, 0.0, 0.3).unwrap(), phase_damping_kraus(0.7, 0.0).unwrap()] {
            assert!(linalg::max_abs_diff(&k.act(rho.matrix()), rho.matrix()) < 1e-14);
        }
        let rho2 = DensityMatrix::random(2, 4, &mut rng);
        let k = collective_dephasing_kraus(0.7, 0.0).unwrap();
        assert!(linalg::max_abs_diff(&k.act(rho2.matrix()), rho2.matrix()) < 1e-14);
    }

    #[test]
    fn amplitude_damping_limits() {
        let excited = StateVector::basis(1, 1).unwrap().to_density();
        let t = 0.8;
        let k = amplitude_damping_kraus(1.3, t, 0.0).unwrap();
        assert_eq!(k.operators()[2], CMatrix::zeros(2, 2));
        let out = k.act(excited.matrix());
        let e = (-1.3 * t).exp();
        assert!((out[(0, 0)].re - (1.0 - e)).abs() < 1e-14);
        assert!((out[(1, 1)].re - e).abs() < 1e-14);
        let long = amplitude_damping_kraus(1.0, 200.0, 0.0).unwrap().act(excited.matrix());
        assert!((long[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_fixed_point() {
        let p = thermal_p(0.01);
        assert!((p - 1.01 / 1.02).abs() < 1e-15);
        assert!((p - 0.990196).abs() < 1e-6);
        // iterate a finite step until converged: oracle for the fixed point
        let k = amplitude_damping_kraus(1.0, 0.5, 0.01).unwrap();
        let mut rho = StateVector::basis(1, 1).unwrap().to_density().into_matrix();
        for _ in 0..400 {
            rho = k.act(&rho);
        }
        assert!((rho[(0, 0)].re - p).abs() < 1e-12);
        assert!((rho[(1, 1)].re - (1.0 - p)).abs() < 1e-12);
        assert!(rho[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn dephasing_scales_coherences() {
        let plus = StateVector::plus().to_density();
        let out = phase_damping_kraus(0.4, 1.5).unwrap().act(plus.matrix());
        assert!((out[(0, 1)].re - 0.5 * (-0.6f64).exp()).abs() < 1e-14);
        assert!((out[(0, 0)].re - 0.5).abs() < 1e-14);
        let long = phase_damping_kraus(1.0, 100.0).unwrap().act(plus.matrix());
        assert!(long[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn dephasing_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = DensityMatrix::random(1, 2, &mut rng);
        let a = phase_damping_kraus(0.9, 0.3).unwrap();
        let b = phase_damping_kraus(0.9, 0.5).unwrap();
        let ab = phase_damping_kraus(0.9, 0.8).unwrap();
        let lhs = a.act(&b.act(rho.matrix()));
        assert!(linalg::max_abs_diff(&lhs, &ab.act(rho.matrix())) < 1e-12);
    }

    #[test]
    fn collective_leaves_single_excitation_sector() {
        let k = collective_dephasing_kraus(0.7, 3.0).unwrap();
        for (i, j) in [(1, 1), (2, 2), (1, 2), (2, 1)] {
            let mut proj = CMatrix::zeros(4, 4);
            proj[(i, j)] = Complex64::from(1.0);
            assert!(linalg::max_abs_diff(&k.act(&proj), &proj) < 1e-14);
        }
        let mut coh = CMatrix::zeros(4, 4);
        coh[(0, 3)] = Complex64::from(1.0);
        assert!(k.act(&coh)[(0, 3)].norm() < 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(amplitude_damping_kraus(-1.0, 1.0, 0.0).is_err());
        assert!(amplitude_damping_kraus(1.0, -1.0, 0.0).is_err());
        assert!(amplitude_damping_kraus(1.0, 1.0, -0.5).is_err());
        assert!(phase_damping_kraus(f64::NAN, 1.0).is_err());
        assert!(collective_dephasing_kraus(1.0, -2.0).is_err());
        assert!(KrausSet::new(vec![CMatrix::zeros(2, 2)]).is_err());
        assert!(KrausSet::new(vec![]).is_err());
    }

    #[test]
    fn apply_channel_matches_embedded_kraus_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let rho = DensityMatrix::random(3, 3, &mut rng);
            for k in random_sets(&mut rng) {
                let sites: Vec<usize> = if k.arity() == 1 { vec![2] } else { vec![3, 1] };
                let out = apply_channel(&rho, &k, &sites).unwrap();
                let mut oracle = CMatrix::zeros(8, 8);
                for op in k.operators() {
                    let big = tensor_embed(op, &sites, 3).unwrap();
                    oracle += &big * rho.matrix() * big.adjoint();
                }
                assert!(linalg::max_abs_diff(out.matrix(), &oracle) < 1e-12);
                assert!((out.trace() - 1.0).abs() < 1e-10);
                assert!(out.min_eigenvalue() >= -1e-8);
            }
        }
    }

    #[test]
    fn identity_set_and_arity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix::random(2, 2, &mut rng);
        let out = apply_channel(&rho, &KrausSet::identity(1), &[1]).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), rho.matrix()) < 1e-15);
        let k = phase_damping_kraus(1.0, 1.0).unwrap();
        assert!(matches!(
            apply_channel(&rho, &k, &[1, 2]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn mask_plus_cross_split_reproduces_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let rho = DensityMatrix::random(3, 8, &mut rng);
            for k in random_sets(&mut rng) {
                let sites: Vec<usize> = if k.arity() == 1 { vec![2] } else { vec![1, 3] };
                let ch = LocalChannel::new(&k, LocalIndexer::new(&sites, 3).unwrap());
                // two half-weight copies must add up to the full channel
                let mut mask = vec![ZERO; 64];
                ch.add_diagonal_to(0.5, 8, &mut mask);
                ch.add_diagonal_to(0.5, 8, &mut mask);
                let mut out: Vec<Complex64> = rho.matrix().iter().zip(&mask).map(|(r, m)| r * m).collect();
                ch.add_cross(rho.matrix().as_slice(), 0.5, 8, &mut out);
                ch.add_cross(rho.matrix().as_slice(), 0.5, 8, &mut out);
                let direct = apply_channel(&rho, &k, &sites).unwrap();
                assert!(linalg::max_abs_diff(&CMatrix::from_column_slice(8, 8, &out), direct.matrix()) < 1e-14);
            }
        }
    }
}
