//! States, operators and the dense kernels acting on them.
//!
//! Qubits are labelled `1..=n`. Qubit 1 is the most significant bit of a
//! basis index, so `|q1 q2 … qn⟩` has index `q1·2^(n-1) + … + qn`. Every
//! module in the crate relies on this ordering.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, I, ONE, ZERO};

/// Largest register handled with dense matrices.
pub const MAX_DENSE_QUBITS: usize = 12;

const HERMITIAN_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

pub fn dim_of(n_qubits: usize) -> usize {
    1usize << n_qubits
}

/// Bit position (from the least significant end) of 1-based `site`.
#[inline]
pub fn site_bit(site: usize, n_qubits: usize) -> usize {
    n_qubits - site
}

fn check_sites(sites: &[usize], n_qubits: usize) -> Result<()> {
    let bad = || Error::InvalidSites {
        sites: sites.to_vec(),
        n_qubits,
    };
    if sites.is_empty() {
        return Err(bad());
    }
    for (k, &s) in sites.iter().enumerate() {
        if s == 0 || s > n_qubits || sites[..k].contains(&s) {
            return Err(bad());
        }
    }
    Ok(())
}

/// Index bookkeeping for an operator acting on a subset of sites.
///
/// `offsets[m]` is the contribution of local index `m` (first listed site is
/// the local MSB); `bases` enumerates all indices whose bits on the listed
/// sites are zero. Every global index is exactly one `base + offset`.
#[derive(Clone, Debug)]
pub struct LocalIndexer {
    pub offsets: Vec<usize>,
    pub bases: Vec<usize>,
}

impl LocalIndexer {
    pub fn new(sites: &[usize], n_qubits: usize) -> Result<Self> {
        check_sites(sites, n_qubits)?;
        let k = sites.len();
        let bits: Vec<usize> = sites.iter().map(|&s| site_bit(s, n_qubits)).collect();
        let offsets = (0..1usize << k)
            .map(|m| {
                bits.iter()
                    .enumerate()
                    .filter(|(pos, _)| m >> (k - 1 - pos) & 1 == 1)
                    .map(|(_, &b)| 1usize << b)
                    .sum()
            })
            .collect();
        let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
        let bases = (0..dim_of(n_qubits)).filter(|i| i & mask == 0).collect();
        Ok(Self { offsets, bases })
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }
}

/// Embed `local_op` on `sites` of an `n_qubits` register, identity elsewhere.
pub fn tensor_embed(local_op: &CMatrix, sites: &[usize], n_qubits: usize) -> Result<CMatrix> {
    let idx = LocalIndexer::new(sites, n_qubits)?;
    let ld = idx.local_dim();
    if local_op.nrows() != ld || local_op.ncols() != ld {
        return Err(Error::DimensionMismatch {
            expected: ld,
            actual: local_op.nrows(),
        });
    }
    let d = dim_of(n_qubits);
    let mut out = CMatrix::zeros(d, d);
    for &base in &idx.bases {
        for (c, &oc) in idx.offsets.iter().enumerate() {
            for (r, &or) in idx.offsets.iter().enumerate() {
                out[(base + or, base + oc)] = local_op[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Left-multiply the listed sites of a state (or of every column of a
/// matrix) by `local_op` in place.
pub fn apply_local_columns(m: &mut CMatrix, local_op: &CMatrix, idx: &LocalIndexer) {
    let rows = m.nrows();
    if rows == 0 {
        return;
    }
    for column in m.as_mut_slice().chunks_mut(rows) {
        apply_local_slice(column, local_op, idx);
    }
}

/// [`apply_local_columns`] for a single amplitude slice.
pub fn apply_local_slice(v: &mut [Complex64], local_op: &CMatrix, idx: &LocalIndexer) {
    let ld = idx.local_dim();
    let mut gathered = [ZERO; 16];
    let mut scratch;
    let gathered: &mut [Complex64] = if ld <= 16 {
        &mut gathered[..ld]
    } else {
        scratch = vec![ZERO; ld];
        &mut scratch
    };
    for &base in &idx.bases {
        for (g, &o) in gathered.iter_mut().zip(&idx.offsets) {
            *g = v[base + o];
        }
        for (r, &o) in idx.offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (c, g) in gathered.iter().enumerate() {
                acc += local_op[(r, c)] * g;
            }
            v[base + o] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Pauli strings

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        let m = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        CMatrix::from_row_slice(2, 2, &m)
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn signs(self) -> bool {
        matches!(self, Pauli::Y | Pauli::Z)
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(crate::error::invalid("pauli", format!("unknown letter {other:?}"))),
        }
    }
}

/// A tensor product of single-qubit Paulis; letter `k` acts on qubit `k+1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::EmptyChain);
        }
        Ok(Self { letters })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            letters: vec![Pauli::I; n.max(1)],
        }
    }

    /// Single non-identity letter on `site`.
    pub fn single(p: Pauli, site: usize, n: usize) -> Result<Self> {
        check_sites(&[site], n)?;
        let mut letters = vec![Pauli::I; n];
        letters[site - 1] = p;
        Ok(Self { letters })
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    fn masks(&self) -> (usize, usize, u32) {
        let n = self.letters.len();
        let mut flip = 0;
        let mut sign = 0;
        let mut n_y = 0;
        for (k, p) in self.letters.iter().enumerate() {
            let bit = 1usize << site_bit(k + 1, n);
            if p.flips() {
                flip |= bit;
            }
            if p.signs() {
                sign |= bit;
            }
            if *p == Pauli::Y {
                n_y += 1;
            }
        }
        (flip, sign, n_y)
    }

    /// `P|j⟩ = phase(j) |j ^ flip⟩`.
    fn action(&self) -> (usize, impl Fn(usize) -> Complex64) {
        let (flip, sign, n_y) = self.masks();
        let base = I.powu(n_y);
        (flip, move |j: usize| {
            if (j & sign).count_ones() % 2 == 1 {
                -base
            } else {
                base
            }
        })
    }

    pub fn matrix(&self) -> CMatrix {
        pauli_matrix(self)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s.chars().map(Pauli::try_from).collect::<Result<Vec<_>>>()?;
        Self::new(letters)
    }
}

pub fn pauli_matrix(p: &PauliString) -> CMatrix {
    let d = dim_of(p.n_qubits());
    let (flip, phase) = p.action();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[(j ^ flip, j)] = phase(j);
    }
    m
}

/// Coefficients `c_P = Tr(P·op)/2^n` over the Pauli basis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliDecomposition {
    pub n_qubits: usize,
    pub terms: BTreeMap<PauliString, Complex64>,
}

impl PauliDecomposition {
    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or(ZERO)
    }

    /// Remove terms with `|c| < tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() >= tol);
        self
    }

    pub fn reconstruct(&self) -> CMatrix {
        let d = dim_of(self.n_qubits);
        let mut m = CMatrix::zeros(d, d);
        for (p, c) in &self.terms {
            let (flip, phase) = p.action();
            for j in 0..d {
                m[(j ^ flip, j)] += c * phase(j);
            }
        }
        m
    }
}

/// Full decomposition over all `4^n` strings. Intended for `n ≤ 4`.
pub fn pauli_decompose(op: &CMatrix, n_qubits: usize) -> Result<PauliDecomposition> {
    let d = dim_of(n_qubits);
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: op.nrows(),
        });
    }
    let scale = 1.0 / d as f64;
    let mut terms = BTreeMap::new();
    for code in 0..(1usize << (2 * n_qubits)) {
        let letters = (0..n_qubits)
            .map(|k| Pauli::ALL[(code >> (2 * (n_qubits - 1 - k))) & 3])
            .collect();
        let p = PauliString { letters };
        let (flip, phase) = p.action();
        // Tr(P A) = Σ_k P_{k^flip, k} A_{k, k^flip}
        let mut tr = ZERO;
        for k in 0..d {
            tr += phase(k) * op[(k, k ^ flip)];
        }
        terms.insert(p, tr * scale);
    }
    Ok(PauliDecomposition { n_qubits, terms })
}

// ---------------------------------------------------------------------------
// States

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(n_qubits: usize, amplitudes: CVector) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::EmptyChain);
        }
        let d = dim_of(n_qubits);
        if amplitudes.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Normalizes `amplitudes` first; fails on the zero vector.
    pub fn normalized(n_qubits: usize, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(n_qubits, amplitudes / Complex64::from(norm))
    }

    pub(crate) fn from_raw(n_qubits: usize, amplitudes: CVector) -> Self {
        debug_assert_eq!(amplitudes.len(), dim_of(n_qubits));
        Self {
            n_qubits,
            amplitudes,
        }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let d = dim_of(n_qubits);
        if index >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: index,
            });
        }
        let mut v = CVector::zeros(d);
        v[index] = ONE;
        Self::new(n_qubits, v)
    }

    /// Single-qubit state `α|0⟩ + β|1⟩`.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::new(1, CVector::from_vec(vec![alpha, beta]))
    }

    pub fn plus() -> Self {
        let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        Self::from_raw(1, CVector::from_vec(vec![h, h]))
    }

    pub fn minus() -> Self {
        let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        Self::from_raw(1, CVector::from_vec(vec![h, -h]))
    }

    /// Haar-random pure state.
    pub fn haar_random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let d = dim_of(n_qubits);
        loop {
            let v = CVector::from_fn(d, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            if let Ok(s) = Self::normalized(n_qubits, v) {
                return s;
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector::from_raw(
            self.n_qubits + other.n_qubits,
            self.amplitudes.kronecker(&other.amplitudes),
        )
    }

    /// `|s⟩^{⊗n}` for a single-qubit `s`.
    pub fn product(single: &StateVector, n: usize) -> Result<StateVector> {
        if single.n_qubits != 1 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: single.dim(),
            });
        }
        if n == 0 {
            return Err(Error::EmptyChain);
        }
        let mut out = single.clone();
        for _ in 1..n {
            out = out.tensor(single);
        }
        Ok(out)
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits,
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Apply a local unitary (or any matrix) to `sites`, unnormalized.
    pub fn apply_local(&mut self, op: &CMatrix, sites: &[usize]) -> Result<()> {
        let idx = LocalIndexer::new(sites, self.n_qubits)?;
        if op.nrows() != idx.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: idx.local_dim(),
                actual: op.nrows(),
            });
        }
        let mut m = CMatrix::from_column_slice(self.dim(), 1, self.amplitudes.as_slice());
        apply_local_columns(&mut m, op, &idx);
        self.amplitudes = CVector::from_column_slice(m.as_slice());
        Ok(())
    }

    /// Bloch vector of a single-qubit state.
    pub fn bloch(&self) -> Option<[f64; 3]> {
        (self.n_qubits == 1).then(|| self.to_density().bloch().unwrap_or([0.0; 3]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        let rho = Self::checked_shape(n_qubits, matrix)?;
        let herm = linalg::hermiticity_error(&rho.matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = rho.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidDensityMatrix(format!("eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    fn checked_shape(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::EmptyChain);
        }
        let d = dim_of(n_qubits);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: matrix.nrows(),
            });
        }
        Ok(Self { n_qubits, matrix })
    }

    pub(crate) fn from_raw(n_qubits: usize, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), dim_of(n_qubits));
        Self { n_qubits, matrix }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = dim_of(n_qubits);
        Self::from_raw(n_qubits, CMatrix::identity(d, d) / Complex64::from(d as f64))
    }

    /// Random mixed state `G G†/Tr` with Ginibre `G` of the given rank.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rank: usize, rng: &mut R) -> Self {
        let d = dim_of(n_qubits);
        let g = CMatrix::from_fn(d, rank.max(1), |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        let mut m = m / tr;
        linalg::hermitize(&mut m);
        Self::from_raw(n_qubits, m)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        // Tr(ρ A) = Σ_ij ρ_ij A_ji
        let mut acc = ZERO;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += self.matrix[(i, j)] * op[(j, i)];
            }
        }
        acc
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a single-qubit state.
    pub fn bloch(&self) -> Option<[f64; 3]> {
        if self.n_qubits != 1 {
            return None;
        }
        let m = &self.matrix;
        Some([
            2.0 * m[(1, 0)].re,
            2.0 * m[(1, 0)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }

    pub fn from_bloch(r: [f64; 3]) -> Self {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5 * (1.0 + r[2]), 0.0),
                Complex64::new(0.5 * r[0], -0.5 * r[1]),
                Complex64::new(0.5 * r[0], 0.5 * r[1]),
                Complex64::new(0.5 * (1.0 - r[2]), 0.0),
            ],
        );
        Self::from_raw(1, m)
    }
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let idx = LocalIndexer::new(keep, rho.n_qubits)?;
    Ok(DensityMatrix::from_raw(keep.len(), reduce_matrix(&rho.matrix, &idx)))
}

/// Partial trace of a raw matrix down to the sites described by `idx`.
pub fn reduce_matrix(m: &CMatrix, idx: &LocalIndexer) -> CMatrix {
    let k = idx.local_dim();
    let mut out = CMatrix::zeros(k, k);
    for b in 0..k {
        for a in 0..k {
            let mut acc = ZERO;
            for &base in &idx.bases {
                acc += m[(base + idx.offsets[a], base + idx.offsets[b])];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Reduced state of a pure state on `keep`, in `O(2^n · 4^|keep|)`.
pub fn reduced_from_pure(psi: &[Complex64], n_qubits: usize, idx: &LocalIndexer) -> CMatrix {
    debug_assert_eq!(psi.len(), dim_of(n_qubits));
    let k = idx.local_dim();
    let mut out = CMatrix::zeros(k, k);
    for &base in &idx.bases {
        for b in 0..k {
            let cb = psi[base + idx.offsets[b]].conj();
            if cb == ZERO {
                continue;
            }
            for a in 0..k {
                out[(a, b)] += psi[base + idx.offsets[a]] * cb;
            }
        }
    }
    out
}

/// `⟨target|ρ|target⟩`, validated against `[0, 1]` within `1e-10` then clamped.
pub fn state_fidelity(target: &StateVector, rho: &DensityMatrix) -> Result<f64> {
    if target.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: target.dim(),
        });
    }
    fidelity_value(target.amplitudes(), rho.matrix())
}

pub(crate) fn fidelity_value(target: &CVector, rho: &CMatrix) -> Result<f64> {
    let f = target.dotc(&(rho * target));
    if f.im.abs() > 1e-10 || f.re < -1e-10 || f.re > 1.0 + 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!(
            "fidelity {f} outside [0, 1]"
        )));
    }
    Ok(f.re.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Hermitian operators and time evolution

/// Eigensystem `H = V diag(λ) V†`.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectral {
    pub fn compute(matrix: &CMatrix) -> Result<Self> {
        let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
            .ok_or(Error::NotHermitian { deviation: f64::NAN })?;
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `e^{-iHt}`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut vd = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lam * t);
            for z in vd.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        let mut out = CMatrix::zeros(v.nrows(), v.nrows());
        linalg::gemm(ONE, &vd, linalg::Op::Plain, v, linalg::Op::Adjoint, ZERO, &mut out);
        out
    }

    /// Coordinates of `psi` in the eigenbasis, for repeated evolution.
    pub fn project(&self, psi: &CVector) -> CVector {
        self.eigenvectors.ad_mul(psi)
    }

    /// `e^{-iHt}` applied to a state given by its eigenbasis coordinates.
    pub fn evolve_projected(&self, coords: &CVector, t: f64) -> CVector {
        let phased = CVector::from_iterator(
            coords.len(),
            coords
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, &lam)| c * Complex64::from_polar(1.0, -lam * t)),
        );
        &self.eigenvectors * phased
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut vd = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            for z in vd.column_mut(j).iter_mut() {
                *z *= lam;
            }
        }
        &vd * v.adjoint()
    }
}

/// A Hermitian operator on a qubit register with a lazily cached eigensystem.
#[derive(Debug)]
pub struct HermitianOperator {
    n_qubits: usize,
    matrix: CMatrix,
    spectral: OnceLock<Spectral>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let spectral = OnceLock::new();
        if let Some(s) = self.spectral.get() {
            let _ = spectral.set(s.clone());
        }
        Self {
            n_qubits: self.n_qubits,
            matrix: self.matrix.clone(),
            spectral,
        }
    }
}

impl HermitianOperator {
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::EmptyChain);
        }
        if n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge {
                n_qubits,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let d = dim_of(n_qubits);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: matrix.nrows(),
            });
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let deviation = linalg::hermiticity_error(&matrix);
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            n_qubits,
            matrix,
            spectral: OnceLock::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectral(&self) -> Result<&Spectral> {
        if let Some(s) = self.spectral.get() {
            return Ok(s);
        }
        let s = Spectral::compute(&self.matrix)?;
        let _ = self.spectral.set(s);
        Ok(self.spectral.get().expect("spectral cache initialized"))
    }

    pub fn propagator(&self, t: f64) -> Result<CMatrix> {
        Ok(self.spectral()?.propagator(t))
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &self.matrix * other - other * &self.matrix
    }
}

/// `e^{-iHt}|s⟩`.
pub fn evolve_unitary(h: &HermitianOperator, t: f64, s: &StateVector) -> Result<StateVector> {
    if h.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: s.dim(),
        });
    }
    if t == 0.0 {
        return Ok(s.clone());
    }
    let sp = h.spectral()?;
    let out = sp.evolve_projected(&sp.project(s.amplitudes()), t);
    Ok(StateVector::from_raw(s.n_qubits, out))
}

/// `e^{-iHt} ρ e^{iHt}`.
pub fn evolve_density(h: &HermitianOperator, t: f64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: rho.dim(),
        });
    }
    let u = h.propagator(t)?;
    let mut out = linalg::conjugate(&u, rho.matrix());
    linalg::hermitize(&mut out);
    Ok(DensityMatrix::from_raw(rho.n_qubits, out))
}
