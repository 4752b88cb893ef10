//! Heisenberg-picture operator evolution and information-flux coefficients.
//!
//! For a chain prepared in `|φ0⟩_1 ⊗ |ψ0⟩_{2..N}`, the expectation of the
//! evolved last-site operator splits as
//! `⟨Õ_N(t)⟩ = Σ_{O'} I^{OO'}(t) ⟨φ0|O'_1|φ0⟩`. The flux
//! `I^{OO'}(t) = ⟨ψ0| ½Tr₁[(O'_1 ⊗ 1) Õ_N(t)] |ψ0⟩` is evaluated here without
//! forming `Õ_N(t)`: with `|φ_a(t)⟩ = e^{-iHt}|a⟩|ψ0⟩`,
//! `I^{OO'} = ½ Σ_{ab} O'_{ab} ⟨φ_b|O_N|φ_a⟩`, which costs two state
//! evolutions per time point.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::qstate::{
    dim_of, pauli_decompose, tensor_embed, HermitianOperator, LocalIndexer, Pauli, StateVector,
};

/// `e^{iHt} op e^{-iHt}`.
pub fn heisenberg_evolve(h: &HermitianOperator, op: &CMatrix, t: f64) -> Result<CMatrix> {
    if op.nrows() != h.dim() || op.ncols() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: op.nrows(),
        });
    }
    let u = h.propagator(t)?;
    let mut scratch = CMatrix::zeros(h.dim(), h.dim());
    let mut out = CMatrix::zeros(h.dim(), h.dim());
    linalg::gemm(linalg::ONE, &u, linalg::Op::Adjoint, op, linalg::Op::Plain, ZERO, &mut scratch);
    linalg::gemm(linalg::ONE, &scratch, linalg::Op::Plain, &u, linalg::Op::Plain, ZERO, &mut out);
    Ok(out)
}

/// Precomputed data for repeated flux evaluations from site 1 to site `N`.
pub struct FluxEvaluator<'a> {
    h: &'a HermitianOperator,
    n_qubits: usize,
    /// Eigenbasis coordinates of `|0⟩|ψ0⟩` and `|1⟩|ψ0⟩`.
    lifted: [CVector; 2],
    last_site: LocalIndexer,
}

impl<'a> FluxEvaluator<'a> {
    pub fn new(h: &'a HermitianOperator, rest: &StateVector) -> Result<Self> {
        let n = h.n_qubits();
        if n < 2 || rest.n_qubits() != n - 1 {
            return Err(Error::DimensionMismatch {
                expected: n.saturating_sub(1),
                actual: rest.n_qubits(),
            });
        }
        let sp = h.spectral()?;
        let lift = |a: usize| {
            let first = StateVector::basis(1, a).expect("basis state");
            sp.project(first.tensor(rest).amplitudes())
        };
        Ok(Self {
            h,
            n_qubits: n,
            lifted: [lift(0), lift(1)],
            last_site: LocalIndexer::new(&[n], n)?,
        })
    }

    /// All sixteen `I^{OO'}(t)` at once, keyed by `(target O, source O')`.
    pub fn all_at(&self, t: f64) -> Result<BTreeMap<(Pauli, Pauli), Complex64>> {
        let sp = self.h.spectral()?;
        let phi = [
            sp.evolve_projected(&self.lifted[0], t),
            sp.evolve_projected(&self.lifted[1], t),
        ];
        let mut out = BTreeMap::new();
        for target in Pauli::ALL {
            let op = target.matrix();
            // g[b][a] = ⟨φ_b| O_N |φ_a⟩
            let applied: Vec<CVector> = phi.iter().map(|v| self.apply_last(&op, v)).collect();
            let g = |b: usize, a: usize| phi[b].dotc(&applied[a]);
            for source in Pauli::ALL {
                let s = source.matrix();
                let mut acc = ZERO;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += s[(a, b)] * g(b, a);
                    }
                }
                out.insert((target, source), acc * 0.5);
            }
        }
        Ok(out)
    }

    pub fn at(&self, target: Pauli, source: Pauli, t: f64) -> Result<Complex64> {
        let sp = self.h.spectral()?;
        let phi = [
            sp.evolve_projected(&self.lifted[0], t),
            sp.evolve_projected(&self.lifted[1], t),
        ];
        let op = target.matrix();
        let applied = [self.apply_last(&op, &phi[0]), self.apply_last(&op, &phi[1])];
        let s = source.matrix();
        let mut acc = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                acc += s[(a, b)] * phi[b].dotc(&applied[a]);
            }
        }
        Ok(acc * 0.5)
    }

    fn apply_last(&self, op: &CMatrix, v: &CVector) -> CVector {
        let mut m = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        crate::qstate::apply_local_columns(&mut m, op, &self.last_site);
        CVector::from_column_slice(m.as_slice())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
}

/// `I^{OO'}(t)` for `O` on site `N` and `O'` on site 1.
pub fn flux_coefficient(
    h: &HermitianOperator,
    target: Pauli,
    source: Pauli,
    rest: &StateVector,
    t: f64,
) -> Result<Complex64> {
    FluxEvaluator::new(h, rest)?.at(target, source, t)
}

/// `M_{O'}(t) = ½Tr₁[(O'_1 ⊗ 1) Õ_N(t)]` as an operator on sites `2..N`.
pub fn reduced_flux_operator(
    h: &HermitianOperator,
    target: Pauli,
    source: Pauli,
    t: f64,
) -> Result<CMatrix> {
    let n = h.n_qubits();
    if n < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: n,
        });
    }
    let evolved = heisenberg_evolve(h, &tensor_embed(&target.matrix(), &[n], n)?, t)?;
    let s = source.matrix();
    let rd = dim_of(n - 1);
    let mut m = CMatrix::zeros(rd, rd);
    // site 1 is the MSB: global index = a * rd + r
    for a in 0..2 {
        for b in 0..2 {
            let w = s[(a, b)];
            if w == ZERO {
                continue;
            }
            for c in 0..rd {
                for r in 0..rd {
                    m[(r, c)] += w * evolved[(b * rd + r, a * rd + c)];
                }
            }
        }
    }
    Ok(m * Complex64::from(0.5))
}

/// Flux read off a full Pauli decomposition of `Õ_N(t)`: sum the
/// coefficients of strings starting with `O'`, weighted by the rest-state
/// expectation of their tail. Exponential in `N`; used as a cross-check.
pub fn flux_by_pauli_decomposition(
    h: &HermitianOperator,
    target: Pauli,
    source: Pauli,
    rest: &StateVector,
    t: f64,
) -> Result<Complex64> {
    let n = h.n_qubits();
    let evolved = heisenberg_evolve(h, &tensor_embed(&target.matrix(), &[n], n)?, t)?;
    let dec = pauli_decompose(&evolved, n)?;
    let rest_rho = rest.to_density();
    let mut acc = ZERO;
    for (p, c) in &dec.terms {
        if p.letters()[0] != source || c.norm() < 1e-14 {
            continue;
        }
        let tail = crate::qstate::PauliString::new(p.letters()[1..].to_vec())?;
        acc += c * rest_rho.expectation(&tail.matrix());
    }
    Ok(acc)
}

/// Flux coefficients on a time grid, keyed by `(target O, source O')`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxTable {
    pub times: Vec<f64>,
    pub entries: BTreeMap<(Pauli, Pauli), Vec<Complex64>>,
}

impl FluxTable {
    pub fn series(&self, target: Pauli, source: Pauli) -> Option<&[Complex64]> {
        self.entries.get(&(target, source)).map(Vec::as_slice)
    }

    /// CSV with `Jt` then `re_OO'`/`im_OO'` columns; `OO'` names target then source.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Jt");
        for (o, s) in self.entries.keys() {
            let _ = write!(out, ",re_{}{},im_{}{}", o.symbol(), s.symbol(), o.symbol(), s.symbol());
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t}");
            for series in self.entries.values() {
                let _ = write!(out, ",{},{}", series[k].re, series[k].im);
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate the requested `(target, source)` pairs at every grid time.
pub fn flux_scan(
    h: &HermitianOperator,
    pairs: &[(Pauli, Pauli)],
    rest: &StateVector,
    times: &[f64],
) -> Result<FluxTable> {
    if times.is_empty() {
        return Err(Error::Empty("time grid"));
    }
    let ev = FluxEvaluator::new(h, rest)?;
    let mut entries: BTreeMap<(Pauli, Pauli), Vec<Complex64>> =
        pairs.iter().map(|&p| (p, Vec::with_capacity(times.len()))).collect();
    for &t in times {
        let all = ev.all_at(t)?;
        for (key, series) in entries.iter_mut() {
            series.push(all[key]);
        }
    }
    Ok(FluxTable {
        times: times.to_vec(),
        entries,
    })
}

/// `|0…0⟩` on `n` qubits.
pub fn all_zero_rest(n: usize) -> Result<StateVector> {
    StateVector::basis(n, 0)
}
