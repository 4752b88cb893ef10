//! The two-step transfer protocol and GHZ generation on ZZ+X chains.
//!
//! Transfer: qubit 1 holds `G|ψ⟩` with `G = (1/√2)[[1, i], [i, 1]]`, the
//! other sites hold `|+⟩`, and the chain evolves under the engineered ZZ+X
//! Hamiltonian. At `Jt = π/4` qubit `N` is in `|ψ⟩`. GHZ: starting from
//! `|0…0⟩` the same evolution reaches `(|0…0⟩ − i|1…1⟩)/√2` at `Jt = π/4`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{
    build_xx_z, build_zz_x, perfect_transfer_pattern, ChainSpec, CouplingPattern, Sign,
};
use crate::linalg::{CMatrix, CVector};
use crate::noise::{
    curve_statistics, run_trajectory_ensemble, sample_disorder, EngineMode, EvolutionPlan,
    NoiseConfig, OpenSystem,
};
use crate::qpt;
use crate::qstate::{
    dim_of, fidelity_value, reduce_matrix, reduced_from_pure, HermitianOperator, LocalIndexer,
    StateVector,
};
use crate::seeds::{self, Stream};

/// `T·H·T` with `T = diag(1, i)`: `(1/√2)[[1, i], [i, 1]]`.
pub fn pretransfer_gate() -> CMatrix {
    let a = Complex64::from(FRAC_1_SQRT_2);
    let b = Complex64::new(0.0, FRAC_1_SQRT_2);
    CMatrix::from_row_slice(2, 2, &[a, b, b, a])
}

/// The engineered pattern for `n` qubits with `J = 1`.
pub fn engineered_pattern(n_qubits: usize, sign: Sign) -> Result<CouplingPattern> {
    perfect_transfer_pattern(&ChainSpec::new(n_qubits).with_sign(sign))
}

/// `G|ψ⟩ ⊗ |+⟩^{⊗(N−1)}`.
pub fn transfer_initial_state(input: &StateVector, n_qubits: usize) -> Result<StateVector> {
    if input.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: input.n_qubits(),
        });
    }
    if n_qubits < 2 {
        return Err(invalid("n_qubits", "transfer needs at least 2 qubits"));
    }
    let first = StateVector::new(1, pretransfer_gate() * input.amplitudes())?;
    Ok(first.tensor(&StateVector::product(&StateVector::plus(), n_qubits - 1)?))
}

/// `(|0…0⟩ − i|1…1⟩)/√2`.
pub fn ghz_target(n_qubits: usize) -> Result<StateVector> {
    if n_qubits == 0 {
        return Err(Error::EmptyChain);
    }
    let d = dim_of(n_qubits);
    let mut v = CVector::zeros(d);
    v[0] = Complex64::from(FRAC_1_SQRT_2);
    v[d - 1] = Complex64::new(0.0, -FRAC_1_SQRT_2);
    StateVector::new(n_qubits, v)
}

/// What is compared against the target at each time.
#[derive(Clone, Debug)]
pub enum Readout {
    /// Reduced state of the last qubit against a one-qubit target.
    LastQubit(StateVector),
    /// The whole chain against a full-register target.
    Global(StateVector),
}

impl Readout {
    fn check(&self, n_qubits: usize) -> Result<()> {
        let (expected, actual) = match self {
            Readout::LastQubit(t) => (1, t.n_qubits()),
            Readout::Global(t) => (n_qubits, t.n_qubits()),
        };
        if expected != actual {
            return Err(Error::DimensionMismatch { expected, actual });
        }
        Ok(())
    }

    fn of_pure(&self, psi: &[Complex64], n_qubits: usize, last: &LocalIndexer) -> Result<f64> {
        match self {
            Readout::LastQubit(t) => fidelity_value(t.amplitudes(), &reduced_from_pure(psi, n_qubits, last)),
            Readout::Global(t) => {
                let overlap: Complex64 = t.amplitudes().iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
                Ok(overlap.norm_sqr().min(1.0))
            }
        }
    }

    fn of_density(&self, rho: &CMatrix, last: &LocalIndexer) -> Result<f64> {
        match self {
            Readout::LastQubit(t) => fidelity_value(t.amplitudes(), &reduce_matrix(rho, last)),
            Readout::Global(t) => fidelity_value(t.amplitudes(), rho),
        }
    }
}

/// A fidelity curve with its peak and the value at the readout time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Standard error per grid point; zeros for a single run.
    pub stderr: Vec<f64>,
    pub peak_fidelity: f64,
    pub peak_time: f64,
}

impl TransferResult {
    pub fn new(times: Vec<f64>, fidelity: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Empty("time grid"));
        }
        let stderr = stderr.unwrap_or_else(|| vec![0.0; times.len()]);
        if fidelity.len() != times.len() || stderr.len() != times.len() {
            return Err(Error::GridMismatch);
        }
        let mut best = 0;
        for (k, &f) in fidelity.iter().enumerate() {
            if f > fidelity[best] {
                best = k;
            }
        }
        Ok(Self {
            peak_fidelity: fidelity[best],
            peak_time: times[best],
            times,
            fidelity,
            stderr,
        })
    }

    pub fn peak_index(&self) -> usize {
        crate::grid::nearest_index(&self.times, self.peak_time).unwrap_or(0)
    }

    /// Fidelity and standard error at the grid point nearest `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let k = crate::grid::nearest_index(&self.times, t).unwrap_or(0);
        (self.fidelity[k], self.stderr[k])
    }

    /// `Jt,fidelity,stderr` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Jt,fidelity,stderr\n");
        for k in 0..self.times.len() {
            let _ = writeln!(out, "{},{},{}", self.times[k], self.fidelity[k], self.stderr[k]);
        }
        out
    }
}

/// Pointwise mean of several curves, with the standard error across them.
pub fn average_fidelity(results: &[TransferResult]) -> Result<TransferResult> {
    let first = results.first().ok_or(Error::Empty("results"))?;
    if results.iter().any(|r| r.times != first.times) {
        return Err(Error::GridMismatch);
    }
    if results.len() == 1 {
        return Ok(first.clone());
    }
    let curves: Vec<Vec<f64>> = results.iter().map(|r| r.fidelity.clone()).collect();
    let (mean, stderr) = curve_statistics(&curves)?;
    TransferResult::new(first.times.clone(), mean, Some(stderr))
}

/// How the chain evolves.
#[derive(Clone, Debug)]
pub enum Dynamics<'a> {
    /// Closed evolution sampled at the given times.
    Unitary(&'a [f64]),
    /// Open evolution under `noise`. Trajectory plans unravel the evolution
    /// into the plan's runs, all sharing this Hamiltonian.
    Open {
        noise: &'a NoiseConfig,
        plan: &'a EvolutionPlan,
    },
    /// One trajectory drawing jumps from the generator seeded with `seed`.
    SingleTrajectory {
        noise: &'a NoiseConfig,
        plan: &'a EvolutionPlan,
        seed: u64,
    },
}

/// Evolve `initial` under `h` and record the readout fidelity.
pub fn fidelity_curve(
    h: &HermitianOperator,
    initial: &StateVector,
    readout: &Readout,
    dynamics: &Dynamics<'_>,
) -> Result<TransferResult> {
    let n = h.n_qubits();
    if initial.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: initial.n_qubits(),
        });
    }
    readout.check(n)?;
    let last = LocalIndexer::new(&[n], n)?;
    match dynamics {
        Dynamics::Unitary(times) => {
            let sp = h.spectral()?;
            let coords = sp.project(initial.amplitudes());
            let fid = times
                .iter()
                .map(|&t| readout.of_pure(sp.evolve_projected(&coords, t).as_slice(), n, &last))
                .collect::<Result<Vec<_>>>()?;
            TransferResult::new(times.to_vec(), fid, None)
        }
        Dynamics::Open { noise, plan } => {
            let sys = OpenSystem::from_plan(h, noise, plan)?;
            match plan.mode {
                EngineMode::Deterministic => {
                    let mut fid = Vec::with_capacity(plan.n_steps + 1);
                    sys.run_density(&initial.to_density().into_matrix(), |_, rho| {
                        fid.push(readout.of_density(rho, &last)?);
                        Ok(())
                    })?;
                    TransferResult::new(sys.times(), fid, None)
                }
                EngineMode::Trajectories { runs, master_seed } => {
                    let ens = run_trajectory_ensemble(
                        &sys,
                        runs,
                        master_seed,
                        |_| Ok(initial.amplitudes().clone()),
                        |_, psi| readout.of_pure(psi, n, &last).unwrap_or(f64::NAN),
                        false,
                    )?;
                    TransferResult::new(ens.times, ens.mean, Some(ens.stderr))
                }
            }
        }
        Dynamics::SingleTrajectory { noise, plan, seed } => {
            let sys = OpenSystem::from_plan(h, noise, plan)?;
            let mut psis = CMatrix::from_column_slice(initial.dim(), 1, initial.amplitudes().as_slice());
            let mut rng = [seeds::rng_from_seed(*seed)];
            let mut fid = Vec::with_capacity(plan.n_steps + 1);
            let mut failure = None;
            sys.run_trajectory_batch(&mut psis, &mut rng, |_, batch| match readout.of_pure(batch.as_slice(), n, &last) {
                Ok(f) => fid.push(f),
                Err(e) => {
                    failure.get_or_insert(e);
                    fid.push(f64::NAN);
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            TransferResult::new(sys.times(), fid, None)
        }
    }
}

/// Ideal protocol on the engineered chain with the default sign.
pub fn run_ideal_transfer(n_qubits: usize, input: &StateVector, times: &[f64]) -> Result<TransferResult> {
    let h = build_zz_x(&engineered_pattern(n_qubits, Sign::Plus)?)?;
    let initial = transfer_initial_state(input, n_qubits)?;
    fidelity_curve(&h, &initial, &Readout::LastQubit(input.clone()), &Dynamics::Unitary(times))
}

/// The same protocol in the XX+Z frame: `|0⟩` rest states, qubit 1 prepared
/// in `Had·G|ψ⟩`, and the last qubit read out after a Hadamard.
pub fn run_ideal_transfer_rotated(n_qubits: usize, input: &StateVector, times: &[f64]) -> Result<TransferResult> {
    if n_qubits < 2 {
        return Err(invalid("n_qubits", "transfer needs at least 2 qubits"));
    }
    let h = build_xx_z(&engineered_pattern(n_qubits, Sign::Plus)?)?;
    let had = {
        let s = Complex64::from(FRAC_1_SQRT_2);
        CMatrix::from_row_slice(2, 2, &[s, s, s, -s])
    };
    let first = StateVector::new(1, &had * pretransfer_gate() * input.amplitudes())?;
    let initial = first.tensor(&StateVector::basis(n_qubits - 1, 0)?);
    // fidelity with |ψ⟩ after Had on qubit N equals fidelity with Had|ψ⟩ before it
    let target = StateVector::new(1, &had * input.amplitudes())?;
    fidelity_curve(&h, &initial, &Readout::LastQubit(target), &Dynamics::Unitary(times))
}

/// A fully specified transfer on a given (possibly disordered) pattern.
#[derive(Clone, Debug)]
pub struct TransferTask {
    pub input: StateVector,
    pub pattern: CouplingPattern,
    pub readout_time: f64,
    /// Grid for closed evolution; open evolution uses the plan's grid.
    pub times: Vec<f64>,
    pub noise: Option<NoiseConfig>,
    pub plan: Option<EvolutionPlan>,
}

impl TransferTask {
    pub fn ideal(input: StateVector, pattern: CouplingPattern) -> Self {
        Self {
            input,
            pattern,
            readout_time: std::f64::consts::FRAC_PI_4,
            times: crate::grid::default_grid(),
            noise: None,
            plan: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pattern.validate()?;
        if self.input.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: self.input.n_qubits(),
            });
        }
        if self.noise.is_some() && self.plan.is_none() {
            return Err(Error::MissingPlan);
        }
        Ok(())
    }
}

pub fn run_transfer(task: &TransferTask) -> Result<TransferResult> {
    task.validate()?;
    let n = task.pattern.n_qubits();
    let h = build_zz_x(&task.pattern)?;
    let initial = transfer_initial_state(&task.input, n)?;
    let readout = Readout::LastQubit(task.input.clone());
    let dynamics = match (&task.noise, &task.plan) {
        (Some(noise), Some(plan)) => Dynamics::Open { noise, plan },
        _ => Dynamics::Unitary(&task.times),
    };
    fidelity_curve(&h, &initial, &readout, &dynamics)
}

/// Global GHZ fidelity from `|0…0⟩` on `pattern`.
pub fn run_ghz(pattern: &CouplingPattern, dynamics: &Dynamics<'_>) -> Result<TransferResult> {
    let n = pattern.n_qubits();
    let h = build_zz_x(pattern)?;
    fidelity_curve(&h, &StateVector::basis(n, 0)?, &Readout::Global(ghz_target(n)?), dynamics)
}

// ---------------------------------------------------------------------------
// Ensembles

/// Which protocol an ensemble runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// State transfer of a fixed logical input, given as `[re0, im0, re1, im1]`.
    TransferFixed([f64; 4]),
    /// State transfer of a Haar-random input drawn per run.
    TransferHaar,
    Ghz,
}

impl Protocol {
    pub fn fixed(input: &StateVector) -> Self {
        let a = input.amplitudes();
        Protocol::TransferFixed([a[0].re, a[0].im, a[1].re, a[1].im])
    }

    /// Logical input of run `index`, or `None` for GHZ.
    pub fn input(&self, master_seed: u64, index: usize) -> Result<Option<StateVector>> {
        Ok(match self {
            Protocol::TransferFixed(v) => Some(StateVector::qubit(
                Complex64::new(v[0], v[1]),
                Complex64::new(v[2], v[3]),
            )?),
            Protocol::TransferHaar => {
                let mut rng = seeds::derived_rng(master_seed, Stream::Input, index as u64);
                Some(StateVector::haar_random(1, &mut rng))
            }
            Protocol::Ghz => None,
        })
    }

    fn setup(&self, n: usize, input: Option<&StateVector>) -> Result<(StateVector, Readout)> {
        match (self, input) {
            (Protocol::Ghz, _) => Ok((StateVector::basis(n, 0)?, Readout::Global(ghz_target(n)?))),
            (_, Some(inp)) => Ok((transfer_initial_state(inp, n)?, Readout::LastQubit(inp.clone()))),
            _ => Err(invalid("protocol", "transfer requires an input state")),
        }
    }
}

/// An ensemble over disorder realizations (and, when noisy, over the
/// open-system engine).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_qubits: usize,
    pub sign: Sign,
    pub delta: f64,
    pub runs: usize,
    pub master_seed: u64,
    pub protocol: Protocol,
    pub noise: Option<NoiseConfig>,
    /// Grid for closed evolution.
    pub times: Vec<f64>,
    /// Required when `noise` is set. With a trajectory mode each run is one
    /// trajectory on its own realization; the mode's run count is ignored.
    pub plan: Option<EvolutionPlan>,
}

/// Seeds and outcome of one ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub disorder_seed: u64,
    pub trajectory_seed: Option<u64>,
    pub input: Option<[f64; 4]>,
    pub result: TransferResult,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub runs: Vec<RunRecord>,
    pub average: TransferResult,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(invalid("runs", "must be >= 1"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", "must be finite and >= 0"));
        }
        if self.protocol != Protocol::Ghz && self.n_qubits < 2 {
            return Err(invalid("n_qubits", "transfer needs at least 2 qubits"));
        }
        match (&self.noise, &self.plan) {
            (Some(noise), Some(plan)) => {
                noise.validate(self.n_qubits)?;
                plan.validate()
            }
            (Some(_), None) => Err(Error::MissingPlan),
            (None, _) if self.times.is_empty() => Err(Error::Empty("time grid")),
            (None, _) => Ok(()),
        }
    }

    /// Run member `index` alone; members are independent of each other.
    pub fn run_member(&self, index: usize) -> Result<RunRecord> {
        let ideal = engineered_pattern(self.n_qubits, self.sign)?;
        let disorder_seed = seeds::derive_seed(self.master_seed, Stream::Disorder, index as u64);
        let pattern = sample_disorder(&ideal, self.delta, disorder_seed)?.effective_pattern;
        let h = build_zz_x(&pattern)?;
        let input = self.protocol.input(self.master_seed, index)?;
        let (initial, readout) = self.protocol.setup(self.n_qubits, input.as_ref())?;
        let mut trajectory_seed = None;
        let dynamics = match (&self.noise, &self.plan) {
            (Some(noise), Some(plan)) => match plan.mode {
                EngineMode::Deterministic => Dynamics::Open { noise, plan },
                EngineMode::Trajectories { .. } => {
                    let seed = seeds::derive_seed(self.master_seed, Stream::Trajectory, index as u64);
                    trajectory_seed = Some(seed);
                    Dynamics::SingleTrajectory { noise, plan, seed }
                }
            },
            _ => Dynamics::Unitary(&self.times),
        };
        let result = fidelity_curve(&h, &initial, &readout, &dynamics)?;
        Ok(RunRecord {
            index,
            disorder_seed,
            trajectory_seed,
            input: input.as_ref().map(|s| {
                let a = s.amplitudes();
                [a[0].re, a[0].im, a[1].re, a[1].im]
            }),
            result,
        })
    }

    /// All members in index order (computed concurrently on the current
    /// rayon pool) and their average.
    pub fn run(&self) -> Result<EnsembleOutcome> {
        self.validate()?;
        let runs: Vec<RunRecord> = (0..self.runs)
            .into_par_iter()
            .map(|m| self.run_member(m))
            .collect::<Result<_>>()?;
        let results: Vec<TransferResult> = runs.iter().map(|r| r.result.clone()).collect();
        Ok(EnsembleOutcome {
            average: average_fidelity(&results)?,
            runs,
        })
    }
}

/// Batched trajectories on one fixed pattern. Transfer inputs follow the
/// protocol (Haar inputs are drawn per trajectory from the input stream).
pub fn fixed_pattern_trajectories(
    pattern: &CouplingPattern,
    protocol: &Protocol,
    noise: &NoiseConfig,
    plan: &EvolutionPlan,
) -> Result<TransferResult> {
    let EngineMode::Trajectories { runs, master_seed } = plan.mode else {
        return Err(invalid("plan", "expected a trajectory plan"));
    };
    let n = pattern.n_qubits();
    let h = build_zz_x(pattern)?;
    let sys = OpenSystem::from_plan(&h, noise, plan)?;
    let setups = (0..runs)
        .map(|m| {
            let input = protocol.input(master_seed, m)?;
            protocol.setup(n, input.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let last = LocalIndexer::new(&[n], n)?;
    let ens = run_trajectory_ensemble(
        &sys,
        runs,
        master_seed,
        |m| Ok(setups[m].0.amplitudes().clone()),
        |m, psi| setups[m].1.of_pure(psi, n, &last).unwrap_or(f64::NAN),
        false,
    )?;
    TransferResult::new(ens.times, ens.mean, Some(ens.stderr))
}

/// Output of the transfer channel for each QPT probe at every grid time.
pub fn probe_outputs(
    pattern: &CouplingPattern,
    dynamics: &Dynamics<'_>,
) -> Result<(Vec<f64>, Vec<[CMatrix; 4]>)> {
    let n = pattern.n_qubits();
    let h = build_zz_x(pattern)?;
    let last = LocalIndexer::new(&[n], n)?;
    let probes = qpt::probe_states();
    match dynamics {
        Dynamics::Unitary(times) => {
            // outputs for every probe follow from the two evolved basis inputs
            let sp = h.spectral()?;
            let lifted = [0, 1]
                .map(|a| transfer_initial_state(&StateVector::basis(1, a).expect("basis"), n).map(|s| sp.project(s.amplitudes())));
            let [l0, l1] = lifted;
            let (l0, l1) = (l0?, l1?);
            let mut out = Vec::with_capacity(times.len());
            for &t in times.iter() {
                let phi = [sp.evolve_projected(&l0, t), sp.evolve_projected(&l1, t)];
                let mut set: [CMatrix; 4] = std::array::from_fn(|_| CMatrix::zeros(2, 2));
                for (slot, p) in set.iter_mut().zip(&probes) {
                    let a = p.amplitudes();
                    let psi = &phi[0] * a[0] + &phi[1] * a[1];
                    *slot = reduced_from_pure(psi.as_slice(), n, &last);
                }
                out.push(set);
            }
            Ok((times.to_vec(), out))
        }
        Dynamics::Open { noise, plan } if plan.mode == EngineMode::Deterministic => {
            let sys = OpenSystem::from_plan(&h, noise, plan)?;
            let mut out: Vec<[CMatrix; 4]> =
                (0..=plan.n_steps).map(|_| std::array::from_fn(|_| CMatrix::zeros(2, 2))).collect();
            for (p_idx, p) in probes.iter().enumerate() {
                let rho0 = transfer_initial_state(p, n)?.to_density().into_matrix();
                sys.run_density(&rho0, |k, rho| {
                    out[k][p_idx] = reduce_matrix(rho, &last);
                    Ok(())
                })?;
            }
            Ok((sys.times(), out))
        }
        _ => Err(invalid("dynamics", "probe outputs need closed or deterministic open dynamics")),
    }
}

/// Haar-averaged transfer fidelity at every grid time, via QPT of the
/// channel: `F_avg = (2F_p + 1)/3`.
pub fn process_average_curve(pattern: &CouplingPattern, dynamics: &Dynamics<'_>) -> Result<TransferResult> {
    let (times, outputs) = probe_outputs(pattern, dynamics)?;
    let fid = outputs
        .into_iter()
        .map(|o| {
            let chi = qpt::reconstruct_chi(&qpt::ChannelSample::from_matrices(o)?)?;
            Ok(qpt::average_fidelity_from_process(qpt::process_fidelity(&qpt::ProcessMatrix::identity(), &chi)))
        })
        .collect::<Result<Vec<f64>>>()?;
    TransferResult::new(times, fid, None)
}

/// `⟨ψ|ρ|ψ⟩` of the last qubit for a raw register density matrix.
pub fn last_qubit_fidelity(rho: &CMatrix, n_qubits: usize, target: &StateVector) -> Result<f64> {
    let last = LocalIndexer::new(&[n_qubits], n_qubits)?;
    fidelity_value(target.amplitudes(), &reduce_matrix(rho, &last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid;
    use crate::linalg::{self, ZERO};
    use crate::qstate::{evolve_unitary, partial_trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn gate_matrix_and_action() {
        let g = pretransfer_gate();
        assert!(linalg::max_abs_diff(&(g.adjoint() * &g), &linalg::identity(2)) < 1e-12);
        assert!((g.determinant().norm() - 1.0).abs() < 1e-12);
        let (a, b) = (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let out = &g * CVector::from_vec(vec![a, b]);
        let i = Complex64::i();
        assert!((out[0] - (a + i * b) * FRAC_1_SQRT_2).norm() < 1e-15);
        assert!((out[1] - (b + i * a) * FRAC_1_SQRT_2).norm() < 1e-15);
        let twice = &g * &g * CVector::from_vec(vec![Complex64::from(1.0), ZERO]);
        assert!(twice[0].norm() < 1e-15 && (twice[1] - i).norm() < 1e-15);
    }

    #[test]
    fn ideal_transfer_is_perfect_at_quarter_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 2..=6 {
            for _ in 0..5 {
                let input = StateVector::haar_random(1, &mut rng);
                let r = run_ideal_transfer(n, &input, &[FRAC_PI_4]).unwrap();
                assert!(r.fidelity[0] > 1.0 - 1e-9, "n={n}: {}", r.fidelity[0]);
            }
        }
    }

    #[test]
    fn rest_of_chain_returns_to_plus_states() {
        let n = 5;
        let input = StateVector::minus();
        let h = build_zz_x(&engineered_pattern(n, Sign::Plus).unwrap()).unwrap();
        let out = evolve_unitary(&h, FRAC_PI_4, &transfer_initial_state(&input, n).unwrap()).unwrap();
        let rest = partial_trace(&out.to_density(), &[1, 2, 3, 4]).unwrap();
        let plus = StateVector::product(&StateVector::plus(), 4).unwrap();
        assert!(crate::qstate::state_fidelity(&plus, &rest).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn peak_sits_at_quarter_period_for_n7() {
        let r = run_ideal_transfer(7, &StateVector::minus(), &grid::default_grid()).unwrap();
        assert!((r.peak_time - FRAC_PI_4).abs() < 1e-12);
        assert!(r.peak_fidelity > 1.0 - 1e-9);
        let r2 = run_ideal_transfer(2, &StateVector::basis(1, 0).unwrap(), &[FRAC_PI_4]).unwrap();
        assert!(r2.fidelity[0] > 1.0 - 1e-9);
    }

    #[test]
    fn initial_fidelity_is_overlap_with_rotated_input() {
        let input = StateVector::plus();
        let r = run_ideal_transfer(3, &input, &[0.0]).unwrap();
        // at t = 0 the last qubit is |+⟩, so the fidelity is |⟨ψ|+⟩|²
        assert!((r.fidelity[0] - 1.0).abs() < 1e-12);
        let r = run_ideal_transfer(3, &StateVector::basis(1, 0).unwrap(), &[0.0]).unwrap();
        assert!((r.fidelity[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotated_frame_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let times = grid::uniform(1.5, 17);
        for n in 2..=5 {
            let input = StateVector::haar_random(1, &mut rng);
            let a = run_ideal_transfer(n, &input, &times).unwrap();
            let b = run_ideal_transfer_rotated(n, &input, &times).unwrap();
            for (x, y) in a.fidelity.iter().zip(&b.fidelity) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sign_choice_is_irrelevant() {
        let input = StateVector::minus();
        let p = engineered_pattern(5, Sign::Minus).unwrap();
        let r = run_transfer(&TransferTask {
            times: vec![FRAC_PI_4],
            ..TransferTask::ideal(input, p)
        })
        .unwrap();
        assert!(r.fidelity[0] > 1.0 - 1e-9);
    }

    #[test]
    fn ghz_target_and_generation() {
        let g2 = ghz_target(2).unwrap();
        assert!((g2.amplitudes()[3] - Complex64::new(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        let marginal = partial_trace(&ghz_target(3).unwrap().to_density(), &[2]).unwrap();
        assert!(linalg::max_abs_diff(marginal.matrix(), &(linalg::identity(2) * Complex64::from(0.5))) < 1e-15);
        for n in 1..=6 {
            let r = run_ghz(&engineered_pattern(n, Sign::Plus).unwrap(), &Dynamics::Unitary(&[FRAC_PI_4])).unwrap();
            assert!(r.fidelity[0] > 1.0 - 1e-9, "n={n}");
        }
        assert!(ghz_target(0).is_err());
    }

    #[test]
    fn averaging() {
        let t = vec![0.0, 1.0];
        let a = TransferResult::new(t.clone(), vec![0.9, 0.9], None).unwrap();
        let b = TransferResult::new(t.clone(), vec![1.0, 1.0], None).unwrap();
        let avg = average_fidelity(&[a.clone(), b]).unwrap();
        assert!((avg.fidelity[0] - 0.95).abs() < 1e-15);
        assert_eq!(average_fidelity(std::slice::from_ref(&a)).unwrap(), a);
        let c = TransferResult::new(vec![0.0, 2.0], vec![1.0, 1.0], None).unwrap();
        assert!(matches!(average_fidelity(&[a, c]), Err(Error::GridMismatch)));
        assert!(average_fidelity(&[]).is_err());
    }

    #[test]
    fn noiseless_task_matches_ideal() {
        let input = StateVector::minus();
        let times = grid::default_grid();
        let task = TransferTask::ideal(input.clone(), engineered_pattern(4, Sign::Plus).unwrap());
        let a = run_transfer(&task).unwrap();
        let b = run_ideal_transfer(4, &input, &times).unwrap();
        for (x, y) in a.fidelity.iter().zip(&b.fidelity) {
            assert!((x - y).abs() < 1e-12);
        }
        let missing = TransferTask {
            noise: Some(NoiseConfig::new(0.1, 0.1, 0.0)),
            ..task
        };
        assert!(matches!(run_transfer(&missing), Err(Error::MissingPlan)));
    }

    #[test]
    fn open_engines_agree_without_noise() {
        let p = engineered_pattern(3, Sign::Plus).unwrap();
        let input = StateVector::minus();
        let noise = NoiseConfig::noiseless();
        let plan = EvolutionPlan::new(FRAC_PI_4, 32, EngineMode::Deterministic).unwrap();
        let task = TransferTask {
            noise: Some(noise),
            plan: Some(plan),
            ..TransferTask::ideal(input, p)
        };
        let r = run_transfer(&task).unwrap();
        assert_eq!(r.times.len(), 33);
        assert!(*r.fidelity.last().unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn process_average_of_ideal_chain_is_one() {
        let p = engineered_pattern(4, Sign::Plus).unwrap();
        let r = process_average_curve(&p, &Dynamics::Unitary(&[0.0, FRAC_PI_4])).unwrap();
        assert!((r.fidelity[1] - 1.0).abs() < 1e-9);
        // at t = 0 the last qubit is |+⟩ whatever the input: a replacement
        // channel, whose Haar-averaged fidelity is 1/2
        assert!((r.fidelity[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ensemble_is_reproducible_and_pool_independent() {
        let spec = EnsembleSpec {
            n_qubits: 4,
            sign: Sign::Plus,
            delta: 0.05,
            runs: 6,
            master_seed: 99,
            protocol: Protocol::TransferHaar,
            noise: Some(NoiseConfig::new(0.2, 0.5, 0.01)),
            times: vec![],
            plan: Some(EvolutionPlan::new(FRAC_PI_4, 16, EngineMode::Trajectories { runs: 1, master_seed: 0 }).unwrap()),
        };
        let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
        let a = pool(1).install(|| spec.run().unwrap());
        let b = pool(3).install(|| spec.run().unwrap());
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.average, b.average);
        assert_eq!(spec.run_member(2).unwrap(), a.runs[2]);
    }
}
