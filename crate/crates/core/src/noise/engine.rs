//! Open-system evolution by first-order splitting: each step applies
//! `e^{-iHΔt}` and then the Kraus channels for `Δt`.

use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;

use super::config::{ChannelGroup, EngineMode, EvolutionPlan, NoiseConfig, Schedule, FAMILIES};
use super::kraus::LocalChannel;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, CVector, Op, ONE, ZERO};
use crate::qstate::{apply_local_slice, reduced_from_pure, DensityMatrix, HermitianOperator, StateVector};
use crate::seeds::{self, Stream};

/// Trajectories advanced together through one matrix product per step.
/// Fixed, so that floating-point results never depend on scheduling.
pub const TRAJECTORY_BATCH: usize = 16;

/// Every unit with its weight in the random-unit average; idle families
/// keep their share as identity.
fn mixture_weights(groups: &[ChannelGroup]) -> impl Iterator<Item = (&LocalChannel, f64)> {
    let wg = 1.0 / FAMILIES as f64;
    groups
        .iter()
        .flat_map(move |g| g.units.iter().map(move |ch| (ch, wg / g.units.len() as f64)))
}

/// A Hamiltonian, a noise model and a step size, ready to propagate.
#[derive(Clone, Debug)]
pub struct OpenSystem {
    n_qubits: usize,
    n_steps: usize,
    dt: f64,
    step: CMatrix,
    groups: Vec<ChannelGroup>,
    schedule: Schedule,
    /// Diagonal part of the averaged channel (random-unit schedule only).
    mixture_mask: Vec<Complex64>,
}

impl OpenSystem {
    pub fn new(
        h: &HermitianOperator,
        noise: &NoiseConfig,
        total_time: f64,
        n_steps: usize,
    ) -> Result<Self> {
        EvolutionPlan::new(total_time, n_steps, EngineMode::Deterministic)?;
        let dt = total_time / n_steps as f64;
        let groups = noise.channel_groups(h.n_qubits(), dt)?;
        let d = h.dim();
        let mut mixture_mask = Vec::new();
        if noise.schedule == Schedule::RandomUnit && !groups.is_empty() {
            let idle = (FAMILIES - groups.len()) as f64 / FAMILIES as f64;
            mixture_mask = vec![Complex64::new(idle, 0.0); d * d];
            for (ch, w) in mixture_weights(&groups) {
                ch.add_diagonal_to(w, d, &mut mixture_mask);
            }
        }
        Ok(Self {
            n_qubits: h.n_qubits(),
            n_steps,
            dt,
            step: h.propagator(dt)?,
            groups,
            schedule: noise.schedule,
            mixture_mask,
        })
    }

    pub fn from_plan(h: &HermitianOperator, noise: &NoiseConfig, plan: &EvolutionPlan) -> Result<Self> {
        Self::new(h, noise, plan.total_time, plan.n_steps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt).collect()
    }

    fn dim(&self) -> usize {
        self.step.nrows()
    }

    /// Propagate a density matrix, calling `observe(k, ρ_k)` for
    /// `k = 0..=n_steps`; returns the final matrix.
    pub fn run_density(
        &self,
        rho0: &CMatrix,
        mut observe: impl FnMut(usize, &CMatrix) -> Result<()>,
    ) -> Result<CMatrix> {
        let d = self.dim();
        if rho0.nrows() != d || rho0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: rho0.nrows(),
            });
        }
        let mut rho = rho0.clone();
        let mut scratch = CMatrix::zeros(d, d);
        let mut next = CMatrix::zeros(d, d);
        observe(0, &rho)?;
        for k in 1..=self.n_steps {
            linalg::conjugate_into(&self.step, &rho, &mut scratch, &mut next);
            std::mem::swap(&mut rho, &mut next);
            self.apply_channels(&mut rho, &mut next);
            observe(k, &rho)?;
        }
        Ok(rho)
    }

    fn apply_channels(&self, rho: &mut CMatrix, spare: &mut CMatrix) {
        match self.schedule {
            Schedule::AllUnits => {
                for ch in self.groups.iter().flat_map(|g| &g.units) {
                    ch.apply_in_place(rho);
                }
            }
            Schedule::RandomUnit => {
                if self.groups.is_empty() {
                    return;
                }
                // Σ_g (1/G) Σ_u (1/n_g) Φ_u, diagonal terms pre-summed
                let d = rho.nrows();
                {
                    let (src, dst) = (rho.as_slice(), spare.as_mut_slice());
                    for ((o, r), m) in dst.iter_mut().zip(src).zip(&self.mixture_mask) {
                        *o = r * m;
                    }
                    for (ch, w) in mixture_weights(&self.groups) {
                        ch.add_cross(src, w, d, dst);
                    }
                }
                std::mem::swap(rho, spare);
            }
        }
    }

    /// Propagate the columns of `psis` as independent trajectories, each
    /// drawing its jumps from its own generator. `observe(k, Ψ_k)` sees the
    /// normalized batch after every step.
    pub fn run_trajectory_batch(
        &self,
        psis: &mut CMatrix,
        rngs: &mut [seeds::Rng],
        mut observe: impl FnMut(usize, &CMatrix),
    ) -> Result<()> {
        if psis.nrows() != self.dim() || psis.ncols() != rngs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: psis.nrows(),
            });
        }
        let d = self.dim();
        let mut next = CMatrix::zeros(d, psis.ncols());
        observe(0, psis);
        for k in 1..=self.n_steps {
            linalg::gemm(ONE, &self.step, Op::Plain, psis, Op::Plain, ZERO, &mut next);
            std::mem::swap(psis, &mut next);
            for (column, rng) in psis.as_mut_slice().chunks_mut(d).zip(rngs.iter_mut()) {
                self.jump(column, rng);
            }
            observe(k, psis);
        }
        Ok(())
    }

    fn jump(&self, psi: &mut [Complex64], rng: &mut seeds::Rng) {
        match self.schedule {
            Schedule::AllUnits => {
                for ch in self.groups.iter().flat_map(|g| &g.units) {
                    self.sample_kraus(psi, ch, rng);
                }
            }
            Schedule::RandomUnit => {
                if self.groups.is_empty() {
                    return;
                }
                let family = rng.random_range(0..FAMILIES);
                if let Some(g) = self.groups.iter().find(|g| g.kind.family() == family) {
                    let ch = &g.units[rng.random_range(0..g.units.len())];
                    self.sample_kraus(psi, ch, rng);
                }
            }
        }
    }

    /// Pick `K_k` with probability `‖K_k ψ‖²`, apply it and renormalize.
    fn sample_kraus(&self, psi: &mut [Complex64], ch: &LocalChannel, rng: &mut seeds::Rng) {
        let local = reduced_from_pure(psi, self.n_qubits, &ch.idx);
        let probs: Vec<f64> = ch
            .kdk
            .iter()
            .map(|m| {
                let mut acc = ZERO;
                for a in 0..local.nrows() {
                    for b in 0..local.ncols() {
                        acc += m[(b, a)] * local[(a, b)];
                    }
                }
                acc.re.max(0.0)
            })
            .collect();
        let total: f64 = probs.iter().sum();
        let x = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = probs.len() - 1;
        for (k, &p) in probs.iter().enumerate() {
            cum += p;
            if x < cum && p > 0.0 {
                chosen = k;
                break;
            }
        }
        while probs[chosen] == 0.0 && chosen > 0 {
            chosen -= 1;
        }
        apply_local_slice(psi, &ch.kraus[chosen], &ch.idx);
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in psi.iter_mut() {
            *z /= norm;
        }
    }
}

/// Final state of a deterministic open evolution.
#[derive(Clone, Debug)]
pub struct DeterministicRun {
    pub times: Vec<f64>,
    pub final_state: DensityMatrix,
}

/// Channel-composition evolution of `rho0`; `observe(k, t_k, ρ_k)` is called
/// at every grid point.
pub fn evolve_open_deterministic(
    rho0: &DensityMatrix,
    h: &HermitianOperator,
    noise: &NoiseConfig,
    plan: &EvolutionPlan,
    mut observe: impl FnMut(usize, f64, &CMatrix) -> Result<()>,
) -> Result<DeterministicRun> {
    plan.validate()?;
    if plan.mode != EngineMode::Deterministic {
        return Err(invalid("plan", "deterministic evolution needs a deterministic plan"));
    }
    let sys = OpenSystem::from_plan(h, noise, plan)?;
    let times = sys.times();
    let mut last = sys.run_density(rho0.matrix(), |k, rho| observe(k, times[k], rho))?;
    linalg::hermitize(&mut last);
    Ok(DeterministicRun {
        times,
        final_state: DensityMatrix::from_raw(rho0.n_qubits(), last),
    })
}

/// Per-run observable curves of a trajectory ensemble and their statistics.
#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub per_run: Vec<Vec<f64>>,
    /// `(1/M) Σ |ψ_m⟩⟨ψ_m|` at the final time, when requested.
    pub final_density: Option<DensityMatrix>,
}

/// Mean and standard error across runs at every grid index.
pub fn curve_statistics(per_run: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = per_run.first().ok_or(Error::Empty("ensemble"))?;
    if per_run.iter().any(|c| c.len() != first.len()) {
        return Err(Error::GridMismatch);
    }
    let mut column = vec![0.0; per_run.len()];
    let (mut mean, mut stderr) = (Vec::with_capacity(first.len()), Vec::with_capacity(first.len()));
    for k in 0..first.len() {
        for (slot, curve) in column.iter_mut().zip(per_run) {
            *slot = curve[k];
        }
        let (m, s) = linalg::mean_and_stderr(&column);
        mean.push(m);
        stderr.push(s);
    }
    Ok((mean, stderr))
}

/// Run `runs` trajectories of one [`OpenSystem`] in fixed batches.
///
/// Run `m` starts from `init(m)` and draws jumps from the generator
/// `derive_seed(master_seed, Trajectory, m)`; `observe(m, ψ)` maps the
/// normalized state to a scalar at every grid point. Results are
/// independent of the rayon pool size.
pub fn run_trajectory_ensemble<I, O>(
    sys: &OpenSystem,
    runs: usize,
    master_seed: u64,
    init: I,
    observe: O,
    keep_final_density: bool,
) -> Result<TrajectoryEnsemble>
where
    I: Fn(usize) -> Result<CVector> + Sync,
    O: Fn(usize, &[Complex64]) -> f64 + Sync,
{
    if runs == 0 {
        return Err(invalid("runs", "must be >= 1"));
    }
    let d = sys.dim();
    let n_batches = runs.div_ceil(TRAJECTORY_BATCH);
    let batches: Vec<(Vec<Vec<f64>>, Option<CMatrix>)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let members: Vec<usize> = (b * TRAJECTORY_BATCH..((b + 1) * TRAJECTORY_BATCH).min(runs)).collect();
            let mut psis = CMatrix::zeros(d, members.len());
            for (c, &m) in members.iter().enumerate() {
                let v = init(m)?;
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: v.len(),
                    });
                }
                psis.set_column(c, &v);
            }
            let mut rngs: Vec<seeds::Rng> = members
                .iter()
                .map(|&m| seeds::derived_rng(master_seed, Stream::Trajectory, m as u64))
                .collect();
            let mut curves = vec![Vec::with_capacity(sys.n_steps + 1); members.len()];
            sys.run_trajectory_batch(&mut psis, &mut rngs, |_, batch| {
                for ((c, &m), curve) in batch.as_slice().chunks(d).zip(&members).zip(curves.iter_mut()) {
                    curve.push(observe(m, c));
                }
            })?;
            let density = keep_final_density.then(|| {
                let mut acc = CMatrix::zeros(d, d);
                linalg::gemm(ONE, &psis, Op::Plain, &psis, Op::Adjoint, ZERO, &mut acc);
                acc
            });
            Ok((curves, density))
        })
        .collect::<Result<_>>()?;
    let mut per_run = Vec::with_capacity(runs);
    let mut sums = Vec::new();
    for (curves, density) in batches {
        per_run.extend(curves);
        sums.extend(density);
    }
    let final_density = match linalg::pairwise_sum_matrices(&sums) {
        Some(mut m) => {
            m /= Complex64::from(runs as f64);
            linalg::hermitize(&mut m);
            Some(DensityMatrix::from_raw(sys.n_qubits, m))
        }
        None => None,
    };
    let (mean, stderr) = curve_statistics(&per_run)?;
    Ok(TrajectoryEnsemble {
        times: sys.times(),
        mean,
        stderr,
        per_run,
        final_density,
    })
}

/// Monte Carlo unraveling of `psi0` with a trajectory plan; `observe` maps
/// each normalized trajectory state to the recorded scalar.
pub fn evolve_open_trajectories(
    psi0: &StateVector,
    h: &HermitianOperator,
    noise: &NoiseConfig,
    plan: &EvolutionPlan,
    observe: impl Fn(&[Complex64]) -> f64 + Sync,
) -> Result<TrajectoryEnsemble> {
    plan.validate()?;
    let EngineMode::Trajectories { runs, master_seed } = plan.mode else {
        return Err(invalid("plan", "trajectory evolution needs a trajectory plan"));
    };
    if psi0.n_qubits() != h.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            actual: psi0.n_qubits(),
        });
    }
    let sys = OpenSystem::from_plan(h, noise, plan)?;
    run_trajectory_ensemble(
        &sys,
        runs,
        master_seed,
        |_| Ok(psi0.amplitudes().clone()),
        |_, psi| observe(psi),
        true,
    )
}
