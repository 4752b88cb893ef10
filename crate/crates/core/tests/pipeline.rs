//! Library-level runs crossing module boundaries.

use std::f64::consts::FRAC_PI_4;

use spinflux::grid;
use spinflux::hamiltonian::{build_xx_z, build_xy_equivalent, EquivalentChainSpec, Sign};
use spinflux::infoflux::{all_zero_rest, flux_scan};
use spinflux::noise::{sample_disorder, EngineMode, EvolutionPlan, NoiseConfig};
use spinflux::qpt::{self, ProcessMatrix, TransferPipeline};
use spinflux::qstate::{Pauli, StateVector};
use spinflux::seeds::{derive_seed, Stream};
use spinflux::transfer::{
    engineered_pattern, fixed_pattern_trajectories, process_average_curve, run_ghz, run_transfer, Dynamics,
    EnsembleSpec, Protocol, TransferTask,
};

#[test]
fn ideal_channel_is_identity_up_to_a_readout_flip() {
    // Negating every coupling is conjugation by X on the even sites, so the
    // minus chain delivers an extra X at the readout when N is even.
    let mut flip = ProcessMatrix::identity().chi.map(|_| spinflux::Complex64::new(0.0, 0.0));
    flip[(1, 1)] = spinflux::Complex64::new(1.0, 0.0);
    for sign in [Sign::Plus, Sign::Minus] {
        for n in [2, 3, 4, 5] {
            let chi = qpt::reconstruct_chi(
                &qpt::sample_channel(&TransferPipeline {
                    pattern: engineered_pattern(n, sign).unwrap(),
                    noise: None,
                    readout_time: FRAC_PI_4,
                    n_steps: 1,
                })
                .unwrap(),
            )
            .unwrap();
            let expected = if sign == Sign::Minus && n % 2 == 0 { flip.clone() } else { ProcessMatrix::identity().chi };
            let dev = spinflux::linalg::max_abs_diff(&chi.chi, &expected);
            assert!(dev < 1e-9, "N={n} {sign:?}: {dev}");
        }
    }
}

#[test]
fn process_average_matches_haar_closed_form() {
    let pattern = engineered_pattern(4, Sign::Plus).unwrap();
    let noise = NoiseConfig::new(0.3, 0.2, 0.01);
    let plan = EvolutionPlan::new(FRAC_PI_4, 64, EngineMode::Deterministic).unwrap();
    let curve = process_average_curve(&pattern, &Dynamics::Open { noise: &noise, plan: &plan }).unwrap();
    let chi = qpt::reconstruct_chi(
        &qpt::sample_channel(&TransferPipeline {
            pattern,
            noise: Some(noise),
            readout_time: FRAC_PI_4,
            n_steps: 64,
        })
        .unwrap(),
    )
    .unwrap();
    let from_chi = qpt::average_state_fidelity(&chi).unwrap();
    let from_fp = qpt::average_fidelity_from_process(qpt::process_fidelity(&ProcessMatrix::identity(), &chi));
    assert!((curve.fidelity.last().unwrap() - from_chi).abs() < 1e-10);
    assert!((from_chi - from_fp).abs() < 1e-10);
}

#[test]
fn trajectories_track_the_channel_engine() {
    let ideal = engineered_pattern(4, Sign::Plus).unwrap();
    let pattern = sample_disorder(&ideal, 0.05, 11).unwrap().effective_pattern;
    let noise = NoiseConfig::new(0.5, 0.2, 0.01);
    let input = StateVector::minus();
    let mut task = TransferTask::ideal(input.clone(), pattern.clone());
    task.noise = Some(noise.clone());
    task.plan = Some(EvolutionPlan::new(1.2, 96, EngineMode::Deterministic).unwrap());
    let det = run_transfer(&task).unwrap();
    let plan = EvolutionPlan::new(1.2, 96, EngineMode::Trajectories { runs: 1500, master_seed: 5 }).unwrap();
    let traj = fixed_pattern_trajectories(&pattern, &Protocol::fixed(&input), &noise, &plan).unwrap();
    let inside = det
        .fidelity
        .iter()
        .zip(&traj.fidelity)
        .zip(&traj.stderr)
        .filter(|((d, t), s)| (*d - *t).abs() <= (3.0 * **s).max(1e-12))
        .count();
    assert!(inside as f64 >= 0.95 * det.fidelity.len() as f64, "{inside}/{}", det.fidelity.len());
}

#[test]
fn ensembles_are_reproducible_and_member_addressable() {
    let spec = EnsembleSpec {
        n_qubits: 4,
        sign: Sign::Plus,
        delta: 0.1,
        runs: 6,
        master_seed: 99,
        protocol: Protocol::TransferHaar,
        noise: Some(NoiseConfig::new(0.2, 0.1, 0.0)),
        times: Vec::new(),
        plan: Some(EvolutionPlan::new(FRAC_PI_4, 32, EngineMode::Deterministic).unwrap()),
    };
    let a = spec.run().unwrap();
    let b = spec.run().unwrap();
    assert_eq!(a.average.fidelity, b.average.fidelity);
    let third = spec.run_member(3).unwrap();
    assert_eq!(third.disorder_seed, derive_seed(99, Stream::Disorder, 3));
    assert_eq!(third.result.fidelity, a.runs[3].result.fidelity);
}

#[test]
fn ghz_and_transfer_peak_together() {
    let p = engineered_pattern(5, Sign::Plus).unwrap();
    let times = grid::default_grid();
    let g = run_ghz(&p, &Dynamics::Unitary(&times)).unwrap();
    let mut task = TransferTask::ideal(StateVector::minus(), p);
    task.times = times.clone();
    let t = run_transfer(&task).unwrap();
    assert!((g.peak_fidelity - 1.0).abs() < 1e-9);
    assert_eq!(g.peak_index(), t.peak_index());
    assert_eq!(g.peak_index(), grid::nearest_index(&times, FRAC_PI_4).unwrap());
}

#[test]
fn chain_cross_flux_equals_signed_xy_flux() {
    let times = grid::uniform(1.5, 61);
    for n in 2..=4 {
        let p = engineered_pattern(n, Sign::Plus).unwrap();
        let chain = flux_scan(&build_xx_z(&p).unwrap(), &[(Pauli::X, Pauli::Y)], &all_zero_rest(n - 1).unwrap(), &times).unwrap();
        let xy = build_xy_equivalent(&EquivalentChainSpec::from_pattern(&p).unwrap()).unwrap();
        let doubled = flux_scan(&xy, &[(Pauli::X, Pauli::Y), (Pauli::X, Pauli::X)], &all_zero_rest(2 * n - 1).unwrap(), &times).unwrap();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let a = chain.series(Pauli::X, Pauli::Y).unwrap();
        let b = doubled.series(Pauli::X, Pauli::Y).unwrap();
        let same_letter = doubled.series(Pauli::X, Pauli::X).unwrap();
        for k in 0..times.len() {
            assert!((a[k] - b[k] * sign).norm() < 1e-8, "N={n}, t={}", times[k]);
            assert!(same_letter[k].norm() < 1e-10);
        }
    }
}
