//! The experiments behind each subcommand.
//!
//! Heavy work is split into independent units handed to the [`Runner`];
//! everything else is cheap post-processing of the unit results.

use std::fmt::Write;

use spinflux::grid;
use spinflux::hamiltonian::{
    build_three_qubit_example, build_xx_z, build_xy_equivalent, CouplingPattern,
    EquivalentChainSpec,
};
use spinflux::infoflux::{all_zero_rest, flux_scan};
use spinflux::linalg::{self, CMatrix};
use spinflux::noise::{
    curve_statistics, sample_disorder, DisorderRealization, EngineMode, EvolutionPlan, NoiseConfig, Topology,
};
use spinflux::qpt::{self, ProcessMatrix, TransferPipeline};
use spinflux::qstate::{Pauli, StateVector};
use spinflux::seeds::{derive_seed, Stream};
use spinflux::transfer::{
    engineered_pattern, fixed_pattern_trajectories, process_average_curve, run_ghz, run_ideal_transfer_rotated,
    run_transfer, Dynamics, EnsembleSpec, Protocol, TransferResult, TransferTask,
};
use spinflux::Complex64;

use crate::artifacts::{Artifacts, Headline, RunSeeds};
use crate::config::{Engine, ExperimentConfig, ExperimentId};
use crate::error::CliResult;
use crate::runner::{Runner, Unit};

/// Highest fidelity a classical (measure-and-prepare) channel achieves.
pub const CLASSICAL_LIMIT: f64 = 2.0 / 3.0;

/// Average fidelity of the noisy transfer channel quoted as the reference.
pub const NOISY_PROCESS_REFERENCE: f64 = 0.959;

/// Corner entry of the published disordered process matrix.
pub const PRINTED_CHI_CORNER: f64 = 0.987;

pub fn run(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::FluxDemo => flux_demo(cfg),
        ExperimentId::TransferIdeal => transfer_ideal(cfg),
        ExperimentId::TransferDisorder => transfer_disorder(cfg, runner),
        ExperimentId::TransferNoise => transfer_noise(cfg, runner),
        ExperimentId::Sweep2d => sweep_2d(cfg, runner),
        ExperimentId::SweepGammaCut => sweep_gamma_cut(cfg, runner),
        ExperimentId::CollectiveScan => collective_scan(cfg, runner),
        ExperimentId::Ghz => ghz(cfg, runner),
        ExperimentId::QptReport => qpt_report(cfg, runner),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

fn input_state(cfg: &ExperimentConfig) -> spinflux::Result<StateVector> {
    let v = cfg.input;
    StateVector::normalized(
        1,
        spinflux::linalg::CVector::from_vec(vec![Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])]),
    )
}

fn ideal_pattern(cfg: &ExperimentConfig) -> spinflux::Result<CouplingPattern> {
    engineered_pattern(cfg.n_qubits, cfg.sign)
}

fn closed_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    grid::uniform(cfg.total_time, cfg.points)
}

fn noise(cfg: &ExperimentConfig, damping: f64, dephasing: f64) -> NoiseConfig {
    NoiseConfig::new(damping, dephasing, cfg.nbar).with_schedule(cfg.schedule)
}

fn mode(cfg: &ExperimentConfig, master_seed: u64) -> EngineMode {
    match cfg.engine {
        Engine::Deterministic => EngineMode::Deterministic,
        Engine::Trajectories => EngineMode::Trajectories {
            runs: cfg.runs,
            master_seed,
        },
    }
}

/// Whole window `[0, total_time]`.
fn full_plan(cfg: &ExperimentConfig, master_seed: u64) -> spinflux::Result<EvolutionPlan> {
    EvolutionPlan::new(cfg.total_time, cfg.n_steps, mode(cfg, master_seed))
}

/// `[0, readout_time]` at the same step size.
fn readout_plan(cfg: &ExperimentConfig, mode: EngineMode) -> spinflux::Result<EvolutionPlan> {
    EvolutionPlan::new(cfg.readout_time, cfg.readout_steps(), mode)
}

/// The single disorder realization shared by fixed-realization scans.
fn fixed_realization(cfg: &ExperimentConfig) -> spinflux::Result<DisorderRealization> {
    sample_disorder(&ideal_pattern(cfg)?, cfg.delta, derive_seed(cfg.seed, Stream::Realization, 0))
}

fn realization_record(label: &str, r: &DisorderRealization) -> RunSeeds {
    RunSeeds {
        label: label.into(),
        disorder_seed: Some(r.seed),
        j: r.effective_pattern.j.clone(),
        b: r.effective_pattern.b.clone(),
        ..Default::default()
    }
}

/// Seeds and couplings of every member of an ensemble.
fn member_records(spec: &EnsembleSpec) -> spinflux::Result<Vec<RunSeeds>> {
    let ideal = engineered_pattern(spec.n_qubits, spec.sign)?;
    let trajectories = matches!(&spec.plan, Some(p) if spec.noise.is_some() && matches!(p.mode, EngineMode::Trajectories { .. }));
    (0..spec.runs)
        .map(|m| {
            let seed = derive_seed(spec.master_seed, Stream::Disorder, m as u64);
            let r = sample_disorder(&ideal, spec.delta, seed)?;
            let mut rec = realization_record(&format!("run {m}"), &r);
            if trajectories {
                rec.trajectory_seed = Some(derive_seed(spec.master_seed, Stream::Trajectory, m as u64));
            }
            if spec.protocol == Protocol::TransferHaar {
                rec.input_seed = Some(derive_seed(spec.master_seed, Stream::Input, m as u64));
            }
            Ok(rec)
        })
        .collect()
}

/// Units computing `extract(curve)` for every member of `spec`.
fn member_units<'a>(
    prefix: &str,
    spec: &'a EnsembleSpec,
    extract: fn(TransferResult) -> Vec<f64>,
) -> Vec<Unit<'a>> {
    (0..spec.runs)
        .map(|m| Unit::new(format!("{prefix}/{m}"), move || Ok(extract(spec.run_member(m)?.result))))
        .collect()
}

fn whole_curve(r: TransferResult) -> Vec<f64> {
    r.fidelity
}

fn last_point(r: TransferResult) -> Vec<f64> {
    vec![*r.fidelity.last().expect("nonempty grid")]
}

fn ensemble_curve(times: Vec<f64>, per_run: &[Vec<f64>]) -> spinflux::Result<TransferResult> {
    let (mean, stderr) = curve_statistics(per_run)?;
    TransferResult::new(times, mean, Some(stderr))
}

fn column(per_run: &[Vec<f64>], k: usize) -> Vec<f64> {
    per_run.iter().map(|v| v[k]).collect()
}

/// `header` then one row per index across `columns`.
fn table_csv(header: &str, columns: &[&[f64]]) -> String {
    let mut out = format!("{header}\n");
    let rows = columns.first().map_or(0, |c| c.len());
    for k in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| c[k].to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn near_readout(times: &[f64], t: f64, cfg: &ExperimentConfig) -> bool {
    grid::nearest_index(times, t) == grid::nearest_index(times, cfg.readout_time)
}

fn describe_peak(label: &str, r: &TransferResult) -> String {
    let k = r.peak_index();
    format!(
        "{label}: peak fidelity {:.6} ± {:.6} at Jt = {:.6}",
        r.peak_fidelity, r.stderr[k], r.peak_time
    )
}

fn chi_from_values(v: &[f64]) -> spinflux::Result<ProcessMatrix> {
    ProcessMatrix::new(CMatrix::from_fn(4, 4, |r, c| {
        Complex64::new(v[2 * (4 * r + c)], v[2 * (4 * r + c) + 1])
    }))
}

fn chi_values(chi: &ProcessMatrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(32);
    for r in 0..4 {
        for c in 0..4 {
            v.extend([chi.chi[(r, c)].re, chi.chi[(r, c)].im]);
        }
    }
    v
}

fn chi_json(chi: &ProcessMatrix) -> String {
    serde_json::to_string_pretty(&chi.to_json()).expect("chi serializes") + "\n"
}

fn affine_summary(label: &str, chi: &ProcessMatrix) -> String {
    let map = qpt::AffineMap::of(chi);
    let axes = map.semi_axes();
    let (angle, axis) = map.rotation();
    format!(
        "{label}: Bloch semi-axes ({:.6}, {:.6}, {:.6}), rotation {:.6} rad about ({:.4}, {:.4}, {:.4}), shift ({:.2e}, {:.2e}, {:.2e})",
        axes[0], axes[1], axes[2], angle, axis[0], axis[1], axis[2], map.c[0], map.c[1], map.c[2]
    )
}

// ---------------------------------------------------------------------------
// closed-system experiments

fn flux_demo(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let n = cfg.n_qubits;
    let times = closed_grid(cfg);
    let mut art = Artifacts::default();

    let h = build_xx_z(&ideal_pattern(cfg)?)?;
    let pairs: Vec<(Pauli, Pauli)> = Pauli::ALL
        .iter()
        .flat_map(|&o| Pauli::ALL.iter().map(move |&s| (o, s)))
        .collect();
    let table = flux_scan(&h, &pairs, &all_zero_rest(n - 1)?, &times)?;
    let k = grid::nearest_index(&times, cfg.readout_time).unwrap_or(0);
    art.summary.push(format!(
        "XX+Z chain, N = {n}, |0⟩ rest: nonzero flux at Jt = {:.6}",
        times[k]
    ));
    for (&(o, s), series) in &table.entries {
        let m = series[k].norm();
        if m > 1e-9 && (o, s) != (Pauli::I, Pauli::I) {
            art.summary.push(format!(
                "  I^({}{}) = {:+.9} {:+.9}i (|I| = {m:.9})",
                o.symbol(),
                s.symbol(),
                series[k].re,
                series[k].im
            ));
        }
    }
    // the transverse components swap across the chain: X_1 -> Y_N, Y_1 -> X_N
    let cross = [(Pauli::X, Pauli::Y), (Pauli::Y, Pauli::X)]
        .iter()
        .map(|&(o, s)| table.series(o, s).expect("all pairs scanned")[k].norm())
        .fold(f64::INFINITY, f64::min);
    art.headlines.push(Headline::check(
        "min(|I^XY|, |I^YX|) at readout",
        cross,
        "1 within 1e-9",
        (cross - 1.0).abs() <= 1e-9,
    ));
    art.files.push(("flux-demo.csv".into(), table.to_csv()));

    // three-qubit example against its closed form
    let he = build_three_qubit_example(1.0)?;
    let ex = flux_scan(&he, &[(Pauli::X, Pauli::X)], &all_zero_rest(2)?, &times)?;
    let xx = ex.series(Pauli::X, Pauli::X).expect("requested pair");
    let closed: Vec<f64> = times.iter().map(|t| -(2f64.sqrt() * t).sin().powi(2)).collect();
    let dev = xx
        .iter()
        .zip(&closed)
        .map(|(z, c)| (z.re - c).abs().max(z.im.abs()))
        .fold(0.0, f64::max);
    art.headlines.push(Headline::check(
        "three-qubit XX flux vs -sin^2(sqrt2 t), max deviation",
        dev,
        "<= 1e-9",
        dev <= 1e-9,
    ));
    let re: Vec<f64> = xx.iter().map(|z| z.re).collect();
    art.files.push((
        "flux-demo-example.csv".into(),
        table_csv("Jt,flux_XX,closed_form", &[&times, &re, &closed]),
    ));

    // chain vs doubled XY chain
    let (literal, signed) = flux_equivalence(&times, 2..=5)?;
    art.headlines.push(Headline::check(
        "Y1->X_N (XX+Z) vs X1->X_2N (XY chain), max deviation, N=2..5",
        literal,
        "<= 1e-8",
        literal <= 1e-8,
    ));
    art.headlines.push(Headline::check(
        "Y1->X_N (XX+Z) vs (-1)^N Y1->X_2N (XY chain), max deviation, N=2..5",
        signed,
        "<= 1e-8",
        signed <= 1e-8,
    ));
    art.summary.push(
        "The same-letter flux X1->X_2N vanishes on an even-length XY chain; the matching quantity is the \
         cross flux Y1->X_2N with sign (-1)^N."
            .into(),
    );
    Ok(art)
}

/// Max deviations over `sizes` of the flux `Y₁→X_N` on the XX+Z chain from
/// `X₁→X_{2N}` and from `(−1)^N Y₁→X_{2N}` on the doubled XY chain.
pub fn flux_equivalence(times: &[f64], sizes: std::ops::RangeInclusive<usize>) -> spinflux::Result<(f64, f64)> {
    let (mut literal, mut signed) = (0.0f64, 0.0f64);
    for n in sizes {
        let p = engineered_pattern(n, spinflux::hamiltonian::Sign::Plus)?;
        let hc = build_xx_z(&p)?;
        let heq = build_xy_equivalent(&EquivalentChainSpec::from_pattern(&p)?)?;
        let a = flux_scan(&hc, &[(Pauli::X, Pauli::Y)], &all_zero_rest(n - 1)?, times)?;
        let b = flux_scan(
            &heq,
            &[(Pauli::X, Pauli::X), (Pauli::X, Pauli::Y)],
            &all_zero_rest(2 * n - 1)?,
            times,
        )?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = a.series(Pauli::X, Pauli::Y).expect("pair");
        let xx = b.series(Pauli::X, Pauli::X).expect("pair");
        let xy = b.series(Pauli::X, Pauli::Y).expect("pair");
        for k in 0..times.len() {
            literal = literal.max((lhs[k] - xx[k]).norm());
            signed = signed.max((lhs[k] - xy[k] * sign).norm());
        }
    }
    Ok((literal, signed))
}

fn transfer_ideal(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let times = closed_grid(cfg);
    let input = input_state(cfg)?;
    let mut task = TransferTask::ideal(input.clone(), ideal_pattern(cfg)?);
    task.times = times.clone();
    task.readout_time = cfg.readout_time;
    let r = run_transfer(&task)?;
    let rotated = run_ideal_transfer_rotated(cfg.n_qubits, &input, &times)?;
    let frame_dev = r
        .fidelity
        .iter()
        .zip(&rotated.fidelity)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut art = Artifacts::default();
    art.summary.push(describe_peak(&format!("ideal transfer, N = {}", cfg.n_qubits), &r));
    art.headlines.push(Headline::check(
        "peak fidelity",
        r.peak_fidelity,
        "1 within 1e-9",
        r.peak_fidelity >= 1.0 - 1e-9,
    ));
    art.headlines.push(Headline::check(
        "peak time",
        r.peak_time,
        "grid point nearest the readout time",
        near_readout(&r.times, r.peak_time, cfg),
    ));
    art.headlines.push(Headline::check(
        "ZZ+X vs rotated XX+Z frame, max fidelity deviation",
        frame_dev,
        "<= 1e-9",
        frame_dev <= 1e-9,
    ));
    art.files.push(("transfer-ideal.csv".into(), r.to_csv()));
    Ok(art)
}

fn transfer_disorder(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let times = closed_grid(cfg);
    let protocol = Protocol::fixed(&input_state(cfg)?);
    let spec = EnsembleSpec {
        n_qubits: cfg.n_qubits,
        sign: cfg.sign,
        delta: cfg.delta,
        runs: cfg.runs,
        master_seed: cfg.seed,
        protocol: protocol.clone(),
        noise: None,
        times: times.clone(),
        plan: None,
    };
    spec.validate()?;
    let per_run = runner.run(member_units("curve", &spec, whole_curve))?;
    let avg = ensemble_curve(times.clone(), &per_run)?;
    let worst = per_run
        .iter()
        .map(|c| c.iter().copied().fold(f64::MIN, f64::max))
        .fold(f64::MAX, f64::min);
    let mut art = Artifacts {
        runs: member_records(&spec)?,
        ..Default::default()
    };
    art.summary.push(describe_peak(
        &format!("N = {}, δ = {}, M = {}", cfg.n_qubits, cfg.delta, cfg.runs),
        &avg,
    ));
    art.summary.push(format!("worst single-run peak fidelity {worst:.6}"));
    let pk = avg.peak_index();
    art.headlines.push(Headline::check(
        "average peak fidelity",
        avg.peak_fidelity,
        "[0.985, 1.0]",
        (0.985..=1.0 + 1e-12).contains(&avg.peak_fidelity),
    ));
    art.headlines.push(Headline::check(
        "average peak time",
        avg.peak_time,
        "grid point nearest the readout time",
        near_readout(&avg.times, avg.peak_time, cfg),
    ));
    art.headlines.push(Headline::check(
        "standard error at the peak",
        avg.stderr[pk],
        "< 0.005",
        avg.stderr[pk] < 0.005,
    ));
    art.headlines.push(Headline::info("worst single-run peak", worst, "0.991 reference"));
    art.files.push(("transfer-disorder.csv".into(), avg.to_csv()));

    // classical-threshold scan at the readout time; members share their
    // disorder draws across strengths
    let specs: Vec<EnsembleSpec> = cfg
        .delta_values
        .iter()
        .map(|&d| EnsembleSpec {
            delta: d,
            times: vec![cfg.readout_time],
            ..spec.clone()
        })
        .collect();
    let units: Vec<Unit<'_>> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| member_units(&format!("threshold/{i}"), s, last_point))
        .collect();
    let flat = runner.run(units)?;
    let (mut means, mut errs, mut above) = (Vec::new(), Vec::new(), Vec::new());
    for chunk in flat.chunks(cfg.runs) {
        let (m, e) = linalg::mean_and_stderr(&column(chunk, 0));
        means.push(m);
        errs.push(e);
        above.push(if m > CLASSICAL_LIMIT { 1.0 } else { 0.0 });
    }
    let mut all_above = true;
    for ((&d, &m), &e) in cfg.delta_values.iter().zip(&means).zip(&errs) {
        art.summary.push(format!("δ = {d:.2}: F(readout) = {m:.6} ± {e:.6}"));
        if d <= 0.30 + 1e-12 {
            all_above &= m > CLASSICAL_LIMIT;
        }
    }
    let min_ok = cfg
        .delta_values
        .iter()
        .zip(&means)
        .filter(|(d, _)| **d <= 0.30 + 1e-12)
        .map(|(_, m)| *m)
        .fold(f64::INFINITY, f64::min);
    art.headlines.push(Headline::check(
        "lowest F(readout) for δ <= 0.30",
        min_ok,
        "> 2/3",
        all_above,
    ));
    art.files.push((
        "transfer-disorder-threshold.csv".into(),
        table_csv("delta,fidelity,stderr,above_classical", &[&cfg.delta_values, &means, &errs, &above]),
    ));
    Ok(art)
}

// ---------------------------------------------------------------------------
// open-system experiments

/// The configured rates (the caption assignment under the defaults),
/// then the same pair swapped.
pub fn noise_variants(cfg: &ExperimentConfig) -> [(&'static str, f64, f64); 2] {
    [
        ("caption", cfg.damping_rate, cfg.dephasing_rate),
        ("text", cfg.dephasing_rate, cfg.damping_rate),
    ]
}

fn transfer_noise(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let plan = full_plan(cfg, cfg.seed)?;
    let times = plan.times();
    let mut art = Artifacts::default();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut header = String::from("Jt");
    let mut any_match = false;
    for (label, damping, dephasing) in noise_variants(cfg) {
        let spec = EnsembleSpec {
            n_qubits: cfg.n_qubits,
            sign: cfg.sign,
            delta: cfg.delta,
            runs: cfg.runs,
            master_seed: cfg.seed,
            protocol: Protocol::TransferHaar,
            noise: Some(noise(cfg, damping, dephasing)),
            times: Vec::new(),
            plan: Some(plan.clone()),
        };
        spec.validate()?;
        let per_run = runner.run(member_units(label, &spec, whole_curve))?;
        let avg = ensemble_curve(times.clone(), &per_run)?;
        if art.runs.is_empty() {
            art.runs = member_records(&spec)?;
        }
        art.summary.push(describe_peak(
            &format!("{label} variant (Γ = {damping}, γ = {dephasing}), Haar inputs"),
            &avg,
        ));
        art.headlines.push(Headline::check(
            format!("{label}: average peak fidelity"),
            avg.peak_fidelity,
            "[0.90, 0.98]",
            (0.90..=0.98).contains(&avg.peak_fidelity),
        ));

        // tomography of the first realization's channel at the readout time
        let nz = noise(cfg, damping, dephasing);
        let unit = Unit::new(format!("{label}/process"), || {
            let ideal = ideal_pattern(cfg)?;
            let r = sample_disorder(&ideal, cfg.delta, derive_seed(cfg.seed, Stream::Disorder, 0))?;
            let chi = qpt::reconstruct_chi(&qpt::sample_channel(&TransferPipeline {
                pattern: r.effective_pattern,
                noise: Some(nz.clone()),
                readout_time: cfg.readout_time,
                n_steps: cfg.readout_steps(),
            })?)?;
            Ok(vec![qpt::average_fidelity_from_process(qpt::process_fidelity(
                &ProcessMatrix::identity(),
                &chi,
            ))])
        });
        let f_proc = runner.run(vec![unit])?[0][0];
        let matches = (f_proc - NOISY_PROCESS_REFERENCE).abs() <= 0.02;
        any_match |= matches;
        art.summary.push(format!(
            "{label} variant: process-average fidelity of realization 0 at Jt = {:.6}: {f_proc:.6}",
            cfg.readout_time
        ));
        art.headlines.push(Headline::check(
            format!("{label}: process-average fidelity (realization 0)"),
            f_proc,
            "0.959 ± 0.02",
            matches,
        ));
        let _ = write!(header, ",{label}_fidelity,{label}_stderr");
        columns.push(avg.fidelity);
        columns.push(avg.stderr);
    }
    art.headlines.push(Headline::check(
        "some variant matches the process-average reference",
        if any_match { 1.0 } else { 0.0 },
        "at least one of caption/text",
        any_match,
    ));
    let mut cols: Vec<&[f64]> = vec![&times];
    cols.extend(columns.iter().map(Vec::as_slice));
    art.files.insert(0, ("transfer-noise.csv".into(), table_csv(&header, &cols)));
    Ok(art)
}

/// Haar-averaged transfer fidelity at the readout time on a fixed pattern:
/// exact (deterministic engine, via tomography) or sampled (trajectories
/// with one Haar input each). Returns `[mean, stderr]`.
fn fixed_pattern_point(
    cfg: &ExperimentConfig,
    pattern: &CouplingPattern,
    nz: &NoiseConfig,
    engine: Engine,
) -> spinflux::Result<Vec<f64>> {
    match engine {
        Engine::Deterministic => {
            let plan = readout_plan(cfg, EngineMode::Deterministic)?;
            let r = process_average_curve(pattern, &Dynamics::Open { noise: nz, plan: &plan })?;
            Ok(vec![*r.fidelity.last().expect("grid"), 0.0])
        }
        Engine::Trajectories => {
            let plan = readout_plan(
                cfg,
                EngineMode::Trajectories {
                    runs: cfg.runs,
                    master_seed: derive_seed(cfg.seed, Stream::Trajectory, 0),
                },
            )?;
            let r = fixed_pattern_trajectories(pattern, &Protocol::TransferHaar, nz, &plan)?;
            Ok(vec![*r.fidelity.last().expect("grid"), *r.stderr.last().expect("grid")])
        }
    }
}

fn sweep_2d(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let real = fixed_realization(cfg)?;
    let pattern = &real.effective_pattern;
    let mut keys = Vec::new();
    let mut units = Vec::new();
    for (i, &g) in cfg.dephasing_values.iter().enumerate() {
        for (j, &d) in cfg.damping_values.iter().enumerate() {
            keys.push((g, d));
            let nz = noise(cfg, d, g);
            units.push(Unit::new(format!("point/{i}/{j}"), move || {
                fixed_pattern_point(cfg, pattern, &nz, cfg.engine)
            }));
        }
    }
    let vals = runner.run(units)?;
    let gs: Vec<f64> = keys.iter().map(|k| k.0).collect();
    let ds: Vec<f64> = keys.iter().map(|k| k.1).collect();
    let f = column(&vals, 0);
    let e = column(&vals, 1);
    let mut art = Artifacts::default();
    art.runs.push(realization_record("fixed realization", &real));
    let (kmax, fmax) = f.iter().enumerate().fold((0, f64::MIN), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
    let (kmin, fmin) = f.iter().enumerate().fold((0, f64::MAX), |b, (k, &v)| if v < b.1 { (k, v) } else { b });
    art.summary.push(format!(
        "N = {}, δ = {}, n̄ = {}, {:?} engine, fidelity at Jt = {:.6}",
        cfg.n_qubits, cfg.delta, cfg.nbar, cfg.engine, cfg.readout_time
    ));
    art.summary.push(format!("maximum {fmax:.6} at γ = {}, Γ = {}", gs[kmax], ds[kmax]));
    art.summary.push(format!("minimum {fmin:.6} at γ = {}, Γ = {}", gs[kmin], ds[kmin]));
    art.headlines.push(Headline::info("maximum fidelity over the grid", fmax, "surface"));
    art.headlines.push(Headline::info("minimum fidelity over the grid", fmin, "surface"));
    art.files.push((
        "sweep-2d.csv".into(),
        table_csv("dephasing_rate,damping_rate,fidelity,stderr", &[&gs, &ds, &f, &e]),
    ));
    Ok(art)
}

/// Interior points exceeding both neighbours by more than `z` combined
/// standard errors.
pub fn interior_maxima(values: &[f64], stderr: &[f64], z: f64) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&k| {
            let beats = |o: usize| {
                let s = (stderr[k].powi(2) + stderr[o].powi(2)).sqrt();
                values[k] - values[o] > z * s && values[k] > values[o]
            };
            beats(k - 1) && beats(k + 1)
        })
        .collect()
}

fn sweep_gamma_cut(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let real = fixed_realization(cfg)?;
    let pattern = &real.effective_pattern;
    let mut units = Vec::new();
    for engine in [Engine::Deterministic, Engine::Trajectories] {
        for (k, &d) in cfg.damping_values.iter().enumerate() {
            let nz = noise(cfg, d, cfg.dephasing_rate);
            let tag = if engine == Engine::Deterministic { "det" } else { "traj" };
            units.push(Unit::new(format!("{tag}/{k}"), move || {
                fixed_pattern_point(cfg, pattern, &nz, engine)
            }));
        }
    }
    let vals = runner.run(units)?;
    let n = cfg.damping_values.len();
    let det = column(&vals[..n], 0);
    let zero = vec![0.0; n];
    let traj = column(&vals[n..], 0);
    let traj_se = column(&vals[n..], 1);
    let mut art = Artifacts::default();
    art.runs.push(realization_record("fixed realization", &real));
    art.summary.push(format!(
        "N = {}, δ = {}, γ = {}, n̄ = {}, M = {} trajectories per point, fidelity at Jt = {:.6}",
        cfg.n_qubits, cfg.delta, cfg.dephasing_rate, cfg.nbar, cfg.runs, cfg.readout_time
    ));
    for (label, v, e) in [("deterministic", &det, &zero), ("trajectories", &traj, &traj_se)] {
        let peaks = interior_maxima(v, e, 2.0);
        let where_ = peaks
            .iter()
            .map(|&k| format!("Γ = {}", cfg.damping_values[k]))
            .collect::<Vec<_>>()
            .join(", ");
        art.summary.push(format!(
            "{label}: {}",
            if peaks.is_empty() {
                "no interior maximum beyond 2 standard errors".to_string()
            } else {
                format!("interior maximum at {where_}")
            }
        ));
        art.headlines.push(Headline::info(
            format!("{label}: interior maximum present (stochastic-resonance flag)"),
            if peaks.is_empty() { 0.0 } else { 1.0 },
            "reported",
        ));
    }
    let worst_se = traj_se.iter().copied().fold(0.0, f64::max);
    art.headlines.push(Headline::check(
        "largest trajectory standard error",
        worst_se,
        "< 0.003",
        worst_se < 0.003,
    ));
    let consistent = det
        .iter()
        .zip(&traj)
        .zip(&traj_se)
        .filter(|((a, b), s)| (*a - *b).abs() <= 3.0 * **s)
        .count() as f64
        / n as f64;
    art.headlines.push(Headline::info(
        "fraction of points where the engines agree within 3 stderr",
        consistent,
        "reported",
    ));
    art.files.push((
        "sweep-gamma-cut.csv".into(),
        table_csv(
            "damping_rate,deterministic,trajectories,trajectories_stderr",
            &[&cfg.damping_values, &det, &traj, &traj_se],
        ),
    ));
    Ok(art)
}

/// Mean and paired standard error of `a − b` over common members.
fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    linalg::mean_and_stderr(&d)
}

fn collective_scan(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let plan = readout_plan(cfg, mode(cfg, cfg.seed))?;
    let protocol = Protocol::fixed(&input_state(cfg)?);
    let specs: Vec<EnsembleSpec> = cfg
        .dephasing_values
        .iter()
        .map(|&g| EnsembleSpec {
            n_qubits: cfg.n_qubits,
            sign: cfg.sign,
            delta: cfg.delta,
            runs: cfg.runs,
            master_seed: cfg.seed,
            protocol: protocol.clone(),
            noise: Some(
                NoiseConfig::new(0.0, g, 0.0)
                    .with_topology(Topology::adjacent_pairs(cfg.n_qubits))
                    .with_schedule(cfg.schedule),
            ),
            times: Vec::new(),
            plan: Some(plan.clone()),
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let units: Vec<Unit<'_>> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| member_units(&format!("gamma/{i}"), s, last_point))
        .collect();
    let flat = runner.run(units)?;
    let per_gamma: Vec<Vec<f64>> = flat.chunks(cfg.runs).map(|c| column(c, 0)).collect();
    let (means, errs): (Vec<f64>, Vec<f64>) = per_gamma.iter().map(|v| linalg::mean_and_stderr(v)).unzip();
    let mut art = Artifacts {
        runs: member_records(&specs[0])?,
        ..Default::default()
    };
    art.summary.push(format!(
        "N = {}, δ = {}, collective baths on {:?}, M = {}, fidelity at Jt = {:.6}",
        cfg.n_qubits,
        cfg.delta,
        Topology::adjacent_pairs(cfg.n_qubits),
        cfg.runs,
        cfg.readout_time
    ));
    let mut monotone = true;
    let mut weakest = f64::INFINITY;
    for k in 0..means.len() {
        art.summary.push(format!(
            "γ = {:.2}: F = {:.6} ± {:.6}",
            cfg.dephasing_values[k], means[k], errs[k]
        ));
        if k + 1 < means.len() {
            let (d, se) = paired_difference(&per_gamma[k], &per_gamma[k + 1]);
            let z = if se > 0.0 { d / se } else if d > 0.0 { f64::INFINITY } else { 0.0 };
            weakest = weakest.min(z);
            monotone &= d > 2.0 * se && d > 0.0;
        }
    }
    art.headlines.push(Headline::check(
        "smallest step decrease in paired standard errors",
        weakest,
        "> 2 (strictly decreasing)",
        monotone,
    ));
    art.files.push((
        "collective-scan.csv".into(),
        table_csv("dephasing_rate,fidelity,stderr", &[&cfg.dephasing_values, &means, &errs]),
    ));
    Ok(art)
}

fn ghz(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let plan = full_plan(cfg, cfg.seed)?;
    let times = plan.times();
    let ideal = run_ghz(&ideal_pattern(cfg)?, &Dynamics::Unitary(&times))?;
    let spec = EnsembleSpec {
        n_qubits: cfg.n_qubits,
        sign: cfg.sign,
        delta: cfg.delta,
        runs: cfg.runs,
        master_seed: cfg.seed,
        protocol: Protocol::Ghz,
        noise: Some(noise(cfg, cfg.damping_rate, cfg.dephasing_rate)),
        times: Vec::new(),
        plan: Some(plan.clone()),
    };
    spec.validate()?;
    let per_run = runner.run(member_units("run", &spec, whole_curve))?;
    let avg = ensemble_curve(times.clone(), &per_run)?;
    let mut art = Artifacts {
        runs: member_records(&spec)?,
        ..Default::default()
    };
    art.summary.push(describe_peak(&format!("ideal GHZ generation, N = {}", cfg.n_qubits), &ideal));
    art.summary.push(describe_peak(
        &format!(
            "δ = {}, Γ = {}, γ = {}, n̄ = {}, M = {}",
            cfg.delta, cfg.damping_rate, cfg.dephasing_rate, cfg.nbar, cfg.runs
        ),
        &avg,
    ));
    art.headlines.push(Headline::check(
        "ideal peak global fidelity",
        ideal.peak_fidelity,
        "1 within 1e-9",
        ideal.peak_fidelity >= 1.0 - 1e-9,
    ));
    art.headlines.push(Headline::check(
        "ideal peak time",
        ideal.peak_time,
        "grid point nearest the readout time",
        near_readout(&times, ideal.peak_time, cfg),
    ));
    art.headlines.push(Headline::check(
        "noisy average peak global fidelity",
        avg.peak_fidelity,
        ">= 0.85 (reference > 0.88)",
        avg.peak_fidelity >= 0.85,
    ));
    art.files.push((
        "ghz.csv".into(),
        table_csv("Jt,ideal,fidelity,stderr", &[&times, &ideal.fidelity, &avg.fidelity, &avg.stderr]),
    ));
    Ok(art)
}

fn qpt_report(cfg: &ExperimentConfig, runner: &mut Runner) -> CliResult<Artifacts> {
    let ideal = ideal_pattern(cfg)?;
    let t = cfg.readout_time;
    let closed = |pattern: CouplingPattern| -> spinflux::Result<ProcessMatrix> {
        qpt::reconstruct_chi(&qpt::sample_channel(&TransferPipeline {
            pattern,
            noise: None,
            readout_time: t,
            n_steps: 1,
        })?)
    };
    let chi_id = closed(ideal.clone())?;
    let id_dev = linalg::max_abs_diff(&chi_id.chi, &ProcessMatrix::identity().chi);

    let realization = |m: usize| sample_disorder(&ideal, cfg.delta, derive_seed(cfg.seed, Stream::Disorder, m as u64));
    let units: Vec<Unit<'_>> = (0..cfg.runs)
        .map(|m| {
            let closed = &closed;
            Unit::new(format!("closed/{m}"), move || Ok(chi_values(&closed(realization(m)?.effective_pattern)?)))
        })
        .collect();
    let chis = runner
        .run(units)?
        .iter()
        .map(|v| chi_from_values(v))
        .collect::<spinflux::Result<Vec<_>>>()?;
    let favg: Vec<f64> = chis
        .iter()
        .map(|c| qpt::average_fidelity_from_process(qpt::process_fidelity(&ProcessMatrix::identity(), c)))
        .collect();
    let (worst, f_worst) = favg
        .iter()
        .enumerate()
        .fold((0, f64::MAX), |b, (k, &v)| if v < b.1 { (k, v) } else { b });
    let (f_mean, f_se) = linalg::mean_and_stderr(&favg);
    let chi_worst = &chis[worst];

    let mut art = Artifacts {
        runs: (0..cfg.runs)
            .map(|m| Ok(realization_record(&format!("realization {m}"), &realization(m)?)))
            .collect::<spinflux::Result<_>>()?,
        ..Default::default()
    };
    art.summary.push(format!(
        "closed-system channel at Jt = {t:.6}, N = {}, δ = {}, {} realizations",
        cfg.n_qubits, cfg.delta, cfg.runs
    ));
    art.summary.push(format!("mean process-average fidelity {f_mean:.6} ± {f_se:.6}"));
    art.summary.push(format!(
        "worst realization {worst}: F_p = {:.6}, average fidelity {f_worst:.6}",
        qpt::process_fidelity(&ProcessMatrix::identity(), chi_worst)
    ));
    art.summary.push(affine_summary("worst realization", chi_worst));
    let (kraus, clipped) = qpt::kraus_from_chi(chi_worst)?;
    art.summary.push(format!(
        "worst realization: {} Kraus operators, clipped eigenvalue mass {clipped:.2e}",
        kraus.operators().len()
    ));
    for (k, op) in kraus.operators().iter().enumerate() {
        art.summary.push(format!(
            "  K{k} = [[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            op[(0, 0)],
            op[(0, 1)],
            op[(1, 0)],
            op[(1, 1)]
        ));
    }
    art.headlines.push(Headline::check(
        "ideal channel: max |χ - diag(1,0,0,0)|",
        id_dev,
        "<= 1e-9",
        id_dev <= 1e-9,
    ));
    let printed = ProcessMatrix::from_real_diagonal([PRINTED_CHI_CORNER, 0.0, 0.0, 0.0]);
    let fp_printed = qpt::process_fidelity(&ProcessMatrix::identity(), &printed);
    art.headlines.push(Headline::check(
        "F_p against the printed corner entry",
        fp_printed,
        "0.987",
        (fp_printed - PRINTED_CHI_CORNER).abs() < 1e-12,
    ));
    art.headlines.push(Headline::info("mean process-average fidelity", f_mean, "0.995 reference"));
    art.headlines.push(Headline::info("worst process-average fidelity", f_worst, "0.991 reference"));

    // noisy channel of realization 0, both rate assignments
    let mut noisy_units = Vec::new();
    for (label, damping, dephasing) in noise_variants(cfg) {
        let nz = noise(cfg, damping, dephasing);
        let realization = &realization;
        noisy_units.push(Unit::new(format!("noisy/{label}"), move || {
            let chi = qpt::reconstruct_chi(&qpt::sample_channel(&TransferPipeline {
                pattern: realization(0)?.effective_pattern,
                noise: Some(nz.clone()),
                readout_time: t,
                n_steps: cfg.readout_steps(),
            })?)?;
            Ok(chi_values(&chi))
        }));
    }
    let noisy = runner.run(noisy_units)?;
    for ((label, damping, dephasing), v) in noise_variants(cfg).into_iter().zip(&noisy) {
        let chi = chi_from_values(v)?;
        let f = qpt::average_fidelity_from_process(qpt::process_fidelity(&ProcessMatrix::identity(), &chi));
        art.summary.push(format!(
            "noisy channel ({label}: Γ = {damping}, γ = {dephasing}): average fidelity {f:.6}, min χ eigenvalue {:.2e}",
            chi.min_eigenvalue()
        ));
        art.summary.push(affine_summary(&format!("noisy channel ({label})"), &chi));
        art.headlines.push(Headline::check(
            format!("{label}: noisy process-average fidelity"),
            f,
            "0.959 ± 0.02",
            (f - NOISY_PROCESS_REFERENCE).abs() <= 0.02,
        ));
        art.files.push((format!("chi-noisy-{label}.json"), chi_json(&chi)));
    }

    let grid = qpt::sphere_grid(9, 16);
    let image = qpt::bloch_image(chi_worst, &grid)?;
    art.files.insert(0, ("qpt-report.csv".into(), qpt::bloch_image_csv(&grid, &image)));
    art.files.push(("chi-ideal.json".into(), chi_json(&chi_id)));
    art.files.push(("chi-worst.json".into(), chi_json(chi_worst)));
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinflux::qpt::ChannelSample;

    fn small(e: ExperimentId) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(e);
        c.n_qubits = c.n_qubits.min(4);
        c.runs = c.runs.min(6);
        c.points = 41;
        c.n_steps = 64;
        c
    }

    #[test]
    fn interior_maxima_need_significance() {
        assert_eq!(interior_maxima(&[0.1, 0.5, 0.2], &[0.0; 3], 2.0), vec![1]);
        assert!(interior_maxima(&[0.1, 0.5, 0.2], &[0.2; 3], 2.0).is_empty());
        assert!(interior_maxima(&[0.3, 0.2, 0.1], &[0.0; 3], 2.0).is_empty());
        assert!(interior_maxima(&[0.3], &[0.0], 2.0).is_empty());
    }

    #[test]
    fn csv_layout() {
        let s = table_csv("a,b", &[&[1.0, 0.1], &[2.5, 1e-20]]);
        assert_eq!(s, "a,b\n1,2.5\n0.1,0.00000000000000000001\n");
        let back: f64 = "0.1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn ideal_transfer_small() {
        let art = run(&small(ExperimentId::TransferIdeal), &mut Runner::in_memory()).unwrap();
        assert!(art.headlines.iter().all(|h| h.pass == Some(true)), "{:?}", art.headlines);
        assert!(art.file("transfer-ideal.csv").unwrap().starts_with("Jt,fidelity,stderr\n"));
    }

    #[test]
    fn chi_value_round_trip() {
        let chi = qpt::reconstruct_chi(
            &ChannelSample::from_map(|r| {
                let k = spinflux::noise::amplitude_damping_kraus(1.0, 0.3, 0.2)?;
                Ok(k.act(r.matrix()))
            })
            .unwrap(),
        )
        .unwrap();
        assert_eq!(chi_from_values(&chi_values(&chi)).unwrap(), chi);
    }

    #[test]
    fn every_experiment_runs_small() {
        for e in ExperimentId::ALL {
            let mut c = small(e);
            if e == ExperimentId::SweepGammaCut || e == ExperimentId::Sweep2d {
                c.damping_values = vec![0.0, 0.5];
                c.dephasing_values = vec![0.2, 0.4];
            }
            if e == ExperimentId::FluxDemo {
                c.n_qubits = 3;
            }
            let art = run(&c, &mut Runner::in_memory()).unwrap();
            assert!(!art.files.is_empty(), "{e}");
            assert!(art.files[0].0.starts_with(e.name()), "{e}: {}", art.files[0].0);
            assert!(!art.headlines.is_empty(), "{e}");
        }
    }
}
