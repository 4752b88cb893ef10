//! Experiment configuration: per-experiment defaults, a partial JSON file
//! layered on top, then command-line overrides.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinflux::hamiltonian::Sign;
use spinflux::noise::Schedule;

use crate::error::{CliError, CliResult};

/// Largest chain evolved as a full density matrix.
pub const MAX_OPEN_QUBITS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    FluxDemo,
    TransferIdeal,
    TransferDisorder,
    TransferNoise,
    #[serde(rename = "sweep-2d")]
    #[value(name = "sweep-2d")]
    Sweep2d,
    SweepGammaCut,
    CollectiveScan,
    Ghz,
    QptReport,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        ExperimentId::FluxDemo,
        ExperimentId::TransferIdeal,
        ExperimentId::TransferDisorder,
        ExperimentId::TransferNoise,
        ExperimentId::Sweep2d,
        ExperimentId::SweepGammaCut,
        ExperimentId::CollectiveScan,
        ExperimentId::Ghz,
        ExperimentId::QptReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::FluxDemo => "flux-demo",
            ExperimentId::TransferIdeal => "transfer-ideal",
            ExperimentId::TransferDisorder => "transfer-disorder",
            ExperimentId::TransferNoise => "transfer-noise",
            ExperimentId::Sweep2d => "sweep-2d",
            ExperimentId::SweepGammaCut => "sweep-gamma-cut",
            ExperimentId::CollectiveScan => "collective-scan",
            ExperimentId::Ghz => "ghz",
            ExperimentId::QptReport => "qpt-report",
        }
    }

    /// Whether the experiment evolves density matrices.
    pub fn is_open(self) -> bool {
        !matches!(
            self,
            ExperimentId::FluxDemo | ExperimentId::TransferIdeal | ExperimentId::TransferDisorder
        )
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Deterministic,
    Trajectories,
}

/// Fully resolved parameters of one experiment. Rates are in units of `J`,
/// times in units of `1/J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub n_qubits: usize,
    /// Static-disorder strength δ.
    pub delta: f64,
    /// Amplitude-damping rate Γ.
    pub damping_rate: f64,
    /// Dephasing rate γ.
    pub dephasing_rate: f64,
    pub nbar: f64,
    /// Ensemble size M (realizations, or trajectories per point for the
    /// fixed-realization sweeps).
    pub runs: usize,
    /// End of the time window.
    pub total_time: f64,
    /// Grid points for closed evolution on `[0, total_time]`.
    pub points: usize,
    /// Open-evolution steps over `total_time`.
    pub n_steps: usize,
    /// Time at which single-time quantities (sweeps, tomography) are read.
    pub readout_time: f64,
    pub engine: Engine,
    pub schedule: Schedule,
    pub seed: u64,
    pub sign: Sign,
    /// Logical input `[re α, im α, re β, im β]` where a fixed input is used.
    pub input: [f64; 4],
    /// Disorder strengths for the classical-threshold scan.
    pub delta_values: Vec<f64>,
    pub dephasing_values: Vec<f64>,
    pub damping_values: Vec<f64>,
    pub out: PathBuf,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect()
}

impl ExperimentConfig {
    /// Operating point of each experiment.
    pub fn defaults(experiment: ExperimentId) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = Self {
            experiment,
            n_qubits: 7,
            delta: 0.0,
            damping_rate: 0.0,
            dephasing_rate: 0.0,
            nbar: 0.0,
            runs: 1,
            total_time: FRAC_PI_2,
            points: spinflux::grid::DEFAULT_POINTS,
            n_steps: spinflux::noise::EvolutionPlan::DEFAULT_STEPS,
            readout_time: FRAC_PI_4,
            engine: Engine::Deterministic,
            schedule: Schedule::RandomUnit,
            seed: 2024,
            sign: Sign::Plus,
            // |−⟩
            input: [h, 0.0, -h, 0.0],
            delta_values: Vec::new(),
            dephasing_values: Vec::new(),
            damping_values: Vec::new(),
            out: PathBuf::from("results").join(experiment.name()),
        };
        match experiment {
            ExperimentId::FluxDemo | ExperimentId::TransferIdeal => {}
            ExperimentId::TransferDisorder => {
                c.delta = 0.05;
                c.runs = 200;
                c.delta_values = steps(0.05, 0.35, 0.05);
            }
            ExperimentId::TransferNoise => {
                // caption assignment; the text assignment swaps the two rates
                c.delta = 0.05;
                c.damping_rate = 0.5;
                c.dephasing_rate = 0.2;
                c.nbar = 0.01;
                c.runs = 200;
            }
            ExperimentId::Sweep2d => {
                c.n_qubits = 6;
                c.delta = 0.05;
                c.nbar = 0.01;
                c.runs = 400;
                c.dephasing_values = steps(0.0, 1.0, 0.1);
                c.damping_values = steps(0.0, 1.0, 0.1);
            }
            ExperimentId::SweepGammaCut => {
                c.n_qubits = 6;
                c.delta = 0.05;
                c.dephasing_rate = 0.2;
                c.nbar = 0.01;
                c.runs = 4000;
                c.damping_values = steps(0.0, 1.0, 0.1);
            }
            ExperimentId::CollectiveScan => {
                c.n_qubits = 6;
                c.delta = 0.05;
                c.runs = 200;
                c.dephasing_values = steps(0.0, 1.0, 0.2);
            }
            ExperimentId::Ghz => {
                c.delta = 0.05;
                c.damping_rate = 0.2;
                c.dephasing_rate = 0.5;
                c.nbar = 0.01;
                c.runs = 200;
            }
            ExperimentId::QptReport => {
                // same rate convention as transfer-noise
                c.delta = 0.05;
                c.damping_rate = 0.5;
                c.dephasing_rate = 0.2;
                c.nbar = 0.01;
                c.runs = 200;
            }
        }
        c
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let min_n = if self.experiment == ExperimentId::Ghz { 1 } else { 2 };
        if self.n_qubits < min_n {
            return bad(format!("n_qubits must be >= {min_n} for {}", self.experiment));
        }
        if self.experiment.is_open() && self.n_qubits > MAX_OPEN_QUBITS {
            return Err(CliError::Resource(format!(
                "{} evolves a {}-qubit density matrix; at most {MAX_OPEN_QUBITS} qubits are supported",
                self.experiment, self.n_qubits
            )));
        }
        if self.n_qubits > spinflux::qstate::MAX_DENSE_QUBITS {
            return Err(CliError::Resource(format!(
                "at most {} qubits are supported",
                spinflux::qstate::MAX_DENSE_QUBITS
            )));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("damping_rate", self.damping_rate),
            ("dephasing_rate", self.dephasing_rate),
            ("nbar", self.nbar),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, list) in [
            ("delta_values", &self.delta_values),
            ("dephasing_values", &self.dephasing_values),
            ("damping_values", &self.damping_values),
        ] {
            if let Some(v) = list.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return bad(format!("{name} entries must be finite and >= 0, got {v}"));
            }
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return bad(format!("total_time must be positive, got {}", self.total_time));
        }
        if self.points < 2 {
            return bad("points must be >= 2".into());
        }
        if self.n_steps == 0 {
            return bad("n_steps must be >= 1".into());
        }
        if !(self.readout_time > 0.0 && self.readout_time <= self.total_time) {
            return bad(format!(
                "readout_time must lie in (0, total_time], got {}",
                self.readout_time
            ));
        }
        let norm: f64 = self.input.iter().map(|x| x * x).sum();
        if !(norm.is_finite() && norm > 1e-12) {
            return bad("input must be a nonzero amplitude vector".into());
        }
        let need = |list: &Vec<f64>, name: &str, exp: ExperimentId| {
            if self.experiment == exp && list.is_empty() {
                Err(CliError::Config(format!("{name} must not be empty for {exp}")))
            } else {
                Ok(())
            }
        };
        need(&self.delta_values, "delta_values", ExperimentId::TransferDisorder)?;
        need(&self.dephasing_values, "dephasing_values", ExperimentId::Sweep2d)?;
        need(&self.damping_values, "damping_values", ExperimentId::Sweep2d)?;
        need(&self.damping_values, "damping_values", ExperimentId::SweepGammaCut)?;
        need(&self.dephasing_values, "dephasing_values", ExperimentId::CollectiveScan)?;
        Ok(())
    }

    /// Open-evolution steps from `t = 0` to the readout time (same `Δt` as
    /// the full window).
    pub fn readout_steps(&self) -> usize {
        ((self.readout_time / self.total_time) * self.n_steps as f64).round().max(1.0) as usize
    }

    /// SHA-256 over the canonical JSON of every field except the output
    /// directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Short token naming a partially completed run.
    pub fn resume_token(&self) -> String {
        self.digest()[..16].to_string()
    }
}

/// A configuration file: any subset of the fields.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentId>,
    pub n_qubits: Option<usize>,
    pub delta: Option<f64>,
    pub damping_rate: Option<f64>,
    pub dephasing_rate: Option<f64>,
    pub nbar: Option<f64>,
    pub runs: Option<usize>,
    pub total_time: Option<f64>,
    pub points: Option<usize>,
    pub n_steps: Option<usize>,
    pub readout_time: Option<f64>,
    pub engine: Option<Engine>,
    pub schedule: Option<Schedule>,
    pub seed: Option<u64>,
    pub sign: Option<Sign>,
    pub input: Option<[f64; 4]>,
    pub delta_values: Option<Vec<f64>>,
    pub dephasing_values: Option<Vec<f64>>,
    pub damping_values: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn apply(self, c: &mut ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            n_qubits, delta, damping_rate, dephasing_rate, nbar, runs, total_time, points, n_steps,
            readout_time, engine, schedule, seed, sign, input, delta_values, dephasing_values,
            damping_values, out
        );
    }
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub engine: Option<Engine>,
}

/// Defaults → file → flags.
pub fn resolve(
    experiment: ExperimentId,
    file: Option<ConfigFile>,
    flags: &Overrides,
) -> CliResult<ExperimentConfig> {
    let mut c = ExperimentConfig::defaults(experiment);
    if let Some(f) = file {
        if let Some(e) = f.experiment {
            if e != experiment {
                return Err(CliError::Config(format!(
                    "config file is for {e}, but {experiment} was requested"
                )));
            }
        }
        f.apply(&mut c);
    }
    if let Some(s) = flags.seed {
        c.seed = s;
    }
    if let Some(o) = &flags.out {
        c.out = o.clone();
    }
    if let Some(e) = flags.engine {
        c.engine = e;
    }
    c.validate()?;
    Ok(c)
}
