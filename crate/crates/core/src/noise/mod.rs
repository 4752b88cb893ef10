//! Static disorder, Kraus channels and the open-system engines.

mod config;
mod disorder;
mod engine;
mod kraus;

pub use config::{ChannelKind, EngineMode, EvolutionPlan, NoiseConfig, Schedule, Topology};
pub use disorder::{sample_disorder, DisorderRealization};
pub use engine::{
    curve_statistics, evolve_open_deterministic, evolve_open_trajectories,
    run_trajectory_ensemble, DeterministicRun, OpenSystem, TrajectoryEnsemble, TRAJECTORY_BATCH,
};
pub use kraus::{
    amplitude_damping_kraus, apply_channel, collective_dephasing_kraus, phase_damping_kraus,
    thermal_p, KrausSet,
};
