use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::kraus::{
    amplitude_damping_kraus, collective_dephasing_kraus, phase_damping_kraus, thermal_p,
    LocalChannel,
};
use crate::error::{invalid, Result};
use crate::qstate::LocalIndexer;

/// Which sites share a dephasing bath.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Every spin has its own dephasing bath.
    #[default]
    Individual,
    /// Each listed pair shares one bath (collective two-qubit dephasing).
    CollectivePairs(Vec<(usize, usize)>),
}

impl Topology {
    /// `(1,2), (3,4), …`; a trailing odd site is left without a bath.
    pub fn adjacent_pairs(n_qubits: usize) -> Self {
        Topology::CollectivePairs((1..n_qubits).step_by(2).map(|i| (i, i + 1)).collect())
    }
}

/// How channels are interleaved with the unitary steps.
///
/// `RandomUnit`: after each step one of the two channel families (damping,
/// dephasing) is drawn uniformly, then one site (or pair) uniformly within
/// it, and only that channel acts for `Δt`. A family with zero rate is still
/// drawn and acts as the identity, so the averaged map is continuous as any
/// rate goes to zero. The deterministic engine applies the exact average of
/// this draw. `AllUnits`: every active channel acts on every
/// site (or pair) after each step, amplitude damping first, ascending sites.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    #[default]
    RandomUnit,
    AllUnits,
}

/// Markovian noise acting on the chain. Rates are in units of `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Amplitude-damping rate Γ.
    pub damping_rate: f64,
    /// Dephasing rate γ.
    pub dephasing_rate: f64,
    /// Mean bath excitation number n̄.
    pub nbar: f64,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub schedule: Schedule,
}

impl NoiseConfig {
    pub fn new(damping_rate: f64, dephasing_rate: f64, nbar: f64) -> Self {
        Self {
            damping_rate,
            dephasing_rate,
            nbar,
            topology: Topology::Individual,
            schedule: Schedule::RandomUnit,
        }
    }

    pub fn noiseless() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// Thermal weight `p = (n̄+1)/(2n̄+1)`.
    pub fn p(&self) -> f64 {
        thermal_p(self.nbar)
    }

    pub fn is_noiseless(&self) -> bool {
        self.damping_rate == 0.0 && self.dephasing_rate == 0.0
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for (name, v) in [
            ("damping_rate", self.damping_rate),
            ("dephasing_rate", self.dephasing_rate),
            ("nbar", self.nbar),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let Topology::CollectivePairs(pairs) = &self.topology {
            let mut seen = vec![false; n_qubits + 1];
            for &(a, b) in pairs {
                for s in [a, b] {
                    if s == 0 || s > n_qubits || seen[s] {
                        return Err(invalid(
                            "topology",
                            format!("pairs {pairs:?} are not disjoint sites in 1..={n_qubits}"),
                        ));
                    }
                    seen[s] = true;
                }
            }
        }
        Ok(())
    }

    /// Active channel groups for a step of length `dt`, in application order.
    pub(crate) fn channel_groups(&self, n_qubits: usize, dt: f64) -> Result<Vec<ChannelGroup>> {
        self.validate(n_qubits)?;
        let mut groups = Vec::new();
        let singles = |k: &super::kraus::KrausSet| -> Result<Vec<LocalChannel>> {
            (1..=n_qubits)
                .map(|s| Ok(LocalChannel::new(k, LocalIndexer::new(&[s], n_qubits)?)))
                .collect()
        };
        if self.damping_rate > 0.0 {
            let k = amplitude_damping_kraus(self.damping_rate, dt, self.nbar)?;
            groups.push(ChannelGroup {
                kind: ChannelKind::AmplitudeDamping,
                units: singles(&k)?,
            });
        }
        if self.dephasing_rate > 0.0 {
            match &self.topology {
                Topology::Individual => {
                    let k = phase_damping_kraus(self.dephasing_rate, dt)?;
                    groups.push(ChannelGroup {
                        kind: ChannelKind::Dephasing,
                        units: singles(&k)?,
                    });
                }
                Topology::CollectivePairs(pairs) if !pairs.is_empty() => {
                    let k = collective_dephasing_kraus(self.dephasing_rate, dt)?;
                    let units = pairs
                        .iter()
                        .map(|&(a, b)| Ok(LocalChannel::new(&k, LocalIndexer::new(&[a, b], n_qubits)?)))
                        .collect::<Result<_>>()?;
                    groups.push(ChannelGroup {
                        kind: ChannelKind::CollectiveDephasing,
                        units,
                    });
                }
                Topology::CollectivePairs(_) => {}
            }
        }
        Ok(groups)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    AmplitudeDamping,
    Dephasing,
    CollectiveDephasing,
}

/// Families the random-unit schedule draws from: damping and dephasing.
pub(crate) const FAMILIES: usize = 2;

impl ChannelKind {
    /// Index of the family this kind belongs to.
    pub(crate) fn family(self) -> usize {
        match self {
            ChannelKind::AmplitudeDamping => 0,
            ChannelKind::Dephasing | ChannelKind::CollectiveDephasing => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ChannelGroup {
    pub kind: ChannelKind,
    pub units: Vec<LocalChannel>,
}

/// Which open-system engine produces the ensemble.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineMode {
    /// Exact channel composition on the density matrix.
    Deterministic,
    /// Monte Carlo unraveling into `runs` pure-state trajectories.
    Trajectories { runs: usize, master_seed: u64 },
}

/// Fixed-step time discretization of an open evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub total_time: f64,
    pub n_steps: usize,
    pub mode: EngineMode,
}

impl EvolutionPlan {
    pub const DEFAULT_STEPS: usize = 256;

    pub fn new(total_time: f64, n_steps: usize, mode: EngineMode) -> Result<Self> {
        let plan = Self {
            total_time,
            n_steps,
            mode,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `Jt ∈ [0, π/2]` in 256 steps; step 128 lands on `π/4`.
    pub fn default_with(mode: EngineMode) -> Self {
        Self {
            total_time: FRAC_PI_2,
            n_steps: Self::DEFAULT_STEPS,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(invalid("total_time", "must be finite and >= 0"));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be >= 1"));
        }
        if let EngineMode::Trajectories { runs: 0, .. } = self.mode {
            return Err(invalid("runs", "must be >= 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.n_steps as f64
    }

    /// `n_steps + 1` sample times including `t = 0`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_and_defaults() {
        let c = NoiseConfig::new(0.2, 0.5, 0.01);
        assert!((c.p() - 1.01 / 1.02).abs() < 1e-15);
        assert_eq!(c.schedule, Schedule::RandomUnit);
        assert!(NoiseConfig::noiseless().is_noiseless());
        assert!(NoiseConfig::new(0.0, 0.0, 5.0).p() > 0.5);
    }

    #[test]
    fn validation() {
        assert!(NoiseConfig::new(-0.1, 0.0, 0.0).validate(3).is_err());
        assert!(NoiseConfig::new(0.1, 0.0, f64::INFINITY).validate(3).is_err());
        let bad = NoiseConfig::new(0.0, 1.0, 0.0).with_topology(Topology::CollectivePairs(vec![(1, 2), (2, 3)]));
        assert!(bad.validate(4).is_err());
        let out = NoiseConfig::new(0.0, 1.0, 0.0).with_topology(Topology::CollectivePairs(vec![(1, 5)]));
        assert!(out.validate(4).is_err());
        let ok = NoiseConfig::new(0.0, 1.0, 0.0).with_topology(Topology::adjacent_pairs(6));
        assert!(ok.validate(6).is_ok());
        assert_eq!(Topology::adjacent_pairs(6), Topology::CollectivePairs(vec![(1, 2), (3, 4), (5, 6)]));
        assert_eq!(Topology::adjacent_pairs(5), Topology::CollectivePairs(vec![(1, 2), (3, 4)]));
    }

    #[test]
    fn groups_follow_active_rates() {
        let g = NoiseConfig::new(0.5, 0.2, 0.01).channel_groups(4, 0.01).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].kind, ChannelKind::AmplitudeDamping);
        assert_eq!(g[1].units.len(), 4);
        let c = NoiseConfig::new(0.0, 0.2, 0.0)
            .with_topology(Topology::adjacent_pairs(6))
            .channel_groups(6, 0.01)
            .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, ChannelKind::CollectiveDephasing);
        assert_eq!(c[0].units.len(), 3);
        assert!(NoiseConfig::noiseless().channel_groups(3, 0.1).unwrap().is_empty());
    }

    #[test]
    fn plan_grid() {
        let p = EvolutionPlan::default_with(EngineMode::Deterministic);
        let t = p.times();
        assert_eq!(t.len(), 257);
        assert!((t[128] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(EvolutionPlan::new(1.0, 0, EngineMode::Deterministic).is_err());
        assert!(EvolutionPlan::new(1.0, 4, EngineMode::Trajectories { runs: 0, master_seed: 1 }).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let c = NoiseConfig::new(0.2, 0.5, 0.01).with_topology(Topology::adjacent_pairs(4));
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<NoiseConfig>(&s).unwrap(), c);
        let p = EvolutionPlan::default_with(EngineMode::Trajectories { runs: 10, master_seed: 3 });
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<EvolutionPlan>(&s).unwrap(), p);
    }
}
