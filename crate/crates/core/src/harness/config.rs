//! Experiment configuration, read from TOML.
//!
//! Player indices in the file are 1-based (`target_player = 1` is the first
//! player, `center = 3` the third); everything past [`ExperimentConfig::build`]
//! is 0-based.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqn::{ActionSpace, DqnHyperParams};
use crate::dynamics::{HkbParams, Integrator, StepConfig};
use crate::ensemble::{Topology, TopologyKind};
use crate::error::{Error, Result};
use crate::virtual_player::{leader_follower_mix, ControlBounds, SignatureChain, VpControlParams, VpRole};

/// Smallest accepted trial length, in observations.
pub const MIN_TRIAL_LENGTH: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_players: usize,
    /// 1-based.
    pub target_player: usize,
    pub trial_count: usize,
    /// Observations per training trial.
    pub trial_length: usize,
    pub dt: f64,
    pub integrator: Integrator,
    /// Seconds discarded before computing per-trial metrics.
    pub transient: f64,
    /// Initial positions are drawn from `[−init_spread, init_spread]`.
    pub init_spread: f64,
    pub topology: TopologySection,
    pub hkb: HkbParams,
    pub vp: VpSection,
    /// One chain per player. Empty selects [`default_chains`].
    pub chains: Vec<SignatureChain>,
    pub dqn: DqnHyperParams,
    pub cp: CpSection,
    pub simulation: SimulationSection,
    pub validation: ValidationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyKind,
    /// Star center, 1-based. Ignored by the other graphs.
    pub center: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VpSection {
    pub theta_p: f64,
    pub theta_sigma: f64,
    pub theta_v: f64,
    pub eta: f64,
    pub horizon: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Optional per-player role presets overriding the weights above.
    pub roles: Vec<VpRole>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpSection {
    pub actions: usize,
    pub max_acceleration: f64,
    pub hidden: Vec<usize>,
    /// During training, the cyber player is put back onto the target's
    /// state when it strays further than this from it. `inf` disables.
    pub reset_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub trials: usize,
    /// Seconds.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    pub trials: usize,
    /// Seconds.
    pub duration: f64,
    /// Largest shift searched by the time-lag estimate, seconds.
    pub max_lag: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_players: 4,
            target_player: 1,
            trial_count: 300,
            trial_length: 500,
            dt: 0.03,
            integrator: Integrator::Rk4,
            transient: 2.0,
            init_spread: 0.5,
            topology: TopologySection::default(),
            hkb: HkbParams::default(),
            vp: VpSection::default(),
            chains: Vec::new(),
            dqn: DqnHyperParams::default(),
            cp: CpSection::default(),
            simulation: SimulationSection::default(),
            validation: ValidationSection::default(),
        }
    }
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            kind: TopologyKind::Complete,
            center: 3,
        }
    }
}

impl Default for VpSection {
    fn default() -> Self {
        let p = VpControlParams::default();
        let b = ControlBounds::default();
        Self {
            theta_p: p.theta_p(),
            theta_sigma: p.theta_sigma(),
            theta_v: p.theta_v(),
            eta: p.eta(),
            horizon: p.horizon(),
            u_min: b.u_min(),
            u_max: b.u_max(),
            roles: Vec::new(),
        }
    }
}

impl Default for CpSection {
    fn default() -> Self {
        Self {
            actions: 9,
            max_acceleration: 4.0,
            hidden: vec![64, 32],
            reset_distance: 1.5,
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            trials: 1,
            duration: 60.0,
        }
    }
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            trials: 20,
            duration: 60.0,
            max_lag: 1.0,
        }
    }
}

/// Chains used when the configuration lists none: the same alternating
/// signature for every player, with dwell times spread over 0.6–1.2 s so the
/// players do not share a rhythm.
pub fn default_chains(n: usize) -> Result<Vec<SignatureChain>> {
    (0..n)
        .map(|k| {
            let frac = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.5 };
            // rounded so the dwell times read cleanly in config snapshots
            SignatureChain::default_with_dwell(((0.6 + 0.6 * frac) * 1000.0).round() / 1000.0)
        })
        .collect()
}

/// Validated, 0-based view of an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub topology: Topology,
    pub target: usize,
    pub hkb: HkbParams,
    pub step: StepConfig,
    pub vp_params: Vec<VpControlParams>,
    pub bounds: ControlBounds,
    pub chains: Vec<SignatureChain>,
    pub actions: ActionSpace,
    pub layer_sizes: Vec<usize>,
}

impl Setup {
    pub fn n_players(&self) -> usize {
        self.topology.n()
    }

    pub fn dt(&self) -> f64 {
        self.step.dt()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Samples per training trial, each one environment step.
    pub fn planned_steps(&self) -> u64 {
        (self.trial_count * self.trial_length) as u64
    }

    /// Star center as a 0-based node index.
    pub fn center_index(&self) -> Result<usize> {
        if self.topology.center == 0 || self.topology.center > self.n_players {
            return Err(Error::Config(format!(
                "topology.center = {} is outside 1..={}",
                self.topology.center, self.n_players
            )));
        }
        Ok(self.topology.center - 1)
    }

    pub fn topology_for(&self, kind: TopologyKind) -> Result<Topology> {
        let center = match kind {
            TopologyKind::Star => Some(self.center_index()?),
            _ => None,
        };
        Topology::new(kind, self.n_players, center)
    }

    /// Checks every invariant and converts to 0-based indices.
    pub fn build(&self) -> Result<Setup> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.n_players < 2 {
            return cfg_err(format!("n_players = {} but every player needs a neighbor", self.n_players));
        }
        if self.target_player == 0 || self.target_player > self.n_players {
            return cfg_err(format!(
                "target_player = {} is outside 1..={}",
                self.target_player, self.n_players
            ));
        }
        if self.trial_length < MIN_TRIAL_LENGTH {
            return cfg_err(format!("trial_length = {} is below {MIN_TRIAL_LENGTH}", self.trial_length));
        }
        if self.trial_count == 0 {
            return cfg_err("trial_count must be positive".into());
        }
        if !(self.transient.is_finite() && self.transient >= 0.0) {
            return cfg_err(format!("transient = {} must be non-negative", self.transient));
        }
        if !(self.init_spread.is_finite() && self.init_spread >= 0.0) {
            return cfg_err(format!("init_spread = {} must be non-negative", self.init_spread));
        }
        for (name, trials, duration) in [
            ("simulation", self.simulation.trials, self.simulation.duration),
            ("validation", self.validation.trials, self.validation.duration),
        ] {
            if trials == 0 {
                return cfg_err(format!("{name}.trials must be positive"));
            }
            if !(duration.is_finite() && duration > self.transient) {
                return cfg_err(format!("{name}.duration must exceed the transient"));
            }
        }
        if !(self.validation.max_lag.is_finite() && self.validation.max_lag >= 0.0) {
            return cfg_err("validation.max_lag must be non-negative".into());
        }
        if !(self.cp.reset_distance > 0.0) {
            return cfg_err(format!("cp.reset_distance = {} must be positive", self.cp.reset_distance));
        }
        self.dqn.validate()?;
        let step = StepConfig::new(self.dt, self.integrator)?;
        let topology = self.topology_for(self.topology.kind)?;

        let base = VpControlParams::new(
            self.vp.theta_p,
            self.vp.theta_sigma,
            self.vp.theta_v,
            self.vp.eta,
            self.vp.horizon,
        )?;
        let vp_params = match self.vp.roles.len() {
            0 => vec![base; self.n_players],
            n if n == self.n_players => self.vp.roles.iter().map(|&r| leader_follower_mix(&base, r)).collect(),
            n => return cfg_err(format!("vp.roles lists {n} players, expected {}", self.n_players)),
        };
        let bounds = ControlBounds::new(self.vp.u_min, self.vp.u_max)?;
        let chains = match self.chains.len() {
            0 => default_chains(self.n_players)?,
            n if n == self.n_players => self.chains.clone(),
            n => return cfg_err(format!("{n} signature chains for {} players", self.n_players)),
        };

        let actions = ActionSpace::uniform(self.cp.actions, self.cp.max_acceleration)?;
        let mut layer_sizes = vec![4];
        layer_sizes.extend(&self.cp.hidden);
        layer_sizes.push(self.cp.actions);

        Ok(Setup {
            topology,
            target: self.target_player - 1,
            hkb: self.hkb,
            step,
            vp_params,
            bounds,
            chains,
            actions,
            layer_sizes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build() {
        let s = ExperimentConfig::default().build().unwrap();
        assert_eq!(s.n_players(), 4);
        assert_eq!(s.target, 0);
        assert_eq!(s.layer_sizes, vec![4, 64, 32, 9]);
        let dwells: Vec<f64> = s.chains.iter().map(|c| c.dwell()).collect();
        assert_eq!(dwells, vec![0.6, 0.8, 1.0, 1.2]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            seed: 99,
            chains: default_chains(4).unwrap(),
            ..Default::default()
        };
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 5\n[topology]\nkind = \"ring\"\n[dqn]\nbatch_size = 8\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.topology.kind, TopologyKind::Ring);
        assert_eq!(cfg.dqn.batch_size, 8);
        assert_eq!(cfg.dqn.discount, 0.95);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("sed = 5\n").is_err());
        assert!(ExperimentConfig::from_toml("[dqn]\nbatchsize = 8\n").is_err());
        assert!(ExperimentConfig::from_toml("[hkb]\nalpha = 1.0\nbeta = 2.0\ngamma_damp = -1.0\nomega = 1.0\nzeta = 0.0\n").is_err());
    }

    #[test]
    fn star_center_is_one_based() {
        let cfg = ExperimentConfig {
            topology: TopologySection {
                kind: TopologyKind::Star,
                center: 3,
            },
            ..Default::default()
        };
        let s = cfg.build().unwrap();
        assert_eq!(s.topology.degree(2), 3);
        assert_eq!(s.topology.neighbors(0), &[2]);
        let mut bad = cfg;
        bad.topology.center = 0;
        assert!(bad.build().is_err());
    }

    #[test]
    fn invariants_enforced() {
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.build().is_err()
        };
        assert!(bad(|c| c.n_players = 1));
        assert!(bad(|c| c.target_player = 0));
        assert!(bad(|c| c.target_player = 5));
        assert!(bad(|c| c.trial_length = 99));
        assert!(bad(|c| c.dt = 0.2));
        assert!(bad(|c| c.dqn.discount = 1.0));
        assert!(bad(|c| c.vp.theta_v = 0.5));
        assert!(bad(|c| c.vp.roles = vec![VpRole::Leader]));
        assert!(bad(|c| c.chains = default_chains(3).unwrap()));
        assert!(bad(|c| c.validation.duration = 1.0));
        assert!(bad(|c| c.cp.reset_distance = 0.0));
        assert!(bad(|c| c.cp.reset_distance = f64::NAN));
    }

    #[test]
    fn resets_can_be_disabled() {
        let cfg = ExperimentConfig::from_toml("[cp]\nreset_distance = inf\n").unwrap();
        assert_eq!(cfg.cp.reset_distance, f64::INFINITY);
        cfg.build().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn full_scale_budget_accepted() {
        let cfg = ExperimentConfig {
            trial_count: 1500,
            trial_length: 500,
            ..Default::default()
        };
        cfg.build().unwrap();
        assert_eq!(cfg.planned_steps(), 750_000);
    }
}
