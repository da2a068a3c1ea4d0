//! Synchronous group simulation.

use rand::Rng;

use crate::analysis::{
    group_sync_index, hilbert_phase, relative_phase_error, relative_position_error, rms_to_mean, time_lag,
    TimeSeries, TrialMetrics,
};
use crate::dqn::{greedy_action, ActionSpace, AgentObservation};
use crate::dynamics::{step_double_integrator, step_oscillator, HkbParams, OscillatorState, StepConfig};
use crate::ensemble::{neighbor_mean, GroupState, NeighborMean, Topology};
use crate::error::{Error, Result};
use crate::neural_net::{QNetwork, Workspace};
use crate::rng::{label, stream};
use crate::virtual_player::{vp_control, ControlBounds, SignatureGenerator, VpControlParams};

use super::config::{ExperimentConfig, Setup};

/// Anything that can occupy a seat in the group.
pub trait Player {
    /// Next state given the player's own state and its neighbor mean at `t`.
    fn advance(&mut self, own: OscillatorState, nb: NeighborMean, t: f64) -> Result<OscillatorState>;
}

/// HKB oscillator steered by the one-step tracking controller.
#[derive(Debug, Clone)]
pub struct VirtualPlayer {
    pub generator: SignatureGenerator,
    pub params: VpControlParams,
    pub hkb: HkbParams,
    pub bounds: ControlBounds,
    pub step: StepConfig,
}

impl Player for VirtualPlayer {
    fn advance(&mut self, own: OscillatorState, nb: NeighborMean, t: f64) -> Result<OscillatorState> {
        let r = self.generator.reference(t);
        let u = vp_control(own, nb, r, &self.params, &self.hkb, &self.bounds)?;
        step_oscillator(own, u, &self.hkb, &self.step)
    }
}

/// Greedy Q-network policy driving a double integrator.
#[derive(Debug, Clone)]
pub struct CyberPlayer {
    net: QNetwork,
    ws: Workspace,
    actions: ActionSpace,
    dt: f64,
}

impl CyberPlayer {
    pub fn new(net: QNetwork, actions: ActionSpace, dt: f64) -> Result<Self> {
        if net.n_inputs() != 4 || net.n_outputs() != actions.len() {
            return Err(Error::ArchitectureMismatch);
        }
        let ws = net.workspace();
        Ok(Self { net, ws, actions, dt })
    }
}

impl Player for CyberPlayer {
    fn advance(&mut self, own: OscillatorState, nb: NeighborMean, _t: f64) -> Result<OscillatorState> {
        let obs = AgentObservation::new(own, nb.position, nb.velocity);
        let a = greedy_action(&self.net, &obs, &mut self.ws);
        step_double_integrator(own, self.actions.acceleration(a), self.dt)
    }
}

/// Streams used by one trial. `scope` separates training/simulation trials
/// from validation trials drawn under the same seed.
pub fn trial_start(cfg: &ExperimentConfig, scope: u64, trial: usize) -> Vec<OscillatorState> {
    let mut rng = stream(cfg.seed, &[scope, label::INIT, trial as u64]);
    (0..cfg.n_players)
        .map(|_| {
            let x = if cfg.init_spread > 0.0 {
                rng.random_range(-cfg.init_spread..=cfg.init_spread)
            } else {
                0.0
            };
            OscillatorState::new(x, 0.0)
        })
        .collect()
}

pub fn virtual_players(cfg: &ExperimentConfig, setup: &Setup, scope: u64, trial: usize) -> Vec<VirtualPlayer> {
    (0..setup.n_players())
        .map(|k| VirtualPlayer {
            generator: SignatureGenerator::new(
                setup.chains[k].clone(),
                stream(cfg.seed, &[scope, label::CHAIN, trial as u64, k as u64]),
            ),
            params: setup.vp_params[k],
            hkb: setup.hkb,
            bounds: setup.bounds,
            step: setup.step,
        })
        .collect()
}

/// Players coupled over a graph and updated synchronously: every player
/// sees the neighbor means of the same instant.
pub struct Group {
    topology: Topology,
    players: Vec<Box<dyn Player>>,
    state: GroupState,
    dt: f64,
    steps: usize,
}

impl Group {
    pub fn new(topology: Topology, players: Vec<Box<dyn Player>>, start: Vec<OscillatorState>, dt: f64) -> Result<Self> {
        if players.len() != topology.n() || start.len() != topology.n() {
            return Err(Error::DimensionMismatch {
                expected: topology.n(),
                got: players.len().min(start.len()),
            });
        }
        for s in &start {
            s.guarded()?;
        }
        Ok(Self {
            topology,
            players,
            state: GroupState::new(start, 0.0),
            dt,
            steps: 0,
        })
    }

    pub fn state(&self) -> &GroupState {
        &self.state
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn neighbor_mean(&self, k: usize) -> Result<NeighborMean> {
        neighbor_mean(&self.state, &self.topology, k)
    }

    pub fn step(&mut self) -> Result<()> {
        let t = self.state.t;
        let mut next = Vec::with_capacity(self.players.len());
        for (k, p) in self.players.iter_mut().enumerate() {
            let nb = neighbor_mean(&self.state, &self.topology, k)?;
            next.push(p.advance(self.state.states[k], nb, t)?);
        }
        self.state.states = next;
        self.steps += 1;
        self.state.t = self.steps as f64 * self.dt;
        Ok(())
    }
}

/// Positions and velocities of every player at `t = i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// `x[k][i]`
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(n_players: usize, dt: f64) -> Self {
        Self {
            dt,
            x: vec![Vec::new(); n_players],
            v: vec![Vec::new(); n_players],
        }
    }

    pub fn push(&mut self, states: &[OscillatorState]) {
        for (k, s) in states.iter().enumerate() {
            self.x[k].push(s.x);
            self.v[k].push(s.v);
        }
    }

    pub fn n_players(&self) -> usize {
        self.x.len()
    }

    pub fn len(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Neighbor-mean position and velocity of player `k` at every sample.
    pub fn neighbor_means(&self, topology: &Topology, k: usize) -> (Vec<f64>, Vec<f64>) {
        let nb = topology.neighbors(k);
        let m = nb.len() as f64;
        (0..self.len())
            .map(|i| {
                let x = nb.iter().map(|&j| self.x[j][i]).sum::<f64>() / m;
                let v = nb.iter().map(|&j| self.v[j][i]).sum::<f64>() / m;
                (x, v)
            })
            .unzip()
    }

    /// First sample at or after `seconds`, capped so at least the final
    /// sample remains.
    pub fn index_after(&self, seconds: f64) -> usize {
        ((seconds / self.dt).ceil() as usize).min(self.len().saturating_sub(1))
    }
}

/// Runs `steps` steps, recording the initial state and every step after it.
/// Errors carry `trial` and the failing step.
pub fn run_group(group: &mut Group, steps: usize, trial: usize) -> Result<Trajectory> {
    let mut traj = Trajectory::new(group.state.states.len(), group.dt);
    traj.push(&group.state.states);
    for i in 0..steps {
        group.step().map_err(|e| e.at(trial, i))?;
        traj.push(&group.state.states);
    }
    Ok(traj)
}

/// VP-only group for one trial.
pub fn vp_group(cfg: &ExperimentConfig, setup: &Setup, topology: Topology, scope: u64, trial: usize) -> Result<Group> {
    let players = virtual_players(cfg, setup, scope, trial)
        .into_iter()
        .map(|p| Box::new(p) as Box<dyn Player>)
        .collect();
    Group::new(topology, players, trial_start(cfg, scope, trial), setup.dt())
}

/// Metrics of player `k` against its neighbors, after `transient` seconds.
pub fn trial_metrics(traj: &Trajectory, topology: &Topology, k: usize, transient: f64, max_lag: f64) -> Result<TrialMetrics> {
    let start = traj.index_after(transient);
    let dt = traj.dt;
    let series = |v: &[f64]| TimeSeries::new(v[start..].to_vec(), dt);
    let (xbar, vbar) = traj.neighbor_means(topology, k);
    let xbar = series(&xbar)?;
    let vbar = series(&vbar)?;
    let xp = series(&traj.x[k])?;

    let phases = (0..traj.n_players())
        .map(|j| series(&traj.x[j]).and_then(|s| hilbert_phase(&s)))
        .collect::<Result<Vec<_>>>()?;
    let rho_g = group_sync_index(&phases)?.rho_g;
    let delta_phi = relative_phase_error(&xbar, &xp)?;
    let rms = rms_to_mean(&xp, &xbar)?;
    let max_lag = max_lag.min(0.25 * xp.duration());
    let lag = time_lag(&xp, &xbar, max_lag)?;
    let rpe = relative_position_error(&xbar, &vbar, &xp)?;
    let rpe_mean = rpe.mean();
    Ok(TrialMetrics {
        rho_g,
        delta_phi,
        rms,
        time_lag: lag,
        rpe_mean,
        rpe_series: Some(rpe),
    })
}
