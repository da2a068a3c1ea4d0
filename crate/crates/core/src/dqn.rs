//! Deep Q-learning for the cyber player: ε-greedy selection over a discrete
//! acceleration set, experience replay, a periodically synced target
//! network and temporal-difference updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::OscillatorState;
use crate::error::{Error, Result};
use crate::neural_net::{Gradients, QNetwork, TrainStep, Workspace};

/// What the cyber player sees: its own state and the mean state of the
/// players it is coupled to.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentObservation {
    pub x: f64,
    pub v: f64,
    pub xbar: f64,
    pub vbar: f64,
}

/// Component-wise scale applied before the network input.
pub const INPUT_SCALE: [f64; 4] = [1.0, 2.0, 1.0, 2.0];

impl AgentObservation {
    pub fn new(own: OscillatorState, xbar: f64, vbar: f64) -> Self {
        Self {
            x: own.x,
            v: own.v,
            xbar,
            vbar,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.v, self.xbar, self.vbar].iter().all(|v| v.is_finite())
    }

    /// Network input, velocities scaled down to keep sigmoid pre-activations
    /// in their sensitive range.
    pub fn to_input(&self) -> [f64; 4] {
        [
            self.x / INPUT_SCALE[0],
            self.v / INPUT_SCALE[1],
            self.xbar / INPUT_SCALE[2],
            self.vbar / INPUT_SCALE[3],
        ]
    }
}

/// Discrete accelerations available to the cyber player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    accelerations: Vec<f64>,
}

impl ActionSpace {
    /// `count` accelerations evenly spaced over `[-max, max]`.
    pub fn uniform(count: usize, max: f64) -> Result<Self> {
        if count < 2 || !(max.is_finite() && max > 0.0) {
            return Err(Error::param("action space", format!("count {count}, max {max}")));
        }
        let step = 2.0 * max / (count - 1) as f64;
        Ok(Self {
            accelerations: (0..count).map(|i| -max + step * i as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.accelerations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accelerations.is_empty()
    }

    pub fn acceleration(&self, action: usize) -> f64 {
        self.accelerations[action]
    }

    pub fn accelerations(&self) -> &[f64] {
        &self.accelerations
    }
}

impl Default for ActionSpace {
    /// Nine accelerations −4, −3, …, 4.
    fn default() -> Self {
        Self::uniform(9, 4.0).expect("valid default")
    }
}

/// One replay sample ⟨x_k, u_k, x_{k+1}, r_{k+1}⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: AgentObservation,
    pub action: usize,
    pub next_state: AgentObservation,
    pub reward: f64,
}

impl Transition {
    pub fn new(
        state: AgentObservation,
        action: usize,
        next_state: AgentObservation,
        reward: f64,
        n_actions: usize,
    ) -> Result<Self> {
        if action >= n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_actions,
                got: action,
            });
        }
        if !(reward.is_finite() && reward <= 0.0) {
            return Err(Error::param("reward", format!("must be finite and ≤ 0, got {reward}")));
        }
        if !state.is_finite() || !next_state.is_finite() {
            return Err(Error::NonFinite { term: "observation" });
        }
        Ok(Self {
            state,
            action,
            next_state,
            reward,
        })
    }
}

/// Fixed-capacity FIFO of transitions; once full, each push overwrites the
/// oldest sample.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("buffer_capacity", "must be positive"));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        })
    }

    pub fn push(&mut self, tr: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(tr);
        } else {
            self.storage[self.head] = tr;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Transition {
        &self.storage[rng.random_range(0..self.storage.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnHyperParams {
    pub discount: f64,
    pub eps_max: f64,
    pub eps_min: f64,
    /// Decay constant of the exploration schedule, in environment steps.
    /// `None` means one third of the planned training steps.
    pub eps_decay_tau: Option<f64>,
    pub target_update_period: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Effort weight in the reward.
    pub eta_effort: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Tolerance of the RMS termination test.
    pub eps_term: f64,
    /// Trials in the moving average the termination test looks at.
    pub termination_window: usize,
}

impl Default for DqnHyperParams {
    fn default() -> Self {
        Self {
            discount: 0.95,
            eps_max: 1.0,
            eps_min: 0.05,
            eps_decay_tau: None,
            target_update_period: 150,
            batch_size: 32,
            buffer_capacity: 200_000,
            eta_effort: 1e-3,
            learning_rate: 3e-3,
            momentum: 0.9,
            eps_term: 0.01,
            termination_window: 50,
        }
    }
}

impl DqnHyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::param("discount", format!("must lie in (0, 1), got {}", self.discount)));
        }
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps_max && self.eps_max <= 1.0) {
            return Err(Error::param("epsilon", "need 0 ≤ eps_min ≤ eps_max ≤ 1"));
        }
        if let Some(tau) = self.eps_decay_tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::param("eps_decay_tau", "must be positive"));
            }
        }
        if self.target_update_period == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::param("dqn", "periods and sizes must be positive"));
        }
        if self.termination_window == 0 {
            return Err(Error::param("termination_window", "must be positive"));
        }
        if !(self.eta_effort.is_finite() && self.eta_effort >= 0.0) {
            return Err(Error::param("eta_effort", "must be non-negative"));
        }
        if !(self.eps_term.is_finite() && self.eps_term >= 0.0) {
            return Err(Error::param("eps_term", "must be non-negative"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::param("learning_rate", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Decay constant, resolving the default against a planned step budget.
    pub fn tau_for(&self, planned_steps: u64) -> f64 {
        self.eps_decay_tau
            .unwrap_or((planned_steps as f64 / 3.0).max(1.0))
    }
}

/// `−(x − x_t)² − 0.1 (v − ẋ_t)² − η u²`
pub fn reward(cp: OscillatorState, target: OscillatorState, u: f64, eta_effort: f64) -> f64 {
    let dx = cp.x - target.x;
    let dv = cp.v - target.v;
    -(dx * dx) - 0.1 * dv * dv - eta_effort * u * u
}

/// `ε = ε_min + (ε_max − ε_min) e^{−step/τ}`
pub fn epsilon_at(step: u64, hp: &DqnHyperParams, tau: f64) -> f64 {
    hp.eps_min + (hp.eps_max - hp.eps_min) * (-(step as f64) / tau).exp()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(net: &QNetwork, obs: &AgentObservation, ws: &mut Workspace) -> usize {
    argmax(net.forward_in(&obs.to_input(), ws))
}

/// ε-greedy choice.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    obs: &AgentObservation,
    epsilon: f64,
    rng: &mut R,
    ws: &mut Workspace,
) -> usize {
    // one draw for the coin, a second only when exploring
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..net.n_outputs())
    } else {
        greedy_action(net, obs, ws)
    }
}

/// `r + γ max_a Q_target(x', a)`
pub fn td_target(tr: &Transition, target_net: &QNetwork, discount: f64, ws: &mut Workspace) -> f64 {
    let q_next = target_net.forward_in(&tr.next_state.to_input(), ws);
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    tr.reward + discount * best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchOutcome {
    /// Fewer samples than a batch; nothing was trained.
    Warmup,
    /// Mean of `½ (td − q)²` over the batch, measured before the update.
    Trained { loss: f64 },
}

/// Reusable buffers for [`train_batch`].
#[derive(Debug, Clone)]
pub struct Trainer {
    grads: Gradients,
    ws: Workspace,
}

impl Trainer {
    pub fn new(net: &QNetwork) -> Self {
        Self {
            grads: Gradients::zeros_like(net),
            ws: net.workspace(),
        }
    }
}

/// Samples a batch with replacement and applies one momentum step on the
/// batch-mean masked squared TD error.
pub fn train_batch<R: Rng + ?Sized>(
    net: &mut QNetwork,
    target_net: &QNetwork,
    buffer: &ReplayBuffer,
    hp: &DqnHyperParams,
    ts: &mut TrainStep,
    trainer: &mut Trainer,
    rng: &mut R,
) -> Result<BatchOutcome> {
    if buffer.len() < hp.batch_size {
        return Ok(BatchOutcome::Warmup);
    }
    let scale = 1.0 / hp.batch_size as f64;
    trainer.grads.fill_zero();
    let mut loss = 0.0;
    for _ in 0..hp.batch_size {
        let tr = buffer.sample(rng);
        let target = td_target(tr, target_net, hp.discount, &mut trainer.ws);
        loss += net.accumulate_gradient(
            &tr.state.to_input(),
            target,
            tr.action,
            scale,
            &mut trainer.grads,
            &mut trainer.ws,
        );
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite { term: "training loss" });
    }
    net.apply_update(&trainer.grads, ts)?;
    Ok(BatchOutcome::Trained { loss })
}

/// Copies the online network into the target network every
/// `target_update_period` steps.
pub fn maybe_sync_target(step: u64, hp: &DqnHyperParams, net: &QNetwork, target_net: &mut QNetwork) -> Result<bool> {
    if step % hp.target_update_period == 0 {
        net.clone_into(target_net)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// `|RMS_TP − RMS_CP| ≤ ε`
pub fn check_termination(rms_tp: f64, rms_cp: f64, eps_term: f64) -> bool {
    (rms_tp - rms_cp).abs() <= eps_term
}

/// Online network, target network, replay memory and optimizer state of one
/// learning agent.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub net: QNetwork,
    pub target_net: QNetwork,
    pub buffer: ReplayBuffer,
    pub hp: DqnHyperParams,
    pub train_step: TrainStep,
    trainer: Trainer,
    steps: u64,
}

impl DqnAgent {
    pub fn new(net: QNetwork, hp: DqnHyperParams) -> Result<Self> {
        hp.validate()?;
        let target_net = net.clone();
        let train_step = TrainStep::new(&net, hp.learning_rate, hp.momentum)?;
        Ok(Self {
            trainer: Trainer::new(&net),
            buffer: ReplayBuffer::new(hp.buffer_capacity)?,
            target_net,
            train_step,
            net,
            hp,
            steps: 0,
        })
    }

    /// Environment steps recorded so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn act<R: Rng + ?Sized>(&mut self, obs: &AgentObservation, epsilon: f64, rng: &mut R) -> usize {
        select_action(&self.net, obs, epsilon, rng, &mut self.trainer.ws)
    }

    /// Stores the transition, trains on one batch and advances the target
    /// network schedule.
    pub fn observe<R: Rng + ?Sized>(&mut self, tr: Transition, rng: &mut R) -> Result<BatchOutcome> {
        self.buffer.push(tr);
        let outcome = train_batch(
            &mut self.net,
            &self.target_net,
            &self.buffer,
            &self.hp,
            &mut self.train_step,
            &mut self.trainer,
            rng,
        )?;
        self.steps += 1;
        maybe_sync_target(self.steps, &self.hp, &self.net, &mut self.target_net)?;
        Ok(outcome)
    }
}
