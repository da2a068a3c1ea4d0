//! Shadow training of the cyber player.
//!
//! The VP group runs unchanged, target player included. The cyber player
//! sees the target's neighbor means, drives its own plant, and is rewarded
//! for matching the target's state. Its motion never reaches the group.

use serde::{Deserialize, Serialize};

use crate::analysis::rms_to_mean;
use crate::analysis::TimeSeries;
use crate::dqn::{epsilon_at, reward, AgentObservation, BatchOutcome, DqnAgent, Transition};
use crate::dynamics::{step_double_integrator, OscillatorState};
use crate::error::{Error, Result};
use crate::neural_net::QNetwork;
use crate::rng::{label, stream};

use super::config::ExperimentConfig;
use super::group::{vp_group, Trajectory};

/// Stream scope of training and plain simulation trials.
pub const TRAINING_SCOPE: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    /// 1-based.
    pub trial: usize,
    /// Mean batch loss over the trial; NaN while the buffer is warming up.
    pub loss: f64,
    /// Exploration rate at the end of the trial.
    pub epsilon: f64,
    pub rms_cp: f64,
    pub rms_tp: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub net: QNetwork,
    pub log: Vec<TrainingLogRow>,
    /// Trial (1-based) after which the termination test held.
    pub terminated_at: Option<usize>,
    /// Trials cut short because the cyber player left the guard box.
    pub truncated_trials: usize,
}

/// What one training trial looked like, for callers that want to inspect it.
pub struct ShadowTrial<'a> {
    pub trial: usize,
    pub group: &'a Trajectory,
    pub cp: &'a [OscillatorState],
}

pub fn train_cp(cfg: &ExperimentConfig) -> Result<TrainingOutcome> {
    train_cp_observed(cfg, |_| {})
}

/// [`train_cp`], calling `on_trial` after every trial.
pub fn train_cp_observed(cfg: &ExperimentConfig, mut on_trial: impl FnMut(&ShadowTrial)) -> Result<TrainingOutcome> {
    let setup = cfg.build()?;
    let hp = cfg.dqn.clone();
    let k = setup.target;
    let dt = setup.dt();
    let n_actions = setup.actions.len();
    let tau = hp.tau_for(cfg.planned_steps());

    let net = QNetwork::new(&setup.layer_sizes, &mut stream(cfg.seed, &[label::NETWORK]))?;
    let mut agent = DqnAgent::new(net, hp.clone())?;
    let mut explore = stream(cfg.seed, &[label::EXPLORE]);
    let mut replay = stream(cfg.seed, &[label::REPLAY]);

    let mut log = Vec::with_capacity(cfg.trial_count);
    let mut terminated_at = None;
    let mut truncated_trials = 0;

    for trial in 0..cfg.trial_count {
        let mut group = vp_group(cfg, &setup, setup.topology.clone(), TRAINING_SCOPE, trial)?;
        let mut traj = Trajectory::new(setup.n_players(), dt);
        traj.push(&group.state().states);
        let mut cp = group.state().states[k];
        let mut cp_path = vec![cp];
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);

        for step in 0..cfg.trial_length {
            let at = |e: Error| e.at(trial, step);
            let nb = group.neighbor_mean(k)?;
            let obs = AgentObservation::new(cp, nb.position, nb.velocity);
            let eps = epsilon_at(agent.steps(), &hp, tau);
            let action = agent.act(&obs, eps, &mut explore);
            let u = setup.actions.acceleration(action);

            group.step().map_err(at)?;
            traj.push(&group.state().states);
            let next = match step_double_integrator(cp, u, dt) {
                Ok(s) => s,
                Err(Error::Diverged { .. }) => {
                    truncated_trials += 1;
                    break;
                }
                Err(e) => return Err(at(e)),
            };
            let r = reward(next, group.state().states[k], u, hp.eta_effort);
            let nb_next = group.neighbor_mean(k)?;
            let next_obs = AgentObservation::new(next, nb_next.position, nb_next.velocity);
            let tr = Transition::new(obs, action, next_obs, r, n_actions).map_err(at)?;
            if let BatchOutcome::Trained { loss } = agent.observe(tr, &mut replay).map_err(at)? {
                loss_sum += loss;
                loss_count += 1;
            }
            let target_now = group.state().states[k];
            cp = if (next.x - target_now.x).abs() > cfg.cp.reset_distance {
                target_now
            } else {
                next
            };
            cp_path.push(cp);
        }

        let (rms_cp, rms_tp) = shadow_rms(&traj, &cp_path, &setup.topology, k, cfg.transient)?;
        log.push(TrainingLogRow {
            trial: trial + 1,
            loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { f64::NAN },
            epsilon: epsilon_at(agent.steps(), &hp, tau),
            rms_cp,
            rms_tp,
        });
        on_trial(&ShadowTrial {
            trial,
            group: &traj,
            cp: &cp_path,
        });

        if let Some((tp, cp)) = trailing_means(&log, hp.termination_window) {
            if crate::dqn::check_termination(tp, cp, hp.eps_term) {
                terminated_at = Some(trial + 1);
                break;
            }
        }
    }

    Ok(TrainingOutcome {
        net: agent.net,
        log,
        terminated_at,
        truncated_trials,
    })
}

/// RMS of the cyber player and of the target against the target's neighbor
/// mean, over the samples the cyber player completed after the transient.
fn shadow_rms(
    traj: &Trajectory,
    cp: &[OscillatorState],
    topology: &crate::ensemble::Topology,
    k: usize,
    transient: f64,
) -> Result<(f64, f64)> {
    let n = cp.len();
    let (xbar, _) = traj.neighbor_means(topology, k);
    let start = ((transient / traj.dt).ceil() as usize).min(n - 1);
    let series = |v: Vec<f64>| TimeSeries::new(v, traj.dt);
    let xbar = series(xbar[start..n].to_vec())?;
    let xcp = series(cp[start..].iter().map(|s| s.x).collect())?;
    let xtp = series(traj.x[k][start..n].to_vec())?;
    Ok((rms_to_mean(&xcp, &xbar)?, rms_to_mean(&xtp, &xbar)?))
}

/// Means of `rms_tp` and `rms_cp` over the last `window` trials.
pub fn trailing_means(log: &[TrainingLogRow], window: usize) -> Option<(f64, f64)> {
    if log.len() < window {
        return None;
    }
    let tail = &log[log.len() - window..];
    let w = window as f64;
    Some((
        tail.iter().map(|r| r.rms_tp).sum::<f64>() / w,
        tail.iter().map(|r| r.rms_cp).sum::<f64>() / w,
    ))
}
