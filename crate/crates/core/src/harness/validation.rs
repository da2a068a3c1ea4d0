//! Closed-loop substitution of the target player.

use serde::{Deserialize, Serialize};

use crate::analysis::{MetricsSummary, Summary, TrialMetrics};
use crate::ensemble::TopologyKind;
use crate::error::{Error, Result};
use crate::neural_net::QNetwork;
use crate::rng::label;

use super::config::{ExperimentConfig, Setup};
use super::group::{run_group, trial_metrics, trial_start, virtual_players, CyberPlayer, Group, Player, Trajectory};

/// Stream scope of validation trials.
pub const VALIDATION_SCOPE: u64 = label::VALIDATION;

/// What takes the target player's seat.
#[derive(Debug, Clone)]
pub enum Substitute {
    Cyber(QNetwork),
    /// The target's own virtual player, rebuilt from the same streams.
    ScriptedClone,
}

/// A substituted trial left out of the CP aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTrial {
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub topology: TopologyKind,
    /// `None` where the substituted group diverged or a metric was undefined.
    pub cp: Vec<Option<TrialMetrics>>,
    pub vp: Vec<TrialMetrics>,
    pub cp_excluded: Vec<ExcludedTrial>,
    pub cp_summary: MetricsSummary,
    pub vp_summary: MetricsSummary,
}

pub fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

fn substituted_group(
    cfg: &ExperimentConfig,
    setup: &Setup,
    kind: TopologyKind,
    substitute: &Substitute,
    trial: usize,
) -> Result<Group> {
    let k = setup.target;
    let mut players: Vec<Box<dyn Player>> = virtual_players(cfg, setup, VALIDATION_SCOPE, trial)
        .into_iter()
        .map(|p| Box::new(p) as Box<dyn Player>)
        .collect();
    players[k] = match substitute {
        Substitute::Cyber(net) => Box::new(CyberPlayer::new(net.clone(), setup.actions.clone(), setup.dt())?),
        Substitute::ScriptedClone => {
            Box::new(virtual_players(cfg, setup, VALIDATION_SCOPE, trial).swap_remove(k))
        }
    };
    Group::new(cfg.topology_for(kind)?, players, trial_start(cfg, VALIDATION_SCOPE, trial), setup.dt())
}

fn baseline_group(cfg: &ExperimentConfig, setup: &Setup, kind: TopologyKind, trial: usize) -> Result<Group> {
    let players = virtual_players(cfg, setup, VALIDATION_SCOPE, trial)
        .into_iter()
        .map(|p| Box::new(p) as Box<dyn Player>)
        .collect();
    Group::new(cfg.topology_for(kind)?, players, trial_start(cfg, VALIDATION_SCOPE, trial), setup.dt())
}

/// Runs `trials` matched pairs: the VP-only group and the group with the
/// target replaced, under identical streams. A substituted run that leaves
/// the guard box, or whose metrics are undefined, is recorded in
/// `cp_excluded`; `on_trial` then gets `None` for it if no trajectory exists.
pub fn validate_with(
    cfg: &ExperimentConfig,
    substitute: &Substitute,
    kind: TopologyKind,
    trials: usize,
    mut on_trial: impl FnMut(usize, &Trajectory, Option<&Trajectory>),
) -> Result<ValidationReport> {
    let setup = cfg.build()?;
    let topology = cfg.topology_for(kind)?;
    let steps = steps_for(cfg.validation.duration, setup.dt());
    let metrics = |traj: &Trajectory| {
        trial_metrics(traj, &topology, setup.target, cfg.transient, cfg.validation.max_lag)
    };
    let mut vp = Vec::with_capacity(trials);
    let mut cp = Vec::with_capacity(trials);
    let mut cp_excluded = Vec::new();
    for trial in 0..trials {
        let vp_traj = run_group(&mut baseline_group(cfg, &setup, kind, trial)?, steps, trial)?;
        vp.push(metrics(&vp_traj)?);
        let cp_traj = match run_group(&mut substituted_group(cfg, &setup, kind, substitute, trial)?, steps, trial) {
            Ok(t) => Some(t),
            Err(e) if e.is_degenerate_run() => {
                cp_excluded.push(ExcludedTrial {
                    trial,
                    reason: format!("{}", ErrorChain(&e)),
                });
                None
            }
            Err(e) => return Err(e),
        };
        let m = match cp_traj.as_ref().map(&metrics) {
            Some(Ok(m)) => Some(m),
            Some(Err(e)) if e.is_degenerate_run() => {
                cp_excluded.push(ExcludedTrial {
                    trial,
                    reason: format!("{}", ErrorChain(&e)),
                });
                None
            }
            Some(Err(e)) => return Err(e),
            None => None,
        };
        cp.push(m);
        on_trial(trial, &vp_traj, cp_traj.as_ref());
    }
    let kept: Vec<TrialMetrics> = cp.iter().flatten().cloned().collect();
    Ok(ValidationReport {
        topology: kind,
        cp_summary: MetricsSummary::of(&kept),
        vp_summary: MetricsSummary::of(&vp),
        cp,
        vp,
        cp_excluded,
    })
}

/// Formats an error with its sources, `a: b: c`.
struct ErrorChain<'a>(&'a Error);

impl std::fmt::Display for ErrorChain<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)?;
        let mut source = std::error::Error::source(self.0);
        while let Some(s) = source {
            write!(f, ": {s}")?;
            source = s.source();
        }
        Ok(())
    }
}

pub fn validate_cp(cfg: &ExperimentConfig, net: &QNetwork, kind: TopologyKind, trials: usize) -> Result<ValidationReport> {
    validate_with(cfg, &Substitute::Cyber(net.clone()), kind, trials, |_, _, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Vp,
    Cp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub topology: TopologyKind,
    pub condition: Condition,
    pub rho_g_mean: f64,
    pub rho_g_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<ValidationReport>,
}

impl SweepReport {
    pub fn rho(&self, topology: TopologyKind, condition: Condition) -> Option<Summary> {
        self.rows
            .iter()
            .find(|r| r.topology == topology && r.condition == condition)
            .map(|r| Summary {
                mean: r.rho_g_mean,
                sd: r.rho_g_sd,
            })
    }
}

/// Group synchrony with and without the cyber player on every topology.
pub fn run_topology_sweep(cfg: &ExperimentConfig, substitute: &Substitute, trials: usize) -> Result<SweepReport> {
    let mut rows = Vec::with_capacity(8);
    let mut reports = Vec::with_capacity(4);
    for kind in TopologyKind::ALL {
        let report = validate_with(cfg, substitute, kind, trials, |_, _, _| {})?;
        for (condition, s) in [(Condition::Vp, report.vp_summary.rho_g), (Condition::Cp, report.cp_summary.rho_g)] {
            rows.push(SweepRow {
                topology: kind,
                condition,
                rho_g_mean: s.mean,
                rho_g_sd: s.sd,
            });
        }
        reports.push(report);
    }
    Ok(SweepReport { rows, reports })
}
