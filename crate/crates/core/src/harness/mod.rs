//! Experiment orchestration: configuration, group simulation, shadow
//! training, substitution validation and the files they produce.

pub mod artifacts;
pub mod config;
pub mod group;
pub mod training;
pub mod validation;

pub use config::{default_chains, ExperimentConfig, Setup};
pub use group::{run_group, trial_metrics, vp_group, CyberPlayer, Group, Player, Trajectory, VirtualPlayer};
pub use training::{train_cp, train_cp_observed, TrainingLogRow, TrainingOutcome};
pub use validation::{run_topology_sweep, validate_cp, validate_with, Condition, Substitute, SweepReport, ValidationReport};
