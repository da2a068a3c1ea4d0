//! Simulation of a group mirror game: nonlinear oscillator "virtual players"
//! coupled over a graph, a deep Q-network "cyber player" trained to imitate
//! one of them, and phase-synchrony metrics for comparing the two.

pub mod analysis;
pub mod dqn;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod neural_net;
pub mod rng;
pub mod virtual_player;

pub use analysis::{
    group_sync_index, hilbert_phase, relative_phase_error, relative_position_error, rms_to_mean, time_lag,
    MetricsSummary, PhaseSeries, Summary, TimeSeries, TrialMetrics,
};
pub use dqn::{ActionSpace, AgentObservation, DqnAgent, DqnHyperParams, ReplayBuffer, Transition};
pub use dynamics::{HkbParams, Integrator, OscillatorState, StepConfig};
pub use ensemble::{GroupState, NeighborMean, Topology, TopologyKind};
pub use error::{Error, Result};
pub use neural_net::{QNetwork, CP_LAYER_SIZES};
pub use virtual_player::{ControlBounds, SignatureChain, SignatureGenerator, VpControlParams, VpRole};
