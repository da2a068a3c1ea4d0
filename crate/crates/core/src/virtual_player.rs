//! Virtual players: receding-horizon control of an HKB oscillator that
//! tracks its neighbors' mean motion and a Markov-chain motor signature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{HkbParams, OscillatorState};
use crate::ensemble::NeighborMean;
use crate::error::{Error, Result};
use crate::rng::Stream;

const WEIGHT_SUM_TOL: f64 = 1e-9;
const ROW_SUM_TOL: f64 = 1e-9;

/// Weights of the tracking cost. The three tracking weights sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVpParams", into = "RawVpParams")]
pub struct VpControlParams {
    theta_p: f64,
    theta_sigma: f64,
    theta_v: f64,
    eta: f64,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVpParams {
    theta_p: f64,
    theta_sigma: f64,
    theta_v: f64,
    eta: f64,
    horizon: f64,
}

impl TryFrom<RawVpParams> for VpControlParams {
    type Error = Error;
    fn try_from(r: RawVpParams) -> Result<Self> {
        VpControlParams::new(r.theta_p, r.theta_sigma, r.theta_v, r.eta, r.horizon)
    }
}

impl From<VpControlParams> for RawVpParams {
    fn from(p: VpControlParams) -> Self {
        RawVpParams {
            theta_p: p.theta_p,
            theta_sigma: p.theta_sigma,
            theta_v: p.theta_v,
            eta: p.eta,
            horizon: p.horizon,
        }
    }
}

impl VpControlParams {
    pub fn new(theta_p: f64, theta_sigma: f64, theta_v: f64, eta: f64, horizon: f64) -> Result<Self> {
        for (name, w) in [("theta_p", theta_p), ("theta_sigma", theta_sigma), ("theta_v", theta_v)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::param(name, format!("must be non-negative, got {w}")));
            }
        }
        let sum = theta_p + theta_sigma + theta_v;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::param("theta", format!("weights must sum to 1, got {sum}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        Ok(Self {
            theta_p,
            theta_sigma,
            theta_v,
            eta,
            horizon,
        })
    }

    pub fn theta_p(&self) -> f64 {
        self.theta_p
    }
    pub fn theta_sigma(&self) -> f64 {
        self.theta_sigma
    }
    pub fn theta_v(&self) -> f64 {
        self.theta_v
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Same effort weight and horizon, different tracking weights.
    pub fn with_weights(&self, theta_p: f64, theta_sigma: f64, theta_v: f64) -> Result<Self> {
        Self::new(theta_p, theta_sigma, theta_v, self.eta, self.horizon)
    }
}

impl Default for VpControlParams {
    /// Joint improvisation: θp = 0.8, θσ = 0.15, θv = 0.05, η = 1e-4, 0.03 s horizon.
    fn default() -> Self {
        Self {
            theta_p: 0.8,
            theta_sigma: 0.15,
            theta_v: 0.05,
            eta: 1e-4,
            horizon: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VpRole {
    Leader,
    Follower,
    #[default]
    JointImproviser,
}

/// Preset tracking weights for a role; `eta` and `horizon` are kept.
///
/// Only the joint-improviser triple is a measured setting. The leader and
/// follower triples just make the signature or the position term dominate.
pub fn leader_follower_mix(p: &VpControlParams, role: VpRole) -> VpControlParams {
    let (tp, ts, tv) = match role {
        VpRole::Leader => (0.1, 0.85, 0.05),
        VpRole::Follower => (0.85, 0.1, 0.05),
        VpRole::JointImproviser => (0.8, 0.15, 0.05),
    };
    p.with_weights(tp, ts, tv)
        .expect("preset weights are valid")
}

/// Acceleration saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct ControlBounds {
    u_min: f64,
    u_max: f64,
}

impl ControlBounds {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min.is_finite() && u_max.is_finite() && u_min < u_max) {
            return Err(Error::param("bounds", format!("need u_min < u_max, got [{u_min}, {u_max}]")));
        }
        Ok(Self { u_min, u_max })
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }
}

impl TryFrom<(f64, f64)> for ControlBounds {
    type Error = Error;
    fn try_from((lo, hi): (f64, f64)) -> Result<Self> {
        ControlBounds::new(lo, hi)
    }
}

impl From<ControlBounds> for (f64, f64) {
    fn from(b: ControlBounds) -> Self {
        (b.u_min, b.u_max)
    }
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            u_min: -20.0,
            u_max: 20.0,
        }
    }
}

/// Markov chain over velocity bins that encodes a motor signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain", into = "RawChain")]
pub struct SignatureChain {
    bin_velocities: Vec<f64>,
    /// Row-major, `n × n`.
    transition: Vec<f64>,
    dwell: f64,
}

/// On-disk layout: bins, row-major transition matrix, dwell time.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    bin_velocities: Vec<f64>,
    transition: Vec<f64>,
    dwell: f64,
}

impl TryFrom<RawChain> for SignatureChain {
    type Error = Error;
    fn try_from(r: RawChain) -> Result<Self> {
        SignatureChain::new(r.bin_velocities, r.transition, r.dwell)
    }
}

impl From<SignatureChain> for RawChain {
    fn from(c: SignatureChain) -> Self {
        RawChain {
            bin_velocities: c.bin_velocities,
            transition: c.transition,
            dwell: c.dwell,
        }
    }
}

impl SignatureChain {
    pub fn new(bin_velocities: Vec<f64>, transition: Vec<f64>, dwell: f64) -> Result<Self> {
        let n = bin_velocities.len();
        if n == 0 {
            return Err(Error::param("bin_velocities", "at least one bin required"));
        }
        if bin_velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("bin_velocities", "must be finite"));
        }
        if bin_velocities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("bin_velocities", "must be strictly increasing"));
        }
        if transition.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: transition.len(),
            });
        }
        for (i, row) in transition.chunks(n).enumerate() {
            if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                return Err(Error::param("transition", format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::param("transition", format!("row {i} sums to {s}")));
            }
        }
        if !(dwell.is_finite() && dwell > 0.0) {
            return Err(Error::param("dwell", format!("must be positive, got {dwell}")));
        }
        Ok(Self {
            bin_velocities,
            transition,
            dwell,
        })
    }

    /// Lazy reflecting walk: stay with probability `stay`, otherwise move one
    /// bin up or down with equal probability (mass folded back at the edges).
    pub fn reflecting_walk(bin_velocities: Vec<f64>, stay: f64, dwell: f64) -> Result<Self> {
        let n = bin_velocities.len();
        let mut t = vec![0.0; n * n];
        let side = (1.0 - stay) / 2.0;
        for i in 0..n {
            t[i * n + i] += stay;
            t[i * n + i.saturating_sub(1)] += side;
            t[i * n + (i + 1).min(n - 1)] += side;
        }
        Self::new(bin_velocities, t, dwell)
    }

    /// Sign-alternating chain over symmetric bins: from bin `i` the chain
    /// jumps to the mirrored bin with probability `1 − 2·spread` and to each of
    /// its two neighbors on the same side with probability `spread`. The zero
    /// bin (odd `n`) moves to the two slowest nonzero bins with equal odds.
    ///
    /// Consecutive segments travel in opposite directions, so the integrated
    /// reference stays bounded on average and yields oscillatory motion.
    pub fn alternating(bin_velocities: Vec<f64>, spread: f64, dwell: f64) -> Result<Self> {
        let n = bin_velocities.len();
        if n < 2 {
            return Err(Error::param("bin_velocities", "alternating chain needs at least 2 bins"));
        }
        if !(0.0..=0.5).contains(&spread) {
            return Err(Error::param("spread", format!("must lie in [0, 0.5], got {spread}")));
        }
        let zero = (n % 2 == 1).then_some(n / 2);
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut t[i * n..(i + 1) * n];
            if Some(i) == zero {
                row[i - 1] = 0.5;
                row[i + 1] = 0.5;
                continue;
            }
            let mirror = n - 1 - i;
            row[mirror] += 1.0 - 2.0 * spread;
            for step in [-1isize, 1] {
                let k = mirror as isize + step;
                let same_side = |k: usize| (k < n / 2) == (mirror < n / 2) && Some(k) != zero;
                if k >= 0 && (k as usize) < n && same_side(k as usize) {
                    row[k as usize] += spread;
                } else {
                    row[mirror] += spread;
                }
            }
        }
        Self::new(bin_velocities, t, dwell)
    }

    /// Seven bins over ±1.2 u/s, alternating with spread 0.25.
    pub fn default_with_dwell(dwell: f64) -> Result<Self> {
        Self::alternating(vec![-1.2, -0.8, -0.4, 0.0, 0.4, 0.8, 1.2], 0.25, dwell)
    }

    pub fn len(&self) -> usize {
        self.bin_velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_velocities.is_empty()
    }

    pub fn bin_velocities(&self) -> &[f64] {
        &self.bin_velocities
    }

    pub fn dwell(&self) -> f64 {
        self.dwell
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.transition[i * n..(i + 1) * n]
    }

    fn fade(&self) -> f64 {
        (0.2 * self.dwell).min(0.1)
    }

    fn next_state<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for (j, &p) in self.row(from).iter().enumerate() {
            acc += p;
            if r < acc {
                return j;
            }
        }
        // rounding slack: land on the last reachable state
        self.row(from)
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(from)
    }

    /// Loads a chain from a TOML file with keys `bin_velocities`,
    /// `transition` (row-major) and `dwell`.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("chain serializes")
    }
}

/// Produces the reference velocity of one player by running its chain in
/// time. State switches happen every `dwell` seconds, with a linear
/// cross-fade of `min(0.2·dwell, 0.1)` seconds into the new bin velocity.
#[derive(Debug, Clone)]
pub struct SignatureGenerator {
    chain: SignatureChain,
    rng: Stream,
    state: usize,
    previous: usize,
    switched_at: f64,
    next_switch: f64,
}

impl SignatureGenerator {
    /// Starts in a uniformly drawn state.
    pub fn new(chain: SignatureChain, mut rng: Stream) -> Self {
        let state = rng.random_range(0..chain.len());
        Self::with_state(chain, rng, state)
    }

    pub fn with_state(chain: SignatureChain, rng: Stream, state: usize) -> Self {
        assert!(state < chain.len(), "initial chain state out of range");
        let next_switch = chain.dwell;
        Self {
            chain,
            rng,
            state,
            previous: state,
            switched_at: 0.0,
            next_switch,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn chain(&self) -> &SignatureChain {
        &self.chain
    }

    /// Reference velocity at time `t`. Calls must use non-decreasing `t`.
    pub fn reference(&mut self, t: f64) -> f64 {
        while t >= self.next_switch {
            self.previous = self.state;
            self.state = self.chain.next_state(self.state, &mut self.rng);
            self.switched_at = self.next_switch;
            self.next_switch += self.chain.dwell;
        }
        let bins = &self.chain.bin_velocities;
        let w = ((t - self.switched_at) / self.chain.fade()).clamp(0.0, 1.0);
        bins[self.previous] * (1.0 - w) + bins[self.state] * w
    }
}

/// Stationary minimizer of the one-step surrogate cost before saturation.
///
/// With `h` the horizon and `f` the HKB drift, the prediction is
/// `v⁺ = v + h(f + u)`, `x⁺ = x + h v⁺`, and the cost
///
/// ```text
/// J(u) = θp/2 (x⁺ − r_p)² + θσ/2 h (v⁺ − ṙσ)² + θv/2 h (v⁺ − ṙp)² + η/2 h u²
/// ```
///
/// is a strictly convex quadratic in `u`.
pub fn vp_control_unclipped(
    state: OscillatorState,
    nb: NeighborMean,
    rdot_sigma: f64,
    p: &VpControlParams,
    hkb: &HkbParams,
) -> Result<f64> {
    let inputs = [state.x, state.v, nb.position, nb.velocity, rdot_sigma];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { term: "virtual player input" });
    }
    let h = p.horizon;
    let free_v = state.v + h * hkb.drift(state.x, state.v);
    let pos_err = state.x + h * free_v - nb.position;
    let sig_err = free_v - rdot_sigma;
    let vel_err = free_v - nb.velocity;
    let curvature = p.theta_p * h * h * h + (p.theta_sigma + p.theta_v) * h * h + p.eta;
    let u = -h * (p.theta_p * pos_err + p.theta_sigma * sig_err + p.theta_v * vel_err) / curvature;
    if !u.is_finite() {
        return Err(Error::NonFinite { term: "virtual player control" });
    }
    Ok(u)
}

/// Control input of a virtual player, saturated to `bounds`.
pub fn vp_control(
    state: OscillatorState,
    nb: NeighborMean,
    rdot_sigma: f64,
    p: &VpControlParams,
    hkb: &HkbParams,
    bounds: &ControlBounds,
) -> Result<f64> {
    vp_control_unclipped(state, nb, rdot_sigma, p, hkb).map(|u| bounds.clamp(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn weights_must_sum_to_one() {
        assert!(VpControlParams::new(0.8, 0.15, 0.05, 1e-4, 0.03).is_ok());
        assert!(VpControlParams::new(0.8, 0.15, 0.06, 1e-4, 0.03).is_err());
        assert!(VpControlParams::new(1.1, -0.1, 0.0, 1e-4, 0.03).is_err());
        assert!(VpControlParams::new(0.8, 0.15, 0.05, 0.0, 0.03).is_err());
        assert!(VpControlParams::new(0.8, 0.15, 0.05, 1e-4, 0.0).is_err());
    }

    #[test]
    fn role_presets() {
        let base = VpControlParams::default();
        let j = leader_follower_mix(&base, VpRole::JointImproviser);
        assert_eq!((j.theta_p(), j.theta_sigma(), j.theta_v()), (0.8, 0.15, 0.05));
        let l = leader_follower_mix(&base, VpRole::Leader);
        assert_eq!((l.theta_p(), l.theta_sigma(), l.theta_v()), (0.1, 0.85, 0.05));
        for role in [VpRole::Leader, VpRole::Follower, VpRole::JointImproviser] {
            let m = leader_follower_mix(&base, role);
            assert!((m.theta_p() + m.theta_sigma() + m.theta_v() - 1.0).abs() < 1e-12);
            assert_eq!(m.eta(), base.eta());
        }
    }

    #[test]
    fn zero_error_gives_zero_control() {
        let u = vp_control(
            OscillatorState::ORIGIN,
            NeighborMean::default(),
            0.0,
            &VpControlParams::default(),
            &HkbParams::default(),
            &ControlBounds::default(),
        )
        .unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn huge_effort_weight_suppresses_control() {
        let p = VpControlParams::new(0.8, 0.15, 0.05, 1e6, 0.03).unwrap();
        let nb = NeighborMean {
            position: 0.7,
            velocity: -0.4,
        };
        let u = vp_control(
            OscillatorState::new(-0.3, 0.5),
            nb,
            1.0,
            &p,
            &HkbParams::default(),
            &ControlBounds::default(),
        )
        .unwrap();
        assert!(u.abs() < 1e-3, "{u}");
    }

    #[test]
    fn saturation_applies() {
        let nb = NeighborMean {
            position: 5.0,
            velocity: 0.0,
        };
        let p = VpControlParams::default();
        let hkb = HkbParams::default();
        let raw = vp_control_unclipped(OscillatorState::ORIGIN, nb, 0.0, &p, &hkb).unwrap();
        assert!(raw > 20.0);
        let u = vp_control(OscillatorState::ORIGIN, nb, 0.0, &p, &hkb, &ControlBounds::default()).unwrap();
        assert_eq!(u, 20.0);
    }

    #[test]
    fn nan_inputs_rejected() {
        let r = vp_control(
            OscillatorState::new(f64::NAN, 0.0),
            NeighborMean::default(),
            0.0,
            &VpControlParams::default(),
            &HkbParams::default(),
            &ControlBounds::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn chain_validation() {
        assert!(SignatureChain::new(vec![0.0, 1.0], vec![0.5, 0.5, 1.0, 0.0], 0.8).is_ok());
        assert!(SignatureChain::new(vec![1.0, 0.0], vec![0.5, 0.5, 1.0, 0.0], 0.8).is_err());
        assert!(SignatureChain::new(vec![0.0, 1.0], vec![0.6, 0.5, 1.0, 0.0], 0.8).is_err());
        assert!(SignatureChain::new(vec![0.0, 1.0], vec![1.5, -0.5, 1.0, 0.0], 0.8).is_err());
        assert!(SignatureChain::new(vec![0.0, 1.0], vec![1.0, 0.0], 0.8).is_err());
        assert!(SignatureChain::new(vec![0.0, 1.0], vec![0.5, 0.5, 1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn built_in_chains_are_stochastic() {
        let bins = vec![-1.2, -0.8, -0.4, 0.0, 0.4, 0.8, 1.2];
        let walk = SignatureChain::reflecting_walk(bins.clone(), 0.5, 0.8).unwrap();
        assert_eq!(walk.row(0), &[0.75, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(walk.row(3), &[0.0, 0.0, 0.25, 0.5, 0.25, 0.0, 0.0]);
        let alt = SignatureChain::alternating(bins, 0.25, 0.8).unwrap();
        // fast positive bin lands on the fast negative side
        assert_eq!(alt.row(6), &[0.75, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(alt.row(4), &[0.0, 0.25, 0.75, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(alt.row(3), &[0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0]);
        let even = SignatureChain::alternating(vec![-1.0, -0.5, 0.5, 1.0], 0.25, 0.8).unwrap();
        assert_eq!(even.row(1), &[0.0, 0.0, 0.75, 0.25]);
    }

    #[test]
    fn single_state_chain_is_constant() {
        let chain = SignatureChain::new(vec![0.5], vec![1.0], 0.3).unwrap();
        let mut g = SignatureGenerator::new(chain, stream(1, &[0]));
        for i in 0..1000 {
            assert_eq!(g.reference(i as f64 * 0.03), 0.5);
        }
    }

    #[test]
    fn identity_chain_holds_initial_velocity() {
        let chain = SignatureChain::new(
            vec![-1.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            0.5,
        )
        .unwrap();
        let mut g = SignatureGenerator::new(chain, stream(9, &[1]));
        let v0 = g.reference(0.0);
        assert_eq!(v0, [-1.0, 0.0, 1.0][g.state()]);
        for i in 0..2000 {
            assert_eq!(g.reference(i as f64 * 0.03), v0);
        }
    }

    #[test]
    fn cross_fade_is_linear() {
        // deterministic flip between two bins
        let chain = SignatureChain::new(vec![-1.0, 1.0], vec![0.0, 1.0, 1.0, 0.0], 1.0).unwrap();
        let mut g = SignatureGenerator::with_state(chain, stream(0, &[]), 0);
        assert_eq!(g.reference(0.5), -1.0);
        assert!((g.reference(1.05) - 0.0).abs() < 1e-12);
        assert_eq!(g.reference(1.1), 1.0);
        assert_eq!(g.reference(1.9), 1.0);
        assert!((g.reference(2.025) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_state_frequencies() {
        let chain = SignatureChain::new(vec![-1.0, 1.0], vec![0.5, 0.5, 0.5, 0.5], 1.0).unwrap();
        let mut g = SignatureGenerator::new(chain, stream(42, &[7]));
        let periods = 100_000;
        let mut upper = 0usize;
        for k in 0..periods {
            g.reference(k as f64 + 0.5);
            upper += g.state();
        }
        let freq = upper as f64 / periods as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn chain_file_round_trip() {
        let chain = SignatureChain::default_with_dwell(0.9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.toml");
        std::fs::write(&path, chain.to_toml()).unwrap();
        assert_eq!(SignatureChain::load(&path).unwrap(), chain);
        std::fs::write(&path, "bin_velocities = [0.0]\ntransition = [0.5]\ndwell = 1.0\n").unwrap();
        assert!(SignatureChain::load(&path).is_err());
    }

    proptest! {
        #[test]
        fn unclipped_minimizer_is_linear_in_errors(
            x in -1.0f64..1.0, v in -1.0f64..1.0,
            ex in -0.5f64..0.5, es in -1.0f64..1.0, ev in -1.0f64..1.0,
        ) {
            let p = VpControlParams::default();
            let hkb = HkbParams::default();
            let h = p.horizon();
            let free_v = v + h * hkb.drift(x, v);
            let state = OscillatorState::new(x, v);
            let refs = |k: f64| {
                let nb = NeighborMean {
                    position: x + h * free_v - k * ex,
                    velocity: free_v - k * ev,
                };
                (nb, free_v - k * es)
            };
            let (nb1, s1) = refs(1.0);
            let (nb2, s2) = refs(2.0);
            let u1 = vp_control_unclipped(state, nb1, s1, &p, &hkb).unwrap();
            let u2 = vp_control_unclipped(state, nb2, s2, &p, &hkb).unwrap();
            prop_assert!((u2 - 2.0 * u1).abs() <= 1e-9 * (1.0 + u1.abs()));
        }
    }
}
