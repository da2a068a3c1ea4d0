//! End-effector dynamics.
//!
//! Virtual players move as a controlled HKB oscillator
//!
//! ```text
//! ẍ + (α x² + β ẋ² − γ) ẋ + ω² x = u
//! ```
//!
//! while the cyber player's plant is a plain double integrator driven by the
//! chosen acceleration. Both integrate with the control held constant over
//! the step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible |x| before a trajectory counts as diverged.
pub const POSITION_BOUND: f64 = 10.0;
/// Largest admissible |v| before a trajectory counts as diverged.
pub const VELOCITY_BOUND: f64 = 50.0;

/// Position and velocity of one end effector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillatorState {
    pub x: f64,
    pub v: f64,
}

impl OscillatorState {
    pub const ORIGIN: OscillatorState = OscillatorState { x: 0.0, v: 0.0 };

    pub const fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    /// Returns the state unchanged if it is finite and inside the guard box.
    pub fn guarded(self) -> Result<Self> {
        if !self.x.is_finite() {
            return Err(Error::NonFinite { term: "position" });
        }
        if !self.v.is_finite() {
            return Err(Error::NonFinite { term: "velocity" });
        }
        if self.x.abs() > POSITION_BOUND || self.v.abs() > VELOCITY_BOUND {
            return Err(Error::Diverged {
                x: self.x,
                v: self.v,
            });
        }
        Ok(self)
    }
}

/// HKB oscillator coefficients.
///
/// `gamma_damp` may take either sign: negative values make the origin a
/// stable focus, positive values give a limit cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHkb", into = "RawHkb")]
pub struct HkbParams {
    alpha: f64,
    beta: f64,
    gamma_damp: f64,
    omega: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHkb {
    alpha: f64,
    beta: f64,
    gamma_damp: f64,
    omega: f64,
}

impl TryFrom<RawHkb> for HkbParams {
    type Error = Error;
    fn try_from(r: RawHkb) -> Result<Self> {
        HkbParams::new(r.alpha, r.beta, r.gamma_damp, r.omega)
    }
}

impl From<HkbParams> for RawHkb {
    fn from(p: HkbParams) -> Self {
        RawHkb {
            alpha: p.alpha,
            beta: p.beta,
            gamma_damp: p.gamma_damp,
            omega: p.omega,
        }
    }
}

impl HkbParams {
    pub fn new(alpha: f64, beta: f64, gamma_damp: f64, omega: f64) -> Result<Self> {
        for (name, value) in [("alpha", alpha), ("beta", beta), ("gamma_damp", gamma_damp)] {
            if !value.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::param("omega", format!("must be positive, got {omega}")));
        }
        Ok(Self {
            alpha,
            beta,
            gamma_damp,
            omega,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma_damp(&self) -> f64 {
        self.gamma_damp
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Uncontrolled acceleration `−(αx² + βv² − γ)v − ω²x`.
    #[inline]
    pub fn drift(&self, x: f64, v: f64) -> f64 {
        -(self.alpha * x * x + self.beta * v * v - self.gamma_damp) * v - self.omega * self.omega * x
    }
}

impl Default for HkbParams {
    /// α = 1, β = 2, γ = −1, ω = 1.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            gamma_damp: -1.0,
            omega: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    dt: f64,
    method: Integrator,
}

impl StepConfig {
    pub fn new(dt: f64, method: Integrator) -> Result<Self> {
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(Error::param("dt", format!("must lie in (0, 0.1], got {dt}")));
        }
        Ok(Self { dt, method })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn method(&self) -> Integrator {
        self.method
    }
}

impl Default for StepConfig {
    /// RK4 at the 0.03 s control period.
    fn default() -> Self {
        Self {
            dt: 0.03,
            method: Integrator::Rk4,
        }
    }
}

/// Acceleration of the controlled HKB oscillator.
pub fn hkb_acceleration(state: OscillatorState, u: f64, p: &HkbParams) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFinite { term: "control input" });
    }
    let OscillatorState { x, v } = state;
    let damping = (p.alpha * x * x + p.beta * v * v - p.gamma_damp) * v;
    if !damping.is_finite() {
        return Err(Error::NonFinite { term: "damping term" });
    }
    let stiffness = p.omega * p.omega * x;
    if !stiffness.is_finite() {
        return Err(Error::NonFinite { term: "stiffness term" });
    }
    let acc = u - damping - stiffness;
    if !acc.is_finite() {
        return Err(Error::NonFinite { term: "acceleration" });
    }
    Ok(acc)
}

/// Advances the HKB oscillator by one step with `u` held constant.
pub fn step_oscillator(
    state: OscillatorState,
    u: f64,
    p: &HkbParams,
    cfg: &StepConfig,
) -> Result<OscillatorState> {
    let h = cfg.dt;
    let acc = |s: OscillatorState| hkb_acceleration(s, u, p);
    let next = match cfg.method {
        Integrator::Euler => {
            let a = acc(state)?;
            OscillatorState::new(state.x + h * state.v, state.v + h * a)
        }
        Integrator::Rk4 => {
            let OscillatorState { x, v } = state;
            let k1x = v;
            let k1v = acc(state)?;
            let k2x = v + 0.5 * h * k1v;
            let k2v = acc(OscillatorState::new(x + 0.5 * h * k1x, k2x))?;
            let k3x = v + 0.5 * h * k2v;
            let k3v = acc(OscillatorState::new(x + 0.5 * h * k2x, k3x))?;
            let k4x = v + h * k3v;
            let k4v = acc(OscillatorState::new(x + h * k3x, k4x))?;
            OscillatorState::new(
                x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
                v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            )
        }
    };
    next.guarded()
}

/// Exact constant-acceleration update of the cyber player's plant.
pub fn step_double_integrator(state: OscillatorState, u: f64, dt: f64) -> Result<OscillatorState> {
    if !u.is_finite() {
        return Err(Error::NonFinite { term: "control input" });
    }
    OscillatorState::new(
        state.x + state.v * dt + 0.5 * u * dt * dt,
        state.v + u * dt,
    )
    .guarded()
}
