//! Coordination metrics.
//!
//! Phases come from the analytic signal (FFT-based Hilbert transform) of the
//! mean-removed position. Group synchrony is measured with the cluster-phase
//! method: each agent's phase relative to the group's mean phase, recentred
//! by its own circular time average, then combined into a mean resultant
//! length per sample and averaged over time.

use std::f64::consts::PI;
use std::ops::Range;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum length for spectral operations.
pub const MIN_SPECTRAL_LEN: usize = 16;
/// Fraction of samples discarded at each end of a Hilbert phase.
pub const EDGE_TRIM: f64 = 0.05;
/// Cluster-phase magnitudes below this leave the group phase undefined.
pub const DEGENERATE_CLUSTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: "time series" });
        }
        Ok(Self { values, dt })
    }

    /// Samples `f(i·dt)` for `i in 0..n`.
    pub fn from_fn(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| f(i as f64 * dt)).collect(), dt)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Unwrapped phase with the index range considered reliable.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    theta: Vec<f64>,
    valid: Range<usize>,
}

impl PhaseSeries {
    pub fn new(theta: Vec<f64>, valid: Range<usize>) -> Result<Self> {
        if valid.is_empty() || valid.end > theta.len() {
            return Err(Error::param("valid_range", format!("{valid:?} for {} samples", theta.len())));
        }
        if theta[valid.clone()].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: "phase" });
        }
        Ok(Self { theta, valid })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn valid_range(&self) -> Range<usize> {
        self.valid.clone()
    }
}

fn wrap(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Argument of the mean unit vector, or `None` if the vectors cancel.
pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        s += a.sin();
        c += a.cos();
        n += 1;
    }
    if n == 0 || (s * s + c * c).sqrt() / (n as f64) < DEGENERATE_CLUSTER {
        return None;
    }
    Some(s.atan2(c))
}

fn unwrap_in_place(theta: &mut [f64]) {
    let mut offset = 0.0;
    let mut prev = theta.first().copied().unwrap_or(0.0);
    for p in theta.iter_mut().skip(1) {
        let raw = *p;
        let d = raw - prev;
        if d > PI {
            offset -= 2.0 * PI * ((d - PI) / (2.0 * PI)).ceil();
        } else if d < -PI {
            offset += 2.0 * PI * ((-d - PI) / (2.0 * PI)).ceil();
        }
        prev = raw;
        *p = raw + offset;
    }
}

/// Analytic signal of the mean-removed series.
pub fn analytic_signal(x: &TimeSeries) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n < MIN_SPECTRAL_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_SPECTRAL_LEN,
            got: n,
        });
    }
    let mean = x.mean();
    let scale = x.values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if scale <= 1e-12 * mean.abs().max(1.0) {
        return Err(Error::ZeroVariance);
    }
    let mut buf: Vec<Complex64> = x.values.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // keep DC (and Nyquist for even n), double positive, zero negative bins
    let positive_end = n.div_ceil(2);
    for c in &mut buf[1..positive_end] {
        *c *= 2.0;
    }
    let negative_start = n / 2 + 1;
    for c in &mut buf[negative_start..] {
        *c = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    Ok(buf)
}

/// Instantaneous phase via the Hilbert transform, unwrapped, with 5 % of the
/// samples trimmed from each end.
pub fn hilbert_phase(x: &TimeSeries) -> Result<PhaseSeries> {
    let z = analytic_signal(x)?;
    let mut theta: Vec<f64> = z.iter().map(|c| c.im.atan2(c.re)).collect();
    unwrap_in_place(&mut theta);
    let n = theta.len();
    let trim = (EDGE_TRIM * n as f64).floor() as usize;
    PhaseSeries::new(theta, trim..n - trim)
}

/// Cluster phase `q = (1/N) Σ e^{jθ_k}` at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPhase {
    pub magnitude: f64,
    /// `None` when the unit vectors cancel.
    pub argument: Option<f64>,
}

pub fn cluster_phase(phases: &[PhaseSeries], i: usize) -> Result<ClusterPhase> {
    if phases.is_empty() {
        return Err(Error::param("phases", "need at least one agent"));
    }
    if let Some(p) = phases.iter().find(|p| !p.valid.contains(&i)) {
        return Err(Error::param("sample", format!("index {i} outside valid range {:?}", p.valid)));
    }
    Ok(cluster_at(phases, i))
}

fn cluster_at(phases: &[PhaseSeries], i: usize) -> ClusterPhase {
    let n = phases.len() as f64;
    let (s, c) = phases
        .iter()
        .fold((0.0, 0.0), |(s, c), p| (s + p.theta[i].sin(), c + p.theta[i].cos()));
    let magnitude = (s * s + c * c).sqrt() / n;
    ClusterPhase {
        magnitude,
        argument: (magnitude >= DEGENERATE_CLUSTER).then(|| s.atan2(c)),
    }
}

fn common_range(phases: &[PhaseSeries]) -> Range<usize> {
    let start = phases.iter().map(|p| p.valid.start).max().unwrap_or(0);
    let end = phases.iter().map(|p| p.valid.end).min().unwrap_or(0);
    start..end.max(start)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncIndex {
    pub rho_g: f64,
    /// Samples dropped because the cluster phase was undefined.
    pub excluded_samples: usize,
}

/// Group synchronisation index, time-averaged over the common valid range.
pub fn group_sync_index(phases: &[PhaseSeries]) -> Result<SyncIndex> {
    if phases.is_empty() {
        return Err(Error::param("phases", "need at least one agent"));
    }
    let range = common_range(phases);
    if range.len() < 2 {
        return Err(Error::param("phases", "common valid range shorter than 2 samples"));
    }
    let group: Vec<Option<f64>> = range.clone().map(|i| cluster_at(phases, i).argument).collect();
    let excluded_samples = group.iter().filter(|g| g.is_none()).count();
    if excluded_samples == group.len() {
        return Err(Error::param("phases", "cluster phase degenerate at every sample"));
    }

    // relative phase of each agent to the group, and its circular time mean
    let relative = |k: usize| {
        range
            .clone()
            .zip(&group)
            .filter_map(move |(i, g)| g.map(|g| phases[k].theta[i] - g))
    };
    let centres: Vec<f64> = (0..phases.len())
        .map(|k| circular_mean(relative(k)).unwrap_or(0.0))
        .collect();

    let n = phases.len() as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, g) in range.zip(&group) {
        let Some(g) = g else { continue };
        let (s, c) = phases.iter().zip(&centres).fold((0.0, 0.0), |(s, c), (p, m)| {
            let a = p.theta[i] - g - m;
            (s + a.sin(), c + a.cos())
        });
        total += (s * s + c * c).sqrt() / n;
        count += 1;
    }
    Ok(SyncIndex {
        rho_g: (total / count as f64).clamp(0.0, 1.0),
        excluded_samples,
    })
}

/// Shift maximising the cross-covariance between `a` and `b`.
///
/// The covariance at lag `ℓ` pairs `a(t + ℓ)` with `b(t)`, averaged over the
/// overlapping samples, so a positive lag means `b` leads `a`. Ties resolve
/// toward zero.
pub fn time_lag(a: &TimeSeries, b: &TimeSeries, max_lag: f64) -> Result<f64> {
    check_aligned(a, b)?;
    let n = a.len();
    if !(max_lag.is_finite() && max_lag >= 0.0) || max_lag > 0.25 * a.duration() + 1e-12 {
        return Err(Error::param("max_lag", format!("must lie in [0, 25% of duration], got {max_lag}")));
    }
    let max_shift = ((max_lag / a.dt) + 1e-9).floor() as isize;
    let demean = |s: &TimeSeries| {
        let m = s.mean();
        let v: Vec<f64> = s.values.iter().map(|x| x - m).collect();
        if v.iter().all(|x| x.abs() <= 1e-12 * m.abs().max(1.0)) {
            Err(Error::ZeroVariance)
        } else {
            Ok(v)
        }
    };
    let (a0, b0) = (demean(a)?, demean(b)?);
    let cov = |lag: isize| {
        let (sa, sb) = if lag >= 0 { (lag as usize, 0) } else { (0, (-lag) as usize) };
        let len = n - lag.unsigned_abs();
        a0[sa..sa + len]
            .iter()
            .zip(&b0[sb..sb + len])
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / len as f64
    };
    let mut best_lag = 0isize;
    let mut best = cov(0);
    for m in 1..=max_shift {
        for lag in [-m, m] {
            let c = cov(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    Ok(best_lag as f64 * a.dt)
}

fn check_aligned(a: &TimeSeries, b: &TimeSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if (a.dt - b.dt).abs() > 1e-12 * a.dt {
        return Err(Error::param("dt", "series sampled at different rates"));
    }
    if a.is_empty() {
        return Err(Error::SeriesTooShort { needed: 1, got: 0 });
    }
    Ok(())
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign-aware position error between a player and its neighbor mean.
///
/// Where the sign of the mean velocity equals the (nonzero) sign of the
/// player's position the error is `(x̄ − x_p)·sgn(ẋ̄)`, otherwise `|x̄ − x_p|`.
pub fn relative_position_error(xbar: &TimeSeries, xbar_dot: &TimeSeries, xp: &TimeSeries) -> Result<TimeSeries> {
    check_aligned(xbar, xbar_dot)?;
    check_aligned(xbar, xp)?;
    let values = xbar
        .values
        .iter()
        .zip(&xbar_dot.values)
        .zip(&xp.values)
        .map(|((&m, &md), &p)| {
            let s = sgn(md);
            if s != 0.0 && s == sgn(p) {
                (m - p) * s
            } else {
                (m - p).abs()
            }
        })
        .collect();
    TimeSeries::new(values, xbar.dt)
}

/// Root mean square of `x_p − x̄`.
pub fn rms_to_mean(xp: &TimeSeries, xbar: &TimeSeries) -> Result<f64> {
    check_aligned(xp, xbar)?;
    let ss: f64 = xp.values.iter().zip(&xbar.values).map(|(p, m)| (p - m) * (p - m)).sum();
    Ok((ss / xp.len() as f64).sqrt())
}

/// Circular mean of `θ_x̄ − θ_p` over the common valid range, in (−π, π].
pub fn relative_phase_error(xbar: &TimeSeries, xp: &TimeSeries) -> Result<f64> {
    check_aligned(xbar, xp)?;
    let a = hilbert_phase(xbar)?;
    let b = hilbert_phase(xp)?;
    let range = common_range(&[a.clone(), b.clone()]);
    let mean = circular_mean(range.map(|i| a.theta[i] - b.theta[i]))
        .ok_or_else(|| Error::param("phase", "relative phase has no circular mean"))?;
    Ok(wrap(mean))
}

/// Per-trial comparison of one player against its neighbor mean plus the
/// whole group's synchrony.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub rho_g: f64,
    pub delta_phi: f64,
    pub rms: f64,
    pub time_lag: f64,
    pub rpe_mean: f64,
    #[serde(skip)]
    pub rpe_series: Option<TimeSeries>,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub rho_g: Summary,
    pub delta_phi: Summary,
    pub rms: Summary,
    pub time_lag: Summary,
    pub rpe_mean: Summary,
}

impl MetricsSummary {
    pub fn of(trials: &[TrialMetrics]) -> Self {
        let col = |f: fn(&TrialMetrics) -> f64| Summary::of(&trials.iter().map(f).collect::<Vec<_>>());
        Self {
            rho_g: col(|m| m.rho_g),
            delta_phi: col(|m| m.delta_phi),
            rms: col(|m| m.rms),
            time_lag: col(|m| m.time_lag),
            rpe_mean: col(|m| m.rpe_mean),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    const DT: f64 = 0.03;

    fn samples(seconds: f64) -> usize {
        (seconds / DT).round() as usize
    }

    fn phase_from(theta: Vec<f64>) -> PhaseSeries {
        let n = theta.len();
        PhaseSeries::new(theta, 0..n).unwrap()
    }

    #[test]
    fn cosine_phase_advances_at_its_frequency() {
        let w = 2.0 * PI * 0.5;
        let x = TimeSeries::from_fn(samples(60.0), DT, |t| (w * t).cos()).unwrap();
        let p = hilbert_phase(&x).unwrap();
        let r = p.valid_range();
        assert_eq!(r, 100..1900);
        for i in r.start..r.end - 1 {
            let f = (p.theta()[i + 1] - p.theta()[i]) / DT;
            assert!((f - w).abs() < 0.01 * w, "sample {i}: {f}");
        }
    }

    #[test]
    fn quadrature_pair_is_a_quarter_turn_apart() {
        let w = 2.0 * PI * 0.5;
        let n = samples(60.0);
        let s = hilbert_phase(&TimeSeries::from_fn(n, DT, |t| (w * t).sin()).unwrap()).unwrap();
        let c = hilbert_phase(&TimeSeries::from_fn(n, DT, |t| (w * t).cos()).unwrap()).unwrap();
        for i in s.valid_range() {
            let d = wrap(c.theta()[i] - s.theta()[i]);
            assert!((d - PI / 2.0).abs() < 0.02, "{i}: {d}");
        }
    }

    #[test]
    fn analytic_signal_keeps_real_part() {
        let x = TimeSeries::from_fn(101, DT, |t| (3.0 * t).sin() + 0.3 * (7.0 * t).cos()).unwrap();
        let z = analytic_signal(&x).unwrap();
        let m = x.mean();
        for (c, v) in z.iter().zip(x.values()) {
            assert!((c.re - (v - m)).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_errors() {
        assert!(matches!(
            hilbert_phase(&TimeSeries::new(vec![0.4; 64], DT).unwrap()),
            Err(Error::ZeroVariance)
        ));
        assert!(matches!(
            hilbert_phase(&TimeSeries::new(vec![0.0; 15], DT).unwrap()),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(TimeSeries::new(vec![0.0, f64::NAN], DT).is_err());
        assert!(TimeSeries::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn cluster_phase_examples() {
        let same = [phase_from(vec![0.3]), phase_from(vec![0.3]), phase_from(vec![0.3])];
        let q = cluster_phase(&same, 0).unwrap();
        assert!((q.magnitude - 1.0).abs() < 1e-15 && (q.argument.unwrap() - 0.3).abs() < 1e-15);

        let quarter = [phase_from(vec![0.0]), phase_from(vec![PI / 2.0])];
        let q = cluster_phase(&quarter, 0).unwrap();
        assert!((q.magnitude - 0.7071067811865476).abs() < 1e-15);
        assert!((q.argument.unwrap() - 0.7853981633974483).abs() < 1e-15);

        let anti = [phase_from(vec![0.0]), phase_from(vec![PI])];
        let q = cluster_phase(&anti, 0).unwrap();
        assert!(q.magnitude < 1e-15 && q.argument.is_none());

        assert!(cluster_phase(&[], 0).is_err());
        assert!(cluster_phase(&same, 1).is_err());
    }

    #[test]
    fn identical_agents_are_fully_synchronised() {
        let theta: Vec<f64> = (0..500).map(|i| 0.1 * i as f64 + (0.05 * i as f64).sin()).collect();
        let phases = vec![phase_from(theta); 4];
        let s = group_sync_index(&phases).unwrap();
        assert!((s.rho_g - 1.0).abs() < 1e-12);
        assert_eq!(s.excluded_samples, 0);
    }

    #[test]
    fn constant_offsets_are_absorbed() {
        let base: Vec<f64> = (0..500).map(|i| 0.07 * i as f64).collect();
        let phases: Vec<_> = [0.0, 0.4, -1.1, 2.0]
            .iter()
            .map(|o| phase_from(base.iter().map(|b| b + o).collect()))
            .collect();
        assert!((group_sync_index(&phases).unwrap().rho_g - 1.0).abs() < 1e-9);
    }

    #[test]
    fn antiphase_samples_are_excluded() {
        let phases = [phase_from(vec![0.0, 0.0, 0.1]), phase_from(vec![PI, 0.0, 0.1])];
        let s = group_sync_index(&phases).unwrap();
        assert_eq!(s.excluded_samples, 1);
        assert!((s.rho_g - 1.0).abs() < 1e-12);
    }

    fn random_walk_phases(seed: u64) -> Vec<PhaseSeries> {
        let mut rng = stream(seed, &[17]);
        (0..4)
            .map(|_| {
                let mut th = 0.0;
                phase_from(
                    (0..2000)
                        .map(|_| {
                            th += rng.random_range(-0.3..0.3);
                            th
                        })
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn independent_random_walks_are_not_synchronised() {
        let values: Vec<f64> = (0..100)
            .map(|s| group_sync_index(&random_walk_phases(s)).unwrap().rho_g)
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        eprintln!("random-walk rho_g mean over 100 seeds: {mean}");
        assert!(mean < 0.5, "{mean}");
        assert!((mean - 0.481343178698748).abs() < 1e-9, "{mean}");
    }

    #[test]
    fn lag_of_identical_series_is_zero() {
        let a = TimeSeries::from_fn(1000, DT, |t| (PI * t).sin() + 0.2 * (5.1 * t).cos()).unwrap();
        assert_eq!(time_lag(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn lag_of_delayed_sinusoid() {
        let w = 2.0 * PI * 0.5;
        let n = samples(30.0);
        let a = TimeSeries::from_fn(n, DT, |t| (w * t).sin()).unwrap();
        let b = TimeSeries::from_fn(n, DT, |t| (w * (t - 0.12)).sin()).unwrap();
        let lag = time_lag(&a, &b, 0.5).unwrap();
        assert!((lag + 0.12).abs() <= 0.03 + 1e-12, "{lag}");
        assert!((time_lag(&b, &a, 0.5).unwrap() - 0.12).abs() <= 0.03 + 1e-12);
    }

    #[test]
    fn lag_errors() {
        let a = TimeSeries::from_fn(100, DT, |t| t.sin()).unwrap();
        let flat = TimeSeries::new(vec![1.0; 100], DT).unwrap();
        assert!(time_lag(&a, &flat, 0.3).is_err());
        assert!(time_lag(&a, &a, 1.0).is_err());
        let short = TimeSeries::from_fn(99, DT, |t| t.sin()).unwrap();
        assert!(time_lag(&a, &short, 0.3).is_err());
    }

    #[test]
    fn rpe_examples() {
        let one = |v: f64| TimeSeries::new(vec![v], DT).unwrap();
        let rpe = |m, md, p| relative_position_error(&one(m), &one(md), &one(p)).unwrap().values()[0];
        assert!((rpe(0.5, 1.0, 0.2) - 0.3).abs() < 1e-15);
        assert!((rpe(0.5, 1.0, -0.2) - 0.7).abs() < 1e-15);
        assert_eq!(rpe(0.5, 1.0, 0.5), 0.0);
        // sgn(0) routes to the absolute branch
        assert!((rpe(0.5, 0.0, 0.2) - 0.3).abs() < 1e-15);
        assert!((rpe(-0.5, -1.0, -0.2) - 0.3).abs() < 1e-15);
        assert!((rpe(0.2, -1.0, -0.5) - (-0.7)).abs() < 1e-15);
    }

    #[test]
    fn rms_examples() {
        let a = TimeSeries::from_fn(200, DT, |t| t.cos()).unwrap();
        assert_eq!(rms_to_mean(&a, &a).unwrap(), 0.0);
        let shifted = TimeSeries::new(a.values().iter().map(|v| v - 0.25).collect(), DT).unwrap();
        assert!((rms_to_mean(&shifted, &a).unwrap() - 0.25).abs() < 1e-12);
        // ten full periods of sin, densely sampled
        let n = 100_000;
        let dt = 20.0 * PI / n as f64;
        let s = TimeSeries::from_fn(n, dt, f64::sin).unwrap();
        let zero = TimeSeries::new(vec![0.0; n], dt).unwrap();
        assert!((rms_to_mean(&s, &zero).unwrap() - 0.5f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn relative_phase_examples() {
        let w = 2.0 * PI * 0.5;
        let n = samples(60.0);
        let xbar = TimeSeries::from_fn(n, DT, |t| (w * t).sin()).unwrap();
        assert!(relative_phase_error(&xbar, &xbar).unwrap().abs() < 1e-12);
        let delayed = TimeSeries::from_fn(n, DT, |t| (w * (t - 0.1)).sin()).unwrap();
        let d = relative_phase_error(&xbar, &delayed).unwrap();
        assert!((d - w * 0.1).abs() < 0.02, "{d}");
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - 1.2909944487358056).abs() < 1e-15);
        assert_eq!(Summary::of(&[2.0]).sd, 0.0);
    }

    proptest! {
        #[test]
        fn common_time_varying_offset_leaves_rho_unchanged(seed in 0u64..1000, amp in 0.1f64..3.0) {
            let phases = random_walk_phases(seed);
            let shifted: Vec<_> = phases
                .iter()
                .map(|p| phase_from(p.theta().iter().enumerate()
                    .map(|(i, t)| t + amp * (0.013 * i as f64).sin() + 0.002 * i as f64)
                    .collect()))
                .collect();
            let a = group_sync_index(&phases).unwrap().rho_g;
            let b = group_sync_index(&shifted).unwrap().rho_g;
            prop_assert!((a - b).abs() < 1e-6);
        }

        #[test]
        fn per_agent_offsets_leave_locked_group_unchanged(
            offsets in prop::collection::vec(-PI..PI, 4),
            amp in 0.0f64..2.0,
        ) {
            let locked = |o: &[f64]| -> Vec<PhaseSeries> {
                o.iter()
                    .map(|o| phase_from((0..800).map(|i| 0.05 * i as f64 + amp * (0.01 * i as f64).sin() + o).collect()))
                    .collect()
            };
            let a = group_sync_index(&locked(&[0.0; 4])).unwrap().rho_g;
            let b = group_sync_index(&locked(&offsets)).unwrap().rho_g;
            prop_assert!((a - b).abs() < 1e-6);
        }

        #[test]
        fn per_agent_offsets_barely_move_a_jittered_group(
            seed in 0u64..1000,
            offsets in prop::collection::vec(-0.5f64..0.5, 4),
        ) {
            let mut rng = stream(seed, &[23]);
            let jitter: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..800).map(|_| rng.random_range(-0.2..0.2)).collect())
                .collect();
            let group = |o: &[f64]| -> Vec<PhaseSeries> {
                jitter
                    .iter()
                    .zip(o)
                    .map(|(j, o)| phase_from(j.iter().enumerate().map(|(i, e)| 0.05 * i as f64 + e + o).collect()))
                    .collect()
            };
            let a = group_sync_index(&group(&[0.0; 4])).unwrap().rho_g;
            let b = group_sync_index(&group(&offsets)).unwrap().rho_g;
            prop_assert!((a - b).abs() < 5e-3, "{} vs {}", a, b);
        }

        #[test]
        fn lag_is_antisymmetric(seed in 0u64..200) {
            let mut rng = stream(seed, &[5]);
            let mut acc = 0.0;
            let a: Vec<f64> = (0..400).map(|_| { acc = 0.9 * acc + rng.random_range(-1.0..1.0); acc }).collect();
            let shift = rng.random_range(0..10usize);
            let b: Vec<f64> = (0..400).map(|i| a[(i + 400 - shift) % 400] + 0.1 * rng.random_range(-1.0..1.0)).collect();
            let ta = TimeSeries::new(a, DT).unwrap();
            let tb = TimeSeries::new(b, DT).unwrap();
            let ab = time_lag(&ta, &tb, 0.9).unwrap();
            let ba = time_lag(&tb, &ta, 0.9).unwrap();
            prop_assert!((ab + ba).abs() < 1e-12);
        }

        #[test]
        fn rms_translation_invariant(xs in prop::collection::vec(-1.0f64..1.0, 2..50), c in -5.0f64..5.0) {
            let ys: Vec<f64> = xs.iter().rev().copied().collect();
            let a = TimeSeries::new(xs.clone(), DT).unwrap();
            let b = TimeSeries::new(ys.clone(), DT).unwrap();
            let a2 = TimeSeries::new(xs.iter().map(|x| x + c).collect(), DT).unwrap();
            let b2 = TimeSeries::new(ys.iter().map(|y| y + c).collect(), DT).unwrap();
            prop_assert!((rms_to_mean(&a, &b).unwrap() - rms_to_mean(&a2, &b2).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn rpe_branches(m in -1.0f64..1.0, md in -1.0f64..1.0, p in -1.0f64..1.0) {
            let one = |v: f64| TimeSeries::new(vec![v], DT).unwrap();
            let r = relative_position_error(&one(m), &one(md), &one(p)).unwrap().values()[0];
            prop_assert!(r >= ((m - p) * sgn(md)).min(0.0) - 1e-15);
            if sgn(md) != sgn(p) {
                prop_assert_eq!(r, (m - p).abs());
            }
        }
    }
}
