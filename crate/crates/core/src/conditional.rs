//! Conditional field and polarization after a detection, and the
//! capture/release feedback protocol built on them.
//!
//! With σ(t) the drive amplitude relative to its baseline and
//! G = 2g²N/γ′ the collective coupling,
//!
//! ```text
//! ζ̇ = σ(t)(κ + G) − κζ − Gθ
//! θ̇ = (γ′/2)(ζ − θ)
//! ```
//!
//! and g²(τ) = ζ(τ)². A constant scale σ has the single fixed point ζ = θ = σ,
//! so switching the drive to σ = ζ(T) at an instant where ζ(T) = θ(T) freezes
//! the state (capture), and restoring σ = 1 lets it carry on (release).

use serde::{Deserialize, Serialize};

use crate::drive::{DriveWaveform, FeedbackPulse};
use crate::error::{Error, Result};
use crate::model::{per_ns, SystemParams};
use crate::ode::{integrate, Tolerance};
use crate::roots::bisect;
use crate::steady_state::solve_amplitudes;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalState {
    pub zeta: f64,
    pub theta: f64,
}

impl ConditionalState {
    pub const STEADY: Self = Self {
        zeta: 1.0,
        theta: 1.0,
    };

    pub fn g2(&self) -> f64 {
        self.zeta * self.zeta
    }
}

/// g²(τ) on a grid, with optional per-point standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Series {
    pub tau_ns: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl G2Series {
    pub fn new(tau_ns: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            tau_ns,
            values,
            stderr: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tau_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_ns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tau_ns.iter().copied().zip(self.values.iter().copied())
    }
}

/// Uniform grid 0, dt, 2dt, … up to `tau_max_ns`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau_max_ns: f64,
    pub dt_ns: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            tau_max_ns: 300.0,
            dt_ns: 0.1,
        }
    }
}

impl TimeGrid {
    pub fn new(tau_max_ns: f64, dt_ns: f64) -> Result<Self> {
        let g = Self { tau_max_ns, dt_ns };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ns > 0.0 && self.tau_max_ns > 0.0 && self.tau_max_ns.is_finite()) {
            return Err(crate::error::param(
                "grid",
                format!("need dt > 0 and tau_max > 0, got {} / {}", self.dt_ns, self.tau_max_ns),
            ));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = (self.tau_max_ns / self.dt_ns + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.dt_ns).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingMode {
    /// ζ increasing through the crossing, which needs ζ(T) < 1.
    Rising,
    /// ζ decreasing through the crossing, which needs ζ(T) > 1.
    Falling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureSolution {
    pub t_capture_ns: f64,
    pub zeta_at_t: f64,
    pub theta_at_t: f64,
    /// ζ(T)² − 1.
    pub intensity_step: f64,
    /// ζ(T)·λ.
    pub lambda_prime: f64,
}

impl CaptureSolution {
    /// Instantaneous pulse at T with exactly the capturing step.
    pub fn exact_pulse(&self, duration_ns: f64) -> FeedbackPulse {
        FeedbackPulse::instantaneous(self.t_capture_ns, duration_ns, self.intensity_step)
    }
}

/// Linear rates of the (ζ, θ) system in 1/ns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dynamics {
    pub kappa: f64,
    pub coupling: f64,
    pub gamma_perp: f64,
}

impl Dynamics {
    pub fn new(params: &SystemParams) -> Self {
        let r = params.angular();
        Self {
            kappa: per_ns(r.kappa),
            coupling: per_ns(r.collective_coupling()),
            gamma_perp: per_ns(r.gamma_perp()),
        }
    }

    pub fn derivative(&self, sigma: f64, y: &[f64; 2]) -> [f64; 2] {
        let [zeta, theta] = *y;
        [
            sigma * (self.kappa + self.coupling) - self.kappa * zeta - self.coupling * theta,
            self.gamma_perp * (zeta - theta),
        ]
    }

    /// Eigenvalues of the homogeneous 2×2 system as (decay rate, angular
    /// frequency) in 1/ns; the frequency is 0 when overdamped.
    pub fn eigen(&self) -> (f64, f64) {
        let mean = 0.5 * (self.kappa + self.gamma_perp);
        let half_diff = 0.5 * (self.kappa - self.gamma_perp);
        let disc = self.coupling * self.gamma_perp - half_diff * half_diff;
        (mean, disc.max(0.0).sqrt())
    }

    pub fn is_underdamped(&self) -> bool {
        let half_diff = 0.5 * (self.kappa - self.gamma_perp);
        self.coupling * self.gamma_perp > half_diff * half_diff
    }
}

/// Evolves (ζ, θ) from `t_grid[0]` and reports the state at each grid time.
pub fn evolve(
    initial: ConditionalState,
    params: &SystemParams,
    drive: &DriveWaveform,
    t_grid: &[f64],
) -> Result<Vec<ConditionalState>> {
    params.validate()?;
    let (Some(&t0), Some(&t1)) = (t_grid.first(), t_grid.last()) else {
        return Ok(Vec::new());
    };
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(crate::error::param("t_grid", "times must be strictly increasing"));
    }
    if t0 == t1 {
        return Ok(vec![initial]);
    }
    let dynamics = Dynamics::new(params);
    let knots = drive.segment_knots(t0, t1);
    let segments: Vec<_> = knots.windows(2).map(|k| drive.segment(k[0], k[1])).collect();
    let ys = integrate(
        |seg, t, y| dynamics.derivative(segments[seg].amplitude(t), y),
        [initial.zeta, initial.theta],
        &knots,
        t_grid,
        Tolerance::default(),
    )?;
    Ok(ys
        .into_iter()
        .map(|[zeta, theta]| ConditionalState { zeta, theta })
        .collect())
}

fn initial_state(params: &SystemParams) -> Result<ConditionalState> {
    let sol = solve_amplitudes(params)?;
    Ok(ConditionalState {
        zeta: sol.zeta0,
        theta: sol.theta0,
    })
}

fn series(tau: Vec<f64>, states: &[ConditionalState]) -> G2Series {
    G2Series::new(tau, states.iter().map(ConditionalState::g2).collect())
}

/// g²(τ) = ζ(τ)² after a detection, constant drive.
pub fn g2_free(params: &SystemParams, grid: TimeGrid) -> Result<G2Series> {
    grid.validate()?;
    let tau = grid.points();
    let states = evolve(initial_state(params)?, params, &DriveWaveform::constant(params.epsilon), &tau)?;
    Ok(series(tau, &states))
}

/// g²(τ) with one feedback pulse applied to the drive.
pub fn simulate_capture_release(
    params: &SystemParams,
    pulse: &FeedbackPulse,
    grid: TimeGrid,
) -> Result<G2Series> {
    grid.validate()?;
    if pulse.start_ns < 0.0 {
        return Err(Error::Drive(format!("pulse start {} ns is negative", pulse.start_ns)));
    }
    let drive = DriveWaveform::new(params.epsilon, vec![pulse.clone()])?;
    let tau = grid.points();
    let states = evolve(initial_state(params)?, params, &drive, &tau)?;
    Ok(series(tau, &states))
}

/// Free evolution sampled on a uniform scan grid, for root bracketing.
struct FreeScan {
    dynamics: Dynamics,
    times: Vec<f64>,
    states: Vec<ConditionalState>,
}

const SCAN_STEP_NS: f64 = 0.25;

impl FreeScan {
    fn new(params: &SystemParams, from_ns: f64, to_ns: f64) -> Result<Self> {
        let n = ((to_ns / SCAN_STEP_NS).ceil() as usize).max(1);
        let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * SCAN_STEP_NS).collect();
        // include the scan start exactly
        if from_ns > 0.0 && !times.contains(&from_ns) {
            times.push(from_ns);
            times.sort_by(f64::total_cmp);
        }
        let states = evolve(
            initial_state(params)?,
            params,
            &DriveWaveform::constant(params.epsilon),
            &times,
        )?;
        Ok(Self {
            dynamics: Dynamics::new(params),
            times,
            states,
        })
    }

    /// State at an arbitrary time by a short propagation from the nearest
    /// earlier scan point.
    fn state_at(&self, t: f64, params: &SystemParams) -> Result<ConditionalState> {
        let i = self.times.partition_point(|&x| x <= t).saturating_sub(1);
        let t0 = self.times[i];
        if t == t0 {
            return Ok(self.states[i]);
        }
        let ys = evolve(
            self.states[i],
            params,
            &DriveWaveform::constant(params.epsilon),
            &[t0, t],
        )?;
        Ok(ys[1])
    }

    fn zeta_rate(&self, s: &ConditionalState) -> f64 {
        self.dynamics.derivative(1.0, &[s.zeta, s.theta])[0]
    }

    /// First root of `f` after `after_ns` picked by `accept`, refined by
    /// bisection.
    fn first_root(
        &self,
        params: &SystemParams,
        after_ns: f64,
        f: impl Fn(&Self, &ConditionalState) -> f64,
        accept: impl Fn(&Self, &ConditionalState) -> bool,
    ) -> Result<Option<(f64, ConditionalState)>> {
        let start = self.times.partition_point(|&x| x < after_ns);
        for i in start..self.times.len().saturating_sub(1) {
            let (a, b) = (f(self, &self.states[i]), f(self, &self.states[i + 1]));
            if a == 0.0 && self.times[i] > after_ns && accept(self, &self.states[i]) {
                return Ok(Some((self.times[i], self.states[i])));
            }
            if a * b < 0.0 {
                let t = bisect(
                    |t| Ok(f(self, &self.state_at(t, params)?)),
                    self.times[i],
                    self.times[i + 1],
                    1e-9,
                )?;
                let s = self.state_at(t, params)?;
                if accept(self, &s) {
                    return Ok(Some((t, s)));
                }
            }
        }
        Ok(None)
    }
}

/// Tolerance on |ζ − θ| at a refined crossing.
pub const CROSSING_TOLERANCE: f64 = 1e-10;

/// Default guard skipping the τ = 0 neighbourhood.
pub const DEFAULT_GUARD_NS: f64 = 5.0;

/// First time after `guard_ns` where ζ = θ with ζ moving in the given direction.
pub fn find_capture(
    params: &SystemParams,
    mode: CrossingMode,
    guard_ns: f64,
) -> Result<CaptureSolution> {
    params.validate()?;
    if !(guard_ns >= 0.0 && guard_ns.is_finite()) {
        return Err(crate::error::param("guard_ns", "must be finite and non-negative"));
    }
    let dynamics = Dynamics::new(params);
    if dynamics.coupling == 0.0 {
        return Err(Error::NoCapture(
            "no atom-field coupling: ζ and θ stay equal, the crossing is degenerate".into(),
        ));
    }
    if !dynamics.is_underdamped() {
        return Err(Error::NoCapture(
            "overdamped: the conditional state relaxes without oscillating".into(),
        ));
    }
    let horizon = guard_ns + 10.0 * params.damping_time_ns();
    let scan = FreeScan::new(params, guard_ns, horizon)?;
    let found = scan.first_root(
        params,
        guard_ns,
        |_, s| s.zeta - s.theta,
        |sc, s| match mode {
            CrossingMode::Rising => sc.zeta_rate(s) > 0.0,
            CrossingMode::Falling => sc.zeta_rate(s) < 0.0,
        },
    )?;
    let (t, s) = found.ok_or_else(|| {
        Error::NoCapture(format!(
            "no {mode:?} crossing of ζ and θ between {guard_ns} and {horizon:.1} ns"
        ))
    })?;
    if (s.zeta - s.theta).abs() > CROSSING_TOLERANCE {
        return Err(Error::NoCapture(format!(
            "crossing at {t} ns did not converge: |ζ − θ| = {:e}",
            (s.zeta - s.theta).abs()
        )));
    }
    let lambda = crate::model::derived_rates(params)?.lambda;
    Ok(CaptureSolution {
        t_capture_ns: t,
        zeta_at_t: s.zeta,
        theta_at_t: s.theta,
        intensity_step: s.zeta * s.zeta - 1.0,
        lambda_prime: s.zeta * lambda,
    })
}

/// Response of the feedback at the first extremum of the free oscillation
/// after the pulse starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub intensity_step: f64,
    pub tau_star_ns: f64,
    /// g² with feedback at τ* minus the ideal plateau 1 + s.
    pub response: f64,
}

pub fn response_at_tau_star(params: &SystemParams, pulse: &FeedbackPulse) -> Result<Response> {
    pulse.validate()?;
    let scan = FreeScan::new(params, pulse.start_ns, pulse.end_ns())?;
    let (tau_star, _) = scan
        .first_root(params, pulse.start_ns, |sc, s| sc.zeta_rate(s), |_, _| true)?
        .ok_or_else(|| {
            Error::Protocol(format!(
                "free g2 has no extremum inside the pulse [{}, {}) ns",
                pulse.start_ns,
                pulse.end_ns()
            ))
        })?;
    if tau_star >= pulse.end_ns() {
        return Err(Error::Protocol(format!(
            "first extremum at {tau_star} ns falls after the pulse ends"
        )));
    }
    let drive = DriveWaveform::new(params.epsilon, vec![pulse.clone()])?;
    let states = evolve(initial_state(params)?, params, &drive, &[0.0, tau_star])?;
    Ok(Response {
        intensity_step: pulse.intensity_step,
        tau_star_ns: tau_star,
        response: states[1].g2() - (1.0 + pulse.intensity_step),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<Response>,
    /// Number of repeated steps dropped from the input list.
    pub duplicates_removed: usize,
}

/// Runs [`response_at_tau_star`] for each step; rows sorted by step.
pub fn sweep_steps(
    params: &SystemParams,
    template: &FeedbackPulse,
    steps: &[f64],
) -> Result<SweepTable> {
    let mut sorted = steps.to_vec();
    if let Some(bad) = sorted.iter().find(|s| !s.is_finite()) {
        return Err(crate::error::param("steps", format!("{bad} is not finite")));
    }
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let duplicates_removed = steps.len() - sorted.len();
    let rows = sorted
        .into_iter()
        .map(|s| response_at_tau_star(params, &template.clone().with_step(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        rows,
        duplicates_removed,
    })
}
