//! Quantum-jump trajectories of the driven system with photodetection,
//! beam-splitter routing and detection-triggered drive pulses.
//!
//! Between jumps the unnormalized amplitudes follow ċ = A(σ)c with the
//! no-jump generator at the live drive scale σ; a jump fires when ‖c‖²
//! drops below a uniform variate. The drive is piecewise constant: ramps are
//! split into short substeps at their midpoint amplitude. For every constant
//! piece a ladder of propagators e^{A·h}, h = h₀, h₀/2, …, is precomputed so
//! that the jump time is found by bisection on the monotone norm.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{AmplitudeVector, ExcitationBasis};
use crate::drive::{DriveWaveform, FeedbackPulse};
use crate::error::{Error, Result};
use crate::model::{per_ns, SystemParams};
use crate::steady_state::{solve_amplitudes_full, GeneratorParts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Start,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub trajectory_id: u64,
    pub detector: Detector,
    pub time_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// Pulse shape and step; its `start_ns` is ignored.
    pub pulse: FeedbackPulse,
    pub trigger: Detector,
    /// Time from the triggering click to the start of the pulse.
    pub loop_delay_ns: f64,
    /// When false, clicks are ignored while a pulse is pending or running.
    /// When true, a click restarts the shaper: the drive returns to baseline
    /// and the new pulse begins after the loop delay.
    pub retrigger: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Steady state of the truncated no-jump equations (pure, weak drive).
    SteadyState,
    /// A basis state |photons, excited⟩.
    Basis { photons: u32, excited: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Recorded span per trajectory (ns), after the burn-in.
    pub duration_ns: f64,
    pub n_trajectories: u64,
    pub seed: u64,
    pub cutoff: usize,
    /// Probability that a cavity photon goes to the start detector.
    pub splitter_ratio: f64,
    pub start_efficiency: f64,
    pub stop_efficiency: f64,
    pub feedback: Option<FeedbackConfig>,
    pub initial: InitialState,
    /// Unrecorded evolution before the record begins (ns).
    pub burn_in_ns: f64,
    /// Largest propagation step (ns).
    pub coarse_step_ns: f64,
    /// Jump-time resolution (ns).
    pub resolution_ns: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration_ns: 1000.0,
            n_trajectories: 1000,
            seed: 0,
            cutoff: 3,
            splitter_ratio: 0.5,
            start_efficiency: 1.0,
            stop_efficiency: 1.0,
            feedback: None,
            initial: InitialState::SteadyState,
            burn_in_ns: 0.0,
            coarse_step_ns: 8.0,
            resolution_ns: 0.02,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Trajectory(m));
        if !(self.duration_ns > 0.0 && self.duration_ns.is_finite()) {
            return bad(format!("duration {} ns must be positive", self.duration_ns));
        }
        if self.n_trajectories == 0 {
            return bad("at least one trajectory is required".into());
        }
        for (name, p) in [
            ("splitter_ratio", self.splitter_ratio),
            ("start_efficiency", self.start_efficiency),
            ("stop_efficiency", self.stop_efficiency),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.burn_in_ns >= 0.0 && self.burn_in_ns.is_finite()) {
            return bad("burn-in must be finite and non-negative".into());
        }
        if !(self.coarse_step_ns > 0.0 && self.resolution_ns > 0.0)
            || self.resolution_ns > self.coarse_step_ns
        {
            return bad("need 0 < resolution ≤ coarse step".into());
        }
        if let Some(fb) = &self.feedback {
            fb.pulse.validate()?;
            if !(fb.loop_delay_ns >= 0.0 && fb.loop_delay_ns.is_finite()) {
                return bad("loop delay must be finite and non-negative".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n_trajectories: u64,
    /// Recorded time summed over trajectories (ns).
    pub recorded_ns: f64,
    pub cavity_jumps: u64,
    pub atomic_jumps: u64,
    pub start_clicks: u64,
    pub stop_clicks: u64,
    pub pulses: u64,
}

impl RunStats {
    fn add(&mut self, o: &RunStats) {
        self.n_trajectories += o.n_trajectories;
        self.recorded_ns += o.recorded_ns;
        self.cavity_jumps += o.cavity_jumps;
        self.atomic_jumps += o.atomic_jumps;
        self.start_clicks += o.start_clicks;
        self.stop_clicks += o.stop_clicks;
        self.pulses += o.pulses;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Ordered by trajectory, then time.
    pub clicks: Vec<ClickRecord>,
    pub stats: RunStats,
}

/// Propagators e^{A·h} for h = top, top/2, … down to the resolution.
struct Ladder {
    generator: DMatrix<f64>,
    steps: Vec<f64>,
    maps: Vec<DMatrix<f64>>,
}

impl Ladder {
    fn new(generator: DMatrix<f64>, top: f64, resolution: f64) -> Self {
        let levels = ((top / resolution).log2().ceil().max(0.0) as usize) + 1;
        let steps: Vec<f64> = (0..levels).map(|j| top / 2f64.powi(j as i32)).collect();
        // square up from the finest step for consistency across levels
        let finest = (&generator * steps[levels - 1]).exp();
        let mut maps = vec![finest];
        for _ in 1..levels {
            let prev = maps.last().unwrap();
            maps.push(prev * prev);
        }
        maps.reverse();
        Self {
            generator,
            steps,
            maps,
        }
    }
}

/// A constant-drive piece of the pulse, relative to the pulse start.
#[derive(Clone, Copy, Debug)]
struct Piece {
    to: f64,
    ladder: usize,
}

struct Engine {
    basis: ExcitationBasis,
    ladders: Vec<Ladder>,
    baseline: usize,
    pulse_pieces: Vec<Piece>,
    pulse_length: f64,
    initial: DVector<f64>,
    photons: Vec<f64>,
    excited: Vec<f64>,
    cavity_rate: f64,
    atomic_rate: f64,
    // (source index, target index, factor) for the two lowering maps
    photon_map: Vec<(usize, usize, f64)>,
    atom_map: Vec<(usize, usize, f64)>,
}

/// Ramp substep length (ns).
const RAMP_SUBSTEP_NS: f64 = 0.25;

impl Engine {
    fn new(params: &SystemParams, cfg: &TrajectoryConfig) -> Result<Self> {
        let basis = ExcitationBasis::new(params.n_atoms, cfg.cutoff)?;
        let parts = GeneratorParts::new(params, &basis);
        let eps = params.angular().epsilon;
        let mut ladders = Vec::new();
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut ladder_for = |sigma: f64, top: f64, ladders: &mut Vec<Ladder>| -> usize {
            *index.entry((sigma.to_bits(), top.to_bits())).or_insert_with(|| {
                // rates are in rad/µs; steps in ns
                let gen = parts.assemble(eps * sigma) * 1e-3;
                ladders.push(Ladder::new(gen, top, cfg.resolution_ns));
                ladders.len() - 1
            })
        };
        let baseline = ladder_for(1.0, cfg.coarse_step_ns, &mut ladders);

        let mut pulse_pieces = Vec::new();
        let mut pulse_length = 0.0;
        if let Some(fb) = &cfg.feedback {
            let p = fb.pulse.clone().with_start(0.0);
            let wave = DriveWaveform::new(1.0, vec![p.clone()])?;
            let knots = wave.segment_knots(0.0, p.duration_ns);
            for k in knots.windows(2) {
                let seg = wave.segment(k[0], k[1]);
                let len = k[1] - k[0];
                if seg.start == seg.end {
                    let sigma = seg.start.sqrt();
                    let top = cfg.coarse_step_ns.min(len);
                    pulse_pieces.push(Piece {
                        to: k[1],
                        ladder: ladder_for(sigma, top, &mut ladders),
                    });
                } else {
                    let n = (len / RAMP_SUBSTEP_NS).ceil().max(1.0) as usize;
                    let h = len / n as f64;
                    for i in 0..n {
                        let a = k[0] + i as f64 * h;
                        let b = if i + 1 == n { k[1] } else { a + h };
                        let sigma = seg.amplitude(0.5 * (a + b));
                        pulse_pieces.push(Piece {
                            to: b,
                            ladder: ladder_for(sigma, h, &mut ladders),
                        });
                    }
                }
            }
            pulse_length = pulse_pieces.last().map_or(0.0, |p| p.to);
        }

        let initial = match cfg.initial {
            InitialState::SteadyState => {
                let v = solve_amplitudes_full(params, cfg.cutoff)?.normalized();
                DVector::from_vec(v.amplitudes)
            }
            InitialState::Basis { photons, excited } => {
                DVector::from_vec(AmplitudeVector::basis_state(basis.clone(), photons, excited)?.amplitudes)
            }
        };
        let photons = basis.states().iter().map(|s| s.photons as f64).collect();
        let excited = basis.states().iter().map(|s| s.excited as f64).collect();
        let r = params.angular();
        let mut photon_map = Vec::new();
        let mut atom_map = Vec::new();
        for (i, s) in basis.states().iter().enumerate() {
            if s.photons > 0 {
                if let Some(j) = basis.index_of(s.photons - 1, s.excited) {
                    photon_map.push((i, j, (s.photons as f64).sqrt()));
                }
            }
            if s.excited > 0 {
                if let Some(j) = basis.index_of(s.photons, s.excited - 1) {
                    atom_map.push((i, j, (s.excited as f64).sqrt()));
                }
            }
        }
        Ok(Self {
            basis,
            ladders,
            baseline,
            pulse_pieces,
            pulse_length,
            initial,
            photons,
            excited,
            cavity_rate: per_ns(2.0 * r.kappa),
            atomic_rate: per_ns(r.gamma_prime),
            photon_map,
            atom_map,
        })
    }

    fn run_one(&self, id: u64, cfg: &TrajectoryConfig) -> Result<(Vec<ClickRecord>, RunStats)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(id);
        let d = self.basis.len();
        let mut c = self.initial.clone();
        let mut buf = DVector::zeros(d);
        let mut clicks = Vec::new();
        let mut stats = RunStats {
            n_trajectories: 1,
            recorded_ns: cfg.duration_ns,
            ..Default::default()
        };
        let end = cfg.burn_in_ns + cfg.duration_ns;
        let mut t = 0.0;
        let mut threshold: f64 = rng.random();
        // start time of the pending or running pulse
        let mut pulse_at: Option<f64> = None;
        let fb = cfg.feedback.as_ref();

        while t < end {
            if let Some(s) = pulse_at {
                if t >= s + self.pulse_length {
                    pulse_at = None;
                }
            }
            // current constant-drive piece
            let (seg_end, ladder) = match pulse_at {
                Some(s) if t >= s => {
                    // same expression as the piece end, so a boundary reached
                    // exactly moves on to the next piece
                    let i = self
                        .pulse_pieces
                        .partition_point(|p| s + p.to <= t)
                        .min(self.pulse_pieces.len() - 1);
                    let p = self.pulse_pieces[i];
                    (s + p.to, &self.ladders[p.ladder])
                }
                Some(s) => (s, &self.ladders[self.baseline]),
                None => (f64::INFINITY, &self.ladders[self.baseline]),
            };
            let seg_end = seg_end.min(end);

            match advance(ladder, &mut c, &mut buf, &mut t, seg_end, threshold) {
                Advance::Reached => continue,
                Advance::Jump => {}
            }

            // jump at time t
            let w_cav: f64 =
                self.cavity_rate * c.iter().zip(&self.photons).map(|(a, n)| n * a * a).sum::<f64>();
            let w_at: f64 =
                self.atomic_rate * c.iter().zip(&self.excited).map(|(a, k)| k * a * a).sum::<f64>();
            let total = w_cav + w_at;
            if !(total > 0.0) {
                return Err(Error::Trajectory(format!(
                    "trajectory {id}: norm decayed with no jump channel open at {t} ns"
                )));
            }
            let cavity = rng.random::<f64>() * total < w_cav;
            let map = if cavity { &self.photon_map } else { &self.atom_map };
            buf.fill(0.0);
            for &(src, dst, f) in map {
                buf[dst] = f * c[src];
            }
            let norm = buf.norm();
            c.copy_from(&buf);
            c /= norm;
            threshold = rng.random();

            if cavity {
                stats.cavity_jumps += 1;
                let to_start = rng.random::<f64>() < cfg.splitter_ratio;
                let (detector, eff) = if to_start {
                    (Detector::Start, cfg.start_efficiency)
                } else {
                    (Detector::Stop, cfg.stop_efficiency)
                };
                if rng.random::<f64>() < eff {
                    if t >= cfg.burn_in_ns {
                        match detector {
                            Detector::Start => stats.start_clicks += 1,
                            Detector::Stop => stats.stop_clicks += 1,
                        }
                        clicks.push(ClickRecord {
                            trajectory_id: id,
                            detector,
                            time_ns: t - cfg.burn_in_ns,
                        });
                    }
                    if let Some(fb) = fb {
                        if detector == fb.trigger && (pulse_at.is_none() || fb.retrigger) {
                            pulse_at = Some(t + fb.loop_delay_ns);
                            stats.pulses += 1;
                        }
                    }
                }
            } else {
                stats.atomic_jumps += 1;
            }
        }
        Ok((clicks, stats))
    }
}

enum Advance {
    Reached,
    Jump,
}

/// Propagates until `seg_end` or until the squared norm would fall below
/// `threshold`; on a jump, `c` and `t` hold the state just before it.
fn advance(
    ladder: &Ladder,
    c: &mut DVector<f64>,
    buf: &mut DVector<f64>,
    t: &mut f64,
    seg_end: f64,
    threshold: f64,
) -> Advance {
    let finest = ladder.steps.len() - 1;
    let mut level = 0;
    while *t < seg_end {
        let remaining = seg_end - *t;
        while level < finest && ladder.steps[level] > remaining {
            level += 1;
        }
        if ladder.steps[level] > remaining {
            // remainder below the resolution: short Taylor step
            taylor_step(&ladder.generator, c, buf, remaining);
            if buf.norm_squared() <= threshold {
                return Advance::Jump;
            }
            std::mem::swap(c, buf);
            *t = seg_end;
            return Advance::Reached;
        }
        buf.gemv(1.0, &ladder.maps[level], c, 0.0);
        if buf.norm_squared() > threshold {
            std::mem::swap(c, buf);
            *t += ladder.steps[level];
        } else if level == finest {
            return Advance::Jump;
        } else {
            level += 1;
        }
    }
    Advance::Reached
}

fn taylor_step(a: &DMatrix<f64>, c: &DVector<f64>, out: &mut DVector<f64>, h: f64) {
    out.copy_from(c);
    let mut term = c.clone();
    let mut next = DVector::zeros(c.len());
    for k in 1..=12 {
        next.gemv(h / k as f64, a, &term, 0.0);
        std::mem::swap(&mut term, &mut next);
        *out += &term;
        if term.amax() < 1e-17 * out.amax() {
            break;
        }
    }
}

/// Simulates all trajectories; the output does not depend on the number of
/// worker threads.
pub fn run(params: &SystemParams, cfg: &TrajectoryConfig) -> Result<RunOutput> {
    params.validate()?;
    cfg.validate()?;
    let span = cfg.feedback.as_ref().map_or(0.0, |f| f.pulse.duration_ns);
    let needed = 10.0 * params.damping_time_ns() + span;
    if cfg.duration_ns < needed {
        return Err(Error::Trajectory(format!(
            "duration {} ns is shorter than ten damping times plus the pulse span ({needed:.1} ns)",
            cfg.duration_ns
        )));
    }
    let engine = Engine::new(params, cfg)?;
    let per_traj: Vec<(Vec<ClickRecord>, RunStats)> = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|id| engine.run_one(id, cfg))
        .collect::<Result<_>>()?;
    let mut stats = RunStats::default();
    let mut clicks = Vec::new();
    for (c, s) in per_traj {
        stats.add(&s);
        clicks.extend(c);
    }
    Ok(RunOutput { clicks, stats })
}
