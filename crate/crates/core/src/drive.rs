//! Drive waveforms: a constant baseline with feedback pulses on top.
//!
//! Pulses are specified as intensity steps and ramp linearly in intensity;
//! the drive amplitude factor is the square root of the intensity factor.
//! Every pulse occupies the half-open interval `[start, start + duration)`,
//! and the factor is right-continuous at every corner.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DURATION_NS: f64 = 120.0;
pub const DEFAULT_RISETIME_NS: f64 = 8.0;

/// Pulse profile normalized to 0 at both ends and ±1 at its largest excursion,
/// with time rescaled to [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledShape {
    times: Vec<f64>,
    profile: Vec<f64>,
}

impl SampledShape {
    /// Builds a profile from raw (time, intensity factor) samples.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Drive("a sampled shape needs at least two samples".into()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Drive("sample times must be strictly increasing".into()));
        }
        if samples.iter().any(|(t, f)| !t.is_finite() || !f.is_finite()) {
            return Err(Error::Drive("samples must be finite".into()));
        }
        let peak = samples
            .iter()
            .map(|&(_, f)| f - 1.0)
            .fold(0.0f64, |acc, d| if d.abs() > acc.abs() { d } else { acc });
        if peak == 0.0 {
            return Err(Error::Drive("sampled shape never departs from 1".into()));
        }
        let (t0, t1) = (samples[0].0, samples[samples.len() - 1].0);
        let times = samples.iter().map(|&(t, _)| (t - t0) / (t1 - t0)).collect();
        let mut profile: Vec<f64> = samples.iter().map(|&(_, f)| (f - 1.0) / peak).collect();
        let last = profile.len() - 1;
        profile[0] = 0.0;
        profile[last] = 0.0;
        Ok(Self { times, profile })
    }

    /// Profile value at normalized time `u` ∈ [0, 1], linear in between samples.
    fn value(&self, u: f64) -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let i = self.times.partition_point(|&x| x <= u) - 1;
        let (x0, x1) = (self.times[i], self.times[i + 1]);
        let (y0, y1) = (self.profile[i], self.profile[i + 1]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PulseShape {
    /// Linear intensity ramps of `risetime_ns` at both ends.
    Trapezoid,
    /// Measured profile stretched over the pulse duration; the ramp time is
    /// implied by the samples.
    Sampled(SampledShape),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPulse {
    pub start_ns: f64,
    pub duration_ns: f64,
    pub risetime_ns: f64,
    /// Fractional change of the drive intensity on the plateau.
    pub intensity_step: f64,
    pub shape: PulseShape,
}

impl FeedbackPulse {
    pub fn trapezoid(start_ns: f64, intensity_step: f64) -> Self {
        Self {
            start_ns,
            duration_ns: DEFAULT_DURATION_NS,
            risetime_ns: DEFAULT_RISETIME_NS,
            intensity_step,
            shape: PulseShape::Trapezoid,
        }
    }

    /// Step with instantaneous edges.
    pub fn instantaneous(start_ns: f64, duration_ns: f64, intensity_step: f64) -> Self {
        Self {
            start_ns,
            duration_ns,
            risetime_ns: 0.0,
            intensity_step,
            shape: PulseShape::Trapezoid,
        }
    }

    pub fn with_start(mut self, start_ns: f64) -> Self {
        self.start_ns = start_ns;
        self
    }

    pub fn with_step(mut self, intensity_step: f64) -> Self {
        self.intensity_step = intensity_step;
        self
    }

    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.duration_ns
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Drive(msg));
        if !(self.start_ns.is_finite() && self.duration_ns.is_finite() && self.risetime_ns.is_finite())
        {
            return bad("pulse times must be finite".into());
        }
        if !(self.duration_ns > 0.0) {
            return bad(format!("pulse duration {} ns must be positive", self.duration_ns));
        }
        if !(self.risetime_ns >= 0.0) || 2.0 * self.risetime_ns > self.duration_ns {
            return bad(format!(
                "risetime {} ns must lie in [0, duration/2]",
                self.risetime_ns
            ));
        }
        if !(1.0 + self.intensity_step > 0.0) || !self.intensity_step.is_finite() {
            return bad(format!(
                "intensity step {} would make the intensity non-positive",
                self.intensity_step
            ));
        }
        Ok(())
    }

    /// Corner times of the pulse; the intensity is linear in between.
    pub fn knots(&self) -> Vec<f64> {
        let mut k = match &self.shape {
            PulseShape::Trapezoid => vec![
                self.start_ns,
                self.start_ns + self.risetime_ns,
                self.end_ns() - self.risetime_ns,
                self.end_ns(),
            ],
            PulseShape::Sampled(shape) => shape
                .times
                .iter()
                .map(|u| self.start_ns + u * self.duration_ns)
                .collect(),
        };
        k.dedup();
        k
    }

    /// Intensity factor at `t`; `left` selects the limit from below.
    fn intensity(&self, t: f64, left: bool) -> f64 {
        let inside = if left {
            t > self.start_ns && t <= self.end_ns()
        } else {
            t >= self.start_ns && t < self.end_ns()
        };
        if !inside {
            return 1.0;
        }
        let s = self.intensity_step;
        match &self.shape {
            PulseShape::Trapezoid => {
                let r = self.risetime_ns;
                let from_start = t - self.start_ns;
                let to_end = self.end_ns() - t;
                let ramp = if r == 0.0 {
                    1.0
                } else {
                    (from_start / r).min(to_end / r).min(1.0)
                };
                1.0 + s * ramp
            }
            PulseShape::Sampled(shape) => {
                1.0 + s * shape.value((t - self.start_ns) / self.duration_ns)
            }
        }
    }
}

/// Baseline drive plus non-overlapping pulses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub baseline_epsilon: f64,
    pulses: Vec<FeedbackPulse>,
}

impl DriveWaveform {
    pub fn constant(baseline_epsilon: f64) -> Self {
        Self {
            baseline_epsilon,
            pulses: Vec::new(),
        }
    }

    pub fn new(baseline_epsilon: f64, mut pulses: Vec<FeedbackPulse>) -> Result<Self> {
        for p in &pulses {
            p.validate()?;
        }
        pulses.sort_by(|a, b| a.start_ns.total_cmp(&b.start_ns));
        if let Some(w) = pulses.windows(2).find(|w| w[0].end_ns() > w[1].start_ns) {
            return Err(Error::Drive(format!(
                "pulses overlap: [{}, {}) and [{}, {})",
                w[0].start_ns,
                w[0].end_ns(),
                w[1].start_ns,
                w[1].end_ns()
            )));
        }
        Ok(Self {
            baseline_epsilon,
            pulses,
        })
    }

    pub fn pulses(&self) -> &[FeedbackPulse] {
        &self.pulses
    }

    pub fn intensity_factor(&self, t_ns: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.intensity(t_ns, false))
            .find(|&f| f != 1.0)
            .unwrap_or(1.0)
    }

    /// Limit of the intensity factor approaching `t_ns` from below.
    pub fn intensity_factor_left(&self, t_ns: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.intensity(t_ns, true))
            .find(|&f| f != 1.0)
            .unwrap_or(1.0)
    }

    pub fn amplitude_factor(&self, t_ns: f64) -> f64 {
        self.intensity_factor(t_ns).sqrt()
    }

    pub fn epsilon_at(&self, t_ns: f64) -> f64 {
        self.baseline_epsilon * self.amplitude_factor(t_ns)
    }

    /// Sorted, deduplicated corner times of all pulses.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.pulses.iter().flat_map(FeedbackPulse::knots).collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// Breakpoints strictly inside `(lo, hi)` with the two ends added.
    pub fn segment_knots(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut k = vec![lo];
        k.extend(self.breakpoints().into_iter().filter(|&t| t > lo && t < hi));
        k.push(hi);
        k
    }

    /// Intensity on `[lo, hi]` between adjacent knots, linear in `t`: the
    /// right limit at `lo` and the left limit at `hi`.
    pub fn segment(&self, lo: f64, hi: f64) -> LinearSegment {
        LinearSegment {
            lo,
            hi,
            start: self.intensity_factor(lo),
            end: self.intensity_factor_left(hi),
        }
    }
}

/// Intensity factor restricted to one knot interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSegment {
    pub lo: f64,
    pub hi: f64,
    pub start: f64,
    pub end: f64,
}

impl LinearSegment {
    pub fn intensity(&self, t: f64) -> f64 {
        if self.start == self.end {
            return self.start;
        }
        let u = ((t - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        self.start + (self.end - self.start) * u
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        self.intensity(t).sqrt()
    }
}

/// Parses a pulse-shape file: one `time_ns intensity_factor` pair per line,
/// separated by whitespace or a comma. `#` starts a comment; blank lines are
/// skipped.
pub fn parse_sampled_shape(text: &str, path: &Path) -> Result<SampledShape> {
    let err = |line: usize, reason: String| Error::ShapeParse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut samples = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(err(line, format!("expected 2 columns, found {}", fields.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("`{s}` is not a finite number")))
        };
        let (t, f) = (parse(fields[0])?, parse(fields[1])?);
        if let Some(&(prev, _)) = samples.last() {
            if !(t > prev) {
                return Err(err(line, format!("time {t} does not increase past {prev}")));
            }
        }
        if !(f > 0.0) {
            return Err(err(line, format!("intensity factor {f} must be positive")));
        }
        samples.push((t, f));
    }
    SampledShape::from_samples(&samples).map_err(|e| err(last_line, e.to_string()))
}

pub fn load_sampled_shape(path: impl AsRef<Path>) -> Result<SampledShape> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })?;
    parse_sampled_shape(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(p: FeedbackPulse) -> DriveWaveform {
        DriveWaveform::new(1.0, vec![p]).unwrap()
    }

    #[test]
    fn plateau_amplitudes() {
        let w = wave(FeedbackPulse::trapezoid(50.0, -0.026));
        assert!((w.amplitude_factor(100.0) - 0.986_914).abs() < 1e-6);
        let w = wave(FeedbackPulse::trapezoid(50.0, 0.039));
        assert!((w.amplitude_factor(100.0) - 1.019_313).abs() < 1e-6);
        assert_eq!(w.amplitude_factor(49.999), 1.0);
        assert_eq!(w.amplitude_factor(170.0), 1.0);
        assert_eq!(w.amplitude_factor(-3.0), 1.0);
    }

    #[test]
    fn ramps_are_linear_in_intensity() {
        let w = wave(FeedbackPulse::trapezoid(10.0, 0.04));
        assert!((w.intensity_factor(14.0) - 1.02).abs() < 1e-15);
        assert!((w.intensity_factor(126.0) - 1.02).abs() < 1e-15);
    }

    #[test]
    fn half_open_instantaneous_edges() {
        let w = wave(FeedbackPulse::instantaneous(10.0, 20.0, -0.5));
        assert_eq!(w.intensity_factor(10.0), 0.5);
        assert_eq!(w.intensity_factor_left(10.0), 1.0);
        assert_eq!(w.intensity_factor(30.0), 1.0);
        assert_eq!(w.intensity_factor_left(30.0), 0.5);
        assert_eq!(w.breakpoints(), vec![10.0, 30.0]);
    }

    #[test]
    fn energy_bookkeeping() {
        for (s, r) in [(-0.026, 8.0), (0.039, 3.0), (0.01, 0.0), (-0.2, 60.0)] {
            let p = FeedbackPulse {
                risetime_ns: r,
                ..FeedbackPulse::trapezoid(20.0, s)
            };
            let w = wave(p.clone());
            // trapezoid rule is exact on each linear piece
            let knots = w.segment_knots(0.0, 200.0);
            let integral: f64 = knots
                .windows(2)
                .map(|k| {
                    let seg = w.segment(k[0], k[1]);
                    0.5 * (seg.start + seg.end - 2.0) * (k[1] - k[0])
                })
                .sum();
            let expected = s * (p.duration_ns - r);
            assert!((integral - expected).abs() < 1e-12, "{integral} vs {expected}");
        }
    }

    #[test]
    fn validation() {
        let ok = FeedbackPulse::trapezoid(0.0, 0.1);
        assert!(ok.validate().is_ok());
        assert!(FeedbackPulse { duration_ns: 0.0, ..ok.clone() }.validate().is_err());
        assert!(FeedbackPulse { risetime_ns: 61.0, ..ok.clone() }.validate().is_err());
        assert!(FeedbackPulse { risetime_ns: -1.0, ..ok.clone() }.validate().is_err());
        assert!(ok.clone().with_step(-1.0).validate().is_err());
    }

    #[test]
    fn overlap_rejected_touching_allowed() {
        let a = FeedbackPulse::instantaneous(0.0, 10.0, 0.1);
        assert!(DriveWaveform::new(1.0, vec![a.clone(), a.clone().with_start(5.0)]).is_err());
        let w = DriveWaveform::new(1.0, vec![a.clone().with_start(10.0).with_step(0.2), a]).unwrap();
        assert_eq!(w.intensity_factor(10.0), 1.2);
        assert_eq!(w.intensity_factor_left(10.0), 1.1);
    }

    #[test]
    fn sampled_shape_parsing() {
        let text = "# measured\n0 1.0\n2, 1.5\n\n 6\t2.0 # peak\n8 1.0\n";
        let shape = parse_sampled_shape(text, Path::new("shape.txt")).unwrap();
        assert_eq!(shape.times(), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(shape.profile(), &[0.0, 0.5, 1.0, 0.0]);
        let p = FeedbackPulse {
            shape: PulseShape::Sampled(shape),
            ..FeedbackPulse::trapezoid(100.0, -0.04)
        };
        let w = wave(p);
        // u = 0.5 sits between profile 0.5 and 1.0
        assert!((w.intensity_factor(160.0) - (1.0 - 0.04 * 0.75)).abs() < 1e-15);
        assert_eq!(w.intensity_factor(220.0), 1.0);
    }

    #[test]
    fn sampled_shape_errors_carry_lines() {
        let cases = [
            ("0 1\n1 x\n", 2),
            ("0 1\n1 2 3\n", 2),
            ("0 1\n2 1.1\n1 1.2\n", 3),
            ("0 1\n", 1),
            ("0 1\n1 -2\n", 2),
        ];
        for (text, line) in cases {
            match parse_sampled_shape(text, Path::new("p")) {
                Err(Error::ShapeParse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_sampled_shape("/nonexistent/shape.txt"),
            Err(Error::Io { .. })
        ));
    }
}
