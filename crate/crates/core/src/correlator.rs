//! Start-stop correlator: delay histograms from click records and their
//! normalization to g²(τ).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conditional::G2Series;
use crate::error::{Error, Result};
use crate::trajectory::{ClickRecord, Detector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMode {
    /// Every stop in the window after each start.
    #[default]
    MultiStop,
    /// Only the first stop at τ ≥ 0, as a single-hit converter would record.
    FirstStop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bin_width_ns: f64,
    pub tau_min_ns: f64,
    pub tau_max_ns: f64,
    pub mode: StopMode,
    /// Length of each trajectory's record. When set, starts whose delay
    /// window reaches outside [0, length] are skipped so that every counted
    /// start sees the full window.
    pub record_length_ns: Option<f64>,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bin_width_ns: 0.5,
            tau_min_ns: -300.0,
            tau_max_ns: 300.0,
            mode: StopMode::MultiStop,
            record_length_ns: None,
        }
    }
}

fn is_multiple(x: f64, unit: f64) -> bool {
    let q = x / unit;
    (q - q.round()).abs() < 1e-9 * q.abs().max(1.0)
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Histogram(m.into()));
        if !(self.bin_width_ns > 0.0 && self.bin_width_ns.is_finite()) {
            return bad("bin width must be positive");
        }
        if !(self.tau_max_ns > self.tau_min_ns) {
            return bad("empty delay window");
        }
        if !is_multiple(self.tau_min_ns, self.bin_width_ns)
            || !is_multiple(self.tau_max_ns, self.bin_width_ns)
        {
            return bad("window edges must be multiples of the bin width so that τ = 0 is a bin edge");
        }
        if let Some(len) = self.record_length_ns {
            if len < self.tau_max_ns - self.tau_min_ns.min(0.0) {
                return bad("record shorter than the delay window");
            }
        }
        Ok(())
    }

    fn n_bins(&self) -> usize {
        ((self.tau_max_ns - self.tau_min_ns) / self.bin_width_ns).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ns: f64,
    pub tau_min_ns: f64,
    pub counts: Vec<u64>,
    pub n_starts: u64,
}

impl Histogram {
    pub fn empty(spec: &HistogramSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            bin_width_ns: spec.bin_width_ns,
            tau_min_ns: spec.tau_min_ns,
            counts: vec![0; spec.n_bins()],
            n_starts: 0,
        })
    }

    pub fn tau_max_ns(&self) -> f64 {
        self.tau_min_ns + self.counts.len() as f64 * self.bin_width_ns
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.tau_min_ns + i as f64 * self.bin_width_ns
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.bin_start(i) + 0.5 * self.bin_width_ns
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn add_delay(&mut self, tau: f64) {
        let x = (tau - self.tau_min_ns) / self.bin_width_ns;
        if x >= 0.0 {
            let i = x.floor() as usize;
            if i < self.counts.len() {
                self.counts[i] += 1;
            }
        }
    }

    /// Adds the counts and starts of a histogram with identical bins.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.counts.len() != other.counts.len()
            || self.bin_width_ns != other.bin_width_ns
            || self.tau_min_ns != other.tau_min_ns
        {
            return Err(Error::Histogram("cannot merge histograms with different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_starts += other.n_starts;
        Ok(())
    }

    /// Sums groups of `factor` adjacent bins.
    pub fn rebin(&self, factor: usize) -> Result<Histogram> {
        if factor == 0 || self.counts.len() % factor != 0 {
            return Err(Error::Histogram(format!(
                "factor {factor} does not divide {} bins",
                self.counts.len()
            )));
        }
        let width = self.bin_width_ns * factor as f64;
        if !is_multiple(self.tau_min_ns, width) {
            return Err(Error::Histogram(format!(
                "τ = 0 would not fall on an edge of {width} ns bins"
            )));
        }
        Ok(Histogram {
            bin_width_ns: width,
            tau_min_ns: self.tau_min_ns,
            counts: self.counts.chunks(factor).map(|c| c.iter().sum()).collect(),
            n_starts: self.n_starts,
        })
    }
}

/// Delay histogram of stop clicks relative to start clicks of the same
/// trajectory; τ = t_stop − t_start.
pub fn histogram(clicks: &[ClickRecord], spec: &HistogramSpec) -> Result<Histogram> {
    let mut h = Histogram::empty(spec)?;
    let mut by_traj: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in clicks {
        let e = by_traj.entry(c.trajectory_id).or_default();
        match c.detector {
            Detector::Start => e.0.push(c.time_ns),
            Detector::Stop => e.1.push(c.time_ns),
        }
    }
    for (_, (starts, mut stops)) in by_traj {
        stops.sort_by(f64::total_cmp);
        for &t in &starts {
            if let Some(len) = spec.record_length_ns {
                if t + spec.tau_min_ns < 0.0 || t + spec.tau_max_ns > len {
                    continue;
                }
            }
            h.n_starts += 1;
            match spec.mode {
                StopMode::MultiStop => {
                    let lo = stops.partition_point(|&s| s < t + spec.tau_min_ns);
                    for &s in stops[lo..].iter().take_while(|&&s| s < t + spec.tau_max_ns) {
                        h.add_delay(s - t);
                    }
                }
                StopMode::FirstStop => {
                    let i = stops.partition_point(|&s| s < t);
                    if let Some(&s) = stops.get(i) {
                        if s - t >= spec.tau_min_ns {
                            h.add_delay(s - t);
                        }
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Source of the unconditional stop rate used to normalize a histogram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeMode {
    /// Mean conditional rate over the last `span_ns` of the window.
    TailAverage { span_ns: f64 },
    /// An independently measured stop click rate (1/ns).
    IndependentRate { stop_rate_per_ns: f64 },
}

impl Default for NormalizeMode {
    fn default() -> Self {
        NormalizeMode::TailAverage { span_ns: 100.0 }
    }
}

/// Unconditional stop rate (1/ns) from a click stream over `recorded_ns` of
/// total observation time.
pub fn stop_click_rate(clicks: &[ClickRecord], recorded_ns: f64) -> f64 {
    let stops = clicks.iter().filter(|c| c.detector == Detector::Stop).count();
    stops as f64 / recorded_ns
}

/// g²(τ) at bin centers: conditional stop rate divided by the unconditional
/// rate, with Poisson standard errors.
pub fn normalize(h: &Histogram, mode: NormalizeMode) -> Result<G2Series> {
    if h.n_starts == 0 {
        return Err(Error::Normalization("histogram has no starts".into()));
    }
    let exposure = h.n_starts as f64 * h.bin_width_ns;
    let rate = match mode {
        NormalizeMode::TailAverage { span_ns } => {
            let from = h.tau_max_ns() - span_ns;
            let tail: Vec<u64> = (0..h.counts.len())
                .filter(|&i| h.bin_start(i) >= from - 1e-9)
                .map(|i| h.counts[i])
                .collect();
            if tail.is_empty() {
                return Err(Error::Normalization(format!("no bins in the last {span_ns} ns")));
            }
            tail.iter().sum::<u64>() as f64 / tail.len() as f64 / exposure
        }
        NormalizeMode::IndependentRate { stop_rate_per_ns } => stop_rate_per_ns,
    };
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Normalization(format!("unconditional rate {rate} is not positive")));
    }
    let scale = exposure * rate;
    let tau = (0..h.counts.len()).map(|i| h.bin_center(i)).collect();
    let values = h.counts.iter().map(|&c| c as f64 / scale).collect();
    let stderr = h.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / scale).collect();
    Ok(G2Series {
        tau_ns: tau,
        values,
        stderr: Some(stderr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn click(id: u64, detector: Detector, t: f64) -> ClickRecord {
        ClickRecord {
            trajectory_id: id,
            detector,
            time_ns: t,
        }
    }

    #[test]
    fn single_pair_lands_in_its_bin() {
        let clicks = [click(0, Detector::Start, 10.0), click(0, Detector::Stop, 35.0)];
        let h = histogram(&clicks, &HistogramSpec::default()).unwrap();
        assert_eq!(h.total(), 1);
        let i = h.counts.iter().position(|&c| c == 1).unwrap();
        assert!(h.bin_start(i) <= 25.0 && 25.0 < h.bin_start(i) + 0.5);
    }

    #[test]
    fn stop_before_start_is_negative() {
        let clicks = [click(0, Detector::Stop, 5.0), click(0, Detector::Start, 10.0)];
        let h = histogram(&clicks, &HistogramSpec::default()).unwrap();
        let i = h.counts.iter().position(|&c| c == 1).unwrap();
        assert_eq!(h.bin_start(i), -5.0);
        let first = HistogramSpec {
            mode: StopMode::FirstStop,
            ..Default::default()
        };
        assert_eq!(histogram(&clicks, &first).unwrap().total(), 0);
    }

    #[test]
    fn no_cross_trajectory_pairs() {
        let clicks = [click(0, Detector::Start, 10.0), click(1, Detector::Stop, 20.0)];
        let h = histogram(&clicks, &HistogramSpec::default()).unwrap();
        assert_eq!((h.total(), h.n_starts), (0, 1));
        assert!(histogram(&[], &HistogramSpec::default()).unwrap().counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn first_stop_keeps_only_the_earliest() {
        let clicks = [
            click(0, Detector::Start, 0.0),
            click(0, Detector::Stop, 3.0),
            click(0, Detector::Stop, 7.0),
        ];
        let spec = HistogramSpec {
            mode: StopMode::FirstStop,
            ..Default::default()
        };
        assert_eq!(histogram(&clicks, &spec).unwrap().total(), 1);
        assert_eq!(histogram(&clicks, &HistogramSpec::default()).unwrap().total(), 2);
    }

    #[test]
    fn edge_exclusion_requires_the_full_window() {
        let clicks = [
            click(0, Detector::Start, 100.0),
            click(0, Detector::Start, 500.0),
            click(0, Detector::Stop, 520.0),
        ];
        let spec = HistogramSpec {
            record_length_ns: Some(1000.0),
            ..Default::default()
        };
        let h = histogram(&clicks, &spec).unwrap();
        assert_eq!((h.n_starts, h.total()), (1, 1));
        let short = HistogramSpec {
            record_length_ns: Some(100.0),
            ..Default::default()
        };
        assert!(histogram(&clicks, &short).is_err());
    }

    #[test]
    fn merge_equals_joint_histogram() {
        let a = [click(0, Detector::Start, 10.0), click(0, Detector::Stop, 12.0)];
        let b = [click(1, Detector::Stop, 1.0), click(1, Detector::Start, 40.0)];
        let spec = HistogramSpec::default();
        let mut h = histogram(&a, &spec).unwrap();
        h.merge(&histogram(&b, &spec).unwrap()).unwrap();
        let joint: Vec<ClickRecord> = a.iter().chain(&b).copied().collect();
        assert_eq!(h, histogram(&joint, &spec).unwrap());
    }

    #[test]
    fn rebin_conserves_counts() {
        let h = Histogram {
            bin_width_ns: 0.5,
            tau_min_ns: -5.0,
            counts: (0..20).collect(),
            n_starts: 9,
        };
        let r = h.rebin(5).unwrap();
        assert_eq!(r.counts, vec![10, 35, 60, 85]);
        assert_eq!((r.total(), r.n_starts, r.bin_width_ns), (h.total(), 9, 2.5));
        assert_eq!(h.rebin(1).unwrap(), h);
        assert!(h.rebin(3).is_err());
        let shifted = Histogram {
            tau_min_ns: -4.5,
            ..h.clone()
        };
        assert!(shifted.rebin(2).is_err());
    }

    #[test]
    fn rejects_misaligned_windows() {
        let spec = HistogramSpec {
            tau_min_ns: -300.25,
            ..Default::default()
        };
        assert!(matches!(histogram(&[], &spec), Err(Error::Histogram(_))));
    }

    #[test]
    fn uncorrelated_streams_are_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rate, len) = (0.05, 20_000.0);
        let mut clicks = Vec::new();
        for id in 0..40 {
            for detector in [Detector::Start, Detector::Stop] {
                let mut t = 0.0;
                loop {
                    t -= (1.0 - rng.random::<f64>()).ln() / rate;
                    if t > len {
                        break;
                    }
                    clicks.push(click(id, detector, t));
                }
            }
        }
        let spec = HistogramSpec {
            record_length_ns: Some(len),
            ..Default::default()
        };
        let h = histogram(&clicks, &spec).unwrap().rebin(5).unwrap();
        let mean = h.total() as f64 / h.counts.len() as f64;
        let chi2: f64 = h.counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
        let dof = (h.counts.len() - 1) as f64;
        // about 4.5 standard deviations of the χ² distribution
        assert!((chi2 - dof).abs() < 4.5 * (2.0 * dof).sqrt(), "χ² = {chi2}, dof = {dof}");

        let g2 = normalize(&h, NormalizeMode::default()).unwrap();
        let err = g2.stderr.as_ref().unwrap();
        let outside = g2.values.iter().zip(err).filter(|(v, e)| (*v - 1.0).abs() > 3.0 * *e).count();
        assert!(outside <= 3, "{outside} bins outside 3σ");
        let independent = normalize(
            &h,
            NormalizeMode::IndependentRate {
                stop_rate_per_ns: stop_click_rate(&clicks, 40.0 * len),
            },
        )
        .unwrap();
        let mean_g2 = independent.values.iter().sum::<f64>() / independent.len() as f64;
        assert!((mean_g2 - 1.0).abs() < 0.02);
    }

    #[test]
    fn normalization_errors() {
        let h = Histogram {
            bin_width_ns: 0.5,
            tau_min_ns: 0.0,
            counts: vec![0; 4],
            n_starts: 0,
        };
        assert!(matches!(normalize(&h, NormalizeMode::default()), Err(Error::Normalization(_))));
        let h = Histogram { n_starts: 3, ..h };
        assert!(matches!(normalize(&h, NormalizeMode::default()), Err(Error::Normalization(_))));
        assert!(normalize(&h, NormalizeMode::IndependentRate { stop_rate_per_ns: 0.0 }).is_err());
    }
}
