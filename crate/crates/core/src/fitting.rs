//! Damped-cosine fit y(t) ≈ e^{−Γt}(a·cos 2πft + b·sin 2πft).
//!
//! The amplitudes enter linearly and are eliminated in closed form, leaving a
//! two-parameter search over (Γ, f): a coarse grid followed by repeated
//! zooming around the best point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampedCosine {
    /// Oscillation frequency (MHz) for times in ns.
    pub frequency_mhz: f64,
    /// Envelope decay rate (1/ns).
    pub decay_per_ns: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub r_squared: f64,
}

/// Search bounds for the frequency (MHz) and the decay rate (1/ns).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitBounds {
    pub frequency_mhz: (f64, f64),
    pub decay_per_ns: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            frequency_mhz: (1.0, 200.0),
            decay_per_ns: (0.0, 0.2),
        }
    }
}

/// Best amplitudes and residual sum of squares at fixed (Γ, f).
fn project(t_ns: &[f64], y: &[f64], decay: f64, freq_mhz: f64) -> (f64, f64, f64) {
    let w = 2.0 * std::f64::consts::PI * freq_mhz * 1e-3;
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &v) in t_ns.iter().zip(y) {
        let env = (-decay * t).exp();
        let (s, c) = (w * t).sin_cos();
        let (c, s) = (env * c, env * s);
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += v * c;
        sys += v * s;
    }
    let det = scc * sss - scs * scs;
    if det.abs() < 1e-300 {
        return (0.0, 0.0, y.iter().map(|v| v * v).sum());
    }
    let a = (syc * sss - sys * scs) / det;
    let b = (sys * scc - syc * scs) / det;
    let rss = t_ns
        .iter()
        .zip(y)
        .map(|(&t, &v)| {
            let env = (-decay * t).exp();
            let (s, c) = (w * t).sin_cos();
            let r = v - env * (a * c + b * s);
            r * r
        })
        .sum();
    (a, b, rss)
}

pub fn fit_damped_cosine(t_ns: &[f64], y: &[f64], bounds: FitBounds) -> Result<DampedCosine> {
    if t_ns.len() != y.len() || t_ns.len() < 5 {
        return Err(Error::Fit("need at least five paired samples".into()));
    }
    let (f_lo, f_hi) = bounds.frequency_mhz;
    let (d_lo, d_hi) = bounds.decay_per_ns;
    if !(f_hi > f_lo && f_lo >= 0.0 && d_hi > d_lo) {
        return Err(Error::Fit("empty search bounds".into()));
    }
    let rss_at = |d: f64, f: f64| project(t_ns, y, d, f).2;

    // coarse grid fine enough to separate neighbouring frequency minima
    let span = t_ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - t_ns.iter().cloned().fold(f64::INFINITY, f64::min);
    let f_step = (0.1e3 / span.max(1e-9)).min((f_hi - f_lo) / 20.0);
    let nf = ((f_hi - f_lo) / f_step).ceil() as usize;
    let nd = 4;
    let mut best = (f64::INFINITY, d_lo, f_lo);
    for i in 0..=nf {
        let f = f_lo + (f_hi - f_lo) * i as f64 / nf as f64;
        for j in 0..=nd {
            let d = d_lo + (d_hi - d_lo) * j as f64 / nd as f64;
            let r = rss_at(d, f);
            if r < best.0 {
                best = (r, d, f);
            }
        }
    }

    let (mut hf, mut hd) = (f_step, (d_hi - d_lo) / nd as f64);
    for _ in 0..80 {
        let (_, d0, f0) = best;
        for i in -2..=2 {
            for j in -2..=2 {
                let f = (f0 + hf * i as f64 / 2.0).clamp(f_lo, f_hi);
                let d = (d0 + hd * j as f64 / 2.0).clamp(d_lo, d_hi);
                let r = rss_at(d, f);
                if r < best.0 {
                    best = (r, d, f);
                }
            }
        }
        hf *= 0.7;
        hd *= 0.7;
    }

    let (rss, decay, freq) = best;
    let (a, b, _) = project(t_ns, y, decay, freq);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(DampedCosine {
        frequency_mhz: freq,
        decay_per_ns: decay,
        amplitude: a.hypot(b),
        phase: (-b).atan2(a),
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

/// Ordinary least-squares line with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LineFit {
    /// x where the line crosses zero.
    pub fn root(&self) -> f64 {
        -self.intercept / self.slope
    }
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("need at least two paired samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_synthetic_parameters() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.7 * (-0.026 * t).exp() * (2.0 * std::f64::consts::PI * 0.0373 * t + 0.4).cos())
            .collect();
        let fit = fit_damped_cosine(&t, &y, FitBounds::default()).unwrap();
        assert!((fit.frequency_mhz - 37.3).abs() < 1e-4, "{fit:?}");
        assert!((fit.decay_per_ns - 0.026).abs() < 1e-6);
        assert!((fit.amplitude - 0.7).abs() < 1e-5);
        assert!((fit.phase - 0.4).abs() < 1e-4);
        assert!(fit.r_squared > 0.999_999);
    }

    #[test]
    fn line() {
        let x = [-1.0, 0.0, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let l = fit_line(&x, &y).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-14 && (l.root() + 0.5).abs() < 1e-14);
        assert!((l.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_short_input() {
        assert!(fit_damped_cosine(&[0.0], &[1.0], FitBounds::default()).is_err());
        assert!(fit_line(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }
}
