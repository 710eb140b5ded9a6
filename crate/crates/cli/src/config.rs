//! Run configuration: a TOML file with one table per concern.

use std::path::{Path, PathBuf};

use condqed::conditional::{find_capture, CaptureSolution, CrossingMode, TimeGrid};
use condqed::correlator::{HistogramSpec, NormalizeMode, StopMode};
use condqed::drive::{load_sampled_shape, FeedbackPulse, PulseShape};
use condqed::model::{fit_effective_params, EffectiveParams};
use condqed::trajectory::{Detector, FeedbackConfig, InitialState, TrajectoryConfig};
use condqed::SystemParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveSection>,
    pub drive: DriveSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub correlator: CorrelatorSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

/// Physical rates in MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Defaults to `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    /// May be omitted when `effective.vacuum_rabi` fixes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<f64>,
}

/// Maps the system onto an effective (g, N) with the same g√N and the given
/// weak-field g²(0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveSection {
    /// Target g√N (MHz); sets the physical atom number as (g√N / g)².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vacuum_rabi: Option<f64>,
    pub g2_zero: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// Drive amplitude (MHz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Intracavity intensity relative to the saturation photon number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_over_n0: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    #[default]
    Trapezoid,
    Instantaneous,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    /// Omitted: the first capture time after `guard_ns`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_ns: Option<f64>,
    pub duration_ns: f64,
    pub risetime_ns: f64,
    /// Omitted: the exact capturing step ζ(T)² − 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_step: Option<f64>,
    pub shape: ShapeKind,
    /// Two-column profile for `shape = "sampled"`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_file: Option<PathBuf>,
    pub capture_mode: CrossingMode,
    pub guard_ns: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            start_ns: None,
            duration_ns: 120.0,
            risetime_ns: 8.0,
            intensity_step: None,
            shape: ShapeKind::Trapezoid,
            shape_file: None,
            capture_mode: CrossingMode::Rising,
            guard_ns: 45.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub tau_max_ns: f64,
    pub dt_ns: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            tau_max_ns: 300.0,
            dt_ns: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub steps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Steady,
    Ground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub duration_ns: f64,
    pub n_trajectories: u64,
    pub seed: u64,
    pub cutoff: usize,
    pub splitter_ratio: f64,
    pub start_efficiency: f64,
    pub stop_efficiency: f64,
    pub feedback: bool,
    pub trigger: Detector,
    /// Omitted: the resolved pulse start, so that the pulse lands at the
    /// same delay after the trigger as in the deterministic commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_delay_ns: Option<f64>,
    pub retrigger: bool,
    pub initial: InitialKind,
    pub burn_in_ns: f64,
    pub coarse_step_ns: f64,
    pub resolution_ns: f64,
}

impl Default for McSection {
    fn default() -> Self {
        let t = TrajectoryConfig::default();
        Self {
            duration_ns: t.duration_ns,
            n_trajectories: t.n_trajectories,
            seed: t.seed,
            cutoff: t.cutoff,
            splitter_ratio: t.splitter_ratio,
            start_efficiency: t.start_efficiency,
            stop_efficiency: t.stop_efficiency,
            feedback: false,
            trigger: Detector::Start,
            loop_delay_ns: None,
            retrigger: false,
            initial: InitialKind::Steady,
            burn_in_ns: t.burn_in_ns,
            coarse_step_ns: t.coarse_step_ns,
            resolution_ns: t.resolution_ns,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateSource {
    #[default]
    TailAverage,
    IndependentRate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelatorSection {
    pub bin_width_ns: f64,
    pub tau_min_ns: f64,
    pub tau_max_ns: f64,
    pub report_bin_ns: f64,
    pub mode: StopMode,
    pub normalize: RateSource,
    pub tail_ns: f64,
    /// Count only starts whose whole window lies inside the record.
    pub exclude_edges: bool,
}

impl Default for CorrelatorSection {
    fn default() -> Self {
        Self {
            bin_width_ns: 0.5,
            tau_min_ns: -300.0,
            tau_max_ns: 300.0,
            report_bin_ns: 2.5,
            mode: StopMode::MultiStop,
            normalize: RateSource::TailAverage,
            tail_ns: 100.0,
            exclude_edges: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub cutoff: usize,
    pub tau_max_ns: f64,
    pub dt_ns: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            cutoff: 4,
            tau_max_ns: 300.0,
            dt_ns: 0.5,
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            key: e.path().to_string(),
            reason: e.inner().message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        // shape files are relative to the config file
        if let Some(file) = &cfg.pulse.shape_file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.pulse.shape_file = Some(base.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        let s = &self.system;
        let target_rabi = self.effective.as_ref().and_then(|e| e.vacuum_rabi);
        let n_atoms = match (target_rabi, s.n_atoms) {
            (Some(rabi), _) => {
                if !(s.g > 0.0) {
                    return Err(invalid("effective.vacuum_rabi", "needs system.g > 0"));
                }
                (rabi / s.g).powi(2)
            }
            (None, Some(n)) => n,
            (None, None) => {
                return Err(invalid("system.n_atoms", "missing (or set effective.vacuum_rabi)"))
            }
        };
        let physical = SystemParams::new(s.g, s.kappa, s.gamma, n_atoms, 0.0)
            .with_gamma_prime(s.gamma_prime.unwrap_or(s.gamma));
        let driven = match (self.drive.epsilon, self.drive.n_over_n0) {
            (Some(eps), None) => physical.with_epsilon(eps),
            (None, Some(n)) => physical
                .with_photon_number(n)
                .map_err(|e| invalid("drive.n_over_n0", e.to_string()))?,
            _ => return Err(invalid("drive", "set exactly one of epsilon / n_over_n0")),
        };
        driven
            .validate()
            .map_err(|e| invalid("system", e.to_string()))?;
        match &self.effective {
            None => Ok(driven),
            Some(e) => {
                let eff: EffectiveParams = fit_effective_params(
                    driven.g,
                    driven.kappa,
                    driven.gamma_prime,
                    driven.vacuum_rabi(),
                    e.g2_zero,
                )
                .map_err(|err| invalid("effective.g2_zero", err.to_string()))?;
                Ok(driven.with_effective(eff))
            }
        }
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.grid.tau_max_ns, self.grid.dt_ns).map_err(|e| invalid("grid", e.to_string()))
    }

    /// The configured pulse, running the capture search when its start or
    /// step is left open.
    pub fn pulse(&self, params: &SystemParams) -> Result<(FeedbackPulse, Option<CaptureSolution>), CliError> {
        let p = &self.pulse;
        let capture = if p.start_ns.is_none() || p.intensity_step.is_none() {
            Some(find_capture(params, p.capture_mode, p.guard_ns)?)
        } else {
            None
        };
        let start = p.start_ns.or(capture.map(|c| c.t_capture_ns)).unwrap_or_default();
        let step = p.intensity_step.or(capture.map(|c| c.intensity_step)).unwrap_or_default();
        let shape = match p.shape {
            ShapeKind::Sampled => {
                let file = p
                    .shape_file
                    .as_ref()
                    .ok_or_else(|| invalid("pulse.shape_file", "required for shape = \"sampled\""))?;
                if !file.exists() {
                    return Err(invalid("pulse.shape_file", format!("{} does not exist", file.display())));
                }
                PulseShape::Sampled(load_sampled_shape(file)?)
            }
            _ => {
                if p.shape_file.is_some() {
                    return Err(invalid("pulse.shape_file", "only used with shape = \"sampled\""));
                }
                PulseShape::Trapezoid
            }
        };
        let pulse = FeedbackPulse {
            start_ns: start,
            duration_ns: p.duration_ns,
            risetime_ns: if p.shape == ShapeKind::Instantaneous { 0.0 } else { p.risetime_ns },
            intensity_step: step,
            shape,
        };
        pulse.validate().map_err(|e| invalid("pulse", e.to_string()))?;
        Ok((pulse, capture))
    }

    pub fn trajectory_config(&self, pulse: &FeedbackPulse) -> Result<TrajectoryConfig, CliError> {
        let m = &self.mc;
        let feedback = if m.feedback {
            let delay = m.loop_delay_ns.unwrap_or(pulse.start_ns);
            Some(FeedbackConfig {
                pulse: pulse.clone(),
                trigger: m.trigger,
                loop_delay_ns: delay,
                retrigger: m.retrigger,
            })
        } else {
            None
        };
        let cfg = TrajectoryConfig {
            duration_ns: m.duration_ns,
            n_trajectories: m.n_trajectories,
            seed: m.seed,
            cutoff: m.cutoff,
            splitter_ratio: m.splitter_ratio,
            start_efficiency: m.start_efficiency,
            stop_efficiency: m.stop_efficiency,
            feedback,
            initial: match m.initial {
                InitialKind::Steady => InitialState::SteadyState,
                InitialKind::Ground => InitialState::Basis {
                    photons: 0,
                    excited: 0,
                },
            },
            burn_in_ns: m.burn_in_ns,
            coarse_step_ns: m.coarse_step_ns,
            resolution_ns: m.resolution_ns,
        };
        cfg.validate().map_err(|e| invalid("mc", e.to_string()))?;
        Ok(cfg)
    }

    pub fn histogram_spec(&self) -> Result<HistogramSpec, CliError> {
        let c = &self.correlator;
        let spec = HistogramSpec {
            bin_width_ns: c.bin_width_ns,
            tau_min_ns: c.tau_min_ns,
            tau_max_ns: c.tau_max_ns,
            mode: c.mode,
            record_length_ns: c.exclude_edges.then_some(self.mc.duration_ns),
        };
        spec.validate().map_err(|e| invalid("correlator", e.to_string()))?;
        Ok(spec)
    }

    pub fn rebin_factor(&self) -> Result<usize, CliError> {
        let c = &self.correlator;
        let f = c.report_bin_ns / c.bin_width_ns;
        if !(f >= 1.0 && (f - f.round()).abs() < 1e-9) {
            return Err(invalid(
                "correlator.report_bin_ns",
                "must be a whole multiple of bin_width_ns",
            ));
        }
        Ok(f.round() as usize)
    }

    pub fn normalize_mode(&self, stop_rate_per_ns: f64) -> NormalizeMode {
        match self.correlator.normalize {
            RateSource::TailAverage => NormalizeMode::TailAverage {
                span_ns: self.correlator.tail_ns,
            },
            RateSource::IndependentRate => NormalizeMode::IndependentRate { stop_rate_per_ns },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[system]\ng = 5.1\nkappa = 3.7\ngamma = 6.0\ngamma_prime = 9.1\nn_atoms = 53.0\n[drive]\nn_over_n0 = 0.07\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.grid, GridSection::default());
        let p = cfg.system_params().unwrap();
        assert_eq!(p.gamma_prime, 9.1);
        assert!(p.epsilon > 0.0);
        // round trip through the echo
        let again = RunConfig::parse(&cfg.to_toml(), Path::new("echo")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let text = MINIMAL.replace("kappa = 3.7", "kappa = \"fast\"");
        match RunConfig::parse(&text, Path::new("x.toml")) {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "system.kappa"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}[mc]\nseeed = 3\n");
        match RunConfig::parse(&text, Path::new("x.toml")) {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "mc.seeed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn drive_needs_exactly_one_source() {
        let both = MINIMAL.replace("n_over_n0 = 0.07", "n_over_n0 = 0.07\nepsilon = 1.0");
        let cfg = RunConfig::parse(&both, Path::new("x.toml")).unwrap();
        assert!(matches!(cfg.system_params(), Err(CliError::Config { key, .. }) if key == "drive"));
    }

    #[test]
    fn effective_mapping_keeps_vacuum_rabi() {
        let text = MINIMAL.replace("n_atoms = 53.0\n", "") + "[effective]\nvacuum_rabi = 37.0\ng2_zero = 0.5\n";
        let cfg = RunConfig::parse(&text, Path::new("x.toml")).unwrap();
        let p = cfg.system_params().unwrap();
        assert!((p.vacuum_rabi() - 37.0).abs() < 1e-9);
        assert!(p.g < 5.1);
    }

    #[test]
    fn missing_shape_file_is_reported() {
        let text = format!("{MINIMAL}[pulse]\nstart_ns = 60.0\nintensity_step = -0.02\nshape = \"sampled\"\nshape_file = \"nope.txt\"\n");
        let cfg = RunConfig::parse(&text, Path::new("x.toml")).unwrap();
        let p = cfg.system_params().unwrap();
        assert!(matches!(cfg.pulse(&p), Err(CliError::Config { key, .. }) if key == "pulse.shape_file"));
    }
}
