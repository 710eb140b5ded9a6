//! Physical parameters of the driven cavity QED system.
//!
//! All user-facing rates are ordinary frequencies ν = ω/2π in MHz. The
//! dynamics run on angular rates in rad/µs; [`AngularRates`] holds those.
//! Times at the API boundary are in ns.
//!
//! Rate conventions: `kappa` is the cavity *field* decay rate (photon number
//! decays at 2κ), `gamma` the atomic full width, and `gamma_prime` the
//! broadened full width, so the atomic polarization decays at γ′/2.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::roots::bisect;
use crate::steady_state::solve_amplitudes;

/// Converts a frequency in MHz to an angular rate in rad/µs.
pub fn angular(nu_mhz: f64) -> f64 {
    TAU * nu_mhz
}

/// Converts an angular rate in rad/µs to rad/ns.
pub fn per_ns(omega: f64) -> f64 {
    omega * 1e-3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Single-atom coupling g (MHz).
    pub g: f64,
    /// Cavity field decay rate κ (MHz).
    pub kappa: f64,
    /// Atomic decay rate, full width (MHz).
    pub gamma: f64,
    /// Broadened polarization decay rate, full width (MHz).
    pub gamma_prime: f64,
    /// Atom number. Effective atom numbers are real, hence `f64`.
    pub n_atoms: f64,
    /// Drive amplitude ε (MHz).
    pub epsilon: f64,
}

impl SystemParams {
    /// Parameters with γ′ = γ.
    pub fn new(g: f64, kappa: f64, gamma: f64, n_atoms: f64, epsilon: f64) -> Self {
        Self {
            g,
            kappa,
            gamma,
            gamma_prime: gamma,
            n_atoms,
            epsilon,
        }
    }

    pub fn with_gamma_prime(self, gamma_prime: f64) -> Self {
        Self {
            gamma_prime,
            ..self
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn with_effective(self, eff: EffectiveParams) -> Self {
        Self {
            g: eff.g_eff,
            n_atoms: eff.n_eff,
            ..self
        }
    }

    /// Sets ε so that the steady-state field amplitude equals `lambda`.
    pub fn with_lambda(self, lambda: f64) -> Self {
        let c1 = self.g * self.g / (self.kappa * 0.5 * self.gamma_prime);
        self.with_epsilon(lambda * self.kappa * (1.0 + c1 * self.n_atoms))
    }

    /// Sets ε from an intracavity intensity n/n₀ (see [`drive_for_photon_number`]).
    pub fn with_photon_number(self, n_over_n0: f64) -> Result<Self> {
        Ok(self.with_epsilon(drive_for_photon_number(&self, n_over_n0)?))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("gamma_prime", self.gamma_prime),
            ("n_atoms", self.n_atoms),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(param(name, format!("{v} is not finite")));
            }
        }
        // g = 0 is admitted as the decoupled (empty cavity) limit.
        if self.g < 0.0 {
            return Err(param("g", "must be non-negative"));
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("gamma_prime", self.gamma_prime),
        ] {
            if v <= 0.0 {
                return Err(param(name, "decay rates must be strictly positive"));
            }
        }
        if self.gamma_prime < self.gamma {
            return Err(param(
                "gamma_prime",
                format!(
                    "broadened rate {} is below the natural rate {}",
                    self.gamma_prime, self.gamma
                ),
            ));
        }
        if self.n_atoms < 1.0 {
            return Err(param("n_atoms", "at least one atom is required"));
        }
        if self.epsilon < 0.0 {
            return Err(param("epsilon", "drive amplitude must be non-negative"));
        }
        Ok(())
    }

    /// g√N in MHz.
    pub fn vacuum_rabi(&self) -> f64 {
        self.g * self.n_atoms.sqrt()
    }

    pub fn angular(&self) -> AngularRates {
        AngularRates {
            g: angular(self.g),
            kappa: angular(self.kappa),
            gamma_prime: angular(self.gamma_prime),
            n_atoms: self.n_atoms,
            epsilon: angular(self.epsilon),
        }
    }

    /// Envelope decay time of the vacuum Rabi oscillation, 2/(κ + γ′/2), in ns.
    pub fn damping_time_ns(&self) -> f64 {
        let a = self.angular();
        1.0 / per_ns(0.5 * (a.kappa + 0.5 * a.gamma_prime))
    }
}

/// Rates in rad/µs as used by every dynamical module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularRates {
    pub g: f64,
    pub kappa: f64,
    pub gamma_prime: f64,
    pub n_atoms: f64,
    pub epsilon: f64,
}

impl AngularRates {
    /// Polarization decay rate γ′/2.
    pub fn gamma_perp(&self) -> f64 {
        0.5 * self.gamma_prime
    }

    /// g√N in rad/µs.
    pub fn vacuum_rabi(&self) -> f64 {
        self.g * self.n_atoms.sqrt()
    }

    /// 2g²N/γ′ = κ·C₁N, the rate at which the polarization acts back on
    /// the field amplitude.
    pub fn collective_coupling(&self) -> f64 {
        2.0 * self.g * self.g * self.n_atoms / self.gamma_prime
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    /// Single-atom cooperativity g²/(κ·γ′/2).
    pub c1: f64,
    /// Saturation photon number γ²/(3g²).
    pub n0: f64,
    /// g√N (MHz).
    pub vacuum_rabi: f64,
    /// Steady-state field amplitude ε/(κ(1 + C₁N)).
    pub lambda: f64,
}

pub fn derived_rates(params: &SystemParams) -> Result<DerivedRates> {
    params.validate()?;
    let c1 = params.g * params.g / (params.kappa * 0.5 * params.gamma_prime);
    let n0 = params.gamma * params.gamma / (3.0 * params.g * params.g);
    let lambda = params.epsilon / (params.kappa * (1.0 + c1 * params.n_atoms));
    Ok(DerivedRates {
        c1,
        n0,
        vacuum_rabi: params.vacuum_rabi(),
        lambda,
    })
}

/// Drive amplitude (MHz) giving a lowest-order photon number λ² = x·n₀.
///
/// The `epsilon` field of `params` is ignored.
pub fn drive_for_photon_number(params: &SystemParams, n_over_n0: f64) -> Result<f64> {
    if !(n_over_n0 >= 0.0 && n_over_n0.is_finite()) {
        return Err(param("n_over_n0", "must be finite and non-negative"));
    }
    let rates = derived_rates(&params.with_epsilon(0.0))?;
    if !rates.n0.is_finite() {
        return Err(param("g", "n0 is unbounded for g = 0"));
    }
    let lambda = (n_over_n0 * rates.n0).sqrt();
    Ok(lambda * params.kappa * (1.0 + rates.c1 * params.n_atoms))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub g_eff: f64,
    pub n_eff: f64,
}

/// Weak-field g²(0) = ζ₀² for a coupling/atom-number pair.
pub fn weak_field_g2_zero(g: f64, n_atoms: f64, kappa: f64, gamma_prime: f64) -> Result<f64> {
    let params = SystemParams::new(g, kappa, gamma_prime, n_atoms, 0.0);
    Ok(solve_amplitudes(&params)?.g2_zero)
}

/// Finds (g_eff, N_eff) with g_eff√N_eff = `target_vacuum_rabi` whose
/// weak-field g²(0) equals `target_g2_zero`.
///
/// g²(0) rises monotonically towards 1 as g_eff → 0 (the many-atom linear
/// limit), so a bisection on g_eff ∈ (0, min(g, g√N)] suffices. The upper
/// limit keeps N_eff ≥ 1.
pub fn fit_effective_params(
    g: f64,
    kappa: f64,
    gamma_prime: f64,
    target_vacuum_rabi: f64,
    target_g2_zero: f64,
) -> Result<EffectiveParams> {
    if !(target_g2_zero > 0.0 && target_g2_zero.is_finite()) {
        return Err(param("target_g2_zero", "must be positive"));
    }
    if !(target_vacuum_rabi > 0.0 && target_vacuum_rabi.is_finite()) {
        return Err(param("target_vacuum_rabi", "must be positive"));
    }
    if !(g > 0.0) {
        return Err(param("g", "must be positive"));
    }
    let hi = g.min(target_vacuum_rabi);
    let lo = hi * 1e-6;
    let g2_at = |g_eff: f64| {
        let n_eff = (target_vacuum_rabi / g_eff).powi(2);
        weak_field_g2_zero(g_eff, n_eff, kappa, gamma_prime)
    };
    let g2_hi = g2_at(hi)?;
    let g2_lo = g2_at(lo)?;
    let (min, max) = (g2_hi.min(g2_lo), g2_hi.max(g2_lo));
    if target_g2_zero < min || target_g2_zero > max {
        return Err(Error::InfeasibleTarget {
            target: target_g2_zero,
            min,
            max,
        });
    }
    let g_eff = bisect(|x| Ok(g2_at(x)? - target_g2_zero), lo, hi, 1e-10 * hi)?;
    Ok(EffectiveParams {
        g_eff,
        n_eff: (target_vacuum_rabi / g_eff).powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured() -> SystemParams {
        SystemParams::new(5.1, 3.7, 6.0, 1.0, 0.0)
    }

    #[test]
    fn saturation_number_and_cooperativity() {
        let r = derived_rates(&measured()).unwrap();
        // n0 = 36 / (3 * 26.01), C1 = 26.01 / (3.7 * 3.0)
        assert!((r.n0 - 36.0 / 78.03).abs() < 1e-12);
        assert!((r.n0 - 0.4613).abs() < 1e-4);
        assert!((r.c1 - 26.01 / 11.1).abs() < 1e-12);
        assert!((r.c1 - 2.343).abs() < 1e-3);
    }

    #[test]
    fn no_drive_no_field() {
        assert_eq!(derived_rates(&measured()).unwrap().lambda, 0.0);
        assert_eq!(drive_for_photon_number(&measured(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn vacuum_rabi_is_exact() {
        let p = SystemParams::new(5.1, 3.7, 6.0, 49.0, 1.0);
        assert_eq!(derived_rates(&p).unwrap().vacuum_rabi, 5.1 * 7.0);
    }

    #[test]
    fn operating_point_drive() {
        let n_atoms = (37.3f64 / 5.1).powi(2);
        let p = SystemParams::new(5.1, 3.7, 6.0, n_atoms, 0.0).with_gamma_prime(9.1);
        let eps = drive_for_photon_number(&p, 0.07).unwrap();
        let r = derived_rates(&p.with_epsilon(eps)).unwrap();
        assert!((r.lambda - 0.1797).abs() < 1e-4, "lambda = {}", r.lambda);
        assert!((r.lambda - (0.07 * r.n0).sqrt()).abs() < 1e-15);
        assert!((r.lambda.powi(2) / r.n0 - 0.07).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(measured().with_gamma_prime(5.0).validate().is_err());
        assert!(SystemParams::new(5.1, 0.0, 6.0, 1.0, 0.0).validate().is_err());
        assert!(SystemParams::new(5.1, 3.7, 6.0, 0.5, 0.0).validate().is_err());
        assert!(SystemParams::new(-1.0, 3.7, 6.0, 1.0, 0.0).validate().is_err());
        assert!(SystemParams::new(1.0, 3.7, 6.0, 1.0, -2.0).validate().is_err());
        assert!(drive_for_photon_number(&measured(), -0.1).is_err());
    }

    #[test]
    fn fit_fixed_point_at_integer_n() {
        let target = weak_field_g2_zero(5.1, 49.0, 3.7, 9.1).unwrap();
        let eff = fit_effective_params(5.1, 3.7, 9.1, 5.1 * 7.0, target).unwrap();
        assert!((eff.g_eff - 5.1).abs() < 1e-8, "{eff:?}");
        assert!((eff.n_eff - 49.0).abs() < 1e-6, "{eff:?}");
    }

    #[test]
    fn fit_rejects_unreachable_target() {
        match fit_effective_params(5.1, 3.7, 9.1, 37.3, 0.01) {
            Err(Error::InfeasibleTarget { min, max, .. }) => {
                assert!(min > 0.01 && max <= 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
