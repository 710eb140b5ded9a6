//! Weak-field steady state of the driven system on the excitation basis.
//!
//! The no-jump amplitude equations are ċ = A·c with A built by
//! [`no_jump_generator`]. With the drive phase chosen as `+ε` on photon
//! raising, the first-order atomic amplitude comes out negative relative to
//! the field, c(0,1)/c(1,0) = −2g√N/γ′.
//!
//! [`solve_amplitudes`] returns the weak-field expansion coefficients: the
//! linear solve keeps only the upward drive couplings, so excitation level j
//! scales exactly as λʲ and ζ₀, θ₀ are drive independent. The solve of the
//! complete truncated system at finite drive is [`solve_amplitudes_full`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{AmplitudeVector, ExcitationBasis};
use crate::conditional::ConditionalState;
use crate::error::{Error, Result};
use crate::model::{derived_rates, SystemParams};

/// Default excitation cutoff: the order-λ² truncation.
pub const DEFAULT_CUTOFF: usize = 2;

pub fn build_basis(n_atoms: f64, cutoff: usize) -> Result<ExcitationBasis> {
    ExcitationBasis::new(n_atoms, cutoff)
}

/// The generator split by its dependence on the drive; rates in rad/µs.
#[derive(Clone, Debug)]
pub struct GeneratorParts {
    /// Coupling and decay.
    pub base: DMatrix<f64>,
    /// Photon raising by a unit drive amplitude (1 rad/µs).
    pub drive_raise: DMatrix<f64>,
    /// Photon lowering by a unit drive amplitude.
    pub drive_lower: DMatrix<f64>,
}

impl GeneratorParts {
    pub fn new(params: &SystemParams, basis: &ExcitationBasis) -> Self {
        let rates = params.angular();
        let dim = basis.len();
        let mut base = DMatrix::zeros(dim, dim);
        let mut drive_raise = DMatrix::zeros(dim, dim);
        let mut drive_lower = DMatrix::zeros(dim, dim);
        for (i, s) in basis.states().iter().enumerate() {
            let (n, k) = (s.photons, s.excited);
            base[(i, i)] = -(rates.kappa * n as f64 + rates.gamma_perp() * k as f64);
            if let Some(j) = basis.index_of(n + 1, k) {
                let amp = ((n + 1) as f64).sqrt();
                drive_raise[(j, i)] += amp;
                drive_lower[(i, j)] -= amp;
                // |n+1,k⟩ ↔ |n,k+1⟩ exchange
                if let Some(l) = basis.index_of(n, k + 1) {
                    let c = rates.g * amp * basis.dicke_raise(k);
                    base[(l, j)] -= c;
                    base[(j, l)] += c;
                }
            }
        }
        Self {
            base,
            drive_raise,
            drive_lower,
        }
    }

    /// A = base + ε·(raise + lower); `epsilon` in rad/µs.
    pub fn assemble(&self, epsilon: f64) -> DMatrix<f64> {
        &self.base + (&self.drive_raise + &self.drive_lower) * epsilon
    }
}

/// Generator of the no-jump amplitude equations with drive ε·`epsilon_scale`.
pub fn no_jump_generator(
    params: &SystemParams,
    basis: &ExcitationBasis,
    epsilon_scale: f64,
) -> DMatrix<f64> {
    GeneratorParts::new(params, basis).assemble(params.angular().epsilon * epsilon_scale)
}

#[derive(Clone, Debug)]
pub struct SteadyStateSolution {
    pub params: SystemParams,
    /// Physical amplitudes, ground amplitude fixed to 1.
    pub amplitudes: AmplitudeVector,
    /// Expansion coefficients: the amplitudes evaluated at λ = 1.
    pub coefficients: AmplitudeVector,
    pub lambda: f64,
    pub zeta0: f64,
    pub theta0: f64,
    pub g2_zero: f64,
}

impl SteadyStateSolution {
    pub fn summary(&self) -> SteadySummary {
        SteadySummary {
            lambda: self.lambda,
            zeta0: self.zeta0,
            theta0: self.theta0,
            g2_zero: self.g2_zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadySummary {
    pub lambda: f64,
    pub zeta0: f64,
    pub theta0: f64,
    pub g2_zero: f64,
}

/// Weak-field steady state at the default cutoff.
pub fn solve_amplitudes(params: &SystemParams) -> Result<SteadyStateSolution> {
    solve_amplitudes_with_cutoff(params, DEFAULT_CUTOFF)
}

pub fn solve_amplitudes_with_cutoff(
    params: &SystemParams,
    cutoff: usize,
) -> Result<SteadyStateSolution> {
    let lambda = derived_rates(params)?.lambda;
    let basis = build_basis(params.n_atoms, cutoff)?;
    let parts = GeneratorParts::new(params, &basis);
    let rates = params.angular();
    // drive giving λ = 1: ε = κ(1 + C₁N)
    let unit_drive = rates.kappa + rates.collective_coupling();
    let a = &parts.base + &parts.drive_raise * unit_drive;
    let coefficients = AmplitudeVector::new(basis.clone(), solve_with_ground_fixed(&a)?)?;

    let amplitudes = coefficients
        .amplitudes
        .iter()
        .zip(basis.states())
        .map(|(c, s)| c * lambda.powi(s.excitations() as i32))
        .collect();
    let amplitudes = AmplitudeVector::new(basis, amplitudes)?;

    let zeta0 = std::f64::consts::SQRT_2 * coefficients.get(2, 0);
    let theta0 = polarization(params, -coefficients.get(1, 1));
    Ok(SteadyStateSolution {
        params: *params,
        amplitudes,
        coefficients,
        lambda,
        zeta0,
        theta0,
        g2_zero: zeta0 * zeta0,
    })
}

/// Steady state of the complete truncated amplitude equations at the actual
/// drive, including the downward drive couplings. Ground amplitude fixed to 1.
pub fn solve_amplitudes_full(params: &SystemParams, cutoff: usize) -> Result<AmplitudeVector> {
    params.validate()?;
    let basis = build_basis(params.n_atoms, cutoff)?;
    let a = no_jump_generator(params, &basis, 1.0);
    let c = solve_with_ground_fixed(&a)?;
    AmplitudeVector::new(basis, c)
}

/// Collapse on a photodetection: â|ψ⟩ renormalized to unit ground amplitude,
/// read out as (ζ(0), θ(0)).
pub fn post_jump_state(sol: &SteadyStateSolution) -> Result<ConditionalState> {
    if sol.lambda <= 0.0 {
        return Err(Error::NoField);
    }
    let collapsed = sol.amplitudes.annihilate_photon();
    let ground = collapsed.get(0, 0);
    let zeta = collapsed.get(1, 0) / ground / sol.lambda;
    let theta = polarization(&sol.params, -collapsed.get(0, 1) / ground / sol.lambda);
    Ok(ConditionalState { zeta, theta })
}

/// Converts an atomic amplitude (sign flipped, per unit λ) into the
/// normalized polarization θ by dividing out the steady-state ratio 2g√N/γ′.
fn polarization(params: &SystemParams, amplitude: f64) -> f64 {
    let rates = params.angular();
    let ratio = 2.0 * rates.vacuum_rabi() / rates.gamma_prime;
    if ratio == 0.0 {
        // g → 0 limit: the polarization tracks the field exactly
        1.0
    } else {
        amplitude / ratio
    }
}

/// Solves A·c = 0 on the excited states with c(0,0) = 1.
fn solve_with_ground_fixed(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = a.nrows();
    let sub = a.view((1, 1), (dim - 1, dim - 1)).into_owned();
    let rhs: DVector<f64> = -a.view((1, 0), (dim - 1, 1)).column(0).into_owned();
    let x = sub
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("steady-state amplitudes"))?;
    let residual = (&sub * &x - &rhs).norm();
    if residual > 1e-12 * rhs.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Singular("steady-state amplitudes (residual)"));
    }
    let mut c = Vec::with_capacity(dim);
    c.push(1.0);
    c.extend(x.iter());
    Ok(c)
}
