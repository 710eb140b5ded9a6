//! Master-equation reference: the mixed steady state and the two-time
//! intensity correlation by quantum regression, on the truncated basis.
//!
//! H = iε(a† − a) + ig(a†J₋ − aJ₊), cavity damping √(2κ)·a and atomic damping
//! √γ′·K with K|k⟩ = √k|k−1⟩, so that the anti-Hermitian part matches the
//! no-jump generator term for term.
//!
//! Populations span many orders of magnitude at weak drive, so the
//! Liouvillian is solved in rescaled variables ρ̃ = ρ/s^(e+e′) where e, e′
//! are the excitation numbers of the row and column states and s = λ.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::ExcitationBasis;
use crate::conditional::G2Series;
use crate::error::{Error, Result};
use crate::model::{derived_rates, SystemParams};

type CMatrix = DMatrix<Complex64>;

/// Photon annihilation a on the truncated basis.
pub fn photon_lowering(basis: &ExcitationBasis) -> DMatrix<f64> {
    ladder(basis, |s| {
        (s.photons > 0).then(|| ((s.photons - 1, s.excited), (s.photons as f64).sqrt()))
    })
}

/// Collective Dicke lowering J₋|k⟩ = √(k(N−k+1))|k−1⟩.
pub fn dicke_lowering(basis: &ExcitationBasis) -> DMatrix<f64> {
    ladder(basis, |s| {
        (s.excited > 0).then(|| ((s.photons, s.excited - 1), basis.dicke_raise(s.excited - 1)))
    })
}

/// Exchange a†J₋ built directly, so that its adjoint aJ₊ is not lost to the
/// truncation of the intermediate state.
pub fn exchange(basis: &ExcitationBasis) -> DMatrix<f64> {
    ladder(basis, |s| {
        (s.excited > 0).then(|| {
            (
                (s.photons + 1, s.excited - 1),
                ((s.photons + 1) as f64).sqrt() * basis.dicke_raise(s.excited - 1),
            )
        })
    })
}

/// Atomic damping channel K|k⟩ = √k|k−1⟩, with K†K = k̂.
pub fn excitation_lowering(basis: &ExcitationBasis) -> DMatrix<f64> {
    ladder(basis, |s| {
        (s.excited > 0).then(|| ((s.photons, s.excited - 1), (s.excited as f64).sqrt()))
    })
}

fn ladder(
    basis: &ExcitationBasis,
    map: impl Fn(&crate::basis::BasisState) -> Option<((u32, u32), f64)>,
) -> DMatrix<f64> {
    let d = basis.len();
    let mut m = DMatrix::zeros(d, d);
    for (j, s) in basis.states().iter().enumerate() {
        if let Some(((n, k), v)) = map(s) {
            if let Some(i) = basis.index_of(n, k) {
                m[(i, j)] = v;
            }
        }
    }
    m
}

fn complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Liouvillian superoperator acting on column-stacked ρ (rates in 1/ns).
pub fn liouvillian(params: &SystemParams, basis: &ExcitationBasis) -> CMatrix {
    let r = params.angular();
    let to_ns = 1e-3;
    let a = complex(&photon_lowering(basis));
    let x = complex(&exchange(basis));
    let kl = complex(&excitation_lowering(basis));
    let i = Complex64::i();
    let ad = a.adjoint();
    let h = (&ad - &a) * (i * r.epsilon * to_ns)
        + (&x - x.adjoint()) * (i * r.g * to_ns);
    let d = basis.len();
    let id = CMatrix::identity(d, d);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * (-i);
    for (op, rate) in [(a, 2.0 * r.kappa * to_ns), (kl, r.gamma_prime * to_ns)] {
        let ldl = op.adjoint() * &op;
        let half = Complex64::new(0.5, 0.0);
        l += (op.conjugate().kronecker(&op) - id.kronecker(&ldl) * half - ldl.transpose().kronecker(&id) * half)
            * Complex64::new(rate, 0.0);
    }
    l
}

/// Density matrix on the truncated basis.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub basis: ExcitationBasis,
    pub elements: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity at the stated tolerances.
    pub fn check(&self) -> Result<()> {
        let m = &self.elements;
        let herm = (m - m.adjoint()).camax();
        if herm > 1e-12 {
            return Err(Error::Normalization(format!("not Hermitian: {herm:e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::Normalization(format!("trace {tr}")));
        }
        let herm_part = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let min = herm_part
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::Normalization(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn mean_photons(&self) -> f64 {
        self.diagonal_weighted(|s| s.photons as f64)
    }

    pub fn mean_excited(&self) -> f64 {
        self.diagonal_weighted(|s| s.excited as f64)
    }

    fn diagonal_weighted(&self, w: impl Fn(&crate::basis::BasisState) -> f64) -> f64 {
        self.basis
            .states()
            .iter()
            .enumerate()
            .map(|(i, s)| w(s) * self.elements[(i, i)].re)
            .sum()
    }
}

/// Liouvillian and steady state in rescaled variables.
struct Scaled {
    basis: ExcitationBasis,
    scale: f64,
    // excitation number per basis state
    excitation: Vec<i32>,
    liouvillian: CMatrix,
    rho: DVector<Complex64>,
}

impl Scaled {
    fn new(params: &SystemParams, cutoff: usize) -> Result<Self> {
        params.validate()?;
        let lambda = derived_rates(params)?.lambda;
        let scale = if lambda > 0.0 { lambda.min(1.0) } else { 1.0 };
        let basis = ExcitationBasis::new(params.n_atoms, cutoff)?;
        let d = basis.len();
        let excitation: Vec<i32> = basis.states().iter().map(|s| s.excitations() as i32).collect();
        let mut l = liouvillian(params, &basis);
        // L̃ = D⁻¹ L D with D = diag(s^(e_row + e_col))
        let pair = |p: usize| excitation[p % d] + excitation[p / d];
        for q in 0..d * d {
            for p in 0..d * d {
                let v = l[(p, q)];
                if v != Complex64::new(0.0, 0.0) {
                    l[(p, q)] = v * scale.powi(pair(q) - pair(p));
                }
            }
        }
        // replace the first row by the trace condition on the ground population
        let mut sys = l.clone();
        let mut rhs = DVector::zeros(d * d);
        for q in 0..d * d {
            sys[(0, q)] = Complex64::new(0.0, 0.0);
        }
        for k in 0..d {
            sys[(0, k * d + k)] = Complex64::new(scale.powi(2 * excitation[k]), 0.0);
        }
        rhs[0] = Complex64::new(1.0, 0.0);
        let rho = sys
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("Liouvillian null space is not one-dimensional".into()))?;
        let residual = (&l * &rho).camax();
        let size = l.camax() * rho.camax();
        if !(residual <= 1e-10 * size.max(1.0)) {
            return Err(Error::Degenerate(format!(
                "steady-state residual {residual:e} exceeds tolerance"
            )));
        }
        Ok(Self {
            basis,
            scale,
            excitation,
            liouvillian: l,
            rho,
        })
    }

    fn unscale(&self, v: &DVector<Complex64>) -> CMatrix {
        let d = self.basis.len();
        CMatrix::from_fn(d, d, |i, j| {
            v[j * d + i] * self.scale.powi(self.excitation[i] + self.excitation[j])
        })
    }

    /// Σ n·σ_mm / s² for a rescaled column-stacked σ.
    fn photons_over_s2(&self, v: &DVector<Complex64>) -> f64 {
        let d = self.basis.len();
        self.basis
            .states()
            .iter()
            .enumerate()
            .map(|(m, st)| {
                st.photons as f64 * v[m * d + m].re * self.scale.powi(2 * self.excitation[m] - 2)
            })
            .sum()
    }

    /// a·ρ·a† in rescaled variables, divided by s² so its entries are O(1).
    fn collapsed(&self) -> DVector<Complex64> {
        let d = self.basis.len();
        let a = photon_lowering(&self.basis);
        let mut out = DVector::zeros(d * d);
        for j in 0..d {
            for i in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for q in 0..d {
                    let aq = a[(j, q)];
                    if aq == 0.0 {
                        continue;
                    }
                    for p in 0..d {
                        let ap = a[(i, p)];
                        if ap != 0.0 {
                            acc += self.rho[q * d + p] * (ap * aq);
                        }
                    }
                }
                out[j * d + i] = acc;
            }
        }
        out
    }
}

/// Steady state of the master equation at the given cutoff.
pub fn steady_density(params: &SystemParams, cutoff: usize) -> Result<DensityMatrix> {
    let sc = Scaled::new(params, cutoff)?;
    let mut elements = sc.unscale(&sc.rho);
    let tr = elements.trace();
    elements /= tr;
    let dm = DensityMatrix {
        basis: sc.basis,
        elements,
    };
    dm.check()?;
    Ok(dm)
}

/// g²(τ) = Tr[n̂·e^{L|τ|}(aρa†)]/⟨n̂⟩² on an arbitrary grid.
pub fn g2_of_tau(params: &SystemParams, cutoff: usize, tau_grid: &[f64]) -> Result<G2Series> {
    if derived_rates(params)?.lambda == 0.0 {
        return Err(Error::NoField);
    }
    let sc = Scaled::new(params, cutoff)?;
    let trace: f64 = (0..sc.basis.len())
        .map(|k| {
            let d = sc.basis.len();
            sc.rho[k * d + k].re * sc.scale.powi(2 * sc.excitation[k])
        })
        .sum();
    let n_mean = sc.photons_over_s2(&sc.rho) / trace;
    let start = sc.collapsed();

    let mut order: Vec<(f64, usize)> = tau_grid
        .iter()
        .enumerate()
        .map(|(i, t)| (t.abs(), i))
        .collect();
    if order.iter().any(|(t, _)| !t.is_finite()) {
        return Err(crate::error::param("tau_grid", "times must be finite"));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut propagators: HashMap<u64, CMatrix> = HashMap::new();
    let mut values = vec![0.0; tau_grid.len()];
    let mut state = start;
    let mut t_now = 0.0;
    for (t, idx) in order {
        let dt = t - t_now;
        if dt > 0.0 {
            let prop = propagators
                .entry(dt.to_bits())
                .or_insert_with(|| (&sc.liouvillian * Complex64::new(dt, 0.0)).exp());
            state = &*prop * &state;
            if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Integration {
                    t_ns: t,
                    reason: "propagation overflow".into(),
                });
            }
            t_now = t;
        }
        values[idx] = sc.photons_over_s2(&state) / trace / (n_mean * n_mean);
    }
    Ok(G2Series::new(tau_grid.to_vec(), values))
}
