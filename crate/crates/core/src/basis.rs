//! Truncated excitation-number basis |n, k⟩: n photons and k excitations in
//! the symmetric (Dicke) subspace of the atoms.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisState {
    pub photons: u32,
    pub excited: u32,
}

impl BasisState {
    pub fn excitations(&self) -> u32 {
        self.photons + self.excited
    }
}

/// All states with n + k ≤ M and k ≤ min(⌈N⌉, M), ordered by total
/// excitation and then by decreasing photon number:
/// |0,G⟩, |1,G⟩, |0,E⟩, |2,G⟩, |1,E⟩, |0,EE⟩, …
///
/// A real (effective) atom number N truncates the Dicke ladder at ⌈N⌉; the
/// ladder factors √((k+1)(N−k)) stay real there.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationBasis {
    n_atoms: f64,
    cutoff: usize,
    states: Vec<BasisState>,
    // (photons, excited) -> position, dense (M+1)×(M+1) table
    lookup: Vec<Option<usize>>,
}

impl ExcitationBasis {
    pub fn new(n_atoms: f64, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::Cutoff(cutoff));
        }
        if !(n_atoms >= 1.0 && n_atoms.is_finite()) {
            return Err(param("n_atoms", "at least one atom is required"));
        }
        let k_max = (n_atoms.ceil() as usize).min(cutoff);
        let side = cutoff + 1;
        let mut states = Vec::new();
        let mut lookup = vec![None; side * side];
        for total in 0..=cutoff {
            for photons in (0..=total).rev() {
                let excited = total - photons;
                if excited <= k_max {
                    lookup[photons * side + excited] = Some(states.len());
                    states.push(BasisState {
                        photons: photons as u32,
                        excited: excited as u32,
                    });
                }
            }
        }
        Ok(Self {
            n_atoms,
            cutoff,
            states,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_atoms(&self) -> f64 {
        self.n_atoms
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, photons: u32, excited: u32) -> Option<usize> {
        let (n, k) = (photons as usize, excited as usize);
        if n > self.cutoff || k > self.cutoff {
            return None;
        }
        self.lookup[n * (self.cutoff + 1) + k]
    }

    /// Matrix element of J₊ between |k⟩ and |k+1⟩ in the Dicke ladder.
    pub fn dicke_raise(&self, excited: u32) -> f64 {
        let k = excited as f64;
        ((k + 1.0) * (self.n_atoms - k)).max(0.0).sqrt()
    }
}

/// Real amplitudes over an [`ExcitationBasis`].
///
/// The drive and coupling phases are chosen so that the no-jump generator is
/// a real matrix; amplitudes reached from real initial states stay real.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeVector {
    pub basis: ExcitationBasis,
    pub amplitudes: Vec<f64>,
}

impl AmplitudeVector {
    pub fn new(basis: ExcitationBasis, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(param(
                "amplitudes",
                format!("length {} != basis size {}", amplitudes.len(), basis.len()),
            ));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis_state(basis: ExcitationBasis, photons: u32, excited: u32) -> Result<Self> {
        let idx = basis
            .index_of(photons, excited)
            .ok_or_else(|| param("initial state", format!("|{photons},{excited}⟩ not in basis")))?;
        let mut amplitudes = vec![0.0; basis.len()];
        amplitudes[idx] = 1.0;
        Ok(Self { basis, amplitudes })
    }

    pub fn get(&self, photons: u32, excited: u32) -> f64 {
        self.basis
            .index_of(photons, excited)
            .map_or(0.0, |i| self.amplitudes[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c * c).sum()
    }

    pub fn mean_photons(&self) -> f64 {
        self.weighted(|s| s.photons as f64) / self.norm_sqr()
    }

    pub fn mean_excited(&self) -> f64 {
        self.weighted(|s| s.excited as f64) / self.norm_sqr()
    }

    fn weighted(&self, w: impl Fn(&BasisState) -> f64) -> f64 {
        self.basis
            .states()
            .iter()
            .zip(&self.amplitudes)
            .map(|(s, c)| w(s) * c * c)
            .sum()
    }

    /// â acting on the vector: c′(n,k) = √(n+1)·c(n+1,k). Not renormalized.
    pub fn annihilate_photon(&self) -> Self {
        let mut out = vec![0.0; self.amplitudes.len()];
        for (i, s) in self.basis.states().iter().enumerate() {
            if let Some(j) = self.basis.index_of(s.photons + 1, s.excited) {
                out[i] = ((s.photons + 1) as f64).sqrt() * self.amplitudes[j];
            }
        }
        Self {
            basis: self.basis.clone(),
            amplitudes: out,
        }
    }

    /// Symmetric-subspace atomic lowering: c′(n,k) = √(k+1)·c(n,k+1).
    pub fn lower_atom(&self) -> Self {
        let mut out = vec![0.0; self.amplitudes.len()];
        for (i, s) in self.basis.states().iter().enumerate() {
            if let Some(j) = self.basis.index_of(s.photons, s.excited + 1) {
                out[i] = ((s.excited + 1) as f64).sqrt() * self.amplitudes[j];
            }
        }
        Self {
            basis: self.basis.clone(),
            amplitudes: out,
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.iter().map(|c| c / n).collect(),
        }
    }
}
