//! Boltzmann weights of the initial states and ensemble averages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eigen::EigenLibrary;
use crate::error::{Error, Result};
use crate::units;

fn default_cutoff() -> u32 {
    24
}

fn default_boltzmann() -> f64 {
    units::BOLTZMANN_CM_PER_K
}

/// Ensemble definition. Only even N₀ up to `n_cutoff` in band `nu0` enter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub temperature_k: f64,
    #[serde(default = "default_cutoff")]
    pub n_cutoff: u32,
    #[serde(default)]
    pub nu0: usize,
    /// k_B in cm⁻¹/K.
    #[serde(default = "default_boltzmann")]
    pub boltzmann: f64,
}

/// One ensemble member (N₀, |M₀|) and its weight, degeneracy included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalMember {
    pub n0: u32,
    pub m_abs: u32,
    pub weight: f64,
}

impl ThermalSpec {
    pub fn new(temperature_k: f64) -> Self {
        Self {
            temperature_k,
            n_cutoff: default_cutoff(),
            nu0: 0,
            boltzmann: default_boltzmann(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_k > 0.0) || !self.temperature_k.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature_k
            )));
        }
        if !(self.boltzmann > 0.0) {
            return Err(Error::Config("Boltzmann constant must be positive".into()));
        }
        Ok(())
    }

    fn kt_cm(&self) -> f64 {
        self.boltzmann * self.temperature_k
    }

    /// e^{(E₀₀ − E)/kT} for an energy E in hartree.
    fn boltzmann_factor(&self, e00: f64, e: f64) -> f64 {
        (units::hartree_to_cm(e00 - e) / self.kt_cm()).exp()
    }

    /// Z = Σ_{N₀ even ≤ N_T} (2N₀+1) e^{(E₀₀ − E_{ν₀,N₀})/kT}.
    pub fn partition_function(&self, library: &EigenLibrary) -> Result<f64> {
        self.validate()?;
        let e00 = library.energy(0, 0)?;
        let mut z = 0.0;
        for n0 in (0..=self.n_cutoff).step_by(2) {
            let e = library.energy(self.nu0, n0)?;
            z += f64::from(2 * n0 + 1) * self.boltzmann_factor(e00, e);
        }
        Ok(z)
    }

    /// W_{ν,N,|M|} = g_{|M|} e^{(E₀₀ − E_{ν,N})/kT} / Z for any bound level,
    /// inside the ensemble or not.
    pub fn weight(&self, library: &EigenLibrary, nu: usize, n: u32, m_abs: u32) -> Result<f64> {
        if m_abs > n {
            return Err(Error::Lookup(format!("|M| = {m_abs} exceeds N = {n}")));
        }
        let z = self.partition_function(library)?;
        let e00 = library.energy(0, 0)?;
        let g = if m_abs == 0 { 1.0 } else { 2.0 };
        Ok(g * self.boltzmann_factor(e00, library.energy(nu, n)?) / z)
    }
}

/// Members (N₀ even ≤ N_T, 0 ≤ |M₀| ≤ N₀) with their weights. They sum to one.
pub fn thermal_weights(spec: &ThermalSpec, library: &EigenLibrary) -> Result<Vec<ThermalMember>> {
    let z = spec.partition_function(library)?;
    let e00 = library.energy(0, 0)?;
    let mut out = Vec::new();
    for n0 in (0..=spec.n_cutoff).step_by(2) {
        let base = spec.boltzmann_factor(e00, library.energy(spec.nu0, n0)?) / z;
        for m_abs in 0..=n0 {
            let g = if m_abs == 0 { 1.0 } else { 2.0 };
            out.push(ThermalMember {
                n0,
                m_abs,
                weight: g * base,
            });
        }
    }
    Ok(out)
}

/// Σ W · distribution over the ensemble. Every member must have a result;
/// otherwise the missing (N₀, |M₀|) pairs are reported.
pub fn thermal_average<K: Ord + Clone>(
    members: &[ThermalMember],
    results: &BTreeMap<(u32, u32), BTreeMap<K, f64>>,
) -> Result<BTreeMap<K, f64>> {
    let missing: Vec<(u32, u32)> = members
        .iter()
        .map(|m| (m.n0, m.m_abs))
        .filter(|key| !results.contains_key(key))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let mut out = BTreeMap::new();
    for m in members {
        for (k, v) in &results[&(m.n0, m.m_abs)] {
            *out.entry(k.clone()).or_insert(0.0) += m.weight * v;
        }
    }
    Ok(out)
}

/// Rigid-rotor estimate of the population the cutoff leaves out: the
/// fraction of Σ_{N even}(2N+1)e^{−B N(N+1)/kT} carried by N > `n_cutoff`.
pub fn thermal_tail_fraction(temperature_k: f64, b_cm: f64, boltzmann: f64, n_cutoff: u32) -> f64 {
    let kt = boltzmann * temperature_k;
    let mut total = 0.0;
    let mut tail = 0.0;
    let mut n = 0u32;
    loop {
        let nf = f64::from(n);
        let term = (2.0 * nf + 1.0) * (-b_cm * nf * (nf + 1.0) / kt).exp();
        total += term;
        if n > n_cutoff {
            tail += term;
            if term < 1e-18 * total {
                break;
            }
        }
        n += 2;
    }
    tail / total
}
