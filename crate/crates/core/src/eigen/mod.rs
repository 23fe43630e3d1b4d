//! Field-free rovibrational eigenstates φ_{ν,N}(R) by dense diagonalization
//! of each N-channel radial Hamiltonian in the Fourier-grid representation.

mod archive;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{ChannelSet, RadialGrid};
use crate::molecule::MoleculeModel;
use crate::units;

pub use archive::{read_archive, write_archive, ARCHIVE_VERSION};

/// Relative tail amplitude above which a bound state is flagged as touching
/// the box edge.
pub const TAIL_TOLERANCE: f64 = 1e-6;

/// One eigenpair of a channel Hamiltonian. `vector` is the reduced radial
/// function normalized with the grid weight, Σ φ(R_i)² ΔR = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub energy: f64,
    pub vector: Vec<f64>,
}

/// Dense Fourier-grid kinetic matrix T_ij = t[(i − j) mod n].
fn kinetic_row(grid: &RadialGrid, mass_au: f64) -> Vec<f64> {
    let n = grid.n_points;
    let dr = grid.spacing();
    let k = grid.wavenumbers();
    (0..n)
        .map(|m| {
            k.iter()
                .map(|kj| kj * kj / (2.0 * mass_au) * (kj * m as f64 * dr).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Diagonalizes T_R + N(N+1)/2μR² + V(R) for explicit potential samples.
/// Eigenpairs are sorted by energy; each vector has a fixed sign convention
/// (first amplitude above 10⁻³ of the maximum is positive).
pub fn solve_radial(
    grid: &RadialGrid,
    mass_au: f64,
    potential: &[f64],
    n: u32,
) -> Result<Vec<Eigenpair>> {
    let np = grid.n_points;
    if potential.len() != np {
        return Err(Error::Shape(format!(
            "potential has {} samples, grid has {np}",
            potential.len()
        )));
    }
    let row = kinetic_row(grid, mass_au);
    let points = grid.points();
    let rot = f64::from(n) * (f64::from(n) + 1.0) / (2.0 * mass_au);
    let h = DMatrix::from_fn(np, np, |i, j| {
        let t = row[(i + np - j) % np];
        if i == j {
            t + potential[i] + rot / (points[i] * points[i])
        } else {
            t
        }
    });
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or_else(|| {
        Error::Numerical(format!(
            "diagonalization of channel N = {n} did not converge"
        ))
    })?;
    let mut order: Vec<usize> = (0..np).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = 1.0 / grid.spacing().sqrt();
    Ok(order
        .into_iter()
        .map(|k| {
            let mut v: Vec<f64> = eig
                .eigenvectors
                .column(k)
                .iter()
                .map(|x| x * scale)
                .collect();
            let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-3 * max) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            Eigenpair {
                energy: eig.eigenvalues[k],
                vector: v,
            }
        })
        .collect())
}

/// All eigenpairs of channel N for `model` on `grid`.
pub fn solve_channel(model: &MoleculeModel, grid: &RadialGrid, n: u32) -> Result<Vec<Eigenpair>> {
    let sampled = model.sample(&grid.points())?;
    solve_radial(grid, model.reduced_mass_au(), &sampled.potential, n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundState {
    pub nu: usize,
    pub n: u32,
    /// Hartree.
    pub energy: f64,
    pub vector: Vec<f64>,
    /// The tail at the box edge exceeds [`TAIL_TOLERANCE`] of the peak.
    pub box_contaminated: bool,
}

impl BoundState {
    pub fn energy_cm(&self) -> f64 {
        units::hartree_to_cm(self.energy)
    }
}

/// Eigen data of one rotational channel. Every eigenvalue is kept; vectors
/// are kept for bound states (E below threshold) only.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStates {
    pub n: u32,
    /// All eigenvalues in hartree, ascending.
    pub energies: Vec<f64>,
    pub bound: Vec<BoundState>,
}

impl ChannelStates {
    fn from_eigenpairs(n: u32, pairs: Vec<Eigenpair>, threshold: f64) -> Self {
        let energies = pairs.iter().map(|p| p.energy).collect();
        let bound = pairs
            .into_iter()
            .take_while(|p| p.energy < threshold)
            .enumerate()
            .map(|(nu, p)| {
                let max = p.vector.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let edge = p.vector[0].abs().max(p.vector[p.vector.len() - 1].abs());
                BoundState {
                    nu,
                    n,
                    energy: p.energy,
                    box_contaminated: edge > TAIL_TOLERANCE * max,
                    vector: p.vector,
                }
            })
            .collect();
        Self { n, energies, bound }
    }
}

/// Bound-state library over a channel set, tagged with a provenance hash of
/// (model, grid, channel set).
#[derive(Clone, Debug, PartialEq)]
pub struct EigenLibrary {
    pub(crate) model: MoleculeModel,
    pub(crate) grid: RadialGrid,
    pub(crate) channels: ChannelSet,
    pub(crate) hash: String,
    pub(crate) states: Vec<ChannelStates>,
}

/// Hex SHA-256 of the canonical JSON encoding of (model, grid, channels).
pub fn provenance_hash(model: &MoleculeModel, grid: &RadialGrid, channels: &ChannelSet) -> String {
    let key = serde_json::json!({
        "archive_version": ARCHIVE_VERSION,
        "model": model,
        "grid": grid,
        "channels": channels,
    });
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}

impl EigenLibrary {
    /// Diagonalizes every channel (in parallel) and keeps the bound states.
    pub fn build(model: &MoleculeModel, grid: RadialGrid, channels: ChannelSet) -> Result<Self> {
        let sampled = model.sample(&grid.points())?;
        let mass = model.reduced_mass_au();
        let threshold = model.dissociation_threshold_au();
        let states = channels
            .n_values()
            .par_iter()
            .map(|&n| {
                solve_radial(&grid, mass, &sampled.potential, n)
                    .map(|pairs| ChannelStates::from_eigenpairs(n, pairs, threshold))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hash: provenance_hash(model, &grid, &channels),
            model: model.clone(),
            grid,
            channels,
            states,
        })
    }

    pub fn model(&self) -> &MoleculeModel {
        &self.model
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn channel_states(&self) -> &[ChannelStates] {
        &self.states
    }

    pub fn channel(&self, n: u32) -> Result<&ChannelStates> {
        self.channels
            .index_of(n)
            .map(|c| &self.states[c])
            .ok_or_else(|| Error::Lookup(format!("channel N = {n} not in library")))
    }

    pub fn state(&self, nu: usize, n: u32) -> Result<&BoundState> {
        self.channel(n)?
            .bound
            .get(nu)
            .ok_or_else(|| Error::Lookup(format!("no bound state (ν = {nu}, N = {n}) in library")))
    }

    /// Field-free energy of (ν, N) in hartree.
    pub fn energy(&self, nu: usize, n: u32) -> Result<f64> {
        Ok(self.state(nu, n)?.energy)
    }

    pub fn bound_states(&self) -> impl Iterator<Item = &BoundState> {
        self.states.iter().flat_map(|c| c.bound.iter())
    }

    pub fn bound_count(&self) -> usize {
        self.states.iter().map(|c| c.bound.len()).sum()
    }

    /// Same library on a different M: radial states depend on N only, so the
    /// requested channels are copied out of this library.
    pub fn restrict(&self, channels: &ChannelSet) -> Result<Self> {
        let states = channels
            .n_values()
            .iter()
            .map(|&n| self.channel(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hash: provenance_hash(&self.model, &self.grid, channels),
            model: self.model.clone(),
            grid: self.grid,
            channels: channels.clone(),
            states,
        })
    }

    /// Largest N (per ν) that still carries a bound state.
    pub fn bound_census(&self) -> BTreeMap<usize, u32> {
        let mut census = BTreeMap::new();
        for ch in &self.states {
            for s in &ch.bound {
                let e = census.entry(s.nu).or_insert(s.n);
                *e = (*e).max(s.n);
            }
        }
        census
    }

    /// ∫ φ_{ν,N}(R) f(R) φ_{ν',N'}(R) dR on the grid.
    ///
    /// The library holds reduced radial functions φ = R·(radial part), so the
    /// R² volume element of ⟨ν,N|f|ν',N'⟩ = ∫ φ*ᵥₙ f φᵥ'ₙ' R² dR written in terms
    /// of the unreduced radial parts is already absorbed here.
    pub fn radial_matrix_element(
        &self,
        f: impl Fn(f64) -> f64,
        bra: (usize, u32),
        ket: (usize, u32),
    ) -> Result<f64> {
        let a = self.state(bra.0, bra.1)?;
        let b = self.state(ket.0, ket.1)?;
        let dr = self.grid.spacing();
        let points = self.grid.points();
        Ok(points
            .iter()
            .zip(a.vector.iter().zip(&b.vector))
            .map(|(&r, (x, y))| x * f(r) * y)
            .sum::<f64>()
            * dr)
    }

    /// [`Self::radial_matrix_element`] of a model curve; domain errors surface.
    pub fn curve_matrix_element(
        &self,
        curve: &crate::molecule::CurveSpec,
        bra: (usize, u32),
        ket: (usize, u32),
    ) -> Result<f64> {
        let values = self
            .grid
            .points()
            .iter()
            .map(|&r| curve.evaluate(r))
            .collect::<Result<Vec<_>>>()?;
        let a = self.state(bra.0, bra.1)?;
        let b = self.state(ket.0, ket.1)?;
        Ok(values
            .iter()
            .zip(a.vector.iter().zip(&b.vector))
            .map(|(v, (x, y))| x * v * y)
            .sum::<f64>()
            * self.grid.spacing())
    }

    /// Overlaps ⟨φ_{ν,N_c}|φ_{ν',N_{c+1}}⟩ between bound states of adjacent
    /// channels, row-major in (ν, ν').
    pub fn adjacent_overlaps(&self) -> Vec<Vec<f64>> {
        let dr = self.grid.spacing();
        self.states
            .windows(2)
            .map(|w| {
                let mut s = Vec::with_capacity(w[0].bound.len() * w[1].bound.len());
                for a in &w[0].bound {
                    for b in &w[1].bound {
                        s.push(
                            a.vector
                                .iter()
                                .zip(&b.vector)
                                .map(|(x, y)| x * y)
                                .sum::<f64>()
                                * dr,
                        );
                    }
                }
                s
            })
            .collect()
    }

    /// B_ν, ⟨Δα⟩_ν and ⟨α⊥⟩_ν from the N = 0 vibrational states.
    pub fn averaged_constants(&self) -> Result<AveragedConstants> {
        let ground = self.channel(0)?;
        let mass = self.model.reduced_mass_au();
        let bands = (0..ground.bound.len())
            .map(|nu| {
                let inv_r2 = self.radial_matrix_element(|r| 1.0 / (r * r), (nu, 0), (nu, 0))?;
                Ok(BandConstants {
                    nu,
                    rotational_constant: inv_r2 / (2.0 * mass),
                    delta_alpha: self.curve_matrix_element(
                        &self.model.delta_alpha,
                        (nu, 0),
                        (nu, 0),
                    )?,
                    alpha_perp: self.curve_matrix_element(
                        &self.model.alpha_perp,
                        (nu, 0),
                        (nu, 0),
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AveragedConstants { bands })
    }

    /// CSV rows `nu,N,energy_cm,bound,box_contaminated` for the bound states.
    pub fn energy_table_csv(&self) -> String {
        let mut out = String::from("nu,N,energy_cm,box_contaminated\n");
        for s in self.bound_states() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.nu,
                s.n,
                crate::format_sig(s.energy_cm()),
                u8::from(s.box_contaminated)
            ));
        }
        out
    }
}

/// Vibrationally averaged constants of one band (atomic units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandConstants {
    pub nu: usize,
    /// B_ν = ħ²⟨R⁻²⟩_ν/2μ in hartree.
    pub rotational_constant: f64,
    pub delta_alpha: f64,
    pub alpha_perp: f64,
}

impl BandConstants {
    pub fn rotational_constant_cm(&self) -> f64 {
        units::hartree_to_cm(self.rotational_constant)
    }

    /// τ_B = 1/(2cB) in ps.
    pub fn rotational_period_ps(&self) -> f64 {
        1e12 / (2.0 * units::SPEED_OF_LIGHT_CM_S * self.rotational_constant_cm())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedConstants {
    pub bands: Vec<BandConstants>,
}

impl AveragedConstants {
    pub fn band(&self, nu: usize) -> Result<&BandConstants> {
        self.bands
            .get(nu)
            .ok_or_else(|| Error::Lookup(format!("no averaged constants for band ν = {nu}")))
    }
}
