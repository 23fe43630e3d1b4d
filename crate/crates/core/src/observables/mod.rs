//! Projections of wavepackets on the field-free bound states and the
//! quantities derived from them: vibrational and rotational distributions,
//! mean rotational excitation, dissociation probability and alignment.

mod thermal;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenLibrary;
use crate::error::{Error, Result};
use crate::format_sig;
use crate::grid::{cos2_coupling, Wavepacket};
use crate::units;

pub use thermal::{
    thermal_average, thermal_tail_fraction, thermal_weights, ThermalMember, ThermalSpec,
};

/// Negative P^D down to this magnitude is rounding noise and reads as 0.
pub const DISSOCIATION_CLIP: f64 = 1e-9;

/// Entries below this weight are omitted from sparse distributions.
pub const SPARSE_THRESHOLD: f64 = 1e-10;

/// Label (ν₀, N₀, M₀) of the state a run started from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InitialState {
    pub nu: usize,
    pub n: u32,
    pub m: i32,
}

/// Coefficients of one rotational channel, indexed by ν.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelProjection {
    pub n: u32,
    /// Field-free energies E_{ν,N} in hartree.
    pub energies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
}

/// C(ν, N, t) = ⟨φ_{ν,N}|f_N(t)⟩ for every bound state of a library.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionTable {
    pub initial: InitialState,
    pub time_ps: f64,
    pub m: i32,
    pub channels: Vec<ChannelProjection>,
}

/// Projects `wp` on all bound states of `library`.
pub fn project(
    wp: &Wavepacket,
    library: &EigenLibrary,
    initial: InitialState,
) -> Result<ProjectionTable> {
    if wp.grid() != library.grid() || wp.channels() != library.channels() {
        return Err(Error::Shape(
            "wavepacket and eigen library use different grids or channel sets".into(),
        ));
    }
    let dr = wp.grid().spacing();
    let channels = library
        .channel_states()
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            let f = wp.channel(c);
            ChannelProjection {
                n: ch.n,
                energies: ch.bound.iter().map(|s| s.energy).collect(),
                coefficients: ch
                    .bound
                    .iter()
                    .map(|s| {
                        s.vector
                            .iter()
                            .zip(f)
                            .map(|(phi, z)| z * *phi)
                            .sum::<Complex64>()
                            * dr
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(ProjectionTable {
        initial,
        time_ps: wp.time_ps,
        m: wp.channels().m(),
        channels,
    })
}

impl ProjectionTable {
    /// Σ |C|² over all bound states.
    pub fn norm_captured(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.coefficients.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// (ν, N, C) for every entry, channel by channel.
    pub fn entries(&self) -> impl Iterator<Item = (usize, u32, Complex64)> + '_ {
        self.channels.iter().flat_map(|c| {
            c.coefficients
                .iter()
                .enumerate()
                .map(move |(nu, z)| (nu, c.n, *z))
        })
    }

    pub fn coefficient(&self, nu: usize, n: u32) -> Option<Complex64> {
        self.channels
            .iter()
            .find(|c| c.n == n)
            .and_then(|c| c.coefficients.get(nu).copied())
    }

    /// Field-free evolution by `t_ps`: C → C e^{−iE_{ν,N}t}.
    pub fn evolve_free(&self, t_ps: f64) -> ProjectionTable {
        let t = units::ps_to_au(t_ps);
        let mut out = self.clone();
        out.time_ps += t_ps;
        for c in &mut out.channels {
            for (z, e) in c.coefficients.iter_mut().zip(&c.energies) {
                *z *= Complex64::from_polar(1.0, -e * t);
            }
        }
        out
    }

    /// 𝒱(ν) = Σ_N |C(ν, N)|².
    pub fn vib_distribution(&self, nu: usize) -> f64 {
        self.channels
            .iter()
            .filter_map(|c| c.coefficients.get(nu))
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// 𝒱(ν) for every band present in the table.
    pub fn vib_distributions(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (nu, _, z) in self.entries() {
            *out.entry(nu).or_insert(0.0) += z.norm_sqr();
        }
        out
    }

    /// 𝒩(N) = Σ_ν |C(ν, N)|² (zero for N outside the channel set).
    pub fn rot_distribution(&self, n: u32) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.n == n)
            .flat_map(|c| c.coefficients.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// 𝒩(N) for every N from 0 to the largest channel, odd N included as 0.
    pub fn rot_distribution_dense(&self) -> Vec<(u32, f64)> {
        let n_max = self.channels.iter().map(|c| c.n).max().unwrap_or(0);
        (0..=n_max).map(|n| (n, self.rot_distribution(n))).collect()
    }

    /// 𝒩(N) entries above [`SPARSE_THRESHOLD`].
    pub fn rot_distribution_sparse(&self) -> Vec<(u32, f64)> {
        self.channels
            .iter()
            .map(|c| {
                (
                    c.n,
                    c.coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>(),
                )
            })
            .filter(|(_, w)| *w > SPARSE_THRESHOLD)
            .collect()
    }

    /// ⟨𝒩⟩ = Σ N 𝒩(N) / Σ 𝒩(N).
    pub fn mean_rotation(&self) -> Result<f64> {
        let mut total = 0.0;
        let mut first = 0.0;
        for c in &self.channels {
            let w: f64 = c.coefficients.iter().map(|z| z.norm_sqr()).sum();
            total += w;
            first += f64::from(c.n) * w;
        }
        if !(total > 0.0) {
            return Err(Error::UndefinedMean(
                "projection table carries no bound population".into(),
            ));
        }
        Ok(first / total)
    }

    /// P^D = 1 − Σ_bound |C|², with rounding noise below zero clipped.
    pub fn dissociation_probability(&self) -> Result<f64> {
        let p = 1.0 - self.norm_captured();
        if p < -DISSOCIATION_CLIP {
            return Err(Error::Numerical(format!(
                "bound population exceeds one by {:.3e}",
                -p
            )));
        }
        Ok(p.max(0.0))
    }

    /// ⟨cos²θ⟩ rebuilt from the coefficients and the radial overlaps of
    /// adjacent channels. Agrees with the grid value when P^D ≈ 0.
    pub fn alignment(&self, library: &EigenLibrary) -> Result<f64> {
        if self.channels.len() != library.channel_states().len()
            || self
                .channels
                .iter()
                .zip(library.channel_states())
                .any(|(a, b)| a.n != b.n || a.coefficients.len() != b.bound.len())
        {
            return Err(Error::Shape(
                "projection table does not match the library".into(),
            ));
        }
        let overlaps = library.adjacent_overlaps();
        let m = self.m;
        let mut acc = 0.0;
        for (k, c) in self.channels.iter().enumerate() {
            let w: f64 = c.coefficients.iter().map(|z| z.norm_sqr()).sum();
            acc += cos2_coupling(c.n, c.n, m) * w;
            if let Some(next) = self.channels.get(k + 1) {
                let coupling = cos2_coupling(c.n, next.n, m);
                if coupling == 0.0 {
                    continue;
                }
                let o = &overlaps[k];
                let cols = next.coefficients.len();
                let mut cross = Complex64::new(0.0, 0.0);
                for (a, za) in c.coefficients.iter().enumerate() {
                    for (b, zb) in next.coefficients.iter().enumerate() {
                        cross += za.conj() * zb * o[a * cols + b];
                    }
                }
                acc += 2.0 * coupling * cross.re;
            }
        }
        Ok(acc)
    }

    /// Rows `t_ps,nu,N,re,im,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PROJECTION_HEADER);
        self.append_csv_rows(&mut out);
        out
    }

    pub fn append_csv_rows(&self, out: &mut String) {
        for (nu, n, z) in self.entries() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                format_sig(self.time_ps),
                nu,
                n,
                format_sig(z.re),
                format_sig(z.im),
                format_sig(z.norm_sqr())
            ));
        }
    }
}

pub const PROJECTION_HEADER: &str = "t_ps,nu,N,re,im,weight\n";
pub const DISTRIBUTION_HEADER: &str = "key,weight\n";
pub const SCALAR_HEADER: &str = "t_ps,norm,alignment,dissociation\n";

/// Rows `key,weight`.
pub fn distribution_csv<K: std::fmt::Display>(rows: impl IntoIterator<Item = (K, f64)>) -> String {
    let mut out = String::from(DISTRIBUTION_HEADER);
    for (k, w) in rows {
        out.push_str(&format!("{},{}\n", k, format_sig(w)));
    }
    out
}

/// One sample of the scalar observables of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarSample {
    pub time_ps: f64,
    pub norm: f64,
    pub alignment: f64,
    pub dissociation: f64,
}

/// Rows `t_ps,norm,alignment,dissociation`.
pub fn scalar_series_csv(rows: &[ScalarSample]) -> String {
    let mut out = String::from(SCALAR_HEADER);
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_sig(r.time_ps),
            format_sig(r.norm),
            format_sig(r.alignment),
            format_sig(r.dissociation)
        ));
    }
    out
}

/// ⟨cos²θ⟩ of a grid wavepacket.
pub fn alignment(wp: &Wavepacket) -> f64 {
    wp.alignment()
}
